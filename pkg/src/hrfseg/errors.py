"""Exception hierarchy; each class maps to one CLI exit code."""


class HrfError(Exception):
    exit_code = 1


class ConfigError(HrfError):
    exit_code = 2


class FormatError(HrfError):
    """Malformed file contents. ``offset`` is the byte position of the fault."""

    exit_code = 3

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ValidationError(HrfError):
    exit_code = 4
