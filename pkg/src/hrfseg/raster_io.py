"""Reading and writing PGM rasters, LBL label maps and UCM images.

Rasters are numpy arrays of shape ``(height, width)``. Images keep their raw
integer intensities (as float64), priors are rescaled to ``[0, 1]`` and label
maps are int64 with dense labels ``0..R-1``.
"""

from __future__ import annotations

import re

import numpy as np
from skimage.measure import label as connected_components

from hrfseg.errors import FormatError, ValidationError

ALLOWED_MAXVALS = (255, 65535)

_WS = b" \t\r\n\x0b\x0c"


class _HeaderReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _skip_space_and_comments(self):
        data = self.data
        while self.pos < len(data):
            c = data[self.pos : self.pos + 1]
            if c in _WS:
                self.pos += 1
            elif c == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            else:
                break

    def token(self, what: str) -> bytes:
        self._skip_space_and_comments()
        start = self.pos
        data = self.data
        while self.pos < len(data) and data[self.pos : self.pos + 1] not in _WS:
            self.pos += 1
        if start == self.pos:
            raise FormatError(f"missing {what}", start)
        return data[start : self.pos]

    def integer(self, what: str) -> int:
        start = self.pos
        tok = self.token(what)
        if not tok.isdigit():
            raise FormatError(f"bad {what} {tok!r}", start)
        return int(tok)


def _parse_pgm(data: bytes) -> np.ndarray:
    reader = _HeaderReader(data)
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"unsupported magic {magic!r}", 0)
    reader.pos = 2
    width = reader.integer("width")
    height = reader.integer("height")
    maxval_offset = reader.pos
    maxval = reader.integer("maxval")
    if width < 1 or height < 1:
        raise FormatError(f"invalid dimensions {width}x{height}", maxval_offset)
    if maxval not in ALLOWED_MAXVALS:
        raise FormatError(f"maxval {maxval} not in {ALLOWED_MAXVALS}", maxval_offset)
    count = width * height

    if magic == b"P5":
        # exactly one whitespace byte separates maxval from the payload
        if reader.pos >= len(data) or data[reader.pos : reader.pos + 1] not in _WS:
            raise FormatError("missing payload separator", reader.pos)
        start = reader.pos + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(data) - start < need:
            raise FormatError(
                f"truncated payload: need {need} bytes, have {len(data) - start}",
                len(data),
            )
        values = np.frombuffer(data, dtype=dtype, count=count, offset=start)
        values = values.astype(np.int64)
    else:
        values = np.empty(count, dtype=np.int64)
        for i in range(count):
            try:
                values[i] = reader.integer("pixel value")
            except FormatError as exc:
                if exc.offset is not None and exc.offset >= len(data):
                    raise FormatError(
                        f"truncated payload: got {i} of {count} values", len(data)
                    ) from None
                raise
    if values.max() > maxval:
        raise FormatError(f"pixel value {values.max()} exceeds maxval {maxval}")
    return values.reshape(height, width), maxval


def load_raster(path, kind: str = "image") -> np.ndarray:
    """Load a P2/P5 PGM file.

    ``kind="image"`` keeps intensities as-is, ``kind="prior"`` divides by
    maxval so every value lies in ``[0, 1]``.
    """
    if kind not in ("image", "prior"):
        raise ValueError(f"unknown raster kind {kind!r}")
    with open(path, "rb") as fh:
        data = fh.read()
    values, maxval = _parse_pgm(data)
    values = values.astype(np.float64)
    if kind == "prior":
        values /= maxval
    return values


def save_raster(raster, path, maxval: int = 255, kind: str = "image") -> None:
    """Write a raster as binary PGM. Priors are scaled by ``maxval`` and rounded."""
    if maxval not in ALLOWED_MAXVALS:
        raise ValueError(f"maxval must be one of {ALLOWED_MAXVALS}")
    arr = np.asarray(raster, dtype=np.float64)
    if kind == "prior":
        arr = np.floor(arr * maxval + 0.5)
    if arr.min() < 0 or arr.max() > maxval:
        raise ValueError(f"raster values outside [0, {maxval}]")
    dtype = ">u2" if maxval > 255 else "u1"
    _write_pgm(path, arr.astype(dtype), maxval)


def _write_pgm(path, payload: np.ndarray, maxval: int) -> None:
    height, width = payload.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n{maxval}\n".encode("ascii"))
        fh.write(payload.tobytes())


def save_ucm(ucm, path) -> None:
    """Save a saliency grid as 16-bit P5, storing ``floor(s * 65535 + 0.5)``."""
    arr = np.asarray(ucm, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("UCM saliencies must lie in [0, 1]")
    _write_pgm(path, np.floor(arr * 65535.0 + 0.5).astype(">u2"), 65535)


def load_ucm(path) -> np.ndarray:
    return load_raster(path, kind="prior")


def dense_relabel(labels) -> np.ndarray:
    """Map arbitrary labels to ``0..R-1`` in order of first raster occurrence."""
    flat = np.asarray(labels).ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse].reshape(np.shape(labels))


def check_connected(labels: np.ndarray) -> None:
    """Raise ValidationError unless every label is a single 4-connected set."""
    comps = connected_components(labels + 1, background=0, connectivity=1)
    n_labels = int(labels.max()) + 1
    if int(comps.max()) == n_labels:
        return
    # label whose pixels span more than one component
    pairs = np.unique(np.stack([labels.ravel(), comps.ravel()]), axis=1)
    split = np.bincount(pairs[0], minlength=n_labels)
    bad = int(np.flatnonzero(split > 1)[0])
    raise ValidationError(f"label {bad} is not 4-connected")


_LBL_HEADER = re.compile(rb"LBL (\d+) (\d+)\n")


def load_label_map(path) -> np.ndarray:
    """Read an LBL file and return dense, validated labels.

    Connectivity errors name the label as it appears in the file.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    m = _LBL_HEADER.match(data)
    if m is None:
        raise FormatError("bad LBL header", 0)
    width, height = int(m.group(1)), int(m.group(2))
    if width < 1 or height < 1:
        raise FormatError(f"invalid dimensions {width}x{height}", 4)
    start = m.end()
    need = 4 * width * height
    if len(data) - start < need:
        raise FormatError(
            f"truncated payload: need {need} bytes, have {len(data) - start}",
            len(data),
        )
    raw = np.frombuffer(data, dtype="<u4", count=width * height, offset=start)
    raw = raw.astype(np.int64).reshape(height, width)
    labels = dense_relabel(raw)
    try:
        check_connected(labels)
    except ValidationError:
        comps = connected_components(labels + 1, background=0, connectivity=1)
        for lab in np.unique(raw):
            if np.unique(comps[raw == lab]).size > 1:
                raise ValidationError(f"label {lab} is not 4-connected") from None
        raise
    return labels


def save_label_map(labels, path) -> None:
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ValueError("label map must be 2-D")
    if arr.min() < 0 or arr.max() > np.iinfo(np.uint32).max:
        raise ValueError("labels must fit in uint32")
    height, width = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"LBL {width} {height}\n".encode("ascii"))
        fh.write(arr.astype("<u4").tobytes())
