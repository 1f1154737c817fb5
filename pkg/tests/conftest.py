import numpy as np
import pytest
from skimage import data, transform

from hrfseg.graph_core import Rag, minimum_spanning_tree

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def natural_image(name="camera", size=(256, 256)):
    img = getattr(data, name)()
    if size is not None:
        img = transform.resize(img, size, anti_aliasing=True, preserve_range=True)
    return np.round(img).astype(np.float64)


@pytest.fixture(scope="session")
def camera():
    return natural_image()


def random_tree(rng, n, distinct=True):
    """Random labelled tree; weights distinct unless ``distinct`` is False."""
    edges = []
    weights = rng.permutation(n - 1).astype(float) if distinct else rng.integers(0, 3, n - 1)
    for i in range(1, n):
        edges.append((int(rng.integers(0, i)), i, float(weights[i - 1])))
    return minimum_spanning_tree(Rag.from_edges(n, edges))


def tree_edges(tree):
    return list(zip(tree.u.tolist(), tree.v.tolist(), tree.weight.tolist()))
