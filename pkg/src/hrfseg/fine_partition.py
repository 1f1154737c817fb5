"""Fine partition of an image and per-region prior statistics."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage
from skimage.measure import label as connected_components

from hrfseg.errors import ValidationError
from hrfseg.raster_io import dense_relabel


def morphological_gradient(image) -> np.ndarray:
    """3x3 dilation minus 3x3 erosion, borders replicated."""
    img = np.asarray(image, dtype=np.float64)
    dil = ndimage.grey_dilation(img, size=(3, 3), mode="nearest")
    ero = ndimage.grey_erosion(img, size=(3, 3), mode="nearest")
    return dil - ero


def regional_minima(gradient) -> np.ndarray:
    """Label each regional-minimum plateau 1..M (raster order); 0 elsewhere.

    A plateau is a 4-connected set of equal altitude; it is a minimum when no
    pixel of it has a strictly lower 4-neighbour.
    """
    g = np.asarray(gradient, dtype=np.float64)
    _, levels = np.unique(g, return_inverse=True)
    levels = levels.reshape(g.shape) + 1
    plateaus = connected_components(levels, background=0, connectivity=1)

    lower = np.zeros(g.shape, dtype=bool)
    lower[1:, :] |= g[:-1, :] < g[1:, :]
    lower[:-1, :] |= g[1:, :] < g[:-1, :]
    lower[:, 1:] |= g[:, :-1] < g[:, 1:]
    lower[:, :-1] |= g[:, 1:] < g[:, :-1]

    not_min = np.zeros(plateaus.max() + 1, dtype=bool)
    not_min[plateaus[lower]] = True
    is_min = ~not_min[plateaus]
    out = np.zeros(g.shape, dtype=np.int64)
    out[is_min] = dense_relabel(plateaus[is_min]) + 1
    return out


def watershed(gradient) -> np.ndarray:
    """Boundaryless flooding watershed seeded at every regional minimum.

    Pixels are flooded from a priority queue ordered by (altitude, insertion
    order); a newly reached pixel takes the label of the pixel whose dequeue
    reached it. Returns dense labels 0..R-1, one per regional minimum.
    """
    g = np.asarray(gradient, dtype=np.float64)
    height, width = g.shape
    seeds = regional_minima(g)
    alt = g.ravel().tolist()
    lab = (seeds.ravel() - 1).tolist()
    heap = []
    counter = 0
    for p in np.flatnonzero(seeds.ravel()).tolist():
        heap.append((alt[p], counter, p))
        counter += 1
    heapq.heapify(heap)

    pop, push = heapq.heappop, heapq.heappush
    while heap:
        level, _, p = pop(heap)
        row, col = divmod(p, width)
        lp = lab[p]
        for q, ok in (
            (p - width, row > 0),
            (p - 1, col > 0),
            (p + 1, col < width - 1),
            (p + width, row < height - 1),
        ):
            if ok and lab[q] < 0:
                lab[q] = lp
                a = alt[q]
                push(heap, (a if a > level else level, counter, q))
                counter += 1
    return np.array(lab, dtype=np.int64).reshape(height, width)


@dataclass(frozen=True)
class RegionPriorMeans:
    """Per-region prior statistics.

    ``prior_mass`` holds the exact pixel sums as Fractions; ``prior_sum`` and
    ``prior_sq`` are their floating-point counterparts (sum and sum of squares)
    used for component moments.
    """

    mean_prior: np.ndarray
    pixel_count: np.ndarray
    prior_mass: tuple
    prior_sum: np.ndarray
    prior_sq: np.ndarray

    @property
    def region_count(self) -> int:
        return int(self.pixel_count.size)


def exact_region_sums(labels, values, n_regions: int) -> list:
    """Exact per-region sums of float64 values, as Fractions."""
    flat = np.asarray(values, dtype=np.float64).ravel()
    lab = np.asarray(labels).ravel()
    mant, exp = np.frexp(flat)
    ints = (mant * 2.0**53).astype(np.int64)  # value == ints * 2**(exp - 53)
    shifts = exp.astype(np.int64) - 53
    nonzero = ints != 0
    base = int(shifts[nonzero].min()) if nonzero.any() else 0

    totals = [0] * n_regions
    lo_mask = (1 << 26) - 1
    for s in np.unique(shifts[nonzero]).tolist():
        sel = nonzero & (shifts == s)
        # split mantissas so int64 accumulators cannot overflow
        hi = np.zeros(n_regions, dtype=np.int64)
        lo = np.zeros(n_regions, dtype=np.int64)
        np.add.at(hi, lab[sel], ints[sel] >> 26)
        np.add.at(lo, lab[sel], ints[sel] & lo_mask)
        scale = s - base
        for r in np.flatnonzero(hi | lo).tolist():
            totals[r] += ((int(hi[r]) << 26) + int(lo[r])) << scale
    if base >= 0:
        return [Fraction(t << base) for t in totals]
    denom = 1 << -base
    return [Fraction(t, denom) for t in totals]


def region_prior_means(labels, prior) -> RegionPriorMeans:
    labels = np.asarray(labels)
    prior = np.asarray(prior, dtype=np.float64)
    if labels.shape != prior.shape:
        raise ValidationError(
            f"label map {labels.shape} and prior {prior.shape} differ in size"
        )
    n = int(labels.max()) + 1
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n)
    mass = tuple(exact_region_sums(labels, prior, n))
    means = np.array([float(m / int(c)) for m, c in zip(mass, counts)])
    sums = np.bincount(flat, weights=prior.ravel(), minlength=n)
    sq = np.bincount(flat, weights=prior.ravel() ** 2, minlength=n)
    return RegionPriorMeans(means, counts, mass, sums, sq)
