"""
Binarization of migrated slices and extraction of slice regions.

Regions are found by column-connection clustering: every column is split into
maximal vertical runs of foreground pixels, and runs in neighbouring columns
whose row ranges overlap are joined.  The result is the 4-connected component
labelling of the mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .volume import BScan


class BinarizeError(ValueError):
    pass


@dataclass(frozen=True)
class BinarizePolicy:
    """Threshold rule for :func:`binarize`.

    ``kind="fraction"`` keeps ``|a| > value * max|a|`` (``value`` in [0, 1));
    ``kind="percentile"`` keeps ``|a| > percentile(|a|, value)`` (``value`` in (0, 100)).
    """

    kind: str = "fraction"
    value: float = 0.5

    def __post_init__(self):
        if self.kind == "fraction":
            if not 0.0 <= self.value < 1.0:
                raise BinarizeError(f"fraction must lie in [0, 1), got {self.value!r}")
        elif self.kind == "percentile":
            if not 0.0 < self.value < 100.0:
                raise BinarizeError(f"percentile must lie in (0, 100), got {self.value!r}")
        else:
            raise BinarizeError(f"unknown binarize policy {self.kind!r}")


@dataclass(frozen=True)
class BinarySlice:
    mask: np.ndarray
    slice_index: int = 0

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        if m.ndim != 2:
            raise BinarizeError(f"mask must be 2D, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)


def binarize(slice: BScan, policy: BinarizePolicy = BinarizePolicy()) -> BinarySlice:
    """Threshold ``|amplitude|`` of one slice; thresholds are per slice."""
    mag = np.abs(slice.amplitude)
    if policy.kind == "fraction":
        thr = policy.value * mag.max()
    else:
        thr = np.percentile(mag, policy.value)
    return BinarySlice(mag > thr, slice.slice_index)


@dataclass(frozen=True, eq=False)
class SliceRegion:
    """One connected foreground feature in one slice.

    ``pixels`` is an ``(N, 2)`` integer array of ``(x, y)`` = (trace, sample),
    sorted by ``x`` then ``y``.
    """

    slice_index: int
    ordinal: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        if len(p) == 0:
            raise ValueError("a slice region needs at least one pixel")
        p = p[np.lexsort((p[:, 1], p[:, 0]))]
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def region_id(self) -> tuple[int, int]:
        return self.slice_index, self.ordinal

    @property
    def size(self) -> int:
        return len(self.pixels)

    @cached_property
    def keys(self) -> np.ndarray:
        """Sorted int64 encoding of the ``(x, y)`` pixels, for fast set intersection."""
        return np.sort(pixel_keys(self.pixels))

    @cached_property
    def footprint(self) -> dict[int, tuple[int, int]]:
        """Per column ``x``: ``(min y, max y)``."""
        out = {}
        for x, y in self.pixels:
            lo, hi = out.get(int(x), (int(y), int(y)))
            out[int(x)] = (min(lo, int(y)), max(hi, int(y)))
        return out

    def pixel_set(self) -> set[tuple[int, int]]:
        return {(int(x), int(y)) for x, y in self.pixels}

    def voxels(self) -> np.ndarray:
        """``(N, 3)`` array of ``(z, x, y)``."""
        z = np.full((len(self.pixels), 1), self.slice_index, dtype=np.int64)
        return np.hstack([z, self.pixels])

    def __repr__(self):
        return f"SliceRegion(slice={self.slice_index}, ordinal={self.ordinal}, size={self.size})"


def pixel_keys(pixels: np.ndarray) -> np.ndarray:
    p = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    return (p[:, 0] << 32) | p[:, 1]


def column_runs(column: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True in a 1D boolean array, as inclusive ``(start, stop)``."""
    c = np.concatenate(([False], np.asarray(column, dtype=bool), [False]))
    edges = np.flatnonzero(c[1:] != c[:-1])
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def extract_slice_regions(mask: BinarySlice) -> list[SliceRegion]:
    """Column-connection clustering of a binary slice.

    Regions are ordered by their first ``(column, row)`` occurrence and
    numbered 0, 1, ... in that order.
    """
    m = mask.mask
    ny, nx = m.shape
    runs = []          # (x, y0, y1)
    parent = []

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            # keep the earlier run as root so roots follow scan order
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb

    prev = []          # run indices in the previous column
    for x in range(nx):
        cur = []
        for y0, y1 in column_runs(m[:, x]):
            idx = len(runs)
            runs.append((x, y0, y1))
            parent.append(idx)
            cur.append(idx)
        # both lists are sorted by y0, so a merge-style sweep finds overlaps
        i = j = 0
        while i < len(prev) and j < len(cur):
            _, a0, a1 = runs[prev[i]]
            _, b0, b1 = runs[cur[j]]
            if a0 <= b1 and b0 <= a1:
                union(prev[i], cur[j])
            if a1 < b1:
                i += 1
            else:
                j += 1
        prev = cur

    groups: dict[int, list[int]] = {}
    for idx in range(len(runs)):
        groups.setdefault(find(idx), []).append(idx)

    regions = []
    for ordinal, root in enumerate(sorted(groups)):
        pix = [(x, y) for r in groups[root] for x, y0, y1 in [runs[r]] for y in range(y0, y1 + 1)]
        regions.append(SliceRegion(mask.slice_index, ordinal, np.array(pix, dtype=np.int64)))
    return regions
