"""Shared fixtures builders and independent oracles for the test suite."""

import numpy as np

from rootscc.slices import BinarySlice, SliceRegion, extract_slice_regions


def regions_of(mask3d):
    """Per-slice C3 regions of a ``[z, y, x]`` boolean volume."""
    return [extract_slice_regions(BinarySlice(m, i)) for i, m in enumerate(mask3d)]


def rect(mask, x0, x1, y0, y1):
    mask[y0:y1 + 1, x0:x1 + 1] = True


def topology_masks():
    """Three 4x10 slices encoding the two-cluster, split and late-seed topology.

    S1: r1 at columns 0-1, r2 at 5-6.
    S2: r1 at columns 0-1, r2 at 5-8 (overlaps both S3.r2 and S3.r3).
    S3: r1 at columns 2-3 rows 2-3 (touches nothing above), r2 at 5, r3 at 8.
    """
    m = np.zeros((3, 4, 10), dtype=bool)
    rect(m[0], 0, 1, 0, 1)
    rect(m[0], 5, 6, 0, 1)
    rect(m[1], 0, 1, 0, 1)
    rect(m[1], 5, 8, 0, 1)
    rect(m[2], 2, 3, 2, 3)
    rect(m[2], 5, 5, 0, 1)
    rect(m[2], 8, 8, 0, 1)
    return m


def flood_fill_2d(mask):
    """4-connected components of a ``[y, x]`` mask as sets of ``(x, y)``; plain BFS."""
    ny, nx = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for x in range(nx):
        for y in range(ny):
            if mask[y, x] and not seen[y, x]:
                comp, stack = set(), [(y, x)]
                seen[y, x] = True
                while stack:
                    cy, cx = stack.pop()
                    comp.add((cx, cy))
                    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        yy, xx = cy + dy, cx + dx
                        if 0 <= yy < ny and 0 <= xx < nx and mask[yy, xx] and not seen[yy, xx]:
                            seen[yy, xx] = True
                            stack.append((yy, xx))
                comps.append(comp)
    return comps


def random_sparse_mask(rng, shape, density=0.08, blobs=6):
    """Random ``[y, x]`` mask: salt noise plus a few rectangles."""
    ny, nx = shape
    m = rng.random(shape) < density
    for _ in range(blobs):
        x0, y0 = rng.integers(0, nx), rng.integers(0, ny)
        m[y0:y0 + rng.integers(1, 6), x0:x0 + rng.integers(1, 4)] = True
    return m


def random_tube_volume(rng, nz, nx, ny, tubes=6, noise=0.01):
    """``[z, y, x]`` volume of drifting rectangular tubes plus sparse noise."""
    m = rng.random((nz, ny, nx)) < noise
    for _ in range(tubes):
        z0 = int(rng.integers(0, nz))
        z1 = int(rng.integers(z0, nz))
        x, y = int(rng.integers(0, nx - 3)), int(rng.integers(0, ny - 5))
        w, h = int(rng.integers(1, 4)), int(rng.integers(2, 6))
        for z in range(z0, z1 + 1):
            m[z, y:y + h, x:x + w] = True
            x = int(np.clip(x + rng.integers(-1, 2), 0, nx - 3))
            y = int(np.clip(y + rng.integers(-1, 2), 0, ny - 5))
    return m


def _pair_links(prev, cur):
    """Brute-force region links between two slices via shared (x, y) pixels."""
    links = []
    for a in prev:
        sa = a.pixel_set()
        links.append([b.ordinal for b in cur if sa & b.pixel_set()])
    return links


def remove_splits_and_merges(mask3d):
    """Delete regions until every region touches at most one region per adjacent slice.

    Slices are cleaned in ascending order; removing a region from slice
    ``i + 1`` can only remove links, so earlier pairs stay clean.
    """
    m = mask3d.copy()
    for i in range(len(m) - 1):
        while True:
            prev = extract_slice_regions(BinarySlice(m[i], i))
            cur = extract_slice_regions(BinarySlice(m[i + 1], i + 1))
            links = _pair_links(prev, cur)
            into = [0] * len(cur)
            drop = set()
            for hits in links:
                drop.update(hits[1:])
                for b in hits:
                    into[b] += 1
            drop.update(b for b, n in enumerate(into) if n > 1)
            if not drop:
                break
            for b in drop:
                for x, y in cur[b].pixels:
                    m[i + 1, y, x] = False
    return m


def has_split_or_merge(regions):
    for i in range(len(regions) - 1):
        links = _pair_links(regions[i], regions[i + 1])
        if any(len(h) > 1 for h in links):
            return True
        into = [0] * len(regions[i + 1])
        for hits in links:
            for b in hits:
                into[b] += 1
        if any(n > 1 for n in into):
            return True
    return False


def split_volume(rng, nz=12, nx=32, ny=48):
    """Random volume with at least one engineered split.

    A tube runs from slice 0 to ``k``; slice ``k + 1`` holds two disjoint
    regions that both overlap the tube's last footprint.
    """
    m = random_tube_volume(rng, nz, nx, ny, tubes=3, noise=0.005)
    k = int(rng.integers(1, nz - 2))
    x, y = int(rng.integers(2, nx - 8)), int(rng.integers(2, ny - 8))
    m[: k + 1, y:y + 3, x:x + 5] = True
    m[k + 1, y - 2:y + 5, x - 2:x + 7] = False
    m[k + 1, y:y + 3, x] = True
    m[k + 1, y:y + 3, x + 4] = True
    return m


def make_region(slice_index, ordinal, pixels):
    return SliceRegion(slice_index, ordinal, np.asarray(pixels, dtype=np.int64))
