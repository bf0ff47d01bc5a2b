"""
Slice-connection clustering.

Slice regions are linked across adjacent slices in one ascending pass.  Each
open cluster has a *front*, the region it acquired in the previous slice.
For the next slice the set ``R`` of regions connecting to that front decides
the cluster's fate:

* ``|R| = 0``: the cluster terminates.
* ``|R| = 1``: the cluster extends with that region.
* ``|R| >= 2``: the cluster splits; every child gets a copy of all parent
  voxels plus one region of ``R``, and the parent is retired.

Regions that connect to no open cluster seed new clusters.  A region reached
by several clusters is added to each of them and recorded in
``ClusterSet.shared_regions``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .slices import SliceRegion, pixel_keys
from .volume import AcquisitionMeta, voxels_to_world

ACTIVE = "active"
TERMINATED = "terminated"
RETIRED = "retired"


class SCCError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Cluster:
    """Voxels spanning consecutive slices, stored as one region per slice.

    ``parent``/``split_ordinal`` record lineage for clusters born from a
    split.  ``status`` is ``"active"`` if the cluster was still open when the
    last slice was scanned, ``"terminated"`` if it stopped earlier, and
    ``"retired"`` for split parents.
    """

    cluster_id: int
    regions: tuple[SliceRegion, ...]
    parent: int | None = None
    split_ordinal: int | None = None
    status: str = ACTIVE

    @property
    def slice_span(self) -> tuple[int, int]:
        return self.regions[0].slice_index, self.regions[-1].slice_index

    @property
    def span_length(self) -> int:
        a, b = self.slice_span
        return b - a + 1

    @property
    def front(self) -> SliceRegion:
        return self.regions[-1]

    @property
    def region_ids(self) -> list[tuple[int, int]]:
        return [r.region_id for r in self.regions]

    @property
    def voxel_count(self) -> int:
        return sum(r.size for r in self.regions)

    def voxels(self) -> np.ndarray:
        """``(N, 3)`` array of ``(z, x, y)`` ordered by slice, then x, then y."""
        return np.vstack([r.voxels() for r in self.regions])

    def voxel_set(self) -> frozenset[tuple[int, int, int]]:
        return frozenset(map(tuple, self.voxels().tolist()))

    def __repr__(self):
        lin = f", parent={self.parent}.{self.split_ordinal}" if self.parent is not None else ""
        return (f"Cluster(id={self.cluster_id}, span={self.slice_span}, "
                f"voxels={self.voxel_count}, status={self.status}{lin})")


@dataclass(frozen=True)
class ClusterSet:
    """Final clusters plus lineage and provenance.

    Attributes
    ----------
    clusters : tuple of Cluster
        Terminated and still-open clusters, ordered by id.
    retired : tuple of Cluster
        Split parents, kept for lineage only.
    provenance : dict
        ``region_id -> tuple of cluster ids`` (final clusters containing it).
    shared_regions : frozenset
        Region ids attached to more than one cluster in the same step, i.e.
        where several clusters converged on one region.
    slice_count : int
    connect_evaluations : int
        Number of :func:`connecting` calls made during the pass.
    """

    clusters: tuple[Cluster, ...]
    retired: tuple[Cluster, ...] = ()
    provenance: dict = field(default_factory=dict)
    shared_regions: frozenset = frozenset()
    slice_count: int = 0
    connect_evaluations: int = 0

    def __len__(self):
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    @property
    def ids(self) -> list[int]:
        return [c.cluster_id for c in self.clusters]

    def by_id(self, cluster_id: int) -> Cluster:
        for c in self.clusters + self.retired:
            if c.cluster_id == cluster_id:
                return c
        raise KeyError(cluster_id)

    def children_of(self, cluster_id: int) -> list[Cluster]:
        return [c for c in self.clusters + self.retired if c.parent == cluster_id]

    def subset(self, keep_ids) -> "ClusterSet":
        """Same set restricted to ``keep_ids``; order, ids and lineage are preserved."""
        keep = set(keep_ids)
        clusters = tuple(c for c in self.clusters if c.cluster_id in keep)
        prov = {}
        for rid, owners in self.provenance.items():
            kept = tuple(o for o in owners if o in keep)
            if kept:
                prov[rid] = kept
        return ClusterSet(clusters, self.retired, prov, self.shared_regions,
                          self.slice_count, self.connect_evaluations)


def _dilated_keys(region: SliceRegion, radius: int) -> np.ndarray:
    if radius == 0:
        return region.keys
    off = np.arange(-radius, radius + 1)
    ox, oy = np.meshgrid(off, off, indexing="ij")
    pts = (region.pixels[:, None, :] + np.stack([ox.ravel(), oy.ravel()], axis=1)[None]).reshape(-1, 2)
    pts = pts[(pts >= 0).all(axis=1)]
    return np.unique(pixel_keys(pts))


def connecting(a: SliceRegion, b: SliceRegion, dilation: int = 0) -> bool:
    """True iff regions in adjacent slices share an ``(x, y)`` pixel.

    With ``dilation > 0`` a pixel of ``a`` matches any pixel of ``b`` within
    that Chebyshev distance.
    """
    if abs(a.slice_index - b.slice_index) != 1:
        raise SCCError(
            f"connecting() needs adjacent slices, got {a.slice_index} and {b.slice_index}"
        )
    ka = _dilated_keys(a, dilation)
    return bool(np.isin(b.keys, ka, assume_unique=True).any())


def _bboxes(regions: Sequence[SliceRegion]) -> np.ndarray:
    if not regions:
        return np.zeros((0, 4), dtype=np.int64)
    return np.array([[r.pixels[:, 0].min(), r.pixels[:, 0].max(),
                      r.pixels[:, 1].min(), r.pixels[:, 1].max()] for r in regions])


class _Counter:
    def __init__(self):
        self.n = 0


def _region_links(prev: Sequence[SliceRegion], cur: Sequence[SliceRegion],
                  dilation: int, counter: _Counter) -> list[list[int]]:
    """For each region of ``prev``, the ordinals of ``cur`` regions connecting to it."""
    links = [[] for _ in prev]
    if not prev or not cur:
        return links
    bp, bc = _bboxes(prev), _bboxes(cur)
    r = dilation
    overlap = (
        (bp[:, None, 0] - r <= bc[None, :, 1]) & (bc[None, :, 0] <= bp[:, None, 1] + r)
        & (bp[:, None, 2] - r <= bc[None, :, 3]) & (bc[None, :, 2] <= bp[:, None, 3] + r)
    )
    for a, b in zip(*np.nonzero(overlap)):
        counter.n += 1
        if connecting(prev[a], cur[b], dilation):
            links[a].append(int(b))
    return links


def scc_cluster(regions: Sequence[Sequence[SliceRegion]], slice_count: int | None = None,
                dilation: int = 0) -> ClusterSet:
    """Cluster slice regions across slices in a single ascending pass.

    Parameters
    ----------
    regions : sequence of sequences of SliceRegion
        ``regions[i]`` holds the regions of slice ``i`` ordered by ordinal.
    slice_count : int, optional
        Number of slices; defaults to ``len(regions)``.
    dilation : int
        Pixel tolerance for :func:`connecting`.  0 means exact coordinates.

    Returns
    -------
    ClusterSet
    """
    if slice_count is None:
        slice_count = len(regions)
    if len(regions) != slice_count:
        raise SCCError(f"got regions for {len(regions)} slices, expected {slice_count}")
    if dilation < 0:
        raise SCCError("dilation must be >= 0")
    for i, regs in enumerate(regions):
        for k, r in enumerate(regs):
            if r.slice_index != i:
                raise SCCError(f"region {r.region_id} listed under slice {i}")
            if r.ordinal != k:
                raise SCCError(f"region {r.region_id} out of ordinal order in slice {i}")

    counter = _Counter()
    next_id = 1
    active: list[Cluster] = []
    finished: list[Cluster] = []
    retired: list[Cluster] = []
    shared = set()

    for i in range(slice_count):
        cur = list(regions[i])
        claimed = [0] * len(cur)
        survivors = []
        if i > 0 and active:
            links = _region_links(regions[i - 1], cur, dilation, counter)
            for c in active:
                hits = links[c.front.ordinal]
                if not hits:
                    finished.append(_with(c, status=TERMINATED))
                elif len(hits) == 1:
                    survivors.append(_with(c, regions=c.regions + (cur[hits[0]],)))
                else:
                    retired.append(_with(c, status=RETIRED))
                    for k, b in enumerate(hits):
                        survivors.append(Cluster(next_id, c.regions + (cur[b],), c.cluster_id, k))
                        next_id += 1
                for b in hits:
                    claimed[b] += 1
        for b, n in enumerate(claimed):
            if n > 1:
                shared.add(cur[b].region_id)
        for b, region in enumerate(cur):
            if claimed[b] == 0:
                survivors.append(Cluster(next_id, (region,)))
                next_id += 1
        active = sorted(survivors, key=lambda c: c.cluster_id)

    final = sorted(finished + active, key=lambda c: c.cluster_id)
    prov: dict[tuple[int, int], list[int]] = {}
    for c in final:
        for rid in c.region_ids:
            prov.setdefault(rid, []).append(c.cluster_id)
    return ClusterSet(
        clusters=tuple(final),
        retired=tuple(sorted(retired, key=lambda c: c.cluster_id)),
        provenance={k: tuple(v) for k, v in sorted(prov.items())},
        shared_regions=frozenset(shared),
        slice_count=slice_count,
        connect_evaluations=counter.n,
    )


def _with(c: Cluster, **changes) -> Cluster:
    fields = dict(cluster_id=c.cluster_id, regions=c.regions, parent=c.parent,
                  split_ordinal=c.split_ordinal, status=c.status)
    fields.update(changes)
    return Cluster(**fields)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class ClusterStats:
    cluster_id: int
    voxel_count: int
    slice_span: tuple[int, int]
    span_length: int
    bbox_min: tuple[int, int, int]          # (z, x, y)
    bbox_max: tuple[int, int, int]
    centroid_world: tuple[float, float, float]   # (x, y, z) metres
    footprint_area: dict                    # slice index -> pixel count

    @property
    def max_footprint_area(self) -> int:
        return max(self.footprint_area.values())


def cluster_stats(c: Cluster, meta: AcquisitionMeta) -> ClusterStats:
    """Exact voxel statistics of one cluster.

    Voxels shared with other clusters (split or merge duplication) are
    counted here as well; each cluster is summarised on its own.
    """
    vox = c.voxels()
    world = voxels_to_world(vox, meta)
    return ClusterStats(
        cluster_id=c.cluster_id,
        voxel_count=len(vox),
        slice_span=c.slice_span,
        span_length=c.span_length,
        bbox_min=tuple(int(v) for v in vox.min(axis=0)),
        bbox_max=tuple(int(v) for v in vox.max(axis=0)),
        centroid_world=tuple(float(v) for v in world.mean(axis=0)),
        footprint_area={r.slice_index: r.size for r in c.regions},
    )
