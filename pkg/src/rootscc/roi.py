"""
Selection of root clusters and reconstruction of the cleaned label volume.

Features that do not persist across slices are treated as noise: roots
extend along the slice axis, rocks and cavities mostly do not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scc import Cluster, ClusterSet, cluster_stats
from .volume import AcquisitionMeta, voxels_to_world


@dataclass(frozen=True)
class FilterCriteria:
    """Thresholds a cluster must meet to be kept.

    ``min_footprint_area`` applies to the cluster's largest per-slice
    footprint.  ``max_depth`` (m) bounds the world centroid depth.
    ``keep_top_n`` keeps only the n largest surviving clusters by voxel count
    (ties go to the lower id).
    """

    min_voxels: int = 10
    min_slice_span: int = 2
    min_footprint_area: int = 0
    max_depth: float | None = None
    keep_top_n: int | None = None

    def __post_init__(self):
        for name in ("min_voxels", "min_slice_span", "min_footprint_area"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.keep_top_n is not None and self.keep_top_n < 0:
            raise ValueError("keep_top_n must be >= 0")


def filter_clusters(cs: ClusterSet, criteria: FilterCriteria = FilterCriteria(),
                    meta: AcquisitionMeta | None = None) -> ClusterSet:
    """Keep exactly the clusters meeting every active criterion, in original order.

    ``meta`` is needed only for the depth criterion.
    """
    if meta is None:
        if criteria.max_depth is not None:
            raise ValueError("max_depth filtering needs acquisition metadata")
        meta = AcquisitionMeta()
    keep = []
    for c in cs.clusters:
        st = cluster_stats(c, meta)
        if st.voxel_count < criteria.min_voxels:
            continue
        if st.span_length < criteria.min_slice_span:
            continue
        if st.max_footprint_area < criteria.min_footprint_area:
            continue
        if criteria.max_depth is not None and st.centroid_world[1] > criteria.max_depth:
            continue
        keep.append(c)
    if criteria.keep_top_n is not None:
        ranked = sorted(keep, key=lambda c: (-c.voxel_count, c.cluster_id))
        top = {c.cluster_id for c in ranked[: criteria.keep_top_n]}
        keep = [c for c in keep if c.cluster_id in top]
    return cs.subset(c.cluster_id for c in keep)


@dataclass(frozen=True)
class LabeledVolume:
    """Integer labels per voxel, 0 for background.

    ``labels`` uses the volume array layout ``[slice, sample, trace]``;
    ``multi_owner`` lists ``(z, x, y)`` voxels claimed by more than one
    cluster, sorted.  Such voxels carry the lowest owning id.
    """

    labels: np.ndarray
    multi_owner: tuple[tuple[int, int, int], ...] = ()
    spacing: tuple[float, float, float] | None = None   # (dz m, dx m, dt ns)

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.labels.shape
        return nz, nx, ny

    def nonzero_voxels(self) -> np.ndarray:
        """``(N, 3)`` ``(z, x, y)`` of labelled voxels, lexicographically sorted."""
        z, y, x = np.nonzero(self.labels)
        v = np.stack([z, x, y], axis=1)
        return v[np.lexsort((v[:, 2], v[:, 1], v[:, 0]))]


def reconstruct_labeled_volume(cs: ClusterSet, dims: tuple[int, int, int],
                               meta: AcquisitionMeta | None = None) -> LabeledVolume:
    """Paint every cluster's voxels with its id into a ``(z, x, y)``-sized volume."""
    nz, nx, ny = dims
    big = np.iinfo(np.int64).max
    labels = np.full((nz, ny, nx), big, dtype=np.int64)
    owners = np.zeros((nz, ny, nx), dtype=np.int32)
    for c in cs.clusters:
        v = c.voxels()
        if len(v) and ((v < 0).any() or (v[:, 0] >= nz).any() or (v[:, 1] >= nx).any()
                       or (v[:, 2] >= ny).any()):
            raise IndexError(f"cluster {c.cluster_id} has voxels outside dims {dims}")
        z, x, y = v[:, 0], v[:, 1], v[:, 2]
        labels[z, y, x] = np.minimum(labels[z, y, x], c.cluster_id)
        owners[z, y, x] += 1
    labels[labels == big] = 0
    mz, my, mx = np.nonzero(owners > 1)
    multi = sorted(zip(mz.tolist(), mx.tolist(), my.tolist()))
    spacing = (meta.dz, meta.dx, meta.dt) if meta is not None else None
    return LabeledVolume(labels, tuple(multi), spacing)


def extension_trend(c: Cluster, meta: AcquisitionMeta) -> np.ndarray:
    """Per-slice footprint centroids of a cluster in world ``(x, y, z)``.

    One row per slice in the cluster's span, in slice order.
    """
    rows = []
    for r in c.regions:
        rows.append(voxels_to_world(r.voxels(), meta).mean(axis=0))
    return np.array(rows)
