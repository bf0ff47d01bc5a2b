"""
Text formats: slice matrices, metadata, labels, point clouds, clusters.

Every output file starts with a one-line header ``#rootscc-<kind> v<N> ...``.
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path

import numpy as np

from .errors import DataError
from .roi import LabeledVolume
from .scc import Cluster, ClusterSet
from .slices import SliceRegion
from .volume import AcquisitionMeta, BScan, CScanVolume, VolumeError, build_volume, voxels_to_world

FORMAT_VERSION = 1
META_FILENAME = "meta.json"
SLICE_PATTERN = re.compile(r"^slice_(\d+)(?:\.csv|\.txt)?$")

# metadata file key -> AcquisitionMeta field
META_KEYS = {
    "dt_ns": "dt",
    "dx_m": "dx",
    "dz_m": "dz",
    "velocity_m_per_ns": "velocity",
    "samples": "samples_per_trace",
    "traces": "traces_per_slice",
    "slices": "slice_count",
}


def meta_to_dict(meta: AcquisitionMeta) -> dict:
    return {key: getattr(meta, attr) for key, attr in META_KEYS.items()}


def meta_from_dict(d: dict, source: str = "metadata") -> AcquisitionMeta:
    unknown = set(d) - set(META_KEYS)
    if unknown:
        raise DataError(f"{source}: unknown metadata keys {sorted(unknown)}")
    missing = set(META_KEYS) - set(d)
    if missing:
        raise DataError(f"{source}: missing metadata keys {sorted(missing)}")
    try:
        return AcquisitionMeta(**{META_KEYS[k]: v for k, v in d.items()})
    except (VolumeError, TypeError) as exc:
        raise DataError(f"{source}: {exc}") from exc


def read_meta(path) -> AcquisitionMeta:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise DataError(f"metadata file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    return meta_from_dict(d, str(path))


def write_meta(meta: AcquisitionMeta, path) -> None:
    Path(path).write_text(json.dumps(meta_to_dict(meta), indent=2) + "\n")


# ---------------------------------------------------------------------------
# slice matrices


def read_matrix(path) -> np.ndarray:
    """Parse a comma-separated numeric matrix, naming file and row on failure."""
    path = Path(path)
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DataError(
                    f"{path}: ragged row {lineno} has {len(fields)} values, expected {width}"
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise DataError(f"{path}: unparseable number in row {lineno}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def write_matrix(a: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(a), fmt="%.17g", delimiter=",")


def ingest_directory(path, meta: AcquisitionMeta | None = None) -> CScanVolume:
    """Load ``slice_NNN.csv`` files plus ``meta.json`` from a directory.

    ``meta`` overrides the metadata file when given.  Slices are ordered by
    ordinal, which must run contiguously from 0.
    """
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"input directory not found: {path}")
    if meta is None:
        meta_path = path / META_FILENAME
        if not meta_path.exists():
            raise DataError(f"missing metadata file: expected {meta_path}")
        meta = read_meta(meta_path)

    found: dict[int, Path] = {}
    for entry in sorted(os.listdir(path)):
        m = SLICE_PATTERN.match(entry)
        if not m:
            continue
        ordinal = int(m.group(1))
        if ordinal in found:
            raise DataError(f"duplicate slice ordinal {ordinal}: {found[ordinal].name} and {entry}")
        found[ordinal] = path / entry
    if not found:
        raise DataError(f"{path}: no slice_NNN files found")
    expected = list(range(len(found)))
    if sorted(found) != expected:
        missing = sorted(set(range(max(found) + 1)) - set(found))
        raise DataError(f"{path}: missing slice ordinals {missing}")

    slices = []
    for i in expected:
        a = read_matrix(found[i])
        if a.shape != (meta.samples_per_trace, meta.traces_per_slice):
            raise DataError(
                f"{found[i]}: shape {a.shape} (rows=samples, cols=traces) does not match "
                f"metadata ({meta.samples_per_trace}, {meta.traces_per_slice})"
            )
        slices.append(BScan(a, i))
    try:
        return build_volume(slices, meta)
    except VolumeError as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_volume_directory(volume: CScanVolume, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(volume) - 1)))
    for s in volume.slices:
        write_matrix(s.amplitude, path / f"slice_{s.slice_index:0{width}d}.csv")
    write_meta(volume.meta, path / META_FILENAME)


# ---------------------------------------------------------------------------
# headers


def _header(kind: str, **fields) -> str:
    parts = [f"#rootscc-{kind}", f"v{FORMAT_VERSION}"]
    parts += [f"{k}={v}" for k, v in fields.items()]
    return " ".join(parts)


def _parse_header(line: str, kind: str, path) -> dict:
    parts = line.strip().split()
    if len(parts) < 2 or parts[0] != f"#rootscc-{kind}":
        raise DataError(f"{path}: not a rootscc {kind} file")
    if parts[1] != f"v{FORMAT_VERSION}":
        raise DataError(f"{path}: unsupported format version {parts[1]}")
    out = {}
    for p in parts[2:]:
        k, _, v = p.partition("=")
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# labels


def format_labels(lv: LabeledVolume) -> str:
    nz, nx, ny = lv.dims
    dz, dx, dt = lv.spacing if lv.spacing is not None else ("none",) * 3
    lines = [_header("labels", nz=nz, nx=nx, ny=ny, dz_m=dz, dx_m=dx, dt_ns=dt,
                     multi_owner=len(lv.multi_owner))]
    for z, x, y in lv.nonzero_voxels().tolist():
        lines.append(f"{z},{x},{y},{lv.labels[z, y, x]}")
    return "\n".join(lines) + "\n"


def format_multi_owner(lv: LabeledVolume) -> str:
    lines = [_header("multi-owner", count=len(lv.multi_owner))]
    lines += [f"{z},{x},{y}" for z, x, y in lv.multi_owner]
    return "\n".join(lines) + "\n"


def multi_owner_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".multi" + path.suffix)


def export_labels(lv: LabeledVolume, path) -> None:
    """Write the sparse label file and its multi-owner sidecar (``<stem>.multi<suffix>``)."""
    try:
        Path(path).write_text(format_labels(lv))
        multi_owner_path(path).write_text(format_multi_owner(lv))
    except OSError as exc:
        raise DataError(f"cannot write labels to {path}: {exc}") from exc


def read_labels(path) -> LabeledVolume:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    h = _parse_header(lines[0], "labels", path)
    nz, nx, ny = int(h["nz"]), int(h["nx"]), int(h["ny"])
    labels = np.zeros((nz, ny, nx), dtype=np.int64)
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            z, x, y, lab = (int(v) for v in line.split(","))
        except ValueError:
            raise DataError(f"{path}: bad data line {lineno}") from None
        labels[z, y, x] = lab
    spacing = None
    if h.get("dz_m", "none") != "none":
        spacing = (float(h["dz_m"]), float(h["dx_m"]), float(h["dt_ns"]))
    multi = ()
    side = multi_owner_path(path)
    if side.exists():
        mlines = side.read_text().splitlines()
        _parse_header(mlines[0], "multi-owner", side)
        multi = tuple(tuple(int(v) for v in ln.split(",")) for ln in mlines[1:])
    return LabeledVolume(labels, multi, spacing)


# ---------------------------------------------------------------------------
# point cloud


def format_point_cloud(cs: ClusterSet, meta: AcquisitionMeta) -> str:
    lines = [_header("points", columns="x_m,y_m,z_m,cluster_id", clusters=len(cs))]
    for c in cs.clusters:
        for x, y, z in voxels_to_world(c.voxels(), meta):
            lines.append(f"{x:.6f},{y:.6f},{z:.6f},{c.cluster_id}")
    return "\n".join(lines) + "\n"


def export_point_cloud(cs: ClusterSet, meta: AcquisitionMeta, path) -> None:
    """Write one ``x_m,y_m,z_m,cluster_id`` line per cluster voxel (micrometre precision)."""
    try:
        Path(path).write_text(format_point_cloud(cs, meta))
    except OSError as exc:
        raise DataError(f"cannot write point cloud to {path}: {exc}") from exc


def read_point_cloud(path) -> np.ndarray:
    """Parse a point cloud into an ``(N, 4)`` float array."""
    path = Path(path)
    lines = path.read_text().splitlines()
    _parse_header(lines[0], "points", path)
    if len(lines) == 1:
        return np.zeros((0, 4))
    return np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])


# ---------------------------------------------------------------------------
# clusters (interchange between CLI stages)


def clusters_to_dict(cs: ClusterSet, meta: AcquisitionMeta) -> dict:
    def region(r: SliceRegion):
        return {"slice": r.slice_index, "ordinal": r.ordinal, "pixels": r.pixels.tolist()}

    def cluster(c: Cluster):
        return {
            "id": c.cluster_id,
            "status": c.status,
            "parent": c.parent,
            "split_ordinal": c.split_ordinal,
            "regions": [region(r) for r in c.regions],
        }

    return {
        "format": "rootscc-clusters",
        "version": FORMAT_VERSION,
        "meta": meta_to_dict(meta),
        "slice_count": cs.slice_count,
        "connect_evaluations": cs.connect_evaluations,
        "shared_regions": sorted(list(r) for r in cs.shared_regions),
        "clusters": [cluster(c) for c in cs.clusters],
        "retired": [cluster(c) for c in cs.retired],
    }


def clusters_from_dict(d: dict, source: str = "clusters") -> tuple[ClusterSet, AcquisitionMeta]:
    if d.get("format") != "rootscc-clusters" or d.get("version") != FORMAT_VERSION:
        raise DataError(f"{source}: not a rootscc clusters v{FORMAT_VERSION} document")
    meta = meta_from_dict(d["meta"], source)
    cache: dict[tuple[int, int], SliceRegion] = {}

    def region(r):
        key = (r["slice"], r["ordinal"])
        if key not in cache:
            cache[key] = SliceRegion(r["slice"], r["ordinal"], np.array(r["pixels"], dtype=np.int64))
        return cache[key]

    def cluster(c):
        return Cluster(c["id"], tuple(region(r) for r in c["regions"]), c["parent"],
                       c["split_ordinal"], c["status"])

    clusters = tuple(cluster(c) for c in d["clusters"])
    prov: dict = {}
    for c in clusters:
        for rid in c.region_ids:
            prov.setdefault(rid, []).append(c.cluster_id)
    cs = ClusterSet(
        clusters=clusters,
        retired=tuple(cluster(c) for c in d["retired"]),
        provenance={k: tuple(v) for k, v in sorted(prov.items())},
        shared_regions=frozenset(tuple(r) for r in d["shared_regions"]),
        slice_count=d["slice_count"],
        connect_evaluations=d["connect_evaluations"],
    )
    return cs, meta


def format_clusters(cs: ClusterSet, meta: AcquisitionMeta) -> str:
    return json.dumps(clusters_to_dict(cs, meta), separators=(",", ":")) + "\n"


def write_clusters(cs: ClusterSet, meta: AcquisitionMeta, path) -> None:
    Path(path).write_text(format_clusters(cs, meta))


def read_clusters(path) -> tuple[ClusterSet, AcquisitionMeta]:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise DataError(f"clusters file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    return clusters_from_dict(d, str(path))
