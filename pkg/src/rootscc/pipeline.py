"""
End-to-end batch run: load or synthesise a volume, pre-process, binarize,
extract slice regions, cluster across slices, filter and export.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import RunConfig
from .errors import DataError, InvariantError, RootSCCError
from .io import format_clusters, format_labels, format_multi_owner, format_point_cloud, ingest_directory, multi_owner_path
from .preproc import preprocess_volume
from .roi import LabeledVolume, filter_clusters, reconstruct_labeled_volume
from .scc import ClusterSet, cluster_stats, scc_cluster
from .slices import binarize, extract_slice_regions
from .synth import GroundTruth, synth_volume
from .volume import CScanVolume

LABELS_FILE = "labels.txt"
POINTS_FILE = "points.txt"
CLUSTERS_FILE = "clusters.json"
REPORT_FILE = "report.txt"


@dataclass
class RunReport:
    tool_version: str
    source: str
    dims: tuple[int, int, int]
    regions_per_slice: list[int]
    clusters_before: int
    clusters_after: int
    cluster_rows: list[dict]
    multi_owner_voxels: int
    shared_regions: int
    connect_evaluations: int
    config: dict
    outputs: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_text(self, timings: bool = True) -> str:
        """Key/value report followed by a per-cluster table.

        Timing lines all start with ``timing.`` so they can be dropped when
        comparing runs.
        """
        nz, nx, ny = self.dims
        lines = [
            "#rootscc-report v1",
            f"tool_version: {self.tool_version}",
            f"source: {self.source}",
            f"dims_zxy: {nz},{nx},{ny}",
            f"regions_per_slice: {','.join(map(str, self.regions_per_slice))}",
            f"regions_total: {sum(self.regions_per_slice)}",
            f"clusters_before_filter: {self.clusters_before}",
            f"clusters_after_filter: {self.clusters_after}",
            f"multi_owner_voxels: {self.multi_owner_voxels}",
            f"shared_regions: {self.shared_regions}",
            f"connect_evaluations: {self.connect_evaluations}",
            f"outputs: {','.join(self.outputs)}",
            f"config: {json.dumps(self.config, sort_keys=True)}",
        ]
        if timings:
            lines += [f"timing.{k}_s: {v:.6f}" for k, v in self.timings.items()]
        lines.append("")
        lines.append("cluster_id  parent  status      slice_first  slice_last  voxels  "
                      "centroid_x_m  centroid_y_m  centroid_z_m")
        for r in self.cluster_rows:
            parent = "-" if r["parent"] is None else f"{r['parent']}.{r['split_ordinal']}"
            lines.append(
                f"{r['id']:<10d}  {parent:<6s}  {r['status']:<10s}  {r['slice_first']:<11d}  "
                f"{r['slice_last']:<10d}  {r['voxels']:<6d}  {r['centroid'][0]:<12.6f}  "
                f"{r['centroid'][1]:<12.6f}  {r['centroid'][2]:.6f}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class PipelineResult:
    volume: CScanVolume
    processed: CScanVolume
    regions: list
    clusters: ClusterSet
    filtered: ClusterSet
    labels: LabeledVolume
    report: RunReport
    truth: GroundTruth | None = None


@contextmanager
def stage(name: str, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except RootSCCError as exc:
        if exc.stage is None:
            exc.stage = name
        raise
    except (ValueError, OSError) as exc:
        raise DataError(str(exc), stage=name) from exc
    except Exception as exc:
        raise InvariantError(f"{type(exc).__name__}: {exc}", stage=name) from exc
    finally:
        timings[name] = time.perf_counter() - t0


def check_cluster_invariants(regions, cs: ClusterSet) -> None:
    """Coverage and span contiguity; violations are internal errors."""
    covered = set(cs.provenance)
    for regs in regions:
        for r in regs:
            if r.region_id not in covered:
                raise InvariantError(f"region {r.region_id} is not in any cluster", stage="scc")
    seen = set()
    for c in cs.clusters:
        if c.cluster_id in seen:
            raise InvariantError(f"duplicate cluster id {c.cluster_id}", stage="scc")
        seen.add(c.cluster_id)
        idx = [r.slice_index for r in c.regions]
        if idx != list(range(idx[0], idx[0] + len(idx))):
            raise InvariantError(f"cluster {c.cluster_id} spans non-contiguous slices", stage="scc")


def execute(config: RunConfig) -> PipelineResult:
    """Run every stage in memory; nothing is written."""
    timings: dict = {}
    truth = None
    if config.scene is not None:
        with stage("synth", timings):
            volume, truth = synth_volume(config.scene)
        source = "synth"
    else:
        with stage("ingest", timings):
            volume = ingest_directory(config.input, config.meta)
        source = str(config.input)
    meta = volume.meta

    with stage("preprocess", timings):
        processed = preprocess_volume(volume, config.preproc, workers=config.workers)
    with stage("binarize", timings):
        masks = [binarize(s, config.binarize) for s in processed.slices]
    with stage("regions", timings):
        regions = [extract_slice_regions(m) for m in masks]
    with stage("scc", timings):
        clusters = scc_cluster(regions, len(regions), dilation=config.dilation)
        check_cluster_invariants(regions, clusters)
    with stage("filter", timings):
        filtered = filter_clusters(clusters, config.filter, meta)
    with stage("label", timings):
        labels = reconstruct_labeled_volume(filtered, volume.dims, meta)

    rows = []
    for c in filtered.clusters:
        st = cluster_stats(c, meta)
        rows.append({
            "id": c.cluster_id,
            "parent": c.parent,
            "split_ordinal": c.split_ordinal,
            "status": c.status,
            "slice_first": st.slice_span[0],
            "slice_last": st.slice_span[1],
            "voxels": st.voxel_count,
            "centroid": st.centroid_world,
        })
    report = RunReport(
        tool_version=__version__,
        source=source,
        dims=volume.dims,
        regions_per_slice=[len(r) for r in regions],
        clusters_before=len(clusters),
        clusters_after=len(filtered),
        cluster_rows=rows,
        multi_owner_voxels=len(labels.multi_owner),
        shared_regions=len(clusters.shared_regions),
        connect_evaluations=clusters.connect_evaluations,
        config=config.raw,
        timings=timings,
    )
    return PipelineResult(volume, processed, regions, clusters, filtered, labels, report, truth)


def run_pipeline(config: RunConfig) -> RunReport:
    """Execute the pipeline and write the selected exports plus the report.

    All outputs are rendered before the first file is written, so a failing
    stage leaves no partial exports behind.
    """
    result = execute(config)
    meta = result.volume.meta
    timings = result.report.timings
    with stage("export", timings):
        files: dict[str, str] = {}
        if config.export.get("labels", True):
            files[LABELS_FILE] = format_labels(result.labels)
            files[multi_owner_path(LABELS_FILE).name] = format_multi_owner(result.labels)
        if config.export.get("points", True):
            files[POINTS_FILE] = format_point_cloud(result.filtered, meta)
        if config.export.get("clusters", True):
            files[CLUSTERS_FILE] = format_clusters(result.filtered, meta)
        outputs = sorted(files)
        if config.export.get("report", True):
            outputs.append(REPORT_FILE)
        result.report.outputs = outputs
        if config.export.get("report", True):
            files[REPORT_FILE] = result.report.to_text()
        out = Path(config.output)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    return result.report
