"""
Command-line driver.

Every subcommand accepts ``--config FILE`` (JSON), ``--set key=value``
(dotted keys, repeatable) and a set of dedicated flags.  Precedence is
defaults < config file < flags, with ``--set`` applied last.

Exit status: 0 success, 1 configuration error, 2 data error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_run_config, load_config_file, parse_override, resolve_config, scene_to_dict
from .errors import ConfigError, InvariantError, RootSCCError
from .io import (
    export_labels,
    export_point_cloud,
    ingest_directory,
    read_clusters,
    write_clusters,
    write_volume_directory,
)
from .pipeline import check_cluster_invariants, run_pipeline, stage
from .preproc import preprocess_volume
from .roi import filter_clusters, reconstruct_labeled_volume
from .scc import scc_cluster
from .slices import binarize, extract_slice_regions
from .synth import synth_volume

# flag dest -> dotted config key
FLAG_KEYS = {
    "timezero_fraction": "preproc.timezero_threshold_fraction",
    "svd_components": "preproc.svd_removed_components",
    "velocity": "preproc.velocity",
    "taper_fraction": "preproc.taper_fraction",
    "threshold_kind": "binarize.kind",
    "threshold": "binarize.value",
    "dilation": "scc.dilation",
    "min_voxels": "filter.min_voxels",
    "min_slice_span": "filter.min_slice_span",
    "min_footprint_area": "filter.min_footprint_area",
    "max_depth": "filter.max_depth",
    "keep_top_n": "filter.keep_top_n",
    "seed": "rng_seed",
    "workers": "workers",
}

PREPROC = ("timezero_fraction", "svd_components", "velocity", "taper_fraction", "workers")
BINARIZE = ("threshold_kind", "threshold", "dilation")
FILTER = ("min_voxels", "min_slice_span", "min_footprint_area", "max_depth", "keep_top_n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}", stage="cli")


def _add_flags(p: argparse.ArgumentParser, names) -> None:
    spec = {
        "timezero_fraction": dict(type=float, help="first-break threshold as a fraction of trace max"),
        "svd_components": dict(type=int, help="number of leading singular components removed"),
        "velocity": dict(type=float, help="migration velocity in m/ns (default: metadata velocity)"),
        "taper_fraction": dict(type=float, help="cosine taper width on trace edges, fraction of traces"),
        "threshold_kind": dict(choices=["fraction", "percentile"], help="binarization threshold policy"),
        "threshold": dict(type=float, help="fraction of max |a| or percentile of |a|"),
        "dilation": dict(type=int, help="pixel dilation radius used when linking regions"),
        "min_voxels": dict(type=int, help="minimum cluster voxel count"),
        "min_slice_span": dict(type=int, help="minimum number of slices spanned"),
        "min_footprint_area": dict(type=int, help="minimum largest per-slice footprint in pixels"),
        "max_depth": dict(type=float, help="maximum centroid depth in m"),
        "keep_top_n": dict(type=int, help="keep only the n largest clusters"),
        "seed": dict(type=int, help="random seed for synthetic scenes"),
        "workers": dict(type=int, help="threads for slice-parallel preprocessing"),
    }
    for name in names:
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, **spec[name])


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value by dotted key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rootscc", description="GPR root mapping by slice-wise clustering")
    parser.add_argument("--version", action="version", version=f"rootscc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest-check", help="validate a slice directory and print its shape")
    p.add_argument("input", nargs="?", help="directory of slice_NNN.csv files and meta.json")
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic volume and its ground truth")
    p.add_argument("--output", required=True, help="output directory")
    _common(p)
    _add_flags(p, ["seed"])

    p = sub.add_parser("preprocess", help="pre-process every slice and write the result")
    p.add_argument("input", nargs="?", help="input slice directory")
    p.add_argument("--output", required=True, help="output slice directory")
    _common(p)
    _add_flags(p, PREPROC)

    p = sub.add_parser("cluster", help="binarize, extract regions and cluster across slices")
    p.add_argument("input", nargs="?", help="pre-processed slice directory")
    p.add_argument("--output", required=True, help="clusters JSON file")
    _common(p)
    _add_flags(p, BINARIZE)

    p = sub.add_parser("filter", help="keep clusters meeting the selection criteria")
    p.add_argument("clusters", help="clusters JSON file")
    p.add_argument("--output", required=True, help="filtered clusters JSON file")
    _common(p)
    _add_flags(p, FILTER)

    p = sub.add_parser("export", help="write the label volume and point cloud for a cluster file")
    p.add_argument("clusters", help="clusters JSON file")
    p.add_argument("--output", required=True, help="output directory")
    _common(p)

    p = sub.add_parser("run", help="full pipeline from ingest (or synth) to exports")
    p.add_argument("input", nargs="?", help="input slice directory (or give a synth scene in --config)")
    p.add_argument("--output", default=None, help="output directory")
    _common(p)
    _add_flags(p, ("seed",) + PREPROC + BINARIZE + FILTER)
    return parser


def resolve_args(args: argparse.Namespace, require_source: bool = True):
    file_dict = load_config_file(args.config) if args.config else {}
    flags = []
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            flags.append((key.split("."), value))
    for name in ("input", "output"):
        value = getattr(args, name, None)
        if value is not None:
            flags.append(([name], value))
    if getattr(args, "input", None) is not None:
        flags.append((["synth"], None))
    flags += [parse_override(s) for s in args.overrides]
    d = resolve_config(file_dict, flags)
    return build_run_config(d, require_source=require_source)


def _cmd_ingest_check(args, out) -> None:
    cfg = resolve_args(args)
    if cfg.input is None:
        raise ConfigError("ingest-check needs an input directory", stage="config")
    with stage("ingest", {}):
        vol = ingest_directory(cfg.input, cfg.meta)
    nz, nx, ny = vol.dims
    m = vol.meta
    print(f"ok: {nz} slices x {nx} traces x {ny} samples", file=out)
    print(f"dt_ns={m.dt:g} dx_m={m.dx:g} dz_m={m.dz:g} velocity_m_per_ns={m.velocity:g}", file=out)


def _cmd_synth(args, out) -> None:
    cfg = resolve_args(args)
    if cfg.scene is None:
        raise ConfigError("synth needs a 'synth' scene in the config", stage="config")
    with stage("synth", {}):
        vol, truth = synth_volume(cfg.scene)
    with stage("export", {}):
        write_volume_directory(vol, cfg.output)
        doc = {
            "scene": scene_to_dict(cfg.scene),
            "targets": [
                {"kind": t.kind,
                 "endpoints": None if t.endpoints is None else np.asarray(t.endpoints).tolist(),
                 "slices": t.slices.tolist(), "centroid": t.centroid_world.tolist()}
                for t in truth.targets
            ],
        }
        (Path(cfg.output) / "truth.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(vol)} slices and truth.json to {cfg.output}", file=out)


def _cmd_preprocess(args, out) -> None:
    cfg = resolve_args(args)
    if cfg.input is None:
        raise ConfigError("preprocess needs an input directory", stage="config")
    with stage("ingest", {}):
        vol = ingest_directory(cfg.input, cfg.meta)
    with stage("preprocess", {}):
        processed = preprocess_volume(vol, cfg.preproc, workers=cfg.workers)
    with stage("export", {}):
        write_volume_directory(processed, cfg.output)
    print(f"wrote {len(processed)} pre-processed slices to {cfg.output}", file=out)


def _cmd_cluster(args, out) -> None:
    cfg = resolve_args(args)
    if cfg.input is None:
        raise ConfigError("cluster needs an input directory", stage="config")
    with stage("ingest", {}):
        vol = ingest_directory(cfg.input, cfg.meta)
    with stage("binarize", {}):
        masks = [binarize(s, cfg.binarize) for s in vol.slices]
    with stage("regions", {}):
        regions = [extract_slice_regions(m) for m in masks]
    with stage("scc", {}):
        cs = scc_cluster(regions, len(regions), dilation=cfg.dilation)
        check_cluster_invariants(regions, cs)
    with stage("export", {}):
        write_clusters(cs, vol.meta, cfg.output)
    print(f"{sum(map(len, regions))} regions -> {len(cs)} clusters", file=out)


def _cmd_filter(args, out) -> None:
    cfg = resolve_args(args, require_source=False)
    with stage("ingest", {}):
        cs, meta = read_clusters(args.clusters)
    with stage("filter", {}):
        kept = filter_clusters(cs, cfg.filter, meta)
    with stage("export", {}):
        write_clusters(kept, meta, cfg.output)
    print(f"{len(cs)} clusters -> {len(kept)} kept", file=out)


def _cmd_export(args, out) -> None:
    cfg = resolve_args(args, require_source=False)
    with stage("ingest", {}):
        cs, meta = read_clusters(args.clusters)
    with stage("label", {}):
        dims = (meta.slice_count, meta.traces_per_slice, meta.samples_per_trace)
        lv = reconstruct_labeled_volume(cs, dims, meta)
    with stage("export", {}):
        path = Path(cfg.output)
        path.mkdir(parents=True, exist_ok=True)
        export_labels(lv, path / "labels.txt")
        export_point_cloud(cs, meta, path / "points.txt")
    print(f"exported {len(cs)} clusters to {cfg.output}", file=out)


def _cmd_run(args, out) -> None:
    cfg = resolve_args(args)
    report = run_pipeline(cfg)
    print(f"clusters: {report.clusters_before} -> {report.clusters_after} after filtering; "
          f"outputs in {cfg.output}", file=out)


COMMANDS = {
    "ingest-check": _cmd_ingest_check,
    "synth": _cmd_synth,
    "preprocess": _cmd_preprocess,
    "cluster": _cmd_cluster,
    "filter": _cmd_filter,
    "export": _cmd_export,
    "run": _cmd_run,
}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
    except RootSCCError as exc:
        print(f"error: {exc}", file=err)
        return exc.exit_code
    except Exception as exc:  # anything escaping a stage is a bug
        print(f"error: {InvariantError(f'{type(exc).__name__}: {exc}')}", file=err)
        return InvariantError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
