"""
Run configuration.

A run is described by a JSON document; every section is optional and falls
back to the library defaults.  Values are layered defaults < config file <
command-line overrides (dotted keys such as ``preproc.svd_removed_components``).
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError, DataError
from .io import meta_from_dict, meta_to_dict
from .preproc import PreprocConfig, PreprocError
from .roi import FilterCriteria
from .slices import BinarizeError, BinarizePolicy
from .synth import RootSegment, Scatterer, SceneError, SceneSpec
from .volume import AcquisitionMeta, VolumeError

DEFAULTS = {
    "input": None,
    "output": "rootscc_out",
    "meta": None,
    "synth": None,
    "rng_seed": None,
    "workers": 1,
    "preproc": asdict(PreprocConfig()),
    "binarize": asdict(BinarizePolicy()),
    "scc": {"dilation": 0},
    "filter": asdict(FilterCriteria()),
    "export": {"labels": True, "points": True, "clusters": True, "report": True},
}


@dataclass(frozen=True)
class RunConfig:
    input: str | None
    output: str
    meta: AcquisitionMeta | None
    scene: SceneSpec | None
    preproc: PreprocConfig
    binarize: BinarizePolicy
    dilation: int
    filter: FilterCriteria
    export: dict
    rng_seed: int | None = None
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False, repr=False)


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise ConfigError(f"unknown config key {path + k!r}", stage="config")
        if isinstance(out[k], dict) and isinstance(v, dict) and k not in ("meta", "synth"):
            out[k] = _merge(out[k], v, path + k + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(item: str) -> tuple[list[str], object]:
    """``"a.b=3"`` -> (["a", "b"], 3); the value is parsed as JSON when possible."""
    key, sep, text = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not of the form key=value", stage="config")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return key.split("."), value


def apply_overrides(d: dict, overrides) -> dict:
    out = copy.deepcopy(d)
    for keys, value in overrides:
        node = out
        for k in keys[:-1]:
            if node.get(k) is None:
                node[k] = {}
            if not isinstance(node[k], dict):
                raise ConfigError(f"cannot override inside {'.'.join(keys)!r}", stage="config")
            node = node[k]
        node[keys[-1]] = value
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", stage="config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})", stage="config") from exc


def resolve_config(file_dict: dict | None = None, overrides=()) -> dict:
    """Layer defaults, a config document and overrides into one plain dict."""
    d = _merge(DEFAULTS, file_dict or {})
    return apply_overrides(d, overrides)


# ---------------------------------------------------------------------------
# scenes


def scene_from_dict(d: dict, seed: int | None = None) -> SceneSpec:
    d = dict(d)
    try:
        meta = meta_from_dict(d.pop("meta"), "synth.meta")
    except KeyError:
        raise ConfigError("synth scene needs a 'meta' section", stage="config") from None
    except DataError as exc:
        raise ConfigError(str(exc), stage="config") from exc
    try:
        scat = tuple(Scatterer(**s) for s in d.pop("scatterers", []))
        segs = tuple(
            RootSegment(**{**s, "start": tuple(s["start"]), "end": tuple(s["end"])})
            for s in d.pop("root_segments", [])
        )
        renames = {"clutter_time_ns": "clutter_time", "clutter_pulse_width_ns": "clutter_pulse_width"}
        kwargs = {renames.get(k, k): v for k, v in d.items()}
        if seed is not None:
            kwargs["rng_seed"] = seed
        return SceneSpec(meta, scat, segs, **kwargs)
    except (TypeError, KeyError, SceneError, VolumeError) as exc:
        raise ConfigError(f"invalid synth scene: {exc}", stage="config") from exc


def scene_to_dict(scene: SceneSpec) -> dict:
    return {
        "meta": meta_to_dict(scene.meta),
        "scatterers": [asdict(s) for s in scene.scatterers],
        "root_segments": [
            {**asdict(s), "start": list(s.start), "end": list(s.end)} for s in scene.root_segments
        ],
        "clutter_amplitude": scene.clutter_amplitude,
        "clutter_time_ns": scene.clutter_time,
        "clutter_pulse_width_ns": scene.clutter_pulse_width,
        "noise_sigma": scene.noise_sigma,
        "timezero_jitter": scene.timezero_jitter,
        "rng_seed": scene.rng_seed,
    }


# ---------------------------------------------------------------------------


def build_run_config(d: dict, require_source: bool = True) -> RunConfig:
    """Validate a resolved config dict; every problem is a :class:`ConfigError`.

    With ``require_source`` exactly one of ``input`` and ``synth`` must be set;
    stages that read intermediate files pass False.
    """
    try:
        preproc = PreprocConfig(**d["preproc"])
        binarize = BinarizePolicy(**d["binarize"])
        filt = FilterCriteria(**d["filter"])
    except (TypeError, PreprocError, BinarizeError, ValueError) as exc:
        raise ConfigError(str(exc), stage="config") from exc

    meta = None
    if d["meta"] is not None:
        try:
            meta = meta_from_dict(d["meta"], "meta")
        except DataError as exc:
            raise ConfigError(str(exc), stage="config") from exc

    scene = None
    if d["synth"] is not None:
        scene = scene_from_dict(d["synth"], d["rng_seed"])
    if d["input"] is not None and scene is not None:
        raise ConfigError("'input' and 'synth' are mutually exclusive", stage="config")
    if require_source and d["input"] is None and scene is None:
        raise ConfigError("exactly one of 'input' and 'synth' must be given", stage="config")

    dilation = d["scc"].get("dilation", 0)
    if set(d["scc"]) - {"dilation"}:
        raise ConfigError(f"unknown scc keys {sorted(set(d['scc']) - {'dilation'})}", stage="config")
    if not isinstance(dilation, int) or dilation < 0:
        raise ConfigError("scc.dilation must be an integer >= 0", stage="config")
    workers = d["workers"]
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be an integer >= 1", stage="config")
    unknown = set(d["export"]) - set(DEFAULTS["export"])
    if unknown:
        raise ConfigError(f"unknown export keys {sorted(unknown)}", stage="config")

    return RunConfig(
        input=d["input"],
        output=d["output"],
        meta=meta,
        scene=scene,
        preproc=preproc,
        binarize=binarize,
        dilation=dilation,
        filter=filt,
        export=dict(d["export"]),
        rng_seed=d["rng_seed"],
        workers=workers,
        raw=d,
    )

