"""
Synthetic radargrams with known ground truth.

Point scatterers produce one diffraction hyperbola in the slice they sit in.
Straight root segments are sampled as one scatterer per slice plane they
cross, so a root appears as a sequence of hyperbolas in consecutive slices.
A horizontal direct-wave band (rank 1 across traces), optional per-trace
time-zero jitter and Gaussian noise complete the scene.

Also home to :func:`oracle_flood_fill_3d`, a brute-force connected-component
search used to cross-check the clustering code.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .volume import AcquisitionMeta, BScan, CScanVolume, volume_from_array


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class Scatterer:
    """Point target at scan position ``x0`` (m), slice position ``z0`` (m), depth ``depth`` (m)."""

    x0: float
    z0: float
    depth: float
    amplitude: float = 1.0
    pulse_width: float = 1.0  # ns, dominant period of the Ricker pulse
    wavelet: str = "ricker"


@dataclass(frozen=True)
class RootSegment:
    """Straight elongated target between two world points ``(x, depth, z)`` in metres.

    A root crossing a B-scan plane is a line target, so its per-slice
    hyperbolas use the ``"line"`` wavelet by default.
    """

    start: tuple[float, float, float]
    end: tuple[float, float, float]
    amplitude: float = 1.0
    pulse_width: float = 1.0
    wavelet: str = "line"


@dataclass(frozen=True)
class SceneSpec:
    meta: AcquisitionMeta
    scatterers: tuple[Scatterer, ...] = ()
    root_segments: tuple[RootSegment, ...] = ()
    clutter_amplitude: float = 0.0
    clutter_time: float = 2.0        # ns, centre of the direct-wave band
    clutter_pulse_width: float = 2.0
    noise_sigma: float = 0.0
    timezero_jitter: int = 0         # max per-trace delay in samples
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        object.__setattr__(self, "root_segments", tuple(self.root_segments))
        for name in ("clutter_amplitude", "noise_sigma", "timezero_jitter"):
            if getattr(self, name) < 0:
                raise SceneError(f"{name} must be >= 0")
        if self.clutter_pulse_width <= 0:
            raise SceneError("clutter_pulse_width must be > 0")
        for s in self.scatterers:
            _check_scatterer(s, self.meta)
        for seg in self.root_segments:
            if seg.pulse_width <= 0:
                raise SceneError("pulse_width must be > 0")
            if seg.wavelet not in WAVELETS:
                raise SceneError(f"unknown wavelet {seg.wavelet!r}")
            for p in (seg.start, seg.end):
                _check_point(p[0], p[1], p[2], self.meta)


@dataclass(frozen=True)
class Target:
    """Ground truth for one scatterer or root segment.

    ``footprint`` holds the nearest voxel ``(z, x, y)`` of the focused target
    in every slice it occupies; ``world`` holds the exact ``(x, depth, z)``
    positions in the same order.
    """

    kind: str
    footprint: np.ndarray
    world: np.ndarray
    endpoints: np.ndarray | None = None

    @property
    def centroid_voxel(self) -> np.ndarray:
        return self.footprint.mean(axis=0)

    @property
    def centroid_world(self) -> np.ndarray:
        return self.world.mean(axis=0)

    @property
    def slices(self) -> np.ndarray:
        return np.unique(self.footprint[:, 0])


@dataclass(frozen=True)
class GroundTruth:
    targets: tuple[Target, ...] = field(default_factory=tuple)

    @property
    def roots(self) -> list[Target]:
        return [t for t in self.targets if t.kind == "root"]

    @property
    def scatterers(self) -> list[Target]:
        return [t for t in self.targets if t.kind == "scatterer"]


def _extent(meta: AcquisitionMeta) -> tuple[float, float, float]:
    return (
        (meta.traces_per_slice - 1) * meta.dx,
        (meta.samples_per_trace - 1) * meta.dt * meta.velocity / 2.0,
        (meta.slice_count - 1) * meta.dz,
    )


def _check_point(x, depth, z, meta):
    xmax, dmax, zmax = _extent(meta)
    eps = 1e-9
    if not (-eps <= x <= xmax + eps):
        raise SceneError(f"x={x} outside [0, {xmax}]")
    if not (0 < depth <= dmax + eps):
        raise SceneError(f"depth={depth} outside (0, {dmax}]")
    if not (-eps <= z <= zmax + eps):
        raise SceneError(f"z={z} outside [0, {zmax}]")


def _check_scatterer(s: Scatterer, meta: AcquisitionMeta):
    if s.pulse_width <= 0:
        raise SceneError("pulse_width must be > 0")
    if s.wavelet not in WAVELETS:
        raise SceneError(f"unknown wavelet {s.wavelet!r}; expected one of {sorted(WAVELETS)}")
    _check_point(s.x0, s.depth, s.z0, meta)
    if abs(s.z0 / meta.dz - round(s.z0 / meta.dz)) > 1e-6:
        raise SceneError(f"z0={s.z0} does not lie on a slice plane (dz={meta.dz})")


def ricker(t: np.ndarray, pulse_width: float) -> np.ndarray:
    """Zero-phase Ricker wavelet with dominant period ``pulse_width``, peak 1 at ``t = 0``."""
    a = (np.pi * np.asarray(t, dtype=np.float64) / pulse_width) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


@lru_cache(maxsize=32)
def _line_wavelet_table(pulse_width: float) -> tuple[np.ndarray, np.ndarray]:
    n = 1 << 14
    step = pulse_width / 160.0
    t = (np.arange(n) - n // 2) * step
    spec = np.fft.fft(np.fft.ifftshift(ricker(t, pulse_width)))
    f = np.fft.fftfreq(n, step)
    # 2D half-integration: (f0/|f|)^(1/2) amplitude, +45 degree phase
    gain = np.zeros(n, dtype=complex)
    nz = f != 0
    gain[nz] = np.sqrt((1.0 / pulse_width) / np.abs(f[nz])) * np.exp(1j * np.sign(f[nz]) * np.pi / 4)
    w = np.fft.fftshift(np.fft.ifft(spec * gain).real)
    return t, w


def line_wavelet(t: np.ndarray, pulse_width: float) -> np.ndarray:
    """Ricker pulse as returned by a 2D line target (half-integrated, +45 degree phase).

    Stolt migration of a hyperbola carrying this pulse focuses to a zero-phase
    Ricker at the true position; a plain Ricker hyperbola focuses to a
    phase-rotated pulse instead.
    """
    tab_t, tab_w = _line_wavelet_table(float(pulse_width))
    return np.interp(np.asarray(t, dtype=np.float64), tab_t, tab_w, left=0.0, right=0.0)


WAVELETS = {"ricker": ricker, "line": line_wavelet}


def hyperbola_times(x: np.ndarray, x0: float, depth: float, velocity: float) -> np.ndarray:
    """Two-way travel time ``2 sqrt((x - x0)^2 + d^2) / v``."""
    return 2.0 * np.sqrt((np.asarray(x) - x0) ** 2 + depth ** 2) / velocity


def point_scatterer_response(scatterer: Scatterer, meta: AcquisitionMeta) -> BScan:
    """Diffraction hyperbola of one point target, as a B-scan in the target's slice.

    Trace ``x`` carries the pulse centred at ``2 sqrt((x - x0)^2 + d^2) / v``.
    """
    _check_scatterer(scatterer, meta)
    i = int(round(scatterer.z0 / meta.dz))
    x = np.arange(meta.traces_per_slice) * meta.dx
    t = np.arange(meta.samples_per_trace) * meta.dt
    tc = hyperbola_times(x, scatterer.x0, scatterer.depth, meta.velocity)
    pulse = WAVELETS[scatterer.wavelet]
    amp = scatterer.amplitude * pulse(t[:, None] - tc[None, :], scatterer.pulse_width)
    return BScan(amp, i)


def segment_scatterers(seg: RootSegment, meta: AcquisitionMeta) -> list[Scatterer]:
    """One scatterer per slice plane crossed by the segment."""
    (xa, da, za), (xb, db, zb) = seg.start, seg.end
    lo, hi = sorted((za, zb))
    i0 = int(np.ceil(lo / meta.dz - 1e-9))
    i1 = int(np.floor(hi / meta.dz + 1e-9))
    out = []
    for i in range(i0, i1 + 1):
        z = i * meta.dz
        s = 0.0 if zb == za else (z - za) / (zb - za)
        out.append(Scatterer(
            x0=xa + s * (xb - xa),
            z0=z,
            depth=da + s * (db - da),
            amplitude=seg.amplitude,
            pulse_width=seg.pulse_width,
            wavelet=seg.wavelet,
        ))
    return out


def _target(kind, scatterers, meta, endpoints=None) -> Target:
    world = np.array([[s.x0, s.depth, s.z0] for s in scatterers], dtype=np.float64).reshape(-1, 3)
    foot = np.array([
        [round(s.z0 / meta.dz), round(s.x0 / meta.dx), round(2 * s.depth / meta.velocity / meta.dt)]
        for s in scatterers
    ], dtype=np.int64).reshape(-1, 3)
    return Target(kind, foot, world, endpoints)


def synth_volume(scene: SceneSpec) -> tuple[CScanVolume, GroundTruth]:
    """Render a scene into a C-scan volume and its exact ground truth."""
    meta = scene.meta
    nz, ny, nx = meta.slice_count, meta.samples_per_trace, meta.traces_per_slice
    data = np.zeros((nz, ny, nx))
    targets = []

    for s in scene.scatterers:
        b = point_scatterer_response(s, meta)
        data[b.slice_index] += b.amplitude
        targets.append(_target("scatterer", [s], meta))
    for seg in scene.root_segments:
        pts = segment_scatterers(seg, meta)
        for s in pts:
            b = point_scatterer_response(s, meta)
            data[b.slice_index] += b.amplitude
        ends = np.array([seg.start, seg.end], dtype=np.float64)
        targets.append(_target("root", pts, meta, ends))

    if scene.clutter_amplitude > 0:
        t = np.arange(ny) * meta.dt
        band = scene.clutter_amplitude * ricker(t - scene.clutter_time, scene.clutter_pulse_width)
        data += band[None, :, None]

    # one generator, fixed draw order: jitter then noise
    rng = np.random.default_rng(scene.rng_seed)
    if scene.timezero_jitter > 0:
        delays = rng.integers(0, scene.timezero_jitter + 1, size=(nz, nx))
        shifted = np.zeros_like(data)
        for i in range(nz):
            for j in range(nx):
                d = int(delays[i, j])
                shifted[i, d:, j] = data[i, : ny - d, j]
        data = shifted
    if scene.noise_sigma > 0:
        data = data + rng.normal(0.0, scene.noise_sigma, size=data.shape)

    return volume_from_array(data, meta), GroundTruth(tuple(targets))


def field_survey_meta() -> AcquisitionMeta:
    """20 slices of 101 traces at 3 cm, 10 cm slice spacing, 512 samples of 0.1 ns."""
    return AcquisitionMeta(dt=0.1, dx=0.03, dz=0.1, velocity=0.1,
                           samples_per_trace=512, traces_per_slice=101, slice_count=20)


def root_field_scene(seed: int = 0, n_blobs: int = 20, blob_amplitude=(1.2, 1.3),
                     pulse_width: float = 2.0) -> SceneSpec:
    """Three shallow roots among single-slice blobs, clutter, jitter and noise.

    Blobs are deeper than the roots.  Blobs in the same or adjacent slices are
    kept at least 0.3 m apart in x or 0.2 m in depth, so each one stays a
    separate single-slice feature.  Their amplitude range is chosen so they survive
    binarization without becoming the slice maximum that would push a root
    below threshold.  ``seed`` drives both the blob layout and the noise.
    """
    meta = field_survey_meta()
    roots = (
        RootSegment((0.60, 0.35, 0.0), (0.885, 0.45, 1.9), pulse_width=pulse_width),
        RootSegment((1.50, 0.50, 0.0), (1.50, 0.70, 1.9), pulse_width=pulse_width),
        RootSegment((2.40, 0.45, 0.3), (2.25, 0.55, 1.5), pulse_width=pulse_width),
    )
    rng = np.random.default_rng([seed, 1])
    blobs: list[Scatterer] = []
    while len(blobs) < n_blobs:
        i = int(rng.integers(0, meta.slice_count))
        x = round(float(rng.uniform(0.3, 2.7)), 3)
        d = round(float(rng.uniform(0.95, 1.8)), 3)
        if any(abs(round(b.z0 / meta.dz) - i) <= 1 and abs(b.x0 - x) < 0.3 and abs(b.depth - d) < 0.2
               for b in blobs):
            continue
        amp = float(rng.uniform(*blob_amplitude))
        blobs.append(Scatterer(x, round(i * meta.dz, 10), d, amplitude=amp, pulse_width=pulse_width))
    return SceneSpec(meta, tuple(blobs), roots, clutter_amplitude=3.0, noise_sigma=0.02,
                     timezero_jitter=3, rng_seed=seed)


# ---------------------------------------------------------------------------
# brute-force component oracle


@dataclass(frozen=True)
class Adjacency:
    """Voxel adjacency used by :func:`oracle_flood_fill_3d`.

    ``within`` is 4 or 8 (in-slice neighbourhood); ``across`` links voxels
    with identical ``(x, y)`` in adjacent slices.
    """

    within: int = 4
    across: bool = True


def oracle_flood_fill_3d(mask: np.ndarray, adjacency: Adjacency = Adjacency()) -> list[frozenset]:
    """Connected components of a boolean ``[slice, sample, trace]`` volume by BFS.

    Components are returned as frozensets of ``(z, x, y)`` voxels, ordered by
    their smallest voxel.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 2:
        mask = mask[None]
    nz, ny, nx = mask.shape
    if adjacency.within == 4:
        steps = [(0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    elif adjacency.within == 8:
        steps = [(0, dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    else:
        raise ValueError("within must be 4 or 8")
    if adjacency.across:
        steps += [(1, 0, 0), (-1, 0, 0)]

    seen = np.zeros_like(mask)
    comps = []
    for start in zip(*np.nonzero(mask)):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        comp = set()
        while queue:
            z, y, x = queue.popleft()
            comp.add((int(z), int(x), int(y)))
            for dz, dy, dx in steps:
                nb = (z + dz, y + dy, x + dx)
                if 0 <= nb[0] < nz and 0 <= nb[1] < ny and 0 <= nb[2] < nx:
                    if mask[nb] and not seen[nb]:
                        seen[nb] = True
                        queue.append(nb)
        comps.append(frozenset(comp))
    comps.sort(key=min)
    return comps
