"""
Per-slice pre-processing: zero-offset removal, time-zero correction, SVD
clutter removal and Stolt F-K migration, applied in that order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .volume import AcquisitionMeta, BScan, CScanVolume, build_volume


class PreprocError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocConfig:
    """Numeric knobs for the four stages.

    Parameters
    ----------
    timezero_threshold_fraction : float
        First break is the first sample with ``|a| > fraction * max|trace|``.
    svd_removed_components : int
        Number of leading singular components removed as clutter.
    velocity : float, optional
        Migration velocity in m/ns.  ``None`` uses ``AcquisitionMeta.velocity``.
    taper_fraction : float
        Fraction of traces on each edge given a raised-cosine taper before
        the FFT.  0 disables tapering.
    """

    timezero_threshold_fraction: float = 0.05
    svd_removed_components: int = 1
    velocity: float | None = None
    taper_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.timezero_threshold_fraction < 1.0:
            raise PreprocError(
                "timezero_threshold_fraction must lie in (0, 1), "
                f"got {self.timezero_threshold_fraction!r}"
            )
        if int(self.svd_removed_components) != self.svd_removed_components or self.svd_removed_components < 0:
            raise PreprocError(
                f"svd_removed_components must be an integer >= 0, got {self.svd_removed_components!r}"
            )
        if self.velocity is not None and not (np.isfinite(self.velocity) and self.velocity > 0):
            raise PreprocError(f"velocity must be strictly positive, got {self.velocity!r}")
        if not 0.0 <= self.taper_fraction < 0.5:
            raise PreprocError(f"taper_fraction must lie in [0, 0.5), got {self.taper_fraction!r}")


# ---------------------------------------------------------------------------
# (i) zero offset


def remove_zero_offset(slice: BScan) -> BScan:
    """Subtract each trace's mean so every A-scan is zero-mean."""
    a = slice.amplitude
    return slice.replace(a - a.mean(axis=0, keepdims=True))


# ---------------------------------------------------------------------------
# (ii) time zero


class TimeZeroResult(NamedTuple):
    """Output of :func:`correct_time_zero`.

    ``shifts[j]`` is the integer sample offset applied to trace ``j``
    (negative moves the trace earlier).  ``degenerate[j]`` marks all-zero
    traces, which are never shifted.
    """

    bscan: BScan
    shifts: np.ndarray
    degenerate: np.ndarray
    first_breaks: np.ndarray


def first_break_indices(amplitude: np.ndarray, fraction: float) -> np.ndarray:
    """First sample per trace where ``|a| > fraction * max|trace|``; -1 for all-zero traces."""
    mag = np.abs(np.asarray(amplitude, dtype=np.float64))
    peak = mag.max(axis=0)
    above = mag > fraction * peak
    fb = np.argmax(above, axis=0)
    fb[peak == 0] = -1
    return fb


def shift_trace(trace: np.ndarray, shift: int) -> np.ndarray:
    """Shift a trace by an integer number of samples, zero-filling the vacated end."""
    out = np.zeros_like(trace)
    n = trace.shape[0]
    if shift == 0:
        out[:] = trace
    elif shift < 0:
        if -shift < n:
            out[: n + shift] = trace[-shift:]
    else:
        if shift < n:
            out[shift:] = trace[: n - shift]
    return out


def correct_time_zero(slice: BScan, cfg: PreprocConfig = PreprocConfig()) -> TimeZeroResult:
    """Align every trace's first break to the earliest first break in the slice.

    Traces are shifted by whole samples only.  All-zero traces get shift 0
    and are flagged in ``degenerate``.
    """
    a = slice.amplitude
    fb = first_break_indices(a, cfg.timezero_threshold_fraction)
    degenerate = fb < 0
    shifts = np.zeros(a.shape[1], dtype=np.int64)
    if not degenerate.all():
        target = fb[~degenerate].min()
        shifts[~degenerate] = target - fb[~degenerate]
    out = np.empty_like(a)
    for j in range(a.shape[1]):
        out[:, j] = shift_trace(a[:, j], int(shifts[j]))
    return TimeZeroResult(slice.replace(out), shifts, degenerate, fb)


# ---------------------------------------------------------------------------
# (iii) SVD clutter removal


def svd_clutter_removal(slice: BScan, k: int = 1) -> BScan:
    """Remove the ``k`` leading rank-1 components of the slice.

    Horizontal banding (direct wave, ground bounce) is near-identical across
    traces and therefore concentrates in the first singular components.
    """
    a = slice.amplitude
    if int(k) != k or not 0 <= k < min(a.shape):
        raise PreprocError(f"k must satisfy 0 <= k < {min(a.shape)}, got {k!r}")
    if k == 0:
        return slice.replace(a.copy())
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    clutter = (u[:, :k] * s[:k]) @ vt[:k]
    return slice.replace(a - clutter)


# ---------------------------------------------------------------------------
# (iv) Stolt migration


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def edge_taper(n: int, fraction: float) -> np.ndarray:
    """Boxcar of length ``n`` with raised-cosine ramps over ``fraction*n`` samples at each end."""
    w = np.ones(n)
    m = int(np.floor(fraction * n))
    if m > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(m) + 0.5) / m)
        w[:m] = ramp
        w[n - m:] = ramp[::-1]
    return w


def stolt_migrate(amplitude: np.ndarray, dt: float, dx: float, velocity: float,
                  taper_fraction: float = 0.0) -> np.ndarray:
    """Constant-velocity Stolt migration of a zero-offset section.

    Parameters
    ----------
    amplitude : np.ndarray
        ``[sample, trace]`` section.
    dt : float
        Sample interval (ns).
    dx : float
        Trace spacing (m).
    velocity : float
        Medium velocity (m/ns); the exploding-reflector velocity ``v/2`` is
        used internally.
    taper_fraction : float
        Edge taper applied across traces before transforming.

    Returns
    -------
    np.ndarray
        Migrated section, same shape as the input.  The vertical axis stays in
        two-way time, so a target at depth ``d`` focuses at ``2 d / v``.
    """
    d = np.asarray(amplitude, dtype=np.float64)
    if d.ndim != 2:
        raise PreprocError(f"expected a 2D section, got shape {d.shape}")
    nt, nx = d.shape
    if nx < 2:
        raise PreprocError("migration needs at least 2 traces")
    for name, val in (("dt", dt), ("dx", dx), ("velocity", velocity)):
        if not (np.isfinite(val) and val > 0):
            raise PreprocError(f"{name} must be strictly positive, got {val!r}")
    if taper_fraction > 0:
        d = d * edge_taper(nx, taper_fraction)[None, :]

    # padding keeps wraparound out of the output window and densifies the
    # frequency grid used by the linear interpolation
    ntf = _next_pow2(2 * nt)
    nxf = _next_pow2(2 * nx)
    spec = np.fft.fftshift(np.fft.fft2(d, s=(ntf, nxf)), axes=0)

    df = 1.0 / (ntf * dt)
    f = (np.arange(ntf) - ntf // 2) * df          # output axis, read as ve * kz
    kx = np.fft.fftfreq(nxf, d=dx)
    ve = velocity / 2.0

    fk = f[:, None]
    fmap = np.sign(fk) * np.sqrt(fk ** 2 + (ve * kx[None, :]) ** 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        jac = np.where(fmap != 0, np.abs(fk) / np.abs(fmap), 0.0)

    # linear interpolation of each kx column at fmap; out-of-band maps to zero
    pos = fmap / df + ntf // 2
    inside = (pos >= 0) & (pos <= ntf - 1)
    lo = np.clip(np.floor(pos).astype(np.int64), 0, ntf - 2)
    w = pos - lo
    cols = np.broadcast_to(np.arange(nxf)[None, :], pos.shape)
    mapped = (1.0 - w) * spec[lo, cols] + w * spec[lo + 1, cols]
    mapped = np.where(inside, mapped * jac, 0.0)

    out = np.fft.ifft2(np.fft.ifftshift(mapped, axes=0))
    return out.real[:nt, :nx].copy()


def fk_migrate(slice: BScan, meta: AcquisitionMeta, cfg: PreprocConfig = PreprocConfig()) -> BScan:
    """Stolt-migrate one slice using ``cfg.velocity`` (falling back to ``meta.velocity``)."""
    v = meta.velocity if cfg.velocity is None else cfg.velocity
    return slice.replace(stolt_migrate(slice.amplitude, meta.dt, meta.dx, v, cfg.taper_fraction))


# ---------------------------------------------------------------------------
# volume driver


def preprocess_slice(slice: BScan, meta: AcquisitionMeta, cfg: PreprocConfig) -> BScan:
    out = remove_zero_offset(slice)
    out = correct_time_zero(out, cfg).bscan
    out = svd_clutter_removal(out, cfg.svd_removed_components)
    return fk_migrate(out, meta, cfg)


def preprocess_volume(volume: CScanVolume, cfg: PreprocConfig = PreprocConfig(),
                      workers: int = 1) -> CScanVolume:
    """Run the four stages on every slice independently.

    ``workers > 1`` processes slices on a thread pool; results are identical
    to the serial schedule since slices share no state.
    """
    meta = volume.meta
    if cfg.velocity is None and meta.velocity <= 0:
        raise PreprocError("velocity must be strictly positive")
    if not cfg.svd_removed_components < min(meta.samples_per_trace, meta.traces_per_slice):
        raise PreprocError(
            f"svd_removed_components={cfg.svd_removed_components} too large for "
            f"{meta.samples_per_trace}x{meta.traces_per_slice} slices"
        )
    if workers > 1 and len(volume) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(lambda s: preprocess_slice(s, meta, cfg), volume.slices))
    else:
        out = [preprocess_slice(s, meta, cfg) for s in volume.slices]
    return build_volume(out, meta)
