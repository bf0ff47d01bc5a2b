"""
Data model for GPR slices and volumes.

Array layout
------------
A B-scan amplitude matrix is indexed ``[sample, trace]`` (rows are two-way
time samples ``y``, columns are traces ``x``).  A C-scan stacks B-scans along
the slice axis ``z``, so the volume array is ``[slice, sample, trace]``.

Voxel coordinates used everywhere else in the package are ordered
``(z, x, y)`` = ``(slice, trace, sample)``; ``CScanVolume.dims`` follows that
convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class VolumeError(ValueError):
    """Raised when slices or metadata do not form a valid volume."""


@dataclass(frozen=True)
class AcquisitionMeta:
    """Sampling geometry and medium parameters.

    Parameters
    ----------
    dt : float
        Time-sample interval in ns.
    dx : float
        Trace spacing along the scan direction in m.
    dz : float
        Spacing between adjacent B-scan lines in m.
    velocity : float
        Propagation velocity of the medium in m/ns.
    samples_per_trace, traces_per_slice, slice_count : int
        Grid dimensions.
    """

    dt: float = 0.1
    dx: float = 0.03
    dz: float = 0.1
    velocity: float = 0.1
    samples_per_trace: int = 512
    traces_per_slice: int = 101
    slice_count: int = 20

    def __post_init__(self):
        for name in ("dt", "dx", "dz", "velocity"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise VolumeError(f"{name} must be strictly positive, got {value!r}")
        for name in ("samples_per_trace", "traces_per_slice", "slice_count"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise VolumeError(f"{name} must be an integer >= 1, got {value!r}")

    def with_dims(self, slice_count: int, traces: int, samples: int) -> "AcquisitionMeta":
        return AcquisitionMeta(
            dt=self.dt,
            dx=self.dx,
            dz=self.dz,
            velocity=self.velocity,
            samples_per_trace=samples,
            traces_per_slice=traces,
            slice_count=slice_count,
        )


@dataclass(frozen=True)
class BScan:
    """One radargram slice, ``amplitude[sample, trace]``."""

    amplitude: np.ndarray
    slice_index: int = 0

    def __post_init__(self):
        amp = np.array(self.amplitude, dtype=np.float64)
        if amp.ndim != 2 or amp.size == 0:
            raise VolumeError(f"B-scan must be a non-empty 2D matrix, got shape {amp.shape}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)

    @property
    def n_samples(self) -> int:
        return self.amplitude.shape[0]

    @property
    def n_traces(self) -> int:
        return self.amplitude.shape[1]

    def replace(self, amplitude: np.ndarray) -> "BScan":
        return BScan(amplitude, self.slice_index)


@dataclass(frozen=True)
class CScanVolume:
    """Immutable ordered stack of B-scans sharing one :class:`AcquisitionMeta`."""

    slices: tuple[BScan, ...]
    meta: AcquisitionMeta
    _data: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def data(self) -> np.ndarray:
        """Read-only ``[slice, sample, trace]`` array."""
        return self._data

    @property
    def dims(self) -> tuple[int, int, int]:
        """``(z, x, y)`` = (slices, traces, samples)."""
        nz, ny, nx = self._data.shape
        return nz, nx, ny

    def __len__(self) -> int:
        return len(self.slices)

    def flatten(self) -> np.ndarray:
        return self._data


def build_volume(slices: Sequence[BScan], meta: AcquisitionMeta) -> CScanVolume:
    """Stack B-scans into a validated C-scan volume.

    Slices must carry contiguous indices ``0..n-1`` in the order given; the
    model never reorders.  Metadata counts must agree with the data.
    """
    slices = tuple(slices)
    if not slices:
        raise VolumeError("cannot build a volume from an empty slice list")
    shape = slices[0].amplitude.shape
    for pos, s in enumerate(slices):
        if s.amplitude.shape != shape:
            raise VolumeError(
                f"slice {s.slice_index} has shape {s.amplitude.shape}, expected {shape}"
            )
        if s.slice_index != pos:
            raise VolumeError(
                f"slice at position {pos} has slice_index {s.slice_index}; "
                "slices must be contiguous and ordered from 0"
            )
    ny, nx = shape
    expected = (len(slices), nx, ny)
    actual = (meta.slice_count, meta.traces_per_slice, meta.samples_per_trace)
    if expected != actual:
        raise VolumeError(
            f"metadata (slices, traces, samples) = {actual} disagrees with data {expected}"
        )
    data = np.stack([s.amplitude for s in slices])
    data.setflags(write=False)
    return CScanVolume(slices, meta, data)


def volume_from_array(data: np.ndarray, meta: AcquisitionMeta) -> CScanVolume:
    """Build a volume from a ``[slice, sample, trace]`` array, reconciling meta dims."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise VolumeError(f"expected a 3D [slice, sample, trace] array, got shape {data.shape}")
    nz, ny, nx = data.shape
    meta = meta.with_dims(nz, nx, ny)
    return build_volume([BScan(data[i], i) for i in range(nz)], meta)


def voxel_to_world(i: int, j: int, k: int, meta: AcquisitionMeta) -> tuple[float, float, float]:
    """Map voxel ``(slice i, trace j, sample k)`` to world ``(x, y, z)`` in metres.

    ``y`` is one-way depth, ``k * dt * velocity / 2``.
    """
    for name, idx, n in (
        ("slice", i, meta.slice_count),
        ("trace", j, meta.traces_per_slice),
        ("sample", k, meta.samples_per_trace),
    ):
        if not 0 <= idx < n:
            raise IndexError(f"{name} index {idx} out of range [0, {n})")
    return j * meta.dx, k * meta.dt * meta.velocity / 2.0, i * meta.dz


def voxels_to_world(voxels: np.ndarray, meta: AcquisitionMeta) -> np.ndarray:
    """Vectorised :func:`voxel_to_world` for an ``(N, 3)`` array of ``(z, x, y)``.

    Fractional indices are allowed; no range check is made.
    """
    v = np.asarray(voxels, dtype=np.float64).reshape(-1, 3)
    out = np.empty_like(v)
    out[:, 0] = v[:, 1] * meta.dx
    out[:, 1] = v[:, 2] * meta.dt * meta.velocity / 2.0
    out[:, 2] = v[:, 0] * meta.dz
    return out
