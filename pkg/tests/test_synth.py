import numpy as np
import pytest

from rootscc.synth import (
    Adjacency,
    RootSegment,
    Scatterer,
    SceneError,
    SceneSpec,
    field_survey_meta,
    hyperbola_times,
    line_wavelet,
    oracle_flood_fill_3d,
    point_scatterer_response,
    ricker,
    root_field_scene,
    segment_scatterers,
    synth_volume,
)
from rootscc.volume import AcquisitionMeta

META = AcquisitionMeta(samples_per_trace=256, traces_per_slice=41, slice_count=6)


def test_hyperbola_closed_form():
    assert hyperbola_times(0.0, 0.0, 0.5, 0.1) == pytest.approx(10.0)
    assert hyperbola_times(0.5, 0.0, 0.5, 0.1) == pytest.approx(2 * np.sqrt(0.5) / 0.1)
    assert hyperbola_times(0.5, 0.0, 0.5, 0.1) == pytest.approx(14.142, abs=1e-3)


def test_apex_sits_on_the_travel_time_curve():
    meta = AcquisitionMeta(samples_per_trace=512, traces_per_slice=101, slice_count=1)
    b = point_scatterer_response(Scatterer(1.5, 0.0, 0.5), meta).amplitude
    assert b[:, 50].argmax() == 100
    assert b[100, 50] == pytest.approx(1.0)
    # off-apex traces peak at the nearest sample to 2 sqrt(dx^2 + d^2) / v
    for j in (20, 70, 90):
        tc = hyperbola_times(j * meta.dx, 1.5, 0.5, meta.velocity)
        assert abs(b[:, j].argmax() - tc / meta.dt) <= 0.5


def test_ricker_and_line_wavelets():
    t = np.linspace(-5, 5, 1001)
    r = ricker(t, 1.0)
    assert r.max() == pytest.approx(1.0) and t[r.argmax()] == pytest.approx(0.0)
    assert np.allclose(r, r[::-1])
    w = line_wavelet(t, 1.0)
    assert not np.allclose(w, w[::-1], atol=1e-3)   # phase-rotated, not symmetric
    assert abs(w).max() > 0


def test_zero_amplitude_contributes_nothing():
    b = point_scatterer_response(Scatterer(0.3, 0.0, 0.5, amplitude=0.0), META)
    assert not b.amplitude.any()


def test_empty_scene_is_zero():
    vol, gt = synth_volume(SceneSpec(META))
    assert not vol.data.any()
    assert gt.targets == ()


def test_single_scatterer_is_local_to_its_slice():
    vol, gt = synth_volume(SceneSpec(META, (Scatterer(0.6, 0.3, 0.5),)))
    nonzero = np.flatnonzero(np.abs(vol.data).reshape(6, -1).max(axis=1))
    assert nonzero.tolist() == [3]
    assert gt.scatterers[0].slices.tolist() == [3]


def test_superposition():
    a = (Scatterer(0.3, 0.1, 0.4), Scatterer(0.9, 0.3, 0.7, amplitude=0.5))
    b = (Scatterer(0.6, 0.1, 0.6, pulse_width=2.0),)
    seg = (RootSegment((0.2, 0.3, 0.0), (0.8, 0.5, 0.5)),)
    va, _ = synth_volume(SceneSpec(META, a))
    vb, _ = synth_volume(SceneSpec(META, b, seg))
    vab, _ = synth_volume(SceneSpec(META, a + b, seg))
    assert np.abs(vab.data - va.data - vb.data).max() <= 1e-12


def test_fixed_seed_is_bit_identical():
    scene = SceneSpec(META, (Scatterer(0.6, 0.2, 0.5),), clutter_amplitude=2.0,
                      noise_sigma=0.1, timezero_jitter=3, rng_seed=11)
    v1, _ = synth_volume(scene)
    v2, _ = synth_volume(scene)
    assert np.array_equal(v1.data, v2.data)
    v3, _ = synth_volume(SceneSpec(**{**scene.__dict__, "rng_seed": 12}))
    assert not np.array_equal(v1.data, v3.data)


def test_clutter_is_rank_one():
    vol, _ = synth_volume(SceneSpec(META, clutter_amplitude=3.0))
    s = np.linalg.svd(vol.data[0], compute_uv=False)
    assert s[1] <= 1e-12 * s[0]


def test_segment_sampling_one_scatterer_per_slice():
    seg = RootSegment((0.2, 0.3, 0.1), (0.8, 0.5, 0.4))
    pts = segment_scatterers(seg, META)
    assert [round(p.z0 / META.dz) for p in pts] == [1, 2, 3, 4]
    xs = [p.x0 for p in pts]
    assert xs[0] == pytest.approx(0.2) and xs[-1] == pytest.approx(0.8)
    assert np.allclose(np.diff(xs), 0.2)


def test_scene_validation():
    with pytest.raises(SceneError):
        SceneSpec(META, (Scatterer(0.3, 0.15, 0.5),))     # between slice planes
    with pytest.raises(SceneError):
        SceneSpec(META, (Scatterer(5.0, 0.0, 0.5),))      # off the scan line
    with pytest.raises(SceneError):
        SceneSpec(META, noise_sigma=-1.0)
    with pytest.raises(SceneError):
        SceneSpec(META, (Scatterer(0.3, 0.0, 0.5, wavelet="sinc"),))


def test_root_field_scene_layout():
    scene = root_field_scene(5)
    assert scene.meta == field_survey_meta()
    assert len(scene.root_segments) == 3 and len(scene.scatterers) == 20
    for a in scene.scatterers:
        for b in scene.scatterers:
            if a is b:
                continue
            near_slice = abs(round(a.z0 / 0.1) - round(b.z0 / 0.1)) <= 1
            assert not (near_slice and abs(a.x0 - b.x0) < 0.3 and abs(a.depth - b.depth) < 0.2)
    assert root_field_scene(5) == scene


# --- flood-fill oracle -------------------------------------------------------

def test_flood_fill_trivial_cases():
    assert oracle_flood_fill_3d(np.zeros((3, 4, 4), dtype=bool)) == []
    m = np.zeros((3, 4, 4), dtype=bool)
    m[1, 2, 3] = True
    assert oracle_flood_fill_3d(m) == [frozenset({(1, 3, 2)})]


def test_flood_fill_slice_adjacency():
    m = np.zeros((4, 4, 4), dtype=bool)
    m[1, 2, 2] = m[2, 2, 2] = True
    assert len(oracle_flood_fill_3d(m)) == 1
    m = np.zeros((4, 4, 4), dtype=bool)
    m[1, 2, 2] = m[3, 2, 2] = True
    assert len(oracle_flood_fill_3d(m)) == 2


def test_flood_fill_within_slice_adjacency():
    m = np.zeros((1, 3, 3), dtype=bool)
    m[0, 0, 0] = m[0, 1, 1] = True
    assert len(oracle_flood_fill_3d(m, Adjacency(within=4))) == 2
    assert len(oracle_flood_fill_3d(m, Adjacency(within=8))) == 1
    m = np.zeros((2, 3, 3), dtype=bool)
    m[:, 1, 1] = True
    assert len(oracle_flood_fill_3d(m, Adjacency(across=False))) == 2
