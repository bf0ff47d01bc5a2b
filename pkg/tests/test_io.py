import json

import numpy as np
import pytest

from helpers import topology_masks, make_region, random_tube_volume, regions_of
from rootscc.errors import DataError
from rootscc.io import (
    META_FILENAME,
    export_labels,
    export_point_cloud,
    format_point_cloud,
    ingest_directory,
    read_clusters,
    read_labels,
    read_meta,
    read_point_cloud,
    write_clusters,
    write_meta,
    write_volume_directory,
)
from rootscc.roi import LabeledVolume, reconstruct_labeled_volume
from rootscc.scc import ClusterSet, scc_cluster
from rootscc.volume import AcquisitionMeta, volume_from_array, voxels_to_world


def write_slices(path, n, rows, cols, rng=None):
    path.mkdir(exist_ok=True)
    rng = rng or np.random.default_rng(0)
    data = rng.normal(size=(n, rows, cols))
    for i in range(n):
        np.savetxt(path / f"slice_{i:03d}.csv", data[i], delimiter=",", fmt="%.17g")
    return data


def test_ingest_survey_geometry(tmp_path):
    meta = AcquisitionMeta()
    data = write_slices(tmp_path, 20, 512, 101)
    write_meta(meta, tmp_path / META_FILENAME)
    vol = ingest_directory(tmp_path)
    assert vol.dims == (20, 101, 512)
    assert np.array_equal(vol.data, data)
    assert vol.meta.dx == 0.03


def test_meta_keys(tmp_path):
    write_meta(AcquisitionMeta(), tmp_path / "m.json")
    d = json.loads((tmp_path / "m.json").read_text())
    for key in ("dt_ns", "dx_m", "dz_m", "velocity_m_per_ns", "samples", "traces", "slices"):
        assert key in d
    assert read_meta(tmp_path / "m.json") == AcquisitionMeta()


def test_missing_meta_names_the_file(tmp_path):
    write_slices(tmp_path, 2, 4, 3)
    with pytest.raises(DataError, match="meta.json"):
        ingest_directory(tmp_path)


def test_ragged_row_names_file_and_row(tmp_path):
    write_slices(tmp_path, 2, 4, 3)
    write_meta(AcquisitionMeta(samples_per_trace=4, traces_per_slice=3, slice_count=2),
               tmp_path / META_FILENAME)
    (tmp_path / "slice_001.csv").write_text("1,2,3\n4,5,6\n7,8\n1,1,1\n")
    with pytest.raises(DataError, match=r"slice_001\.csv.*row 3"):
        ingest_directory(tmp_path)


def test_unparseable_and_missing_and_duplicate(tmp_path):
    meta = AcquisitionMeta(samples_per_trace=4, traces_per_slice=3, slice_count=3)
    write_slices(tmp_path, 3, 4, 3)
    write_meta(meta, tmp_path / META_FILENAME)
    (tmp_path / "slice_002.csv").write_text("1,2,3\n4,x,6\n7,8,9\n1,1,1\n")
    with pytest.raises(DataError, match="slice_002"):
        ingest_directory(tmp_path)
    (tmp_path / "slice_002.csv").unlink()
    (tmp_path / "slice_003.csv").write_text("1,2,3\n4,5,6\n7,8,9\n1,1,1\n")
    with pytest.raises(DataError, match="missing slice ordinals"):
        ingest_directory(tmp_path)
    (tmp_path / "slice_3.txt").write_text("1,2,3\n4,5,6\n7,8,9\n1,1,1\n")
    with pytest.raises(DataError, match="duplicate"):
        ingest_directory(tmp_path)


def test_meta_mismatch(tmp_path):
    write_slices(tmp_path, 2, 4, 3)
    write_meta(AcquisitionMeta(samples_per_trace=5, traces_per_slice=3, slice_count=2),
               tmp_path / META_FILENAME)
    with pytest.raises(DataError, match="does not match"):
        ingest_directory(tmp_path)


def test_volume_directory_round_trip(tmp_path):
    meta = AcquisitionMeta(samples_per_trace=16, traces_per_slice=5, slice_count=3)
    data = np.random.default_rng(1).normal(size=(3, 16, 5)) * 1e3
    write_volume_directory(volume_from_array(data, meta), tmp_path)
    back = ingest_directory(tmp_path)
    assert np.array_equal(back.data, data)
    assert back.meta == meta


# --- labels ------------------------------------------------------------------

def test_all_zero_labels_header_only(tmp_path):
    lv = LabeledVolume(np.zeros((2, 3, 4), dtype=np.int64))
    export_labels(lv, tmp_path / "l.txt")
    lines = (tmp_path / "l.txt").read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("#rootscc-labels v1")


def test_single_voxel_line(tmp_path):
    labels = np.zeros((4, 6, 5), dtype=np.int64)
    labels[2, 4, 3] = 7         # z=2, y=4, x=3
    export_labels(LabeledVolume(labels), tmp_path / "l.txt")
    assert (tmp_path / "l.txt").read_text().splitlines()[1:] == ["2,3,4,7"]


def test_labels_round_trip(tmp_path):
    meta = AcquisitionMeta(samples_per_trace=30, traces_per_slice=20, slice_count=8)
    cs = scc_cluster(regions_of(random_tube_volume(np.random.default_rng(2), 8, 20, 30)))
    lv = reconstruct_labeled_volume(cs, (8, 20, 30), meta)
    export_labels(lv, tmp_path / "labels.txt")
    back = read_labels(tmp_path / "labels.txt")
    assert np.array_equal(back.labels, lv.labels)
    assert back.multi_owner == lv.multi_owner
    assert back.spacing == lv.spacing
    text1 = (tmp_path / "labels.txt").read_text()
    export_labels(back, tmp_path / "again.txt")
    assert (tmp_path / "again.txt").read_text() == text1


def test_multi_owner_sidecar_round_trip(tmp_path):
    cs = scc_cluster(regions_of(topology_masks()))
    lv = reconstruct_labeled_volume(cs, (3, 10, 4))
    export_labels(lv, tmp_path / "labels.txt")
    assert (tmp_path / "labels.multi.txt").exists()
    back = read_labels(tmp_path / "labels.txt")
    assert back.multi_owner == lv.multi_owner and len(back.multi_owner) == 12


def test_labels_sorted_lexicographically(tmp_path):
    cs = scc_cluster(regions_of(random_tube_volume(np.random.default_rng(3), 6, 20, 30)))
    lv = reconstruct_labeled_volume(cs, (6, 20, 30))
    export_labels(lv, tmp_path / "l.txt")
    rows = [tuple(map(int, ln.split(",")[:3])) for ln in (tmp_path / "l.txt").read_text().splitlines()[1:]]
    assert rows == sorted(rows)


def test_unwritable_path():
    with pytest.raises(DataError):
        export_labels(LabeledVolume(np.zeros((1, 1, 1), dtype=np.int64)), "/nonexistent/dir/l.txt")


# --- point cloud -------------------------------------------------------------

def test_empty_point_cloud_header_only():
    text = format_point_cloud(ClusterSet(()), AcquisitionMeta())
    assert text.count("\n") == 1 and text.startswith("#rootscc-points v1")


def test_point_cloud_example_line():
    cs = scc_cluster([[make_region(0, 0, [(10, 100)])]])
    text = format_point_cloud(cs, AcquisitionMeta())
    assert text.splitlines()[1] == "0.300000,0.500000,0.000000,1"


def test_point_cloud_round_trip(tmp_path):
    meta = AcquisitionMeta(samples_per_trace=30, traces_per_slice=20, slice_count=8)
    cs = scc_cluster(regions_of(random_tube_volume(np.random.default_rng(4), 8, 20, 30)))
    export_point_cloud(cs, meta, tmp_path / "p.txt")
    pts = read_point_cloud(tmp_path / "p.txt")
    want = np.vstack([np.hstack([voxels_to_world(c.voxels(), meta),
                                 np.full((c.voxel_count, 1), c.cluster_id)]) for c in cs])
    assert pts.shape == want.shape
    # six decimals: every coordinate is reproduced to its printed precision
    assert np.abs(pts - want).max() <= 5e-7
    assert np.array_equal(pts[:, 3], want[:, 3])
    # ordering: cluster id, then voxel order
    assert np.all(np.diff(pts[:, 3]) >= 0)
    # the parsed values print back to the identical decimal text
    lines = (tmp_path / "p.txt").read_text().splitlines()[1:]
    assert [f"{x:.6f},{y:.6f},{z:.6f},{int(c)}" for x, y, z, c in pts] == lines


# --- clusters interchange ----------------------------------------------------

def test_clusters_round_trip(tmp_path):
    meta = AcquisitionMeta(samples_per_trace=4, traces_per_slice=10, slice_count=3)
    cs = scc_cluster(regions_of(topology_masks()))
    write_clusters(cs, meta, tmp_path / "c.json")
    back, meta2 = read_clusters(tmp_path / "c.json")
    assert meta2 == meta
    assert back.ids == cs.ids
    assert [c.voxel_set() for c in back] == [c.voxel_set() for c in cs]
    assert [(c.parent, c.split_ordinal, c.status) for c in back] == \
        [(c.parent, c.split_ordinal, c.status) for c in cs]
    assert [c.cluster_id for c in back.retired] == [2]
    assert back.provenance == cs.provenance


def test_bad_clusters_file(tmp_path):
    (tmp_path / "c.json").write_text('{"format": "other"}')
    with pytest.raises(DataError):
        read_clusters(tmp_path / "c.json")
    with pytest.raises(DataError):
        read_clusters(tmp_path / "missing.json")
