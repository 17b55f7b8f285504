import math
import warnings

import numpy as np
import pytest

import covspd


def random_spd(rng, m):
    a = rng.standard_normal((m, m))
    return a @ a.T + m * np.eye(m)


def test_tensor_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    t = rng.standard_normal((4, 7, 7)).astype(np.float32)
    covspd.save_tensor(tmp_path / "t.fmt1", t)
    back = covspd.load_tensor(tmp_path / "t.fmt1")
    assert back.dtype == np.float32
    assert np.array_equal(back, t)
    with open(tmp_path / "t.fmt1", "rb") as f:
        assert f.read(4) == b"FMT1"


def test_bad_tensor_file_is_a_data_error(tmp_path):
    (tmp_path / "bad.fmt1").write_bytes(b"NOPE")
    with pytest.raises(covspd.DataError):
        covspd.load_tensor(tmp_path / "bad.fmt1")


def test_resize_keeps_constant_maps():
    t = np.full((2, 7, 7), 3.5, dtype=np.float32)
    r = covspd.resize_feature_maps(t, 14, 14)
    assert r.shape == (2, 14, 14)
    assert np.all(r == 3.5)


def test_map_point():
    assert covspd.map_point(100, 50) == (6, 3)
    assert covspd.map_point(223, 223) == (13, 13)


def test_covariance_matches_numpy():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 50))
    assert np.allclose(covspd.compute_covariance(x), np.cov(x), atol=1e-12)
    t = rng.standard_normal((3, 7, 7)).astype(np.float32)
    assert np.allclose(covspd.tensor_covariance(t), np.cov(t.reshape(3, -1).astype(np.float64)), atol=1e-12)


def test_regularize_and_log():
    c = covspd.regularize(np.zeros((3, 3)), 1e-4)
    assert np.allclose(c, 1e-4 * np.eye(3))
    log = covspd.matrix_log(math.e * np.eye(4))
    assert np.allclose(log, np.eye(4), atol=1e-14)
    with pytest.raises(covspd.NumericalError):
        covspd.regularize(np.diag([1.0, -1.0]), 1e-4)


def test_distance_and_kernel():
    assert covspd.log_euclidean_distance(np.eye(4), math.e * np.eye(4)) == pytest.approx(2.0, rel=1e-14)
    assert covspd.rbf_kernel(4.0, 0.25) == pytest.approx(math.exp(-1.0))
    rng = np.random.default_rng(2)
    logs = [covspd.matrix_log(random_spd(rng, 3)) for _ in range(6)]
    g = covspd.gram_matrix(logs, 0.1)
    assert g.shape == (6, 6)
    assert np.array_equal(g, g.T)
    assert np.all(np.diag(g) == 1.0)
    assert np.linalg.eigvalsh(g).min() > -1e-8
    d = covspd.video_distance(logs[:2], logs[2:5])
    brute = np.mean([np.linalg.norm(a - b) for a in logs[:2] for b in logs[2:5]])
    assert d == pytest.approx(brute, rel=1e-12)


def test_fusion():
    assert covspd.preset_weights("oulu")["mouth"] == 0.2
    assert covspd.preset_weights("sfew")["eyes"] == 0.1
    scores = {"global": [0.2, 0.5, 0.3], "mouth": [0.6, 0.3, 0.1]}
    fused, predicted = covspd.fuse(scores, {"global": 1.0, "mouth": 0.0})
    assert fused == scores["global"]
    assert predicted == 1
    fused, predicted = covspd.fuse(scores, {}, "product")
    product = np.array([0.12, 0.15, 0.03])
    assert np.allclose(fused, product / product.sum(), atol=1e-15)
    assert predicted == 1
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        covspd.fuse({"global": [0.0, 1.0]}, {}, "product")
    assert any(issubclass(w.category, covspd.CovspdWarning) for w in caught)
    with pytest.raises(covspd.UsageError):
        covspd.preset_weights("nope")


def test_folds_are_subject_independent():
    subjects = [f"s{i}" for i in range(80)]
    folds = covspd.make_folds(subjects, 10, 7)
    assert sorted(folds) == sorted(subjects)
    counts = np.bincount(list(folds.values()))
    assert list(counts) == [8] * 10
    assert folds == covspd.make_folds(subjects, 10, 7)


def test_end_to_end_cross_validation(tmp_path):
    manifest = covspd.synthesize(tmp_path / "data", subjects=10, separation=0.5, seed=1)
    n = covspd.extract(manifest, tmp_path / "store", regions=["global"])
    assert n == 180
    report = covspd.cross_validate(
        tmp_path / "store", folds=5, unit="video", gamma_grid=[1e-1, 1e-3], cost_grid=[1e3]
    )
    assert report["total"] == 60
    assert len(report["fold_accuracy"]) == 5
    assert report["overall_accuracy"] >= 90.0
