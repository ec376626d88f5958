import math

import numpy as np
import pytest

from minav.detect import Detector
from minav.errors import ExperimentFailed
from minav.estimators import Target
from minav.sim import (
    ExperimentConfig,
    _check_failures,
    run_fusion_experiment,
    run_rmse_experiment,
    run_roc_experiment,
    run_trials,
    worker_count,
)


def _square(t):
    return t * t


def test_config_defaults():
    cfg = ExperimentConfig()
    np.testing.assert_array_equal(cfg.truth.r, [1.0, 1.0, 1.0])
    assert cfg.truth.psi == (0.0, 0.0, 0.0)
    assert len(cfg.schedule) == 30 and cfg.c == 1.0 and cfg.sigma == 0.1
    np.testing.assert_allclose(cfg.noise_cov, 0.01 * np.eye(3), rtol=1e-15)
    assert cfg.prior_target is Target.ORIENTATION


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(prior_sweep=(0.1, 0.0))
    with pytest.raises(ValueError):
        ExperimentConfig(sigma=-1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(hemisphere_reference="north")
    assert ExperimentConfig(prior_target="position").prior_target is Target.POSITION


def test_worker_count(monkeypatch):
    monkeypatch.setenv("MINAV_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(5) == 5
    assert worker_count(0) == 1


def test_run_trials_order():
    assert run_trials(_square, 10, workers=1) == [t * t for t in range(10)]
    assert run_trials(_square, 10, workers=2) == [t * t for t in range(10)]


def test_failure_policy():
    _check_failures(0, 100, "x")
    _check_failures(9, 1000, "x")
    with pytest.raises(ExperimentFailed):
        _check_failures(10, 1000, "x")


def test_rmse_experiment_deterministic_and_worker_independent():
    cfg = ExperimentConfig(trials=40, seed=3)
    a = run_rmse_experiment(cfg, workers=1)
    b = run_rmse_experiment(cfg, workers=1)
    c = run_rmse_experiment(cfg, workers=2)
    for other in (b, c):
        assert other.ml_rmse == a.ml_rmse
        np.testing.assert_array_equal(other.map_rmse, a.map_rmse)
    assert run_rmse_experiment(ExperimentConfig(trials=40, seed=4), workers=1).ml_rmse != a.ml_rmse


def test_rmse_curve_shape():
    curve = run_rmse_experiment(ExperimentConfig(trials=200, seed=1), workers=1)
    assert curve.block is Target.POSITION and curve.failures == 0
    assert np.all(np.diff(curve.crb) >= 0)
    assert curve.crb_perfect_prior <= curve.crb[0]
    assert curve.crb[-1] == pytest.approx(curve.crb_no_prior, rel=1e-6)
    assert curve.map_rmse[-1] == pytest.approx(curve.ml_rmse, rel=0.02)
    assert curve.map_rmse[0] < curve.ml_rmse
    rows = list(curve.rows())
    assert len(rows) == len(curve.sweep) and rows[0][1] == curve.ml_rmse


def test_rmse_position_prior():
    cfg = ExperimentConfig(trials=100, prior_target="position", prior_sweep=(0.01, 1e3))
    curve = run_rmse_experiment(cfg, workers=1)
    assert curve.block is Target.ORIENTATION
    assert curve.map_rmse[0] < curve.ml_rmse


def test_roc_experiment_small():
    cfg = ExperimentConfig(trials=150, seed=2)
    res = run_roc_experiment(cfg, h1_noise_scale=4.0, workers=1)
    assert set(res.auc) == set(Detector)
    for d in Detector:
        assert 0.0 <= res.auc[d] <= 1.0
        assert res.scores_h0[d].shape == (150,)
    assert res.auc[Detector.CHI_SQUARED] > 0.9
    with pytest.raises(ValueError):
        run_roc_experiment(cfg, h1_noise_scale=0.0)


def test_fusion_experiment_small():
    res = run_fusion_experiment(ExperimentConfig(trials=200, seed=5), workers=1)
    assert res.ml_errors.shape == res.map_errors.shape == (200,)
    assert res.median_ratio < 1.0
    rows = res.ecdf()
    assert len(rows) == 400
    for name in ("ml", "map"):
        sub = [r for r in rows if r[0] == name]
        assert all(a[1] <= b[1] and a[2] < b[2] for a, b in zip(sub, sub[1:]))
        assert sub[-1][2] == 1.0


def test_fusion_deterministic():
    cfg = ExperimentConfig(trials=30, seed=9)
    a = run_fusion_experiment(cfg, workers=1)
    b = run_fusion_experiment(cfg, workers=2)
    np.testing.assert_array_equal(a.map_errors, b.map_errors)
    np.testing.assert_array_equal(a.ml_errors, b.ml_errors)


def test_roc_auc_grows_with_noise_scale():
    cfg = ExperimentConfig(trials=1000, seed=11)
    a2 = run_roc_experiment(cfg, h1_noise_scale=2.0, workers=1).auc[Detector.CHI_SQUARED]
    a4 = run_roc_experiment(cfg, h1_noise_scale=4.0, workers=1).auc[Detector.CHI_SQUARED]
    assert a4 > a2


def test_noise_free_accel_prior_mean():
    from minav.estimators import orientation_prior_from_accel, simulate_accel
    from minav.geom import EulerAngles

    accel = simulate_accel(EulerAngles(0.0, 0.0, 0.0), 100, 0.0, np.random.default_rng(0))
    prior = orientation_prior_from_accel(accel, math.radians(0.1))
    assert prior.mean[0] == 0.0 and prior.mean[1] == 0.0


def test_roc_sweep_matches_single_runs():
    from minav.sim import run_roc_sweep

    cfg = ExperimentConfig(trials=50, seed=4)
    sweep = run_roc_sweep(cfg, (2.0, 3.0), workers=1)
    for scale in (2.0, 3.0):
        single = run_roc_experiment(cfg, h1_noise_scale=scale, workers=1)
        assert single.auc == sweep[scale].auc
