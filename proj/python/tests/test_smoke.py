import json

import numpy as np
import pytest

import physolver


def test_presets_and_config():
    assert {"heat", "reaction", "convection", "navier-stokes"} <= set(physolver.presets())
    cfg = json.loads(physolver.load_config(["preset=heat", "loss.w_r=2"]))
    assert cfg["loss"]["w_r"] == 2.0
    assert cfg["grid"]["x_count"] == 101


def test_unknown_key_raises():
    with pytest.raises(ValueError, match="known keys"):
        physolver.load_config(["loss.nope=1"])


def test_radical_inverse_matches_digit_reversal():
    assert physolver.radical_inverse(1, 2) == 0.5
    assert physolver.radical_inverse(6, 2) == 0.375
    assert physolver.radical_inverse(5, 3) == pytest.approx(7 / 9, abs=0)
    stamps = physolver.halton_stamps(4, 0.0, 1.0)
    assert stamps == sorted(stamps)


def test_metrics():
    ref = np.linspace(-1.0, 2.0, 12).reshape(-1, 1)
    assert physolver.relative_l2(ref, ref) == 0.0
    assert physolver.relative_l2(2 * ref, ref) == pytest.approx(1.0)
    assert physolver.relative_linf(-ref, ref) == pytest.approx(2.0)


def test_extrapolation_is_exact_for_linear_fields():
    a = np.arange(6.0).reshape(3, 2)
    frames = physolver.extrapolate_recursive(a, a + 0.5, 10)
    assert len(frames) == 10
    np.testing.assert_allclose(frames[-1], a + 0.5 * 11, atol=1e-12)


def test_heat_reference():
    coords = np.array([[0.1, 0.5], [0.0, 0.25]])
    u = physolver.reference_values("heat", coords)
    np.testing.assert_allclose(u[:, 0], [np.exp(-np.pi**2 * 0.1), np.sin(np.pi * 0.25)], rtol=1e-13)


def test_experiment_prediction_shape():
    exp = physolver.Experiment(["preset=heat", "grid.x_count=11"])
    theta = exp.initial_parameters(0)
    assert theta.shape == (exp.parameter_count,)
    grid = exp.grid(exp.held_out_times)
    assert grid.shape == (11, 2)
    assert exp.predict(theta, grid).shape == (11, 1)


def test_short_training_run(tmp_path):
    out = physolver.train(
        ["preset=heat", "grid.x_count=11", "model.embed=4", "model.ff_width=8",
         "model.output_hidden=8", "lbfgs.max_iterations=3"],
        str(tmp_path / "run"),
    )
    assert out["iterations"] <= 3
    assert "physics-solver/forward" in out["errors"]
    assert (tmp_path / "run" / "errors.csv").exists()
    assert (tmp_path / "run" / "config.snapshot").exists()


def test_verify_suite_passes():
    checks = physolver.verify()
    assert len(checks) == 5
    assert all(passed for _, passed, _ in checks)
