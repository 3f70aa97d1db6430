import json
import math

import numpy as np
import pytest

import semiflow_lab as sl


def test_models():
    assert set(sl.model_names()) == {"pure_shift", "riccati_scalar", "diagonal_linear", "hjm_constant_vol"}


def test_riccati_closed_form():
    r = sl.solve("riccati_scalar", T=0.5, n_steps=50, tol=1e-13)
    t = np.asarray(r["times"])
    want = 0.5 / (1.0 - 0.5 * t)
    assert np.max(np.abs(r["trajectory"][:, 0] - want)) < 1e-8
    assert not r["stopped_early"]


def test_shift_moves_curve_left():
    r = sl.solve("pure_shift", T=0.2, n_steps=20)
    xi = r["grid"]
    assert np.allclose(r["trajectory"][-1], 1.0 + np.exp(-(xi + 0.2)), atol=1e-6)


def test_jet_matches_derivative():
    j = sl.jet("riccati_scalar", T=0.5, n_steps=50, order=2)
    t = np.asarray(j["times"])
    assert np.max(np.abs(j["first"][0][:, 0] - 1.0 / (1.0 - 0.5 * t) ** 2)) < 1e-7
    assert np.max(np.abs(j["second"][0][0][:, 0] - 2.0 * t / (1.0 - 0.5 * t) ** 3)) < 1e-6


def test_fd_check_order():
    r = sl.fd_check("riccati_scalar", T=1.0, n_steps=200)
    assert r["best_error"] < 1e-5
    assert 1.7 <= r["observed_order"] <= 2.3


def test_certify_verdicts():
    assert sl.certify("pure_shift")["verdict"] == "certified"
    assert sl.certify("pure_shift", {"perturbation": 0.1})["verdict"] == "failed(tangency)"


def test_semiflow_defect_small():
    assert sl.semiflow_defect("diagonal_linear") < 1e-6


def test_errors_surface():
    with pytest.raises(sl.SemiflowError):
        sl.solve("no_such_model")
    with pytest.raises(sl.SemiflowError):
        sl.solve("riccati_scalar", n_steps=1)


def test_run_pipeline(tmp_path):
    cfg = {"model": {"name": "pure_shift"}, "numeric": {"n_steps": 20}}
    rc, err = sl.run("certify", cfg, output_dir=str(tmp_path))
    assert rc == 0, err
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["verdict"] == "certified"
