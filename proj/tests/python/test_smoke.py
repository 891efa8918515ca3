import json

import numpy as np
import pytest

import iwkrr


def test_gram_matches_numpy():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(5, 2)), rng.normal(size=(4, 2))
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    np.testing.assert_allclose(iwkrr.gram(0.5, A, B), np.exp(-0.5 * d2), rtol=1e-13)


def test_wkrr_matches_dense_solve():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(40, 2)), rng.normal(size=40)
    w = rng.uniform(0.2, 2.0, size=40)
    lam, gamma = 1e-2, 0.5
    K = iwkrr.gram(gamma, X, X)
    c = np.linalg.solve(np.diag(w) @ K + 40 * lam * np.eye(40), w * y)
    model = iwkrr.fit_wkrr(X, y, w, gamma, lam)
    np.testing.assert_allclose(model.coefficients, c, rtol=1e-9)
    np.testing.assert_allclose(model.predict(X), K @ c, rtol=1e-9, atol=1e-12)


def test_nystrom_full_basis_equals_wkrr():
    data = iwkrr.simulate(n_train=120, n_test=50, seed=3)
    X, y, w = data["X_train"], data["y_train"], data["weights"]
    full = iwkrr.fit_nystrom_wkrr(X, y, w, list(range(120)), 0.5, 1e-2)
    exact = iwkrr.fit_wkrr(X, y, w, 0.5, 1e-2)
    np.testing.assert_allclose(full.predict(data["X_test"]), exact.predict(data["X_test"]), rtol=1e-7, atol=1e-9)


def test_sampling_and_weights():
    data = iwkrr.simulate(n_train=300, n_test=200, seed=4)
    K = iwkrr.gram(0.5, data["X_train"], data["X_train"])
    scores = iwkrr.exact_leverage_scores(K, 1e-2)
    assert scores.shape == (300,) and np.all((scores > 0) & (scores <= 1))
    idx = iwkrr.sample_als(scores, 50, seed=1)
    assert idx == sorted(set(idx)) and all(0 <= i < 300 for i in idx)
    w = iwkrr.rulsif_weights(data["X_train"], data["X_test"], data["X_train"], seed=2)
    assert np.all(w >= 0)
    exact = data["weights"]
    assert np.corrcoef(w, exact)[0, 1] > 0.5


def test_model_json_round_trip(tmp_path):
    data = iwkrr.simulate(n_train=50, n_test=10)
    model = iwkrr.fit_krr(data["X_train"], data["y_train"], 0.5, 0.1)
    path = tmp_path / "model.json"
    model.save(path)
    again = iwkrr.FittedModel.load(path)
    np.testing.assert_array_equal(again.predict(data["X_test"]), model.predict(data["X_test"]))
    assert again.kind == iwkrr.EstimatorKind.KRR


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        iwkrr.fit_krr(np.zeros((3, 2)), np.zeros(4), 0.5, 0.1)
    with pytest.raises(ValueError):
        iwkrr.geometric_grid(1.0, 1.0, 3)
    with pytest.raises(iwkrr.InputError):
        iwkrr.run_config(json.dumps({"simulation": {}, "bogus": 1}))


def test_run_config_simulate(tmp_path):
    cfg = {"mode": "simulate", "simulation": {"n_train": 30, "n_test": 20}, "output": str(tmp_path)}
    files = iwkrr.run_config(json.dumps(cfg))
    assert len(files) == 3
    assert (tmp_path / "train.csv").read_text().startswith("x1,x2,y\n")
