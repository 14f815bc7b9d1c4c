import math

import numpy as np
import pytest

from repeater_budget.features.gp.core import (
    GpHyper,
    GpModel,
    fit,
    log_marginal_likelihood,
    matern52,
    predict,
)
from repeater_budget.features.gp.io import load_model, model_from_document, model_to_document, save_model
from repeater_budget.utils.errors import FitError, ValidationError


def dense_matern(a, b, v0, ls):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty((a.shape[0], b.shape[0]))
    for i, p in enumerate(a):
        for j, q in enumerate(b):
            r = math.sqrt(sum(((x - y) / l) ** 2 for x, y, l in zip(p, q, ls)))
            out[i, j] = v0 * (1 + math.sqrt(5) * r + 5 * r * r / 3) * math.exp(-math.sqrt(5) * r)
    return out


def dense_predict(model, p_star):
    h = model.hyper
    k = model.kernel_matrix()
    ks = dense_matern(model.train_inputs, np.atleast_2d(p_star), h.v0, h.lengthscales)[:, 0]
    mean = h.mu0 + ks @ np.linalg.solve(k, model.train_values - h.mu0)
    var = h.v0 - ks @ np.linalg.solve(k, ks)
    return mean, max(var, 0.0)


@pytest.fixture
def model_1d():
    p = np.array([[0.0], [1.0], [2.5]])
    y = np.array([0.3, -0.4, 1.1])
    return GpModel(p, y, GpHyper(mu0=0.2, v0=1.7, lengthscales=(0.8,)))


@pytest.fixture
def model_2d(rng):
    p = rng.uniform(-1, 1, size=(12, 2))
    y = np.sin(3 * p[:, 0]) + p[:, 1] ** 2
    return GpModel(p, y, GpHyper(mu0=0.1, v0=0.9, lengthscales=(0.6, 1.3)))


def test_matern52_closed_form():
    h = GpHyper(mu0=0.0, v0=2.5, lengthscales=(1.0,))
    assert matern52([0.3], [0.3], h) == 2.5
    expected = 2.5 * (1 + math.sqrt(5) + 5 / 3) * math.exp(-math.sqrt(5))
    assert matern52([0.0], [1.0], h) == pytest.approx(expected, rel=1e-14)


def test_matern52_symmetry_and_dimensions(rng):
    h = GpHyper(mu0=0.0, v0=1.0, lengthscales=(0.5, 2.0, 1.0))
    for _ in range(20):
        p, q = rng.normal(size=3), rng.normal(size=3)
        assert matern52(p, q, h) == pytest.approx(matern52(q, p, h), rel=1e-14)
    with pytest.raises(ValidationError):
        matern52([0.0, 1.0], [0.0, 1.0], h)


def test_predict_matches_dense_oracle(model_1d, model_2d, rng):
    for model, points in ((model_1d, [[-0.5], [0.7], [1.9], [4.0]]), (model_2d, rng.uniform(-1.2, 1.2, (20, 2)))):
        for p in points:
            mean, var = predict(model, p)
            d_mean, d_var = dense_predict(model, p)
            assert mean == pytest.approx(d_mean, rel=1e-8, abs=1e-10)
            assert var == pytest.approx(d_var, rel=1e-8, abs=1e-8 * model.hyper.v0)


def test_predict_matches_dense_oracle_on_random_models():
    draws = np.random.default_rng(404)
    for _ in range(50):
        w = int(draws.integers(2, 21))
        dim = int(draws.integers(1, 4))
        # first coordinate on a jittered lattice keeps training points at least 0.5 apart
        p = np.column_stack([np.arange(w) + draws.uniform(-0.25, 0.25, w), draws.uniform(0, 3, (w, dim - 1))])
        y = draws.normal(size=w)
        hyper = GpHyper(mu0=float(draws.normal()), v0=float(draws.uniform(0.1, 3.0)),
                        lengthscales=tuple(float(v) for v in draws.uniform(0.3, 1.5, dim)))
        model = GpModel(p, y, hyper)
        for q in np.column_stack([draws.uniform(-1, w, 5), draws.uniform(0, 3, (5, dim - 1))]):
            mean, var = predict(model, q)
            d_mean, d_var = dense_predict(model, q)
            assert mean == pytest.approx(d_mean, rel=1e-8, abs=1e-10)
            assert var == pytest.approx(d_var, rel=1e-8, abs=1e-8 * hyper.v0)


def test_predict_interpolates_training_data(model_1d):
    for p, y in zip(model_1d.train_inputs, model_1d.train_values):
        mean, var = model_1d.predict(p)
        assert mean == pytest.approx(y, abs=1e-8)
        assert var <= 2 * model_1d.jitter * model_1d.hyper.v0 + 1e-15


def test_predict_far_from_data_returns_the_prior(model_2d):
    mean, var = model_2d.predict([1e6, -1e6])
    assert mean == pytest.approx(model_2d.hyper.mu0, abs=1e-12)
    assert var == pytest.approx(model_2d.hyper.v0, rel=1e-12)
    _, variances = model_2d.predict_many(np.random.default_rng(3).uniform(-3, 3, (200, 2)))
    assert np.all(variances <= model_2d.hyper.v0 * (1 + 1e-12))
    assert np.all(variances >= 0)


def test_kernel_factorization_and_spectrum(model_2d):
    k = model_2d.kernel_matrix()
    lk = model_2d.kernel_factor
    assert np.allclose(lk @ lk.T, k, rtol=1e-8, atol=1e-12)
    assert np.allclose(k, k.T)
    assert np.linalg.eigvalsh(k).min() >= 0


def test_log_marginal_likelihood_dense(model_2d):
    k = model_2d.kernel_matrix()
    r = model_2d.train_values - model_2d.hyper.mu0
    _, logdet = np.linalg.slogdet(k)
    expected = -0.5 * r @ np.linalg.solve(k, r) - 0.5 * logdet - 0.5 * len(r) * math.log(2 * math.pi)
    assert log_marginal_likelihood(model_2d) == pytest.approx(expected, rel=1e-9)


def test_log_marginal_likelihood_single_point():
    m = GpModel([[0.5]], [2.0], GpHyper(mu0=1.0, v0=4.0, lengthscales=(1.0,)), jitter=1e-10)
    var = 4.0 * (1 + 1e-10)
    expected = -0.5 * 1.0 / var - 0.5 * math.log(2 * math.pi * var)
    assert log_marginal_likelihood(m) == pytest.approx(expected, rel=1e-12)


def test_jitter_raises_the_log_determinant(model_1d):
    h = model_1d.hyper
    logdets = [2 * np.sum(np.log(np.diag(GpModel(model_1d.train_inputs, model_1d.train_values, h,
                                                     jitter=j).chol)))
               for j in (1e-10, 1e-6, 1e-3, 1e-1)]
    assert all(b > a for a, b in zip(logdets, logdets[1:]))


def test_fit_constant_values():
    p = np.linspace(0, 1, 6)[:, None]
    model = fit(p, np.full(6, 3.5))
    assert model.hyper.mu0 == 3.5
    assert model.hyper.v0 > 0
    for x in (-2.0, 0.33, 7.0):
        assert model.predict([x])[0] == 3.5


def test_fit_recovers_the_lengthscale_of_a_gp_draw():
    rng = np.random.default_rng(2024)
    p = np.sort(rng.uniform(0, 10, 50))[:, None]
    k = dense_matern(p, p, 1.0, (0.5,)) + 1e-10 * np.eye(50)
    y = np.linalg.cholesky(k) @ rng.standard_normal(50)
    model = fit(p, y, seed=1)
    assert 0.25 <= model.hyper.lengthscales[0] <= 1.0


def test_fit_is_deterministic_and_respects_bounds(rng):
    p = rng.uniform(0, 1, (15, 2))
    y = np.cos(4 * p[:, 0]) * p[:, 1]
    a = fit(p, y, seed=5)
    b = fit(p, y, seed=5, threads=4)
    assert a.hyper == b.hyper
    bounds = np.array([[0.1, 0.2], [0.1, 0.2]])
    c = fit(p, y, bounds=bounds, seed=5)
    assert all(0.1 - 1e-12 <= l <= 0.2 + 1e-12 for l in c.hyper.lengthscales)


def test_lengthscales_freeze_beyond_w_hyp(rng):
    p = rng.uniform(0, 1, (30, 1))
    y = np.sin(6 * p[:, 0])
    bounds = np.array([[1e-2, 10.0]])
    first = fit(p[:10], y[:10], w_hyp=10, bounds=bounds, seed=0)
    later = fit(p, y, w_hyp=10, bounds=bounds, seed=0, previous=first)
    assert later.hyper.lengthscales == first.hyper.lengthscales
    assert later.size == 30
    alone = fit(p, y, w_hyp=10, bounds=bounds, seed=0)
    assert alone.hyper.lengthscales == first.hyper.lengthscales


def test_fit_errors():
    with pytest.raises(FitError):
        fit([[0.1]], [1.0])
    with pytest.raises(FitError):
        fit([[0.1], [0.1], [0.1]], [1.0, 2.0, 3.0])
    with pytest.raises(ValidationError):
        fit([[0.1], [0.2]], [1.0])
    with pytest.raises(ValidationError):
        fit([[0.1], [0.2]], [1.0, float("nan")])


def test_model_document_reload_predicts_identically(model_2d, tmp_path):
    path = tmp_path / "model.json"
    save_model(model_2d, str(path))
    again = load_model(str(path))
    pts = np.random.default_rng(9).uniform(-1, 1, (25, 2))
    m1, v1 = model_2d.predict_many(pts)
    m2, v2 = again.predict_many(pts)
    assert np.array_equal(m1, m2) and np.array_equal(v1, v2)
    doc = model_to_document(model_2d)
    doc["kind"] = "rbf"
    with pytest.raises(ValidationError):
        model_from_document(doc)
