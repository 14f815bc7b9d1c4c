import math

import numpy as np
import pytest

from repeater_budget.features.bayes_opt import objectives
from repeater_budget.features.bayes_opt.core import (
    BoDomain,
    ei_closed_form,
    expected_improvement,
    initial_design,
    minimize,
    suggest,
)
from repeater_budget.features.emitter.core import calibrate_branching
from repeater_budget.features.gp.core import GpHyper, GpModel, fit
from repeater_budget.utils.errors import ValidationError


def test_ei_deterministic_limits():
    assert ei_closed_form(2.0, 0.0, 3.0) == pytest.approx(1.0)
    assert ei_closed_form(4.0, 0.0, 3.0) == 0.0
    assert ei_closed_form(3.0, 1.0, 3.0) == pytest.approx(0.398942, abs=1e-6)
    assert ei_closed_form(3.0, 1e-30, 2.0) == pytest.approx(0.0, abs=1e-14)


def test_ei_matches_monte_carlo():
    rng = np.random.default_rng(77)
    z = rng.standard_normal(1_000_000)
    for _ in range(20):
        mean, sigma, f_min = rng.normal(), rng.uniform(0.05, 2.0), rng.normal()
        f = mean + sigma * z
        for variant, sample in (("standard", np.maximum(0.0, f_min - f)), ("raw", np.minimum(0.0, f_min - f))):
            est, se = sample.mean(), sample.std() / math.sqrt(z.size)
            value = ei_closed_form(mean, sigma ** 2, f_min, variant)
            # a draw with no improvement in any sample has se = 0; floor at the sigma scale
            assert abs(value - est) <= 4 * max(se, sigma / math.sqrt(z.size))


def test_ei_is_nonnegative_on_a_model():
    p = np.array([[0.0], [0.4], [1.0]])
    model = GpModel(p, [1.0, 0.2, 0.7], GpHyper(mu0=0.5, v0=0.3, lengthscales=(0.3,)))
    values = expected_improvement(model, np.linspace(-0.5, 1.5, 301)[:, None], 0.2)
    assert np.all(values >= 0)
    assert expected_improvement(model, [0.4], 0.2) == pytest.approx(0.0, abs=1e-5)
    with pytest.raises(ValidationError):
        ei_closed_form(0.0, 1.0, 0.0, variant="upper")


def gap_model():
    x = np.array([0.0, 0.1, 0.2, 0.8, 0.9, 1.0])
    return fit(x[:, None], (x - 0.5) ** 2, seed=0), x


def test_suggest_fills_the_gap():
    model, x = gap_model()
    domain = BoDomain((0.0,), (1.0,))
    f_min = float(np.min((x - 0.5) ** 2))
    p = suggest(model, domain, f_min, seed=4)
    assert domain.contains(p)
    assert 0.2 < p[0] < 0.8
    audit = expected_improvement(model, np.linspace(0, 1, 1000)[:, None], f_min)
    assert expected_improvement(model, p, f_min) >= audit.max() - 1e-9


def test_suggest_is_deterministic_and_feasible():
    model, _ = gap_model()
    domain = BoDomain((0.0,), (1.0,))
    assert np.array_equal(suggest(model, domain, 0.09, seed=11), suggest(model, domain, 0.09, seed=11))
    flat = fit(np.linspace(0, 1, 5)[:, None], np.ones(5))
    assert domain.contains(suggest(flat, domain, 1.0, seed=2))


def test_initial_design_is_space_filling():
    domain = BoDomain((-1.0, 2.0), (1.0, 5.0))
    pts = initial_design(domain, 16, seed=3)
    assert pts.shape == (16, 2)
    assert all(domain.contains(p) for p in pts)
    assert np.array_equal(pts, initial_design(domain, 16, seed=3))
    assert np.unique(pts, axis=0).shape[0] == 16


def test_minimize_quadratic():
    fn, domain = objectives.resolve("builtin:quadratic", 2)
    state = minimize(fn, domain, 60, seed=7)
    assert state.f_min <= 1e-3
    assert state.evaluations == 60
    assert all(b <= a for a, b in zip(state.f_min_trace, state.f_min_trace[1:]))
    assert all(domain.contains(p) for p in state.points)
    assert state.f_min == min(state.values)


def test_minimize_absolute_value():
    fn, domain = objectives.resolve("abs", 1)
    state = minimize(fn, domain, 40, seed=1)
    assert state.f_min <= 0.01


def test_minimize_is_reproducible():
    fn, domain = objectives.resolve("quadratic", 2)
    a = minimize(fn, domain, 12, seed=5)
    b = minimize(fn, domain, 12, seed=5)
    assert np.array_equal(np.array(a.points), np.array(b.points))
    assert a.values == b.values


def test_budget_equal_to_init_is_pure_design():
    fn, domain = objectives.resolve("quadratic", 2)
    state = minimize(fn, domain, 6, init_count=6, seed=0)
    assert state.suggestions == 0
    assert np.allclose(np.array(state.points), initial_design(domain, 6, seed=0))


def test_failed_evaluations_are_excluded():
    def flaky(p):
        if p[0] > 0.7:
            raise RuntimeError("solver diverged")
        return float((p[0] - 0.3) ** 2)

    state = minimize(flaky, BoDomain((0.0,), (1.0,)), 15, init_count=5, seed=2)
    assert state.failures == sum(1 for v in state.values if math.isnan(v))
    assert state.failures >= 1
    p_train, y_train = state.training_set()
    assert np.all(np.isfinite(y_train)) and len(y_train) == 15 - state.failures
    assert math.isfinite(state.f_min)
    assert state.best_point[0] <= 0.7


def test_minimize_argument_errors():
    fn, domain = objectives.resolve("quadratic", 2)
    with pytest.raises(ValidationError):
        minimize(fn, domain, 3, init_count=4)
    with pytest.raises(ValidationError):
        minimize(fn, domain, 10, init_count=1)
    with pytest.raises(ValidationError):
        BoDomain((0.0, 1.0), (1.0, 1.0))


def test_branching_calibration_objective():
    fn, domain = objectives.resolve("builtin:branching", 1, preset="SnV", f_p=46.4, dw_target=0.98)
    state = minimize(fn, domain, 20, seed=0)
    assert abs(state.best_point[0] - calibrate_branching(0.6, 46.4, 0.98)) < 0.05


def test_unknown_objective_suggests_a_name():
    with pytest.raises(ValidationError, match="builtin:quadratic"):
        objectives.resolve("builtin:quadratik", 2)
    with pytest.raises(ValidationError):
        objectives.resolve("branching", 2)
