# repeater_budget/features/bayes_opt/core.py
"""
Expected-improvement Bayesian optimization on a box.

The loop starts from a scrambled Halton design, then alternates GP fit,
acquisition argmax and one objective evaluation until the budget is spent.
Failed evaluations stay in the history but never enter the training set.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import minimize as scipy_minimize
from scipy.stats import norm, qmc

from ...utils.config_loader import load_feature_config
from ...utils.errors import BudgetError, ValidationError
from ...utils.logger import dim, good, log_event, warn
from ...utils.parallel import ordered_map
from ..gp.core import GpModel, fit

VARIANTS = ("standard", "raw")


def _settings():
    cfg = {"n_candidates": 4096, "n_polish": 8, "w_hyp": 200, "min_init": 4}
    cfg.update(load_feature_config("bayes_opt"))
    return cfg


@dataclass(frozen=True)
class BoDomain:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lower)
        hi = tuple(float(x) for x in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if not lo or len(lo) != len(hi):
            raise ValidationError("lower and upper bounds differ in dimension", field="domain")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if not a < b:
                raise ValidationError(f"lower < upper violated in dimension {i}", field=f"domain[{i}]")

    @classmethod
    def box(cls, dim: int, lo: float, hi: float) -> "BoDomain":
        return cls((lo,) * dim, (hi,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def bounds(self) -> np.ndarray:
        return np.column_stack([self.lower, self.upper])

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= np.asarray(self.lower)) and np.all(p <= np.asarray(self.upper)))

    def clip(self, p) -> np.ndarray:
        return np.clip(np.asarray(p, dtype=float), self.lower, self.upper)


@dataclass
class BoState:
    domain: BoDomain
    budget: int
    points: List[np.ndarray] = field(default_factory=list)
    values: List[float] = field(default_factory=list)  # NaN for failed evaluations
    f_min_trace: List[float] = field(default_factory=list)
    failures: int = 0
    suggestions: int = 0
    model: Optional[GpModel] = None

    @property
    def evaluations(self) -> int:
        return len(self.values)

    @property
    def remaining(self) -> int:
        return self.budget - self.evaluations

    @property
    def f_min(self) -> float:
        return self.f_min_trace[-1] if self.f_min_trace else math.inf

    @property
    def best_point(self) -> Optional[np.ndarray]:
        ok = [i for i, v in enumerate(self.values) if math.isfinite(v)]
        if not ok:
            return None
        return self.points[min(ok, key=lambda i: (self.values[i], i))]

    def training_set(self):
        ok = [i for i, v in enumerate(self.values) if math.isfinite(v)]
        p = np.array([self.points[i] for i in ok]).reshape(len(ok), self.domain.dim)
        return p, np.array([self.values[i] for i in ok])

    def record(self, point, value: float):
        self.points.append(np.asarray(point, dtype=float))
        self.values.append(value)
        prev = self.f_min
        self.f_min_trace.append(min(prev, value) if math.isfinite(value) else prev)

    def trace_rows(self):
        for i, (p, v, fm) in enumerate(zip(self.points, self.values, self.f_min_trace)):
            row = {"iter": i}
            row.update({f"p{j}": float(x) for j, x in enumerate(p)})
            row["value"] = float(v)
            row["f_min"] = float(fm)
            yield row

    def trace_columns(self):
        return ("iter",) + tuple(f"p{j}" for j in range(self.domain.dim)) + ("value", "f_min")


def ei_closed_form(mean, var, f_min, variant: str = "standard"):
    """EI from predictive mean and variance; the raw variant is E[min(0, f_min - f)] = a - EI."""
    if variant not in VARIANTS:
        raise ValidationError(f"unknown EI variant '{variant}'", field="variant")
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(var, dtype=float), 0.0))
    a = f_min - mean
    tiny = sigma <= 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(tiny, 0.0, a / np.where(tiny, 1.0, sigma))
        ei = np.where(tiny, np.maximum(a, 0.0), a * norm.cdf(z) + sigma * norm.pdf(z))
    ei = np.maximum(ei, 0.0)
    out = ei if variant == "standard" else a - ei
    return float(out) if np.ndim(out) == 0 else out


def expected_improvement(model: GpModel, p, f_min: float, variant: str = "standard"):
    """alpha_EI at one point (float) or at each row of a point array."""
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    mean, var = model.predict_many(np.atleast_2d(pts))
    out = ei_closed_form(mean, var, f_min, variant)
    return float(np.asarray(out)[0]) if single else out


def suggest(model: GpModel, domain: BoDomain, f_min: float, seed: int = 0,
            n_candidates: Optional[int] = None, n_polish: Optional[int] = None,
            variant: str = "standard", threads: int = 1) -> np.ndarray:
    """Approximate argmax of alpha_EI: random screening, then L-BFGS-B from the best candidates."""
    cfg = _settings()
    n_candidates = int(n_candidates or cfg["n_candidates"])
    n_polish = int(n_polish or cfg["n_polish"])
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    cand = rng.uniform(lo, hi, size=(n_candidates, domain.dim))

    chunks = np.array_split(np.arange(n_candidates), max(1, threads))
    scores = np.concatenate(ordered_map(
        lambda idx: np.atleast_1d(expected_improvement(model, cand[idx], f_min, variant)), chunks, threads))
    order = sorted(range(n_candidates), key=lambda i: (-scores[i], i))[:n_polish]

    def neg_acq(x):
        return -expected_improvement(model, x, f_min, variant)

    def polish(i):
        res = scipy_minimize(neg_acq, cand[i], method="L-BFGS-B", bounds=domain.bounds)
        x = domain.clip(res.x)
        val = -neg_acq(x)
        if not np.isfinite(val) or val < scores[i]:
            return scores[i], cand[i]
        return val, x

    polished = ordered_map(polish, order, threads)
    best = min(range(len(polished)), key=lambda k: (-polished[k][0], k))
    return domain.clip(polished[best][1])


def initial_design(domain: BoDomain, count: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points scaled to the box."""
    sampler = qmc.Halton(d=domain.dim, scramble=True, seed=seed)
    return qmc.scale(sampler.random(count), domain.lower, domain.upper)


def _evaluate(objective: Callable, p: np.ndarray) -> float:
    try:
        v = float(objective(p))
    except BudgetError as e:
        warn(f"objective failed at {np.round(p, 6).tolist()}: {e}")
        return math.nan
    except (ArithmeticError, ValueError, RuntimeError) as e:
        warn(f"objective failed at {np.round(p, 6).tolist()}: {type(e).__name__}: {e}")
        return math.nan
    if not math.isfinite(v):
        warn(f"objective returned {v} at {np.round(p, 6).tolist()}")
        return math.nan
    return v


def minimize(objective: Callable[[np.ndarray], float], domain: BoDomain, budget: int,
             init_count: Optional[int] = None, seed: int = 0, variant: str = "standard",
             threads: int = 1, w_hyp: Optional[int] = None,
             callback: Optional[Callable[[BoState], None]] = None) -> BoState:
    cfg = _settings()
    if init_count is None:
        init_count = min(budget, max(int(cfg["min_init"]), 2 * domain.dim))
    if not budget >= init_count >= 2:
        raise ValidationError(f"need budget >= init_count >= 2 (budget={budget}, init_count={init_count})",
                              field="init_count")
    if variant not in VARIANTS:
        raise ValidationError(f"unknown EI variant '{variant}'", field="variant")
    w_hyp = int(w_hyp if w_hyp is not None else cfg["w_hyp"])
    state = BoState(domain=domain, budget=int(budget))
    rng = np.random.default_rng([seed, 1])

    for p in initial_design(domain, init_count, seed):
        _step(state, objective, p, callback)

    it = 0
    while state.remaining > 0:
        it += 1
        p_train, y_train = state.training_set()
        if len(y_train) < 2 or np.unique(p_train, axis=0).shape[0] < 2:
            p = rng.uniform(domain.lower, domain.upper)
        else:
            state.model = fit(p_train, y_train, w_hyp=w_hyp, seed=seed + it, previous=state.model,
                              threads=threads)
            p = suggest(state.model, domain, state.f_min, seed=seed + it, variant=variant, threads=threads)
            state.suggestions += 1
            span = np.asarray(domain.upper) - np.asarray(domain.lower)
            if np.any(np.all(np.abs(np.asarray(state.points) - p) <= 1e-12 * span, axis=1)):
                p = rng.uniform(domain.lower, domain.upper)
        _step(state, objective, p, callback)

    log_event("bo_done", evaluations=state.evaluations, failures=state.failures, f_min=state.f_min)
    good(f"BO finished: f_min={state.f_min:.6g} after {state.evaluations} evaluations "
         f"({state.failures} failed)")
    return state


def _step(state: BoState, objective, p, callback):
    v = _evaluate(objective, p)
    if not math.isfinite(v):
        state.failures += 1
    state.record(p, v)
    dim(f"eval {state.evaluations}/{state.budget}: value={v:.6g} f_min={state.f_min:.6g}")
    if callback:
        callback(state)

