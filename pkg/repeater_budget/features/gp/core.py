# repeater_budget/features/gp/core.py
"""
Noise-free Gaussian-process regression with constant mean and Matern 5/2 kernel.

The kernel is k(p, p') = v0 * rho(r), r the lengthscale-scaled distance, so v0 is
both the kernel prefactor and the prior variance far from data. Hyperparameters
are fitted on the concentrated likelihood: for fixed lengthscales mu0 and v0
have closed-form maximizers, leaving a bounded search over log-lengthscales.
"""
import functools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from ...utils.config_loader import load_feature_config
from ...utils.errors import FitError, NotPositiveDefiniteError, ValidationError
from ...utils.logger import dim, log_event, warn
from ...utils.parallel import ordered_map

SQRT5 = math.sqrt(5.0)
LOG_2PI = math.log(2.0 * math.pi)
_PENALTY = 1e25


@functools.lru_cache(maxsize=None)
def _settings():
    cfg = {"w_hyp": 200, "n_starts": 8, "jitter_start": 1e-10, "jitter_max": 1e-4,
           "bound_scale": [1e-3, 1e3], "constant_variance": 1e-12}
    cfg.update(load_feature_config("gp"))
    return cfg


@dataclass(frozen=True)
class GpHyper:
    mu0: float
    v0: float
    lengthscales: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengthscales", tuple(float(x) for x in self.lengthscales))
        if not self.v0 > 0:
            raise ValidationError("prior variance v0 must be > 0", field="v0")
        if not self.lengthscales or any(not l > 0 for l in self.lengthscales):
            raise ValidationError("lengthscales must be > 0", field="lengthscales")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)


def _as_points(p, dim: int, field: str = "p") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        p = p[None, :]
    if p.ndim != 2 or p.shape[1] != dim:
        raise ValidationError(f"points must have {dim} coordinates, got shape {np.shape(p)}", field=field)
    return p


def matern_correlation(p: np.ndarray, q: np.ndarray, lengthscales: Sequence[float]) -> np.ndarray:
    ls = np.asarray(lengthscales, dtype=float)
    r = cdist(p / ls, q / ls)
    return (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-SQRT5 * r)


def matern52(p, p_prime, hyper: GpHyper):
    """Covariance between point sets; scalar for two single points."""
    single = np.ndim(p) == 1 and np.ndim(p_prime) == 1
    a = _as_points(p, hyper.dim, "p")
    b = _as_points(p_prime, hyper.dim, "p_prime")
    k = hyper.v0 * matern_correlation(a, b, hyper.lengthscales)
    return float(k[0, 0]) if single else k


def _factorize(r: np.ndarray, jitter: Optional[float] = None):
    """Cholesky of R + jitter*I; jitter grows x10 from the configured start on failure."""
    cfg = _settings()
    eye = np.eye(r.shape[0])
    if jitter is not None:
        try:
            return np.tril(cho_factor(r + jitter * eye, lower=True)[0]), jitter
        except LinAlgError as e:
            raise NotPositiveDefiniteError(f"kernel matrix not positive definite at jitter {jitter:g}") from e
    j = float(cfg["jitter_start"])
    while j <= float(cfg["jitter_max"]) * (1 + 1e-9):
        try:
            return np.tril(cho_factor(r + j * eye, lower=True)[0]), j
        except LinAlgError:
            j *= 10.0
    raise NotPositiveDefiniteError(
        f"kernel matrix not positive definite after jitter {cfg['jitter_max']:g}")


def _profile(chol: np.ndarray, y: np.ndarray) -> Tuple[float, float, np.ndarray]:
    """Closed-form mu0, v0 for a fixed correlation factor; also returns R^-1 (y - mu0)."""
    w = y.shape[0]
    ones = np.ones(w)
    ri1 = cho_solve((chol, True), ones)
    riy = cho_solve((chol, True), y)
    mu0 = float(ones @ riy / (ones @ ri1))
    alpha = riy - mu0 * ri1
    v0 = float((y - mu0) @ alpha / w)
    return mu0, v0, alpha


class GpModel:
    """Trained surrogate; immutable after construction, predict is safe to call concurrently."""

    def __init__(self, train_inputs, train_values, hyper: GpHyper, jitter: Optional[float] = None,
                 w_hyp: Optional[int] = None):
        self.train_inputs = _as_points(train_inputs, hyper.dim, "train_inputs").copy()
        self.train_values = np.asarray(train_values, dtype=float).reshape(-1).copy()
        if self.train_values.shape[0] != self.train_inputs.shape[0]:
            raise ValidationError("train_inputs and train_values differ in length", field="train_values")
        self.hyper = hyper
        self.w_hyp = int(w_hyp if w_hyp is not None else _settings()["w_hyp"])
        r = matern_correlation(self.train_inputs, self.train_inputs, hyper.lengthscales)
        self.chol, self.jitter = _factorize(r, jitter)
        self.alpha = cho_solve((self.chol, True), self.train_values - hyper.mu0)
        for a in (self.train_inputs, self.train_values, self.chol, self.alpha):
            a.flags.writeable = False

    @property
    def size(self) -> int:
        return self.train_values.shape[0]

    @property
    def kernel_factor(self) -> np.ndarray:
        """Lower factor Lk with Lk Lk^T = K (jitter included)."""
        return math.sqrt(self.hyper.v0) * self.chol

    def kernel_matrix(self) -> np.ndarray:
        r = matern_correlation(self.train_inputs, self.train_inputs, self.hyper.lengthscales)
        return self.hyper.v0 * (r + self.jitter * np.eye(self.size))

    def predict(self, p_star) -> Tuple[float, float]:
        mean, var = self.predict_many(np.atleast_2d(np.asarray(p_star, dtype=float)))
        return float(mean[0]), float(var[0])

    def predict_many(self, points) -> Tuple[np.ndarray, np.ndarray]:
        pts = _as_points(points, self.hyper.dim, "p_star")
        rs = matern_correlation(pts, self.train_inputs, self.hyper.lengthscales)  # (n, W)
        mean = self.hyper.mu0 + rs @ self.alpha
        w = solve_triangular(self.chol, rs.T, lower=True)
        var = self.hyper.v0 * (1.0 - np.sum(w * w, axis=0))
        return mean, np.maximum(var, 0.0)

    def mean(self, points) -> np.ndarray:
        return self.predict_many(points)[0]

    def variance(self, points) -> np.ndarray:
        return self.predict_many(points)[1]


def predict(model: GpModel, p_star) -> Tuple[float, float]:
    return model.predict(p_star)


def log_marginal_likelihood(model: GpModel) -> float:
    w = model.size
    resid = model.train_values - model.hyper.mu0
    quad = float(resid @ model.alpha) / model.hyper.v0
    logdet = w * math.log(model.hyper.v0) + 2.0 * float(np.sum(np.log(np.diag(model.chol))))
    return -0.5 * quad - 0.5 * logdet - 0.5 * w * LOG_2PI


def _concentrated_nll(log_ls: np.ndarray, p: np.ndarray, y: np.ndarray) -> float:
    try:
        r = matern_correlation(p, p, np.exp(log_ls))
        chol, _ = _factorize(r)
    except NotPositiveDefiniteError:
        return _PENALTY
    _, v0, _ = _profile(chol, y)
    if not v0 > 0:
        return _PENALTY
    w = y.shape[0]
    return 0.5 * w * (math.log(v0) + 1.0 + LOG_2PI) + float(np.sum(np.log(np.diag(chol))))


def default_bounds(p: np.ndarray, scale: Optional[Sequence[float]] = None) -> np.ndarray:
    """(N, 2) lengthscale bounds: scale x the per-dimension data range."""
    lo, hi = scale or _settings()["bound_scale"]
    span = np.ptp(p, axis=0)
    span = np.where(span > 0, span, 1.0)
    return np.column_stack([lo * span, hi * span])


def _fit_lengthscales(p, y, bounds, seed, n_starts, threads) -> np.ndarray:
    log_b = np.log(bounds)
    rng = np.random.default_rng(seed)
    starts = [np.log(np.clip(0.3 * (bounds[:, 0] * bounds[:, 1]) ** 0.5, bounds[:, 0], bounds[:, 1]))]
    starts += [rng.uniform(log_b[:, 0], log_b[:, 1]) for _ in range(max(0, n_starts - 1))]

    def run(x0):
        res = minimize(_concentrated_nll, x0, args=(p, y), method="L-BFGS-B", bounds=log_b)
        return float(res.fun), res.x

    results = ordered_map(run, starts, threads)
    # first index wins ties
    best = min(range(len(results)), key=lambda i: (results[i][0], i))
    return np.exp(results[best][1])


def fit(p_train, y, w_hyp: Optional[int] = None, bounds=None, seed: int = 0,
        previous: Optional[GpModel] = None, threads: int = 1, n_starts: Optional[int] = None) -> GpModel:
    """Maximum-likelihood GP on (p_train, y).

    Lengthscales are searched only while the data set holds at most w_hyp points;
    beyond that they are taken from `previous` (or fitted once on the first w_hyp
    points) and only mu0 and v0 are updated.
    """
    cfg = _settings()
    p = np.asarray(p_train, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    if p.ndim != 2 or p.shape[0] != y.shape[0]:
        raise ValidationError("inputs and values differ in length", field="y")
    if not np.all(np.isfinite(p)) or not np.all(np.isfinite(y)):
        raise ValidationError("training data contains non-finite values", field="y")
    if p.shape[0] < 2 or np.unique(p, axis=0).shape[0] < 2:
        raise FitError("GP fit needs at least 2 distinct training points", field="p_train")
    w_hyp = int(w_hyp if w_hyp is not None else cfg["w_hyp"])
    n_starts = int(n_starts if n_starts is not None else cfg["n_starts"])
    bounds = np.asarray(bounds, dtype=float) if bounds is not None else default_bounds(p)
    if bounds.shape != (p.shape[1], 2) or np.any(bounds[:, 0] <= 0) or np.any(bounds[:, 1] < bounds[:, 0]):
        raise ValidationError("bounds must be positive (lower, upper) pairs per dimension", field="bounds")

    if np.ptp(y) == 0.0:
        warn("GP fit: all training values equal, returning a constant model")
        ls = tuple(np.sqrt(bounds[:, 0] * bounds[:, 1]))
        v0 = float(cfg["constant_variance"]) * max(1.0, abs(float(y[0]))) ** 2
        return GpModel(p, y, GpHyper(float(y[0]), v0, ls), w_hyp=w_hyp)

    if p.shape[0] > w_hyp:
        if previous is not None and previous.hyper.dim == p.shape[1]:
            ls = np.asarray(previous.hyper.lengthscales)
        else:
            ls = _fit_lengthscales(p[:w_hyp], y[:w_hyp], bounds, seed, n_starts, threads)
        frozen = True
    else:
        ls = _fit_lengthscales(p, y, bounds, seed, n_starts, threads)
        frozen = False

    r = matern_correlation(p, p, ls)
    chol, jitter = _factorize(r)
    mu0, v0, _ = _profile(chol, y)
    v0 = max(v0, float(cfg["constant_variance"]))
    model = GpModel(p, y, GpHyper(mu0, v0, tuple(ls)), jitter=jitter, w_hyp=w_hyp)
    dim(f"GP fit: W={model.size}, mu0={mu0:.4g}, v0={v0:.4g}, l={np.round(ls, 5).tolist()}"
        + (" (lengthscales frozen)" if frozen else ""))
    log_event("gp_fit", w=model.size, mu0=mu0, v0=v0, lengthscales=list(map(float, ls)), frozen=frozen,
              jitter=jitter)
    return model
