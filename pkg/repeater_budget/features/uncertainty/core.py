# repeater_budget/features/uncertainty/core.py
"""
Surrogate-based Monte Carlo propagation of manufacturing scatter.

Samples are drawn in batches of delta_n from the device distribution; batch b
uses its own Philox stream keyed by (seed, b), so a batch's draws depend only on
the seed and its index. Each batch is pushed through the surrogate mean and
variance predictors, invalid predictions are discarded, and the loop continues
while the relative Monte Carlo error is at least sigma_lb and fewer than n_min
valid samples have been collected.
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from ...utils.config_loader import check_keys, load_feature_config, require
from ...utils.errors import AllInvalidError, BudgetError, ValidationError
from ...utils.logger import dim, info, log_event, warn
from ...utils.parallel import ordered_map
from ..gp.core import GpModel, fit

TRAIN_STREAM = 2 ** 63  # stream index of training draws; MC batches use 0, 1, 2, ...
MAD_SCALE = 1.4826

Kappa = Union[float, Sequence[float]]


def _settings():
    cfg = {"delta_n": 1000, "n_min": 50000, "sigma_lb": 1e-3, "discard_warn": 0.05,
           "max_draws_factor": 20, "k_neighbors": 8, "threshold": 5.0, "mad_floor": 1e-12}
    cfg.update(load_feature_config("uncertainty"))
    return cfg


def stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for (seed, index)."""
    if seed < 0 or index < 0:
        raise ValidationError("seed and stream index must be >= 0", field="seed")
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(index)))


@dataclass(frozen=True)
class MvnSpec:
    mean: Tuple[float, ...]
    std: Tuple[float, ...]

    def __post_init__(self):
        mean = tuple(float(x) for x in np.atleast_1d(self.mean))
        std = tuple(float(x) for x in np.atleast_1d(self.std))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        if not mean or len(mean) != len(std):
            raise ValidationError("mean and std differ in dimension", field="std")
        if any(not s > 0 for s in std):
            raise ValidationError("standard deviations must be > 0", field="std")

    @property
    def dim(self) -> int:
        return len(self.mean)

    def scaled(self, kappa: Kappa) -> "MvnSpec":
        """Same mean, standard deviations multiplied by kappa (scalar or per dimension)."""
        k = np.broadcast_to(np.asarray(kappa, dtype=float), (self.dim,))
        if np.any(k <= 1.0):
            raise ValidationError("kappa must be > 1 in every dimension", field="kappa")
        return MvnSpec(self.mean, tuple(np.asarray(self.std) * k))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.dim))
        return np.asarray(self.mean) + z * np.asarray(self.std)

    @classmethod
    def from_document(cls, doc: Dict[str, Any], path: str = "device") -> "MvnSpec":
        return cls(tuple(require(doc, "mean", path)), tuple(require(doc, "std", path)))

    def to_document(self) -> Dict[str, Any]:
        return {"mean": list(self.mean), "std": list(self.std)}


@dataclass(frozen=True)
class McConfig:
    delta_n: int = 1000
    n_min: int = 50000
    sigma_lb: float = 1e-3
    discard_warn: float = 0.05
    max_draws: Optional[int] = None  # default: max_draws_factor * n_min

    def __post_init__(self):
        if int(self.delta_n) < 1:
            raise ValidationError("delta_n must be >= 1", field="delta_n")
        if int(self.n_min) < int(self.delta_n):
            raise ValidationError("n_min must be >= delta_n", field="n_min")
        if not self.sigma_lb > 0:
            raise ValidationError("sigma_lb must be > 0", field="sigma_lb")

    @property
    def draw_cap(self) -> int:
        return int(self.max_draws or _settings()["max_draws_factor"] * self.n_min)

    @classmethod
    def from_document(cls, doc: Dict[str, Any], path: str = "mc") -> "McConfig":
        check_keys(doc, ("delta_n", "n_min", "sigma_lb", "discard_warn", "max_draws"), path)
        cfg = _settings()
        return cls(
            delta_n=int(doc.get("delta_n", cfg["delta_n"])),
            n_min=int(doc.get("n_min", cfg["n_min"])),
            sigma_lb=float(doc.get("sigma_lb", cfg["sigma_lb"])),
            discard_warn=float(doc.get("discard_warn", cfg["discard_warn"])),
            max_draws=doc.get("max_draws"),
        )


@dataclass
class McReport:
    p16: float
    p50: float
    p84: float
    sigma_minus: float
    sigma_plus: float
    sigma_mc: float
    sigma_gp: float
    sigma_median: float
    n_total: int
    n_discarded: int
    n_draws: int
    batches: int
    stop_reason: str
    discard_fraction: float
    discard_warning: bool
    seed: int
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_document(self) -> Dict[str, Any]:
        return asdict(self)


def percentile(values, q):
    """Linear interpolation between closest ranks (type 7)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValidationError("percentile of an empty sample", field="values")
    return np.percentile(values, q, method="linear")


def make_training_set(device: MvnSpec, kappa: Kappa, w_train: int, seed: int = 0,
                      training: Optional[MvnSpec] = None) -> np.ndarray:
    """w_train draws from the enclosing distribution (sigma_train = kappa * sigma_device)."""
    if w_train < 0:
        raise ValidationError("w_train must be >= 0", field="w_train")
    dist = training if training is not None else device.scaled(kappa)
    if dist.dim != device.dim:
        raise ValidationError("training distribution dimension differs from the device", field="training")
    return dist.sample(stream(seed, TRAIN_STREAM), int(w_train))


def outlier_mask(points, values, k_neighbors: int = 8, threshold: float = 5.0,
                 mad_floor: float = 1e-12) -> np.ndarray:
    """True for points whose value strays from the median of their k nearest neighbours
    by more than threshold robust standard deviations of those neighbours."""
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    v = np.asarray(values, dtype=float).reshape(-1)
    if p.shape[0] != v.shape[0]:
        raise ValidationError("points and values differ in length", field="values")
    if not 1 <= k_neighbors < p.shape[0]:
        raise ValidationError(f"k_neighbors must lie in [1, {p.shape[0] - 1}]", field="k_neighbors")
    _, idx = cKDTree(p).query(p, k=k_neighbors + 1)
    out = np.zeros(p.shape[0], dtype=bool)
    for i in range(p.shape[0]):
        nbrs = [j for j in idx[i] if j != i][:k_neighbors]
        nv = v[nbrs]
        med = np.median(nv)
        scale = max(MAD_SCALE * np.median(np.abs(nv - med)), mad_floor)
        out[i] = abs(v[i] - med) > threshold * scale
    return out


def filter_outliers(points, values, k_neighbors: int = 8, threshold: float = 5.0,
                    mad_floor: float = 1e-12) -> Tuple[np.ndarray, np.ndarray, int]:
    p = np.asarray(points, dtype=float)
    v = np.asarray(values, dtype=float).reshape(-1)
    bad = outlier_mask(p, v, k_neighbors, threshold, mad_floor)
    return p[~bad], v[~bad], int(bad.sum())


def surrogate_predictors(model: GpModel) -> Tuple[Callable, Callable]:
    """(mean_fn, var_fn) sharing one predict_many call per batch."""
    cache: Dict[str, Any] = {"points": None, "out": None}

    def _predict(points):
        if cache["points"] is not points:
            cache["out"] = model.predict_many(points)
            cache["points"] = points
        return cache["out"]

    return (lambda points: _predict(points)[0]), (lambda points: _predict(points)[1])


def _mc_sigma(y: np.ndarray) -> float:
    """Standard error of the sample mean; exactly 0 for a constant sample."""
    if np.ptp(y) == 0.0:
        return 0.0
    return math.sqrt(float(np.var(y)) / y.size)


def _relative_error(sigma_mc: float, p50: float) -> float:
    if sigma_mc == 0.0:
        return 0.0
    if p50 == 0.0:
        return math.inf
    return sigma_mc / abs(p50)


def mc_analyze(mean_fn: Callable, var_fn: Callable, sample_dist: MvnSpec, cfg: McConfig,
               validity: Optional[Callable] = None, seed: int = 0,
               progress: Optional[Callable[[int], None]] = None) -> McReport:
    """Percentiles of the surrogate prediction under sample_dist with compound uncertainty."""
    y_batches, s_batches = [], []
    n_total = n_discarded = n_draws = batch = 0
    sigma_rel = math.inf
    p50 = 0.0
    stop = "n_min"
    while True:
        pts = sample_dist.sample(stream(seed, batch), cfg.delta_n)
        batch += 1
        y = np.asarray(mean_fn(pts), dtype=float).reshape(-1)
        s = np.asarray(var_fn(pts), dtype=float).reshape(-1)
        ok = np.isfinite(y) & np.isfinite(s)
        if validity is not None:
            ok &= np.asarray(validity(y), dtype=bool)
        n_draws += cfg.delta_n
        n_discarded += int((~ok).sum())
        if ok.any():
            y_batches.append(y[ok])
            s_batches.append(s[ok])
            n_total += int(ok.sum())
        if n_total == 0:
            if n_draws >= cfg.draw_cap:
                raise AllInvalidError(f"all {n_draws} samples were discarded as invalid", field="validity")
            continue
        y_tot = np.concatenate(y_batches)
        p50 = float(percentile(y_tot, 50))
        sigma_mc = _mc_sigma(y_tot)
        sigma_rel = _relative_error(sigma_mc, p50)
        if progress:
            progress(n_total)
        if sigma_rel < cfg.sigma_lb:
            stop = "sigma_lb"
            break
        if n_total >= cfg.n_min:
            stop = "n_min"
            break
        if n_draws >= cfg.draw_cap:
            stop = "max_draws"
            warn(f"MC stopped at the draw cap ({n_draws} draws, {n_total} valid)")
            break

    y_tot = np.concatenate(y_batches)
    s_tot = np.concatenate(s_batches)
    p16, p50, p84 = (float(x) for x in percentile(y_tot, [16, 50, 84]))
    sigma_mc = _mc_sigma(y_tot)
    sigma_gp = math.sqrt(max(float(percentile(s_tot, 50)), 0.0))
    discard_fraction = n_discarded / n_draws
    if discard_fraction > cfg.discard_warn:
        warn(f"{discard_fraction:.1%} of the samples were discarded as invalid")
    report = McReport(
        p16=p16, p50=p50, p84=p84,
        sigma_minus=p50 - p16, sigma_plus=p84 - p50,
        sigma_mc=sigma_mc, sigma_gp=sigma_gp,
        sigma_median=math.sqrt(sigma_mc ** 2 + sigma_gp ** 2),
        n_total=n_total, n_discarded=n_discarded, n_draws=n_draws, batches=batch,
        stop_reason=stop, discard_fraction=discard_fraction,
        discard_warning=discard_fraction > cfg.discard_warn, seed=int(seed),
    )
    dim(f"MC: {n_total} valid samples in {batch} batches, stopped by {stop}")
    log_event("mc_analyze", n_total=n_total, n_discarded=n_discarded, stop=stop, p50=p50,
              sigma_median=report.sigma_median)
    return report


def _safe_eval(fn: Callable, p) -> float:
    try:
        v = float(fn(p))
    except (BudgetError, ArithmeticError, ValueError, RuntimeError):
        return math.nan
    return v if math.isfinite(v) else math.nan


def train_surrogate(expensive_fn: Callable, device: MvnSpec, kappa: Kappa, w_train: int, seed: int = 0,
                    training: Optional[MvnSpec] = None, k_neighbors: Optional[int] = None,
                    threshold: Optional[float] = None, threads: int = 1) -> Tuple[GpModel, Dict[str, Any]]:
    """Training draws -> expensive model -> outlier filter -> GP fit; returns the model and the counts."""
    settings = _settings()
    k_neighbors = int(k_neighbors or settings["k_neighbors"])
    threshold = float(threshold or settings["threshold"])

    p_train = make_training_set(device, kappa, w_train, seed, training=training)
    values = np.array(ordered_map(lambda p: _safe_eval(expensive_fn, p), list(p_train), threads), dtype=float)
    good_eval = np.isfinite(values)
    n_failed = int((~good_eval).sum())
    if n_failed:
        warn(f"{n_failed} of {len(values)} expensive evaluations failed and were excluded")
    p_ok = p_train[good_eval].reshape(-1, device.dim)
    v_ok = values[good_eval]

    if p_ok.shape[0] > k_neighbors:
        p_ok, v_ok, removed = filter_outliers(p_ok, v_ok, k_neighbors, threshold, settings["mad_floor"])
    else:
        removed = 0
        warn(f"only {p_ok.shape[0]} training points, outlier filter skipped")
    info(f"training set: {w_train} drawn, {n_failed} failed, {removed} outliers removed, {len(v_ok)} used")

    model = fit(p_ok, v_ok, seed=seed, threads=threads)
    meta = {
        "w_train": int(w_train),
        "n_failed_expensive": n_failed,
        "n_outliers_removed": removed,
        "n_training_used": int(len(v_ok)),
        "gp": {"mu0": model.hyper.mu0, "v0": model.hyper.v0, "lengthscales": list(model.hyper.lengthscales)},
    }
    return model, meta


def end_to_end_study(expensive_fn: Callable, device: MvnSpec, kappa: Kappa, w_train: int, cfg: McConfig,
                     validity: Optional[Callable] = None, seed: int = 0, **options) -> McReport:
    """train_surrogate followed by mc_analyze on the device distribution."""
    model, meta = train_surrogate(expensive_fn, device, kappa, w_train, seed=seed, **options)
    mean_fn, var_fn = surrogate_predictors(model)
    report = mc_analyze(mean_fn, var_fn, device, cfg, validity=validity, seed=seed)
    report.meta.update(meta)
    return report
