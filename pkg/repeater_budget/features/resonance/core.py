# repeater_budget/features/resonance/core.py
"""
Resonance frequency and quality factor from transmission samples or complex
eigenfrequencies.

The Lorentzian is parameterized by its full width at half maximum with an
explicit baseline: T(nu) = offset + amplitude / (1 + (2 (nu - nu0) / fwhm)^2).
Fits run on frequencies shifted to the data midpoint and divided by the data
span, and on transmission rescaled to [0, 1]; results are mapped back.
"""
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from ...utils.config_loader import load_feature_config
from ...utils.errors import ConvergenceError, DegenerateDataError, DomainError, ValidationError
from ...utils.logger import dim, log_event

MIN_POINTS = 4


def _settings():
    cfg = {"grid_centers": 201, "grid_widths": 121, "width_range": [1e-4, 10.0], "max_nfev": 2000,
           "xtol": 1e-15, "ftol": 1e-15, "gtol": 1e-10, "n_starts": 6, "start_separation": 3}
    cfg.update(load_feature_config("resonance"))
    return cfg


@dataclass(frozen=True)
class LorentzianFit:
    nu0: float  # Hz
    fwhm: float  # Hz
    amplitude: float
    offset: float
    q: float
    residual_norm: float

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValidationError("fwhm must be > 0", field="fwhm")
        if not self.q > 0:
            raise ValidationError("q must be > 0", field="q")

    def value(self, nu):
        return lorentzian(nu, self.nu0, self.fwhm, self.amplitude, self.offset)

    def to_document(self):
        return asdict(self)


def lorentzian(nu, nu0: float, fwhm: float, amplitude: float, offset: float = 0.0):
    u = 2.0 * (np.asarray(nu, dtype=float) - nu0) / fwhm
    out = offset + amplitude / (1.0 + u * u)
    return float(out) if np.ndim(out) == 0 else out


def _check_points(points) -> Tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError("points must be (frequency, transmission) pairs", field="points")
    if arr.shape[0] < MIN_POINTS:
        raise DegenerateDataError(f"need at least {MIN_POINTS} points, got {arr.shape[0]}", field="points")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("points must be finite", field="points")
    nu, t = arr[:, 0], arr[:, 1]
    if np.any(nu <= 0):
        raise ValidationError("frequencies must be > 0", field="points")
    if np.unique(nu).size < 2:
        raise DegenerateDataError("all points share one frequency", field="points")
    if np.ptp(t) == 0.0:
        raise DegenerateDataError("transmission is flat", field="points")
    return nu, t


def _heuristic_guess(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Peak position, value span and the half-height crossing width (scaled units)."""
    i = int(np.argmax(y))
    half = 0.5 * (y.max() + y.min())
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    above = xs[ys >= half]
    width = float(above.max() - above.min()) if above.size > 1 else 0.0
    if width <= 0.0:
        gaps = np.diff(xs)
        width = float(gaps[gaps > 0].min())
    return np.array([x[i], width, y.max() - y.min(), y.min()])


def _grid_starts(x: np.ndarray, y: np.ndarray, fit_offset: bool, cfg) -> List[np.ndarray]:
    """
    The n_starts best (x0, w) grid cells, amplitude/offset solved in closed form per cell.
    Chosen cells are at least start_separation grid steps apart in center or width.
    """
    centers = np.linspace(-1.0, 1.0, int(cfg["grid_centers"]))
    lo, hi = cfg["width_range"]
    widths = np.geomspace(lo, hi, int(cfg["grid_widths"]))
    u = 2.0 * (x[None, None, :] - centers[:, None, None]) / widths[None, :, None]
    basis = 1.0 / (1.0 + u * u)
    if fit_offset:
        bm = basis.mean(axis=2, keepdims=True)
        ym = y.mean()
        db = basis - bm
        var = np.sum(db * db, axis=2)
        amp = np.sum(db * (y - ym), axis=2) / np.where(var > 0, var, np.inf)
        off = ym - amp * bm[..., 0]
    else:
        amp = np.sum(basis * y, axis=2) / np.sum(basis * basis, axis=2)
        off = np.zeros_like(amp)
    resid = np.sum((off[..., None] + amp[..., None] * basis - y) ** 2, axis=2)
    sep = int(cfg["start_separation"])
    picked: List[Tuple[int, int]] = []
    for flat in np.argsort(resid, axis=None, kind="stable"):
        i, j = np.unravel_index(int(flat), resid.shape)
        if not np.isfinite(resid[i, j]):
            break
        if all(abs(i - a) >= sep or abs(j - b) >= sep for a, b in picked):
            picked.append((int(i), int(j)))
            if len(picked) >= int(cfg["n_starts"]):
                break
    return [np.array([centers[i], widths[j], amp[i, j], off[i, j]]) for i, j in picked]


def _residual(theta, x, y, fit_offset):
    x0, w, a = theta[:3]
    off = theta[3] if fit_offset else 0.0
    u = 2.0 * (x - x0) / w
    return off + a / (1.0 + u * u) - y


def fit_lorentzian(points: Sequence[Tuple[float, float]], initial_guess: Optional[Sequence[float]] = None,
                   fit_offset: bool = True) -> LorentzianFit:
    """Least-squares Lorentzian fit; initial_guess is (nu0, fwhm, amplitude, offset) in data units."""
    cfg = _settings()
    nu, t = _check_points(points)
    center = 0.5 * (nu.max() + nu.min())
    span = float(nu.max() - nu.min())
    t_span = float(np.ptp(t))
    # with a frozen baseline only the scale may change, not the zero
    t_lo = float(t.min()) if fit_offset else 0.0
    x = (nu - center) / span
    y = (t - t_lo) / t_span

    if initial_guess is not None:
        g = np.asarray(initial_guess, dtype=float)
        if g.shape != (4,) or not np.all(np.isfinite(g)) or g[1] <= 0:
            raise ValidationError("initial_guess must be finite (nu0, fwhm > 0, amplitude, offset)",
                                  field="initial_guess")
        starts = [np.array([(g[0] - center) / span, g[1] / span, g[2] / t_span, (g[3] - t_lo) / t_span])]
    else:
        starts = _grid_starts(x, y, fit_offset, cfg)
        if fit_offset:
            starts.append(_heuristic_guess(x, y))

    res, message = None, "no start point"
    for start in starts:
        trial = least_squares(_residual, start if fit_offset else start[:3], args=(x, y, fit_offset),
                              method="lm", xtol=cfg["xtol"], ftol=cfg["ftol"], gtol=cfg["gtol"],
                              max_nfev=int(cfg["max_nfev"]))
        message = trial.message
        if trial.status <= 0 or not np.all(np.isfinite(trial.x)) or trial.x[1] == 0.0:
            continue
        if res is None or trial.cost < res.cost:
            res = trial
    if res is None:
        raise ConvergenceError(f"Lorentzian fit did not converge: {message}", field="points")
    x0, w, a = res.x[:3]
    w = abs(w)

    nu0 = center + x0 * span
    fwhm = w * span
    amplitude = a * t_span
    offset = t_lo + res.x[3] * t_span if fit_offset else 0.0
    residual = t - lorentzian(nu, nu0, fwhm, amplitude, offset)
    if not nu0 > 0:
        raise ConvergenceError(f"fitted center {nu0:.6g} Hz is not a positive frequency", field="points")
    q = nu0 / fwhm
    dim(f"Lorentzian fit: nu0={nu0:.9g} Hz, fwhm={fwhm:.6g} Hz, Q={q:.6g} (best of {len(starts)} starts)")
    log_event("lorentzian_fit", nu0=nu0, fwhm=fwhm, q=q, nfev=int(res.nfev))
    return LorentzianFit(nu0=float(nu0), fwhm=float(fwhm), amplitude=float(amplitude), offset=float(offset),
                         q=float(q), residual_norm=float(np.linalg.norm(residual)))


def q_from_complex_frequency(omega: complex) -> float:
    """Q = |Re(omega) / Im(omega)| / 2 for a complex eigenfrequency."""
    omega = complex(omega)
    if omega.imag == 0.0:
        raise DomainError("purely real frequency has no finite Q", field="omega")
    return 0.5 * abs(omega.real / omega.imag)


def q_from_linewidth(nu0: float, fwhm: float) -> float:
    if not nu0 > 0 or not fwhm > 0:
        raise ValidationError("nu0 and fwhm must be > 0", field="fwhm")
    return nu0 / fwhm


def q_from_loss_rate(omega_c: float, kappa: float) -> float:
    """Q from a cavity angular frequency and its energy loss rate (same units)."""
    if not omega_c > 0 or not kappa > 0:
        raise ValidationError("omega_c and kappa must be > 0", field="kappa")
    return omega_c / kappa
