# repeater_budget/features/repeater/core.py
"""
Closed-form performance model of the one-way quantum repeater.

Distances are kept in km, times in seconds. A chain of m stations splits the
total distance into m + 1 equal hops of length L0 = L / (m + 1).
"""
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from scipy.special import entr

from ...utils.config_loader import check_keys, in_units, load_feature_config
from ...utils.errors import DomainError, ValidationError
from ..emitter.core import EmitterSpec, beta_c, dw_purcell, orientation_scaled_purcell

LN2 = math.log(2.0)


@dataclass(frozen=True)
class TreeVector:
    """Branching vector [b0, ..., bd]; entries after the first zero must all be zero."""
    b: Tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(x) for x in self.b)
        object.__setattr__(self, "b", b)
        if not b:
            raise ValidationError("branching vector is empty", field="b")
        if b[0] < 1:
            raise ValidationError("b0 must be >= 1", field="b[0]")
        seen_zero = False
        for k, bk in enumerate(b):
            if bk < 0:
                raise ValidationError(f"b{k} must be >= 0", field=f"b[{k}]")
            if seen_zero and bk != 0:
                raise ValidationError(f"b{k} follows a zero level", field=f"b[{k}]")
            seen_zero = seen_zero or bk == 0

    @property
    def levels(self) -> Tuple[int, ...]:
        """b with trailing zeros removed (b0 is always kept)."""
        b = list(self.b)
        while len(b) > 1 and b[-1] == 0:
            b.pop()
        return tuple(b)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def padded(self, n: int = 3) -> Tuple[int, ...]:
        lv = self.levels
        if len(lv) > n:
            raise DomainError(f"tree depth {len(lv) - 1} exceeds {n - 1}", field="b")
        return lv + (0,) * (n - len(lv))

    def __str__(self):
        return "[" + ",".join(str(x) for x in self.b) + "]"


@dataclass(frozen=True)
class EfficiencyChain:
    beta_c: float
    beta_wg: float
    beta_f: float
    dw: float

    def __post_init__(self):
        for name in ("beta_c", "beta_wg", "beta_f", "dw"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]", field=name)

    @classmethod
    def from_purcell(cls, spec: EmitterSpec, f_p: float, beta_wg: float, beta_f: float,
                     alpha: float = 0.0) -> "EfficiencyChain":
        f_eff = orientation_scaled_purcell(f_p, alpha)
        return cls(beta_c=beta_c(f_eff), beta_wg=beta_wg, beta_f=beta_f, dw=dw_purcell(spec, f_eff))


SCENARIO_KEYS = ("l_km", "l_att_km", "tau_ph_ns", "tau_cz_ns", "eps_r", "eta_det", "l_min_km", "n_ph_max")


@dataclass(frozen=True)
class RepeaterScenario:
    total_distance: float = 1000.0  # km
    attenuation_length: float = 20.0  # km
    tau_ph: float = 10e-9  # s
    tau_cz: float = 100e-9  # s
    eps_r: float = 1e-4
    eta_det: float = 0.995
    l_min: float = 1.0  # km
    n_ph_max: int = 1000

    def __post_init__(self):
        checks = (
            (self.total_distance > 0, "l_km", "must be > 0"),
            (self.attenuation_length > 0, "l_att_km", "must be > 0"),
            (self.tau_ph > 0, "tau_ph_ns", "must be > 0"),
            (self.tau_cz >= 0, "tau_cz_ns", "must be >= 0"),
            (0 <= self.eps_r < 1, "eps_r", "must lie in [0, 1)"),
            (0 < self.eta_det <= 1, "eta_det", "must lie in (0, 1]"),
            (self.l_min > 0, "l_min_km", "must be > 0"),
            (int(self.n_ph_max) >= 1, "n_ph_max", "must be >= 1"),
        )
        for ok, key, msg in checks:
            if not ok:
                raise ValidationError(f"{key} {msg}", field=f"repeater.{key}")

    @property
    def max_stations(self) -> int:
        return int(math.floor(self.total_distance / self.l_min + 1e-9)) - 1

    def spacing(self, m):
        return self.total_distance / (np.asarray(m) + 1.0)

    def replace(self, **changes) -> "RepeaterScenario":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_document(cls, doc: Dict[str, Any], path: str = "repeater") -> "RepeaterScenario":
        check_keys(doc, SCENARIO_KEYS, path)
        base = scenario_defaults()
        base.update(doc)
        tau_ph_ns = float(base["tau_ph_ns"])
        tau_cz_ns = float(base["tau_cz_ns"]) if base.get("tau_cz_ns") is not None else 10.0 * tau_ph_ns
        return cls(
            total_distance=float(base["l_km"]),
            attenuation_length=float(base["l_att_km"]),
            tau_ph=tau_ph_ns * 1e-9,
            tau_cz=tau_cz_ns * 1e-9,
            eps_r=float(base["eps_r"]),
            eta_det=float(base["eta_det"]),
            l_min=float(base["l_min_km"]),
            n_ph_max=int(base["n_ph_max"]),
        )

    def to_document(self) -> Dict[str, Any]:
        return {
            "l_km": self.total_distance,
            "l_att_km": self.attenuation_length,
            "tau_ph_ns": in_units(self.tau_ph, 1e9),
            "tau_cz_ns": in_units(self.tau_cz, 1e9),
            "eps_r": self.eps_r,
            "eta_det": self.eta_det,
            "l_min_km": self.l_min,
            "n_ph_max": int(self.n_ph_max),
        }


def scenario_defaults() -> Dict[str, Any]:
    base = {"l_km": 1000.0, "l_att_km": 20.0, "tau_ph_ns": 10.0, "tau_cz_ns": None,
            "eps_r": 1e-4, "eta_det": 0.995, "l_min_km": 1.0, "n_ph_max": 1000}
    base.update(load_feature_config("repeater").get("scenario", {}))
    return base


@dataclass(frozen=True)
class CostBreakdown:
    cost: float
    eta: float
    eta_e: float
    p_trans: float
    f: float
    gamma_tcs: float  # Hz
    l0: float  # km
    n_ph: int
    tree: TreeVector = field(default=None)
    m: int = 0

    def row(self) -> Dict[str, Any]:
        b0, b1, b2 = self.tree.padded(3)
        return {"b0": b0, "b1": b1, "b2": b2, "m": self.m, "N_ph": self.n_ph, "eta": self.eta,
                "eta_e": self.eta_e, "p_trans": self.p_trans, "f": self.f,
                "gamma_tcs_hz": self.gamma_tcs, "cost": self.cost}


def as_tree(b) -> TreeVector:
    return b if isinstance(b, TreeVector) else TreeVector(tuple(b))


def photon_count(b) -> int:
    total, prod = 0, 1
    for bk in as_tree(b).levels:
        prod *= bk
        total += prod
    return total


def encoded_transmission(eta, b):
    """Probability that an encoded qubit crosses one hop, for single-photon transmission eta.

    R_k = 1 - [1 - (1 - mu)(1 - mu + mu R_{k+2})^{b_{k+1}}]^{b_k} is evaluated bottom-up with
    R_k = 0 and b_k = 0 beyond the last level, mu = 1 - eta.
    """
    lv = as_tree(b).levels
    d = len(lv) - 1
    eta = np.asarray(eta, dtype=float)
    mu = 1.0 - eta

    def bk(k):
        return lv[k] if k <= d else 0

    r = {d + 1: 0.0, d + 2: 0.0}
    for k in range(d, 0, -1):
        r[k] = 1.0 - (1.0 - (1.0 - mu) * (1.0 - mu + mu * r[k + 2]) ** bk(k + 1)) ** bk(k)
    r1, r2 = r.get(1, 0.0), r.get(2, 0.0)
    b0 = lv[0]
    eta_e = ((1.0 - mu + mu * r1) ** b0 - (mu * r1) ** b0) * (1.0 - mu + mu * r2) ** bk(1)
    return float(eta_e) if np.ndim(eta_e) == 0 else eta_e


def message_transmission(eta_e, m):
    return np.asarray(eta_e, dtype=float) ** (np.asarray(m) + 1) if np.ndim(eta_e) or np.ndim(m) \
        else float(eta_e) ** (int(m) + 1)


def link_efficiency(eta_emitter, eta_det, l0, l_att):
    """Single-photon transmission over one hop of length l0 (km)."""
    out = eta_det * eta_emitter * np.exp(-np.asarray(l0, dtype=float) / l_att)
    return float(out) if np.ndim(out) == 0 else out


def emitter_efficiency(chain: EfficiencyChain) -> float:
    return chain.beta_c * chain.beta_wg * chain.dw * chain.beta_f


def binary_entropy(x):
    """g(x) in bits, continuously extended to g(0) = g(1) = 0."""
    x = np.asarray(x, dtype=float)
    out = (entr(x) + entr(1.0 - x)) / LN2
    return float(out) if np.ndim(out) == 0 else out


def secret_fraction(eps_r: float, m: int) -> float:
    """Six-state secret-bit fraction with qubit error rate Q = 2 (1 + m) eps_r / 3."""
    if eps_r < 0:
        raise DomainError("eps_r must be >= 0", field="eps_r")
    q = 2.0 * (1 + m) * eps_r / 3.0
    if q >= 1.0:
        raise DomainError(f"qubit error rate Q={q:.4g} >= 1", field="eps_r")
    inner = (1.0 - 1.5 * q) / (1.0 - q)
    if not 0.0 <= inner <= 1.0:
        raise DomainError(f"entropy argument {inner:.4g} outside [0, 1]", field="eps_r")
    return 1.0 - binary_entropy(q) - q - (1.0 - q) * binary_entropy(inner)


def secret_fraction_array(eps_r: float, m) -> np.ndarray:
    """Vectorized secret_fraction; NaN where the error rate leaves the valid domain."""
    m = np.asarray(m, dtype=float)
    q = 2.0 * (1.0 + m) * eps_r / 3.0
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = (1.0 - 1.5 * q) / (1.0 - q)
        f = 1.0 - binary_entropy(np.clip(q, 0, 1)) - q - (1.0 - q) * binary_entropy(np.clip(inner, 0, 1))
    bad = (q >= 1.0) | (inner < 0.0) | (inner > 1.0)
    return np.where(bad, np.nan, f)


def tcs_time(b, tau_ph: float, tau_cz: float) -> float:
    """1/Gamma_tcs in seconds for a tree of depth <= 2."""
    b0, b1, b2 = as_tree(b).padded(3)
    inner = b1 * (1 + b2)
    return b0 * (100 + inner) * tau_ph + b0 * (3 + inner) * tau_cz


def tcs_rate(b, tau_ph: float, tau_cz: float) -> float:
    if not tau_ph > 0:
        raise ValidationError("tau_ph must be > 0", field="tau_ph")
    return 1.0 / tcs_time(b, tau_ph, tau_cz)


def cost(scn: RepeaterScenario, b, m: int, eta_emitter: float) -> CostBreakdown:
    """Cost C = m L_att / (Gamma_tcs f p_trans tau_ph L) with all intermediate quantities."""
    tree = as_tree(b)
    m = int(m)
    if m < 1:
        raise ValidationError("station count m must be >= 1", field="m")
    l0 = scn.total_distance / (m + 1)
    if l0 < scn.l_min * (1 - 1e-12):
        raise ValidationError(f"station spacing {l0:.4g} km is below l_min={scn.l_min} km", field="m")
    if not 0.0 <= eta_emitter <= 1.0:
        raise ValidationError("eta_emitter must lie in [0, 1]", field="eta_emitter")
    eta = link_efficiency(eta_emitter, scn.eta_det, l0, scn.attenuation_length)
    eta_e = encoded_transmission(eta, tree)
    p_trans = message_transmission(eta_e, m)
    f = secret_fraction(scn.eps_r, m)
    gamma = tcs_rate(tree, scn.tau_ph, scn.tau_cz)
    if f <= 0.0 or p_trans <= 0.0:
        c = math.inf
    else:
        c = (1.0 / (gamma * f * p_trans)) * (m * scn.attenuation_length) / (scn.tau_ph * scn.total_distance)
    return CostBreakdown(cost=c, eta=eta, eta_e=eta_e, p_trans=p_trans, f=f, gamma_tcs=gamma,
                         l0=l0, n_ph=photon_count(tree), tree=tree, m=m)


def parse_tree(text: str) -> TreeVector:
    """'[4,14,4]' or '4,14,4' -> TreeVector."""
    parts = [p for p in text.strip().strip("[]").replace(" ", "").split(",") if p]
    try:
        return TreeVector(tuple(int(p) for p in parts))
    except ValueError as e:
        raise ValidationError(f"cannot parse branching vector '{text}'", field="b") from e


def trees_equal(a: Sequence[int], b: Sequence[int]) -> bool:
    return as_tree(a).levels == as_tree(b).levels
