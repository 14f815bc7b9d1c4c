# repeater_budget/features/emitter/core.py
"""
Photophysics of diamond color centers under Purcell enhancement.

Rates follow a three-level picture: the ZPL rate splits into the cavity-resonant
branch gamma31 = xi * gamma_ZPL and the rest; only gamma31 is enhanced, by (1 + F_P).
The NV center is the xi = 1 case.
"""
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ...utils.config_loader import check_keys, closest, in_units, load_feature_config, load_json_document, require
from ...utils.errors import InfeasibleTargetError, ValidationError

# CODATA-2018
EPSILON_0 = 8.8541878128e-12  # F/m
HBAR = 1.054571817e-34  # J s
SPEED_OF_LIGHT = 299792458.0  # m/s
DEBYE = 3.33564e-30  # C m

DOCUMENT_KEYS = ("name", "tau0_ns", "dw0", "xi", "zpl_thz", "calibration")


@dataclass(frozen=True)
class EmitterSpec:
    name: str
    tau0: float  # s
    dw0: float
    xi: float = 1.0
    zpl_frequency: float = 484.3e12  # Hz

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ValidationError("tau0 must be > 0", field=f"{self.name}.tau0_ns")
        if not 0 < self.dw0 < 1:
            raise ValidationError("dw0 must lie in (0, 1)", field=f"{self.name}.dw0")
        if not 0 < self.xi <= 1:
            raise ValidationError("xi must lie in (0, 1]", field=f"{self.name}.xi")
        if not self.zpl_frequency > 0:
            raise ValidationError("zpl frequency must be > 0", field=f"{self.name}.zpl_thz")

    @classmethod
    def from_document(cls, doc: Dict[str, Any], path: str = "emitter") -> "EmitterSpec":
        check_keys(doc, DOCUMENT_KEYS, path)
        name = str(doc.get("name", path.split(".")[-1]))
        tau0 = float(require(doc, "tau0_ns", path)) * 1e-9
        dw0 = float(require(doc, "dw0", path))
        if "xi" in doc:
            xi = float(doc["xi"])
        elif "calibration" in doc:
            cal = doc["calibration"]
            check_keys(cal, ("f_p", "dw_target"), f"{path}.calibration")
            xi = calibrate_branching(dw0, float(require(cal, "f_p", f"{path}.calibration")),
                                     float(require(cal, "dw_target", f"{path}.calibration")))
        else:
            xi = 1.0
        zpl = float(doc.get("zpl_thz", 484.3)) * 1e12
        return cls(name=name, tau0=tau0, dw0=dw0, xi=xi, zpl_frequency=zpl)

    def to_document(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "tau0_ns": in_units(self.tau0, 1e9),
            "dw0": self.dw0,
            "xi": self.xi,
            "zpl_thz": in_units(self.zpl_frequency, 1e-12),
        }


@dataclass(frozen=True)
class PurcellContext:
    f_p: float
    alpha: float = 0.0  # rad, from the ideal dipole orientation

    def __post_init__(self):
        if not self.f_p >= 0:
            raise ValidationError("f_p must be >= 0", field="f_p")

    @property
    def effective_f_p(self) -> float:
        return orientation_scaled_purcell(self.f_p, self.alpha)


def _check_f_p(f_p):
    if np.any(np.asarray(f_p) < 0):
        raise ValidationError("f_p must be >= 0", field="f_p")


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def decay_rates(spec: EmitterSpec) -> Tuple[float, float, float]:
    """(gamma_zpl, gamma_psb, gamma31) in 1/s."""
    gamma_zpl = spec.dw0 / spec.tau0
    gamma_psb = (1.0 - spec.dw0) / spec.tau0
    return gamma_zpl, gamma_psb, spec.xi * gamma_zpl


def dw_purcell(spec: EmitterSpec, f_p):
    """Debye-Waller factor with the resonant ZPL branch enhanced by (1 + f_p)."""
    _check_f_p(f_p)
    f_p = np.asarray(f_p, dtype=float)
    x = spec.xi * spec.dw0 * f_p
    return _out((x + spec.dw0) / (x + 1.0))


def purcell_lifetime(spec: EmitterSpec, f_p):
    """Excited-state lifetime [s]; the total rate gains gamma31 * f_p."""
    _check_f_p(f_p)
    f_p = np.asarray(f_p, dtype=float)
    return _out(spec.tau0 / (1.0 + spec.xi * spec.dw0 * f_p))


def calibrate_branching(dw0: float, f_p: float, dw_target: float) -> float:
    """Branching fraction xi for which dw_purcell(dw0, xi, f_p) hits dw_target."""
    if not dw0 < dw_target < 1:
        raise InfeasibleTargetError(
            f"dw_target={dw_target} must lie in (dw0={dw0}, 1)", field="dw_target")
    if not f_p > 0:
        raise InfeasibleTargetError("calibration needs f_p > 0", field="f_p")
    return (dw_target - dw0) / (dw0 * f_p * (1.0 - dw_target))


def radiative_rate(omega: float, n: float, mu: float) -> float:
    """Spontaneous emission rate omega^3 n |mu|^2 / (3 pi eps0 hbar c^3)."""
    if not omega > 0:
        raise ValidationError("omega must be > 0", field="omega")
    if not n >= 1:
        raise ValidationError("refractive index must be >= 1", field="n")
    if not mu >= 0:
        raise ValidationError("dipole moment must be >= 0", field="mu")
    return omega ** 3 * n * mu ** 2 / (3.0 * math.pi * EPSILON_0 * HBAR * SPEED_OF_LIGHT ** 3)


def radiative_rate_from_frequency(nu: float, n: float, mu: float) -> float:
    return radiative_rate(2.0 * math.pi * nu, n, mu)


def orientation_scaled_purcell(f_p_ideal, alpha):
    _check_f_p(f_p_ideal)
    return _out(np.asarray(f_p_ideal, dtype=float) * np.cos(alpha) ** 2)


def beta_c(f_p):
    """Probability of emitting into the cavity mode."""
    _check_f_p(f_p)
    f_p = np.asarray(f_p, dtype=float)
    return _out(f_p / (f_p + 1.0))


def table_row(spec: EmitterSpec, f_p_ideal: float, f_p_real: float,
              beta_wg_ideal: float, beta_wg_real: float, beta_f: float) -> Dict[str, float]:
    dw_ideal = dw_purcell(spec, f_p_ideal)
    dw_real = dw_purcell(spec, f_p_real)
    return {
        "emitter": spec.name,
        "tau0_ns": spec.tau0 * 1e9,
        "tau_ideal_ns": purcell_lifetime(spec, f_p_ideal) * 1e9,
        "tau_real_ns": purcell_lifetime(spec, f_p_real) * 1e9,
        "dw0": spec.dw0,
        "dw_ideal": dw_ideal,
        "dw_real": dw_real,
        "eta_ideal": beta_c(f_p_ideal) * beta_wg_ideal * dw_ideal * beta_f,
        "eta_real": beta_c(f_p_real) * beta_wg_real * dw_real * beta_f,
    }


def load_presets(overrides_path: Optional[str] = None) -> Dict[str, EmitterSpec]:
    """Built-in presets from config.json, optionally merged with a user JSON document."""
    docs = dict(load_feature_config("emitter").get("presets", {}))
    if overrides_path:
        user = load_json_document(overrides_path)
        user = user.get("presets", user)
        if not isinstance(user, dict):
            raise ValidationError("presets document must be an object", field="presets")
        for name, doc in user.items():
            merged = dict(docs.get(name, {}))
            if "xi" in doc:
                merged.pop("calibration", None)
            merged.update(doc)
            docs[name] = merged
    presets = {}
    for name, doc in docs.items():
        doc = dict(doc)
        doc.setdefault("name", name)
        presets[name] = EmitterSpec.from_document(doc, path=f"presets.{name}")
    return presets


def get_preset(name: str, presets: Optional[Dict[str, EmitterSpec]] = None) -> EmitterSpec:
    presets = presets if presets is not None else load_presets()
    if name in presets:
        return presets[name]
    lowered = {k.lower(): k for k in presets}
    if name.lower() in lowered:
        return presets[lowered[name.lower()]]
    hint = closest(name, presets.keys())
    msg = f"unknown emitter preset '{name}'"
    if hint:
        msg += f" (did you mean '{hint}'?)"
    raise ValidationError(msg, field="emitter")


def table_defaults() -> Dict[str, float]:
    defaults = {"f_p_ideal": 270.2, "f_p_real": 46.4, "beta_wg_ideal": 0.987,
                "beta_wg_real": 0.929, "beta_f": 0.994}
    defaults.update(load_feature_config("emitter").get("table", {}))
    return defaults
