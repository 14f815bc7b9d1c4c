# repeater_budget/features/uncertainty/synthetic.py
"""
Stand-in expensive models for `uq e2e`, addressed as `builtin:<name>`.

`resonance` mimics a cavity whose Purcell factor falls off with emitter
displacement (dx, dz in nm) and dipole misalignment (degrees); displacements
beyond the mode region have no resonance at all and raise DomainError.
"""
import math
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from ...utils.config_loader import closest, load_feature_config
from ...utils.errors import DomainError, ValidationError
from .core import MvnSpec

PREFIX = "builtin:"
PEAK_PURCELL = 46.4
MODE_RADIUS_NM = 3.0
CUTOFF_NM = 12.0


def resonance(p) -> float:
    dx, angle_deg, dz = (float(x) for x in np.asarray(p, dtype=float).reshape(-1)[:3])
    if abs(dx) > CUTOFF_NM or abs(dz) > CUTOFF_NM:
        raise DomainError(f"no resonance found at dx={dx:.3g} nm, dz={dz:.3g} nm", field="p")
    falloff = 1.0 + (dx / MODE_RADIUS_NM) ** 2 + (dz / MODE_RADIUS_NM) ** 2
    return PEAK_PURCELL * math.cos(math.radians(angle_deg)) ** 2 / falloff


def sumsq(p) -> float:
    return float(np.sum(np.asarray(p, dtype=float) ** 2))


def linear(p) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    return float(np.dot(np.arange(1, p.size + 1), p))


def resonant(values) -> np.ndarray:
    """Samples with F_P <= 1 describe nonresonant cavities."""
    return np.asarray(values, dtype=float) > 1.0


# name -> (function, validity predicate or None)
BUILTINS: Dict[str, Tuple[Callable, Optional[Callable]]] = {
    "resonance": (resonance, resonant),
    "sumsq": (sumsq, None),
    "linear": (linear, None),
}


def resolve(name: str) -> Tuple[str, Callable, Optional[Callable]]:
    key = name[len(PREFIX):] if name.startswith(PREFIX) else name
    if key not in BUILTINS:
        hint = closest(key, BUILTINS)
        msg = f"unknown function '{name}'"
        if hint:
            msg += f" (did you mean '{PREFIX}{hint}'?)"
        raise ValidationError(msg, field="function")
    fn, validity = BUILTINS[key]
    return key, fn, validity


def default_study(key: str) -> Dict[str, Any]:
    """Configured device/training distributions and w_train for a builtin, if any."""
    cfg = load_feature_config("uncertainty")
    entry = cfg.get("devices", {}).get(key, {})
    out: Dict[str, Any] = {}
    if "device" in entry:
        out["device"] = MvnSpec.from_document(entry["device"], f"devices.{key}.device")
    if "training" in entry:
        out["training"] = MvnSpec.from_document(entry["training"], f"devices.{key}.training")
    if "w_train" in entry:
        out["w_train"] = int(entry["w_train"])
    return out
