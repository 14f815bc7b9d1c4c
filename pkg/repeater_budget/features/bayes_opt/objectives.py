# repeater_budget/features/bayes_opt/objectives.py
"""Builtin objectives addressed as `builtin:<name>` on the command line."""
from typing import Callable, Dict, Tuple

import numpy as np

from ...utils.config_loader import closest
from ...utils.errors import ValidationError
from ..emitter.core import EmitterSpec, dw_purcell, get_preset
from .core import BoDomain

PREFIX = "builtin:"


def quadratic(p) -> float:
    p = np.asarray(p, dtype=float)
    return float(np.sum((p - 0.3) ** 2))


def absolute(p) -> float:
    return float(np.sum(np.abs(np.asarray(p, dtype=float))))


def branching(preset: str = "SnV", f_p: float = 46.4, dw_target: float = 0.98) -> Callable:
    """Squared Debye-Waller mismatch as a function of the branching fraction xi (p[0])."""
    spec = get_preset(preset)

    def objective(p) -> float:
        xi = float(np.asarray(p, dtype=float).reshape(-1)[0])
        trial = EmitterSpec(spec.name, spec.tau0, spec.dw0, xi=xi, zpl_frequency=spec.zpl_frequency)
        return (dw_purcell(trial, f_p) - dw_target) ** 2

    return objective


def _quadratic(dim, **_):
    return quadratic, BoDomain.box(dim, 0.0, 1.0)


def _abs(dim, **_):
    return absolute, BoDomain.box(dim, -1.0, 1.0)


def _branching(dim, preset="SnV", f_p=46.4, dw_target=0.98, **_):
    if dim != 1:
        raise ValidationError("builtin:branching is one-dimensional", field="dim")
    return branching(preset, f_p, dw_target), BoDomain((1e-3,), (1.0,))


BUILTINS: Dict[str, Callable[..., Tuple[Callable, BoDomain]]] = {
    "quadratic": _quadratic,
    "abs": _abs,
    "branching": _branching,
}


def resolve(name: str, dim: int = 2, **options) -> Tuple[Callable, BoDomain]:
    """(objective, default domain) for a builtin name with or without the prefix."""
    key = name[len(PREFIX):] if name.startswith(PREFIX) else name
    if key not in BUILTINS:
        hint = closest(key, BUILTINS)
        msg = f"unknown objective '{name}'"
        if hint:
            msg += f" (did you mean '{PREFIX}{hint}'?)"
        raise ValidationError(msg, field="objective")
    if dim < 1:
        raise ValidationError("dim must be >= 1", field="dim")
    return BUILTINS[key](dim, **options)
