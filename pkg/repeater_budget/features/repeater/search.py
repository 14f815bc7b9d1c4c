# repeater_budget/features/repeater/search.py
"""
Exhaustive cost minimization over depth <= 2 trees and station counts.

Work is split per b0; each task evaluates every (b1, b2, m) for that b0 on numpy
grids and returns its best (cost, n_ph, m, b) key. Keys are reduced in b0 order,
so the optimum and its tie-break never depend on the thread count.
"""
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ...utils.errors import BudgetError, DomainError, EmptyFeasibleSetError, ValidationError
from ...utils.logger import dim, log_event, warn
from ...utils.parallel import ordered_map
from .core import (
    RepeaterScenario,
    TreeVector,
    cost,
    link_efficiency,
    secret_fraction_array,
)

REPORT_COLUMNS = ("b0", "b1", "b2", "m", "N_ph", "eta", "eta_e", "p_trans", "f", "gamma_tcs_hz", "cost")
SWEEP_COLUMNS = ("eta_emitter", "tau_ph_ns") + REPORT_COLUMNS + ("error",)

Key = Tuple[float, int, int, Tuple[int, int, int]]


@dataclass(frozen=True)
class SearchResult:
    c_min: float
    best_tree: TreeVector
    best_m: int
    n_ph: int
    gamma_tcs: float  # Hz
    f: float
    p_trans: float
    eta: float = math.nan
    eta_e: float = math.nan

    def row(self):
        b0, b1, b2 = self.best_tree.padded(3)
        return {"b0": b0, "b1": b1, "b2": b2, "m": self.best_m, "N_ph": self.n_ph, "eta": self.eta,
                "eta_e": self.eta_e, "p_trans": self.p_trans, "f": self.f,
                "gamma_tcs_hz": self.gamma_tcs, "cost": self.c_min}


@dataclass(frozen=True)
class SweepPoint:
    eta_emitter: float
    tau_ph: float
    result: Optional[SearchResult] = None
    error: Optional[str] = None


def tree_groups(n_ph_max: int, full_trees_only: bool = False, b0: Optional[int] = None):
    """Yield (b0, b1, b2_max) with b0 (1 + b1 (1 + b2)) <= n_ph_max for all b2 <= b2_max."""
    b0_values = [b0] if b0 is not None else range(1, n_ph_max + 1)
    for a in b0_values:
        budget = n_ph_max // a
        if budget < 1:
            continue
        if not full_trees_only:
            yield a, 0, 0
        for b1 in range(1, budget):
            b2_max = (budget - 1) // b1 - 1
            if b2_max < 0:
                break
            if full_trees_only and b2_max < 1:
                continue
            yield a, b1, b2_max


def _group_costs(scn: RepeaterScenario, mu, factor, f, b0: int, b1: int, b2: np.ndarray, m: np.ndarray):
    """Cost grid of shape (len(b2), len(m)) for trees [b0, b1, b2] and station counts m."""
    b2 = b2[:, None]
    one = 1.0 - mu
    r2 = 1.0 - mu ** b2
    r1 = 1.0 - (1.0 - one ** (b2 + 1)) ** b1
    eta_e = ((one + mu * r1) ** b0 - (mu * r1) ** b0) * (one + mu * r2) ** b1
    p_trans = eta_e ** (m + 1)
    inner = b1 * (1 + b2)
    t_tcs = b0 * (100 + inner) * scn.tau_ph + b0 * (3 + inner) * scn.tau_cz
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        c = t_tcs * factor / (f * p_trans)
    ok = np.isfinite(c) & (f > 0) & (p_trans > 0)
    return np.where(ok, c, np.inf)


def _best_for_b0(scn: RepeaterScenario, eta_emitter: float, b0: int, full_trees_only: bool) -> Optional[Key]:
    m = np.arange(1, scn.max_stations + 1)
    l0 = scn.total_distance / (m + 1.0)
    eta = link_efficiency(eta_emitter, scn.eta_det, l0, scn.attenuation_length)
    mu = 1.0 - np.atleast_1d(eta)
    f = secret_fraction_array(scn.eps_r, m)
    factor = m * scn.attenuation_length / (scn.tau_ph * scn.total_distance)
    best: Optional[Key] = None
    for a, b1, b2_max in tree_groups(scn.n_ph_max, full_trees_only, b0=b0):
        lo = 1 if full_trees_only else 0
        b2 = np.arange(lo, b2_max + 1) if b1 else np.zeros(1, dtype=int)
        c = _group_costs(scn, mu, factor, f, a, b1, b2, m)
        cmin = c.min()
        if not np.isfinite(cmin):
            continue
        for i, j in np.argwhere(c == cmin):
            bb = int(b2[i])
            key = (float(cmin), a * (1 + b1 * (1 + bb)), int(m[j]), (a, b1, bb))
            if best is None or key < best:
                best = key
    return best


def _result_from_key(scn: RepeaterScenario, eta_emitter: float, key: Key) -> SearchResult:
    tree = TreeVector(key[3])
    br = cost(scn, tree, key[2], eta_emitter)
    return SearchResult(c_min=br.cost, best_tree=tree, best_m=br.m, n_ph=br.n_ph,
                        gamma_tcs=br.gamma_tcs, f=br.f, p_trans=br.p_trans, eta=br.eta, eta_e=br.eta_e)


def _check_inputs(scn: RepeaterScenario, eta_emitter: float):
    if not 0.0 < eta_emitter <= 1.0:
        raise ValidationError("eta_emitter must lie in (0, 1]", field="eta_emitter")
    if scn.max_stations < 1:
        raise EmptyFeasibleSetError(
            f"l_km={scn.total_distance} leaves no room for a station at l_min_km={scn.l_min}",
            field="repeater.l_min_km")


def minimize_cost(scn: RepeaterScenario, eta_emitter: float, threads: int = 1,
                  full_trees_only: bool = False) -> SearchResult:
    """Global minimum of the cost over the enumerated (b, m) grid."""
    _check_inputs(scn, eta_emitter)
    b0_values = range(1, scn.n_ph_max + 1)
    keys = ordered_map(lambda a: _best_for_b0(scn, eta_emitter, a, full_trees_only), b0_values, threads)
    keys = [k for k in keys if k is not None]
    if not keys:
        raise EmptyFeasibleSetError(
            f"no feasible configuration at eta_emitter={eta_emitter}", field="eta_emitter")
    return _result_from_key(scn, eta_emitter, min(keys))


def brute_force_minimum(scn: RepeaterScenario, eta_emitter: float,
                        full_trees_only: bool = False) -> SearchResult:
    """Reference enumerator: one scalar cost() call per (b, m)."""
    _check_inputs(scn, eta_emitter)
    best: Optional[Key] = None
    for a, b1, b2_max in tree_groups(scn.n_ph_max, full_trees_only):
        b2_values = range(1 if full_trees_only else 0, b2_max + 1) if b1 else [0]
        for b2 in b2_values:
            for m in range(1, scn.max_stations + 1):
                try:
                    br = cost(scn, (a, b1, b2), m, eta_emitter)
                except DomainError:
                    continue
                if not math.isfinite(br.cost):
                    continue
                key = (br.cost, br.n_ph, m, (a, b1, b2))
                if best is None or key < best:
                    best = key
    if best is None:
        raise EmptyFeasibleSetError(
            f"no feasible configuration at eta_emitter={eta_emitter}", field="eta_emitter")
    return _result_from_key(scn, eta_emitter, best)


def eta_grid(eta_from: float, eta_to: float, steps: int) -> List[float]:
    if steps < 1:
        raise ValidationError("steps must be >= 1", field="steps")
    if steps == 1:
        return [float(eta_from)]
    return [float(x) for x in np.linspace(eta_from, eta_to, steps)]


def sweep_efficiency(scn: RepeaterScenario, grid: Iterable[float], threads: int = 1,
                     full_trees_only: bool = False,
                     timing: Optional[Callable[[float], Tuple[float, float]]] = None,
                     progress: Optional[Callable[[], None]] = None) -> List[SweepPoint]:
    """One SearchResult per grid value; failures are recorded and the sweep goes on.

    `timing(eta)` may return (tau_ph, tau_cz) in seconds for that point, which
    replaces the scenario's fixed emission and gate times.
    """
    points = []
    for eta in grid:
        point_scn = scn
        if timing is not None:
            tau_ph, tau_cz = timing(eta)
            point_scn = scn.replace(tau_ph=tau_ph, tau_cz=tau_cz)
        try:
            res = minimize_cost(point_scn, eta, threads=threads, full_trees_only=full_trees_only)
            points.append(SweepPoint(eta_emitter=eta, tau_ph=point_scn.tau_ph, result=res))
            dim(f"eta={eta:.4f}  C_min={res.c_min:.4g}  b={res.best_tree}  m={res.best_m}")
        except BudgetError as e:
            warn(f"sweep point eta={eta:.4f} failed: {e}")
            log_event("sweep_point_failed", eta=eta, error=e.to_json())
            points.append(SweepPoint(eta_emitter=eta, tau_ph=point_scn.tau_ph, error=e.dumps()))
        if progress:
            progress()
    return points


def sweep_rows(points: Sequence[SweepPoint]):
    for p in points:
        row = {k: "" for k in SWEEP_COLUMNS}
        row["eta_emitter"] = p.eta_emitter
        row["tau_ph_ns"] = p.tau_ph * 1e9
        if p.result is not None:
            row.update(p.result.row())
        else:
            row["error"] = p.error or ""
        yield row

