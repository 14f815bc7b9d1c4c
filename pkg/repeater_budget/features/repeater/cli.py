# repeater_budget/features/repeater/cli.py
import dataclasses
import os
from typing import Optional

import typer

from ...utils import console as ui
from ...utils.config_loader import load_feature_config, save_csv, save_json_document
from ...utils.errors import ValidationError
from ...utils.logger import good, info, log_event
from ..emitter.core import load_presets
from .scenario import TAU_PH_MODES, SweepSpec, load_scenario
from .search import REPORT_COLUMNS, SWEEP_COLUMNS, eta_grid, minimize_cost, sweep_efficiency, sweep_rows


def register_commands(app: typer.Typer):
    app.command("sweep", help="Minimize the repeater cost over a grid of emitter efficiencies")(sweep)
    app.command("optimize", help="Optimal tree and station count at one emitter efficiency")(optimize)


@ui.guarded
def sweep(
    scenario: Optional[str] = typer.Option(None, "--scenario", help="Scenario JSON"),
    presets: Optional[str] = typer.Option(None, "--presets", help="Emitter preset overrides JSON"),
    eta_from: Optional[float] = typer.Option(None, "--eta-from"),
    eta_to: Optional[float] = typer.Option(None, "--eta-to"),
    steps: Optional[int] = typer.Option(None, "--steps"),
    tau_ph_mode: Optional[str] = typer.Option(None, "--tau-ph-mode", help="fixed | purcell"),
    full_trees_only: bool = typer.Option(False, "--full-trees-only", help="Skip trees with b1=0 or b2=0"),
    out: Optional[str] = typer.Option(None, "--out", help="CSV output path"),
):
    """sweep: C_min, N_ph and the optimal tree per efficiency, written as CSV."""
    scn = load_scenario(scenario)
    spec = scn.sweep or SweepSpec()
    if tau_ph_mode is not None and tau_ph_mode not in TAU_PH_MODES:
        raise ValidationError(f"--tau-ph-mode must be one of {TAU_PH_MODES}", field="tau_ph_mode")
    spec = SweepSpec(
        eta_from=spec.eta_from if eta_from is None else eta_from,
        eta_to=spec.eta_to if eta_to is None else eta_to,
        steps=spec.steps if steps is None else steps,
        tau_ph_mode=spec.tau_ph_mode if tau_ph_mode is None else tau_ph_mode,
        purcell_anchors=spec.purcell_anchors,
        purcell_interp=spec.purcell_interp,
        tau_cz_ratio=spec.tau_cz_ratio,
    )
    scn = dataclasses.replace(scn, sweep=spec)
    grid = eta_grid(spec.eta_from, spec.eta_to, spec.steps)
    timing = scn.timing(load_presets(presets))
    out = ui.out(out, load_feature_config("repeater").get("sweep_out", "sweep.csv"))
    n = ui.threads()
    info(f"sweeping {len(grid)} efficiencies ({spec.tau_ph_mode} tau_ph, {n} threads)")

    with ui.progress("sweep") as bar:
        task = bar.add_task("sweep", total=len(grid))
        points = sweep_efficiency(scn.repeater, grid, threads=n, full_trees_only=full_trees_only,
                                  timing=timing, progress=lambda: bar.advance(task))

    save_csv(out, sweep_rows(points), SWEEP_COLUMNS)
    failed = sum(1 for p in points if p.result is None)
    log_event("sweep", out=os.path.abspath(out), points=len(points), failed=failed)
    ui.show_table(
        "Sweep",
        ("eta", "C_min", "N_ph", "b", "m", "Gamma_tcs [MHz]"),
        [(p.eta_emitter, p.result.c_min, p.result.n_ph, str(p.result.best_tree), p.result.best_m,
          p.result.gamma_tcs * 1e-6) for p in points if p.result is not None],
    )
    good(f"wrote {out} ({len(points) - failed} ok, {failed} failed)")


@ui.guarded
def optimize(
    scenario: Optional[str] = typer.Option(None, "--scenario", help="Scenario JSON"),
    presets: Optional[str] = typer.Option(None, "--presets", help="Emitter preset overrides JSON"),
    eta: Optional[float] = typer.Option(None, "--eta", help="Emitter efficiency; default from the scenario chain"),
    full_trees_only: bool = typer.Option(False, "--full-trees-only"),
    out: Optional[str] = typer.Option(None, "--out", help="Report path (.json or .csv)"),
):
    """optimize: global cost minimum over trees and station counts."""
    scn = load_scenario(scenario)
    if eta is None:
        eta = scn.eta_emitter(load_presets(presets))
        info(f"eta_emitter from scenario chain: {eta:.5f}")
    res = minimize_cost(scn.repeater, eta, threads=ui.threads(), full_trees_only=full_trees_only)
    row = res.row()
    out = ui.out(out)
    ui.show_table("Optimum", REPORT_COLUMNS, [[row[c] for c in REPORT_COLUMNS]])
    if out:
        if out.endswith(".csv"):
            save_csv(out, [row], REPORT_COLUMNS)
        else:
            save_json_document(out, {"eta_emitter": eta, "scenario": scn.to_document(), "optimum": row})
        good(f"wrote {out}")
    log_event("optimize", eta_emitter=eta, **row)
    good(f"C_min={res.c_min:.6g} at b={res.best_tree}, m={res.best_m}, N_ph={res.n_ph}")
