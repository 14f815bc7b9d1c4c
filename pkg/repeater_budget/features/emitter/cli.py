# repeater_budget/features/emitter/cli.py
import math
from typing import Optional

import typer

from ...utils import console as ui
from ...utils.config_loader import save_json_document
from ...utils.logger import good, info, log_event
from ..repeater.core import emitter_efficiency
from ..repeater.scenario import ChainInputs, load_scenario
from .core import (
    get_preset,
    load_presets,
    orientation_scaled_purcell,
    purcell_lifetime,
    table_defaults,
    table_row,
)


def register_commands(app: typer.Typer):
    app.command("budget", help="Emitter-to-fiber photon budget and lifetime under Purcell enhancement")(budget)


@ui.guarded
def budget(
    scenario: Optional[str] = typer.Option(None, "--scenario", help="Scenario JSON (emitter and chain)"),
    presets: Optional[str] = typer.Option(None, "--presets", help="Emitter preset overrides JSON"),
    emitter: Optional[str] = typer.Option(None, "--emitter", help="Preset name, e.g. SnV"),
    f_p: Optional[float] = typer.Option(None, "--f-p", help="Purcell factor"),
    beta_wg: Optional[float] = typer.Option(None, "--beta-wg"),
    beta_f: Optional[float] = typer.Option(None, "--beta-f"),
    alpha_deg: Optional[float] = typer.Option(None, "--alpha-deg", help="Dipole rotation from the ideal orientation"),
    table: bool = typer.Option(False, "--table", help="Add ideal/real rows for every preset"),
    out: Optional[str] = typer.Option(None, "--out", help="Report JSON"),
):
    """budget: beta_C, DW, lifetime and eta_emitter for one emitter."""
    scn = load_scenario(scenario)
    all_presets = load_presets(presets)
    base = scn.chain_inputs
    spec = get_preset(emitter, all_presets) if emitter else scn.emitter_spec(all_presets)
    inputs = ChainInputs(
        f_p=base.f_p if f_p is None else f_p,
        beta_wg=base.beta_wg if beta_wg is None else beta_wg,
        beta_f=base.beta_f if beta_f is None else beta_f,
        alpha_deg=base.alpha_deg if alpha_deg is None else alpha_deg,
    )
    f_p, beta_wg, beta_f, alpha_deg = inputs.f_p, inputs.beta_wg, inputs.beta_f, inputs.alpha_deg
    chain = inputs.chain(spec)
    f_eff = orientation_scaled_purcell(f_p, math.radians(alpha_deg))
    tau = purcell_lifetime(spec, f_eff)
    eta = emitter_efficiency(chain)
    bc, dw = chain.beta_c, chain.dw
    info(f"{spec.name}: tau0={spec.tau0 * 1e9:.4g} ns, dw0={spec.dw0:.4g}, xi={spec.xi:.5g}")
    ui.show_table(
        f"Photon budget ({spec.name})",
        ("F_P", "F_P eff", "beta_C", "DW", "tau [ns]", "beta_WG", "beta_F", "eta_emitter"),
        [(f_p, f_eff, bc, dw, tau * 1e9, beta_wg, beta_f, eta)],
    )

    out = ui.out(out)
    report = {
        "emitter": spec.to_document(),
        "f_p": f_p,
        "alpha_deg": alpha_deg,
        "f_p_effective": f_eff,
        "beta_c": bc,
        "dw": dw,
        "tau_ns": tau * 1e9,
        "beta_wg": beta_wg,
        "beta_f": beta_f,
        "eta_emitter": eta,
    }
    if table:
        d = table_defaults()
        rows = [table_row(s, d["f_p_ideal"], d["f_p_real"], d["beta_wg_ideal"], d["beta_wg_real"], d["beta_f"])
                for s in all_presets.values()]
        cols = ("emitter", "tau0_ns", "tau_ideal_ns", "tau_real_ns", "dw0", "dw_ideal", "dw_real",
                "eta_ideal", "eta_real")
        ui.show_table("Ideal vs. fabricated cavity", cols, [[r[c] for c in cols] for r in rows])
        report["table"] = rows

    if out:
        save_json_document(out, report)
        good(f"wrote {out}")
    log_event("budget", emitter=spec.name, f_p=f_p, eta_emitter=eta)
    good(f"eta_emitter = {eta:.4f}")
