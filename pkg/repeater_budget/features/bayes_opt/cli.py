# repeater_budget/features/bayes_opt/cli.py
import os
from typing import Optional

import typer

from ...utils import console as ui
from ...utils.config_loader import load_feature_config, save_csv
from ...utils.errors import ValidationError
from ...utils.logger import good, info, log_event
from . import objectives
from .core import VARIANTS, minimize

bo_app = typer.Typer(help="Expected-improvement Bayesian optimization", no_args_is_help=True)


def register_commands(app: typer.Typer):
    app.add_typer(bo_app, name="bo")


@bo_app.command("run")
@ui.guarded
def run(
    objective: str = typer.Option("builtin:quadratic", "--objective", help="builtin:quadratic | abs | branching"),
    dim: int = typer.Option(2, "--dim"),
    budget: int = typer.Option(60, "--budget"),
    init: Optional[int] = typer.Option(None, "--init", help="Initial design size; default max(4, 2*dim)"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides the global --seed"),
    ei_variant: str = typer.Option("standard", "--ei-variant", help="standard | raw"),
    preset: str = typer.Option("SnV", "--preset", help="Emitter for builtin:branching"),
    f_p: float = typer.Option(46.4, "--f-p", help="Purcell factor for builtin:branching"),
    dw_target: float = typer.Option(0.98, "--dw-target", help="Target DW for builtin:branching"),
    out: Optional[str] = typer.Option(None, "--out", help="Trace CSV"),
):
    """bo run: minimize a builtin objective and write the evaluation trace."""
    if ei_variant not in VARIANTS:
        raise ValidationError(f"--ei-variant must be one of {VARIANTS}", field="ei_variant")
    fn, domain = objectives.resolve(objective, dim, preset=preset, f_p=f_p, dw_target=dw_target)
    s = ui.seed(seed)
    info(f"BO on {objective} (dim={domain.dim}, budget={budget}, seed={s})")
    state = minimize(fn, domain, budget, init_count=init, seed=s, variant=ei_variant, threads=ui.threads())
    out = ui.out(out, load_feature_config("bayes_opt").get("trace_out", "trace.csv"))
    save_csv(out, state.trace_rows(), state.trace_columns())
    best = state.best_point
    ui.show_table("BO result", ("f_min", "best point", "evaluations", "failed"),
                  [(state.f_min, "" if best is None else str([round(float(x), 6) for x in best]),
                    state.evaluations, state.failures)])
    log_event("bo_run", objective=objective, seed=s, f_min=state.f_min, out=os.path.abspath(out))
    good(f"wrote {out}")
