# repeater_budget/features/uncertainty/cli.py
import os
from typing import List, Optional

import numpy as np
import typer

from ...utils import console as ui
from ...utils.config_loader import load_csv, load_feature_config, load_json_document, save_json_document
from ...utils.errors import ValidationError
from ...utils.logger import good, info, log_event
from ..gp.core import fit
from ..gp.io import load_model, save_model
from . import synthetic
from .core import McConfig, McReport, MvnSpec, mc_analyze, surrogate_predictors, train_surrogate

uq_app = typer.Typer(help="Surrogate Monte Carlo uncertainty studies", no_args_is_help=True)


def register_commands(app: typer.Typer):
    app.add_typer(uq_app, name="uq")


def _mc_config(path: Optional[str]) -> McConfig:
    return McConfig.from_document(load_json_document(path) if path else {}, "mc")


def _report_out(out: Optional[str]) -> str:
    return ui.out(out, load_feature_config("uncertainty").get("report_out", "report.json"))


def _threshold_validity(valid_above: Optional[float]):
    if valid_above is None:
        return None
    return lambda y: np.asarray(y) > valid_above


def _run_mc(model, device: MvnSpec, cfg: McConfig, validity, seed: int) -> McReport:
    mean_fn, var_fn = surrogate_predictors(model)
    with ui.progress("uq") as bar:
        task = bar.add_task("uq", total=cfg.n_min)
        report = mc_analyze(mean_fn, var_fn, device, cfg, validity=validity, seed=seed,
                            progress=lambda n: bar.update(task, completed=min(n, cfg.n_min)))
    return report


def _show(report: McReport):
    ui.show_table(
        "MC report",
        ("P16", "P50", "P84", "sigma_MC", "sigma_GP", "sigma_median", "N", "discarded"),
        [(report.p16, report.p50, report.p84, report.sigma_mc, report.sigma_gp, report.sigma_median,
          report.n_total, report.n_discarded)],
    )


def _training_data(path: str):
    rows = load_csv(path)
    if not rows:
        raise ValidationError(f"{path} holds no rows", field="data")
    columns: List[str] = list(rows[0].keys())
    if "y" not in columns:
        raise ValidationError("training CSV needs a 'y' column", field="data.y")
    inputs = [c for c in columns if c != "y"]
    if not inputs:
        raise ValidationError("training CSV has no input columns", field="data")
    try:
        p = np.array([[float(r[c]) for c in inputs] for r in rows])
        y = np.array([float(r["y"]) for r in rows])
    except (TypeError, ValueError) as e:
        raise ValidationError(f"non-numeric entry in {path}: {e}", field="data") from e
    return p, y


@uq_app.command("train")
@ui.guarded
def train(
    data: str = typer.Option(..., "--data", help="CSV with input columns and a 'y' column"),
    out: Optional[str] = typer.Option(None, "--out", help="Model JSON (default model.json)"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides the global --seed"),
):
    """uq train: fit a Matern 5/2 GP to tabulated data."""
    p, y = _training_data(data)
    out = ui.out(out, "model.json")
    model = fit(p, y, seed=ui.seed(seed), threads=ui.threads())
    save_model(model, out)
    log_event("uq_train", data=os.path.abspath(data), n=int(len(y)), out=os.path.abspath(out))
    good(f"wrote {out} ({len(y)} points, lengthscales {[round(l, 6) for l in model.hyper.lengthscales]})")


@uq_app.command("study")
@ui.guarded
def study(
    model: str = typer.Option(..., "--model", help="Model JSON from `uq train` or `uq e2e`"),
    device: str = typer.Option(..., "--device", help="Device distribution JSON {mean, std}"),
    config: Optional[str] = typer.Option(None, "--config", help="MC settings JSON"),
    valid_above: Optional[float] = typer.Option(None, "--valid-above", help="Discard predictions <= this"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides the global --seed"),
    out: Optional[str] = typer.Option(None, "--out", help="Report JSON"),
):
    """uq study: Monte Carlo percentiles of a stored surrogate under a device distribution."""
    gp = load_model(model)
    dist = MvnSpec.from_document(load_json_document(device), "device")
    if dist.dim != gp.hyper.dim:
        raise ValidationError(f"device has {dist.dim} dimensions, model has {gp.hyper.dim}", field="device")
    cfg = _mc_config(config)
    s = ui.seed(seed)
    info(f"MC study on {model} (seed={s})")
    report = _run_mc(gp, dist, cfg, _threshold_validity(valid_above), s)
    report.meta["model"] = os.path.basename(model)
    out = _report_out(out)
    save_json_document(out, report.to_document())
    _show(report)
    log_event("uq_study", out=os.path.abspath(out), p50=report.p50, stop=report.stop_reason)
    good(f"wrote {out}")


@uq_app.command("e2e")
@ui.guarded
def e2e(
    function: str = typer.Option("builtin:resonance", "--function", help="builtin:resonance | sumsq | linear"),
    device: Optional[str] = typer.Option(None, "--device", help="Device distribution JSON; default per function"),
    kappa: Optional[List[float]] = typer.Option(None, "--kappa", help="Training std scale, once or per dimension"),
    w_train: Optional[int] = typer.Option(None, "--w-train", help="Training draws"),
    config: Optional[str] = typer.Option(None, "--config", help="MC settings JSON"),
    valid_above: Optional[float] = typer.Option(None, "--valid-above", help="Discard predictions <= this"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides the global --seed"),
    model_out: Optional[str] = typer.Option(None, "--model-out", help="Also write the trained model"),
    out: Optional[str] = typer.Option(None, "--out", help="Report JSON"),
):
    """uq e2e: training draws, expensive model, outlier filter, GP fit and Monte Carlo in one run."""
    key, fn, validity = synthetic.resolve(function)
    defaults = synthetic.default_study(key)
    settings = load_feature_config("uncertainty")
    if device:
        dist = MvnSpec.from_document(load_json_document(device), "device")
        training = None
    else:
        if "device" not in defaults:
            raise ValidationError(f"no default device for '{key}', pass --device", field="device")
        dist = defaults["device"]
        training = defaults.get("training")
    if kappa:
        training = None
        k = kappa[0] if len(kappa) == 1 else list(kappa)
    else:
        k = settings.get("kappa", 1.4)
    if training is not None and training.dim != dist.dim:
        training = None
    w = w_train if w_train is not None else defaults.get("w_train", settings.get("w_train", 209))
    if valid_above is not None:
        validity = _threshold_validity(valid_above)
    cfg = _mc_config(config)
    s = ui.seed(seed)
    n = ui.threads()
    info(f"end-to-end study on builtin:{key} (w_train={w}, seed={s}, {n} threads)")

    gp, meta = train_surrogate(fn, dist, k, int(w), seed=s, training=training, threads=n)
    if model_out:
        save_model(gp, model_out)
        good(f"wrote {model_out}")
    report = _run_mc(gp, dist, cfg, validity, s)
    report.meta.update(meta)
    report.meta["function"] = f"builtin:{key}"
    out = _report_out(out)
    save_json_document(out, report.to_document())
    _show(report)
    log_event("uq_e2e", function=key, out=os.path.abspath(out), p50=report.p50, stop=report.stop_reason)
    good(f"wrote {out} (discard fraction {report.discard_fraction:.2%})")
