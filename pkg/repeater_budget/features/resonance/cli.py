# repeater_budget/features/resonance/cli.py
import os
from typing import Optional

import typer

from ...utils import console as ui
from ...utils.config_loader import load_csv, load_feature_config, save_json_document
from ...utils.errors import ValidationError
from ...utils.logger import good, info, log_event
from .core import fit_lorentzian

COLUMNS = ("frequency_hz", "transmission")


def register_commands(app: typer.Typer):
    app.command("resfit", help="Lorentzian fit of transmission samples: resonance frequency, width and Q")(resfit)


def _read_points(path: str):
    rows = load_csv(path)
    if rows and any(c not in rows[0] for c in COLUMNS):
        raise ValidationError(f"{path} needs columns {', '.join(COLUMNS)}", field="in")
    try:
        return [(float(r["frequency_hz"]), float(r["transmission"])) for r in rows]
    except (TypeError, ValueError) as e:
        raise ValidationError(f"non-numeric entry in {path}: {e}", field="in") from e


@ui.guarded
def resfit(
    data: str = typer.Option(..., "--in", help="CSV with frequency_hz, transmission"),
    no_offset: bool = typer.Option(False, "--no-offset", help="Freeze the baseline at 0"),
    out: Optional[str] = typer.Option(None, "--out", help="Fit JSON"),
):
    """resfit: fit T(nu) = offset + A / (1 + (2 (nu - nu0) / fwhm)^2)."""
    points = _read_points(data)
    info(f"fitting {len(points)} points from {data}")
    fit = fit_lorentzian(points, fit_offset=not no_offset)
    out = ui.out(out, load_feature_config("resonance").get("fit_out", "fit.json"))
    doc = fit.to_document()
    doc["fit_offset"] = not no_offset
    doc["n_points"] = len(points)
    save_json_document(out, doc)
    ui.show_table("Resonance", ("nu0 [THz]", "fwhm [GHz]", "Q", "amplitude", "offset", "residual"),
                  [(fit.nu0 * 1e-12, fit.fwhm * 1e-9, fit.q, fit.amplitude, fit.offset, fit.residual_norm)])
    log_event("resfit", data=os.path.abspath(data), out=os.path.abspath(out), q=fit.q)
    good(f"wrote {out} (Q={fit.q:.6g})")
