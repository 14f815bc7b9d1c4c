# repeater_budget/__init__.py
"""Emitter budgets, repeater cost optimization, GP surrogates and fabrication uncertainty."""
from typing import Optional

import typer

from .feature_loader import register_features
from .utils import console as ui

__version__ = "0.1.0"


def create_app() -> typer.Typer:
    app = typer.Typer(
        name="budget",
        help="Quantum-emitter efficiency budgets for one-way repeaters.",
        no_args_is_help=True,
        add_completion=False,
    )

    @app.callback()
    def main(
        threads: Optional[int] = typer.Option(None, "--threads", envvar="REPEATER_BUDGET_THREADS",
                                              help="Worker threads (default: physical cores)"),
        seed: int = typer.Option(0, "--seed", help="Seed for every randomized command"),
        quiet: bool = typer.Option(False, "--quiet", "-q", help="Only errors and written files"),
        out: Optional[str] = typer.Option(None, "--out",
                                          help="Output path for commands given no --out of their own"),
    ):
        ui.configure(threads=threads, seed=seed, quiet=quiet, out=out)

    register_features(app)
    return app
