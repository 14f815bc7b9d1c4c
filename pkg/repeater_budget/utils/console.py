# repeater_budget/utils/console.py
import functools
import sys
from typing import Any, Dict, Iterable, Optional, Sequence

import typer
from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from .errors import BudgetError, error_json
from .logger import error, log_event, set_quiet
from .parallel import resolve_threads

console = Console(highlight=False)

# global options set by the application callback
STATE: Dict[str, Any] = {"threads": None, "seed": 0, "quiet": False, "out": None}


def configure(threads: Optional[int] = None, seed: int = 0, quiet: bool = False, out: Optional[str] = None):
    STATE["threads"] = threads
    STATE["out"] = out
    STATE["seed"] = int(seed)
    STATE["quiet"] = bool(quiet)
    set_quiet(quiet)


def threads() -> int:
    return resolve_threads(STATE["threads"])


def seed(value: Optional[int] = None) -> int:
    return int(value) if value is not None else int(STATE["seed"])


def out(value: Optional[str] = None, default: Optional[str] = None) -> Optional[str]:
    """Command --out, then the global --out, then default."""
    return value or STATE["out"] or default


def guarded(fn):
    """Run a command; BudgetError/OSError exit 1, anything else exits 2, both with error JSON on stderr."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except typer.Exit:
            raise
        except (BudgetError, OSError) as e:
            _fail(e, 1)
        except Exception as e:  # noqa: BLE001
            _fail(e, 2)
    return wrapper


def _fail(exc: BaseException, code: int):
    error(f"{type(exc).__name__}: {exc}")
    log_event("command_failed", error=error_json(exc), exit_code=code)
    typer.echo(error_json(exc), err=True)
    raise typer.Exit(code)


def show_table(title: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]):
    if STATE["quiet"]:
        return
    table = Table(title=title, title_style="bold cyan", header_style="bold")
    for c in columns:
        table.add_column(c, justify="right")
    for r in rows:
        table.add_row(*[fmt(v) for v in r])
    console.print(table)


def fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def progress(label: str):
    """Rich progress bar; disabled in quiet mode or when stdout is not a terminal."""
    return Progress(
        TextColumn(f"[cyan]{label}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        TimeElapsedColumn(),
        console=console,
        disable=STATE["quiet"] or not sys.stdout.isatty(),
        transient=True,
    )
