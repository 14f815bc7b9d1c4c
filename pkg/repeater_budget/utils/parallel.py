# repeater_budget/utils/parallel.py
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence

try:
    import psutil
except Exception:
    psutil = None

THREADS_ENV = "REPEATER_BUDGET_THREADS"


def resolve_threads(value: Optional[int] = None) -> int:
    """--threads, then REPEATER_BUDGET_THREADS, then physical cores, then 1."""
    if value is not None and int(value) > 0:
        return int(value)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
            if n > 0:
                return n
        except ValueError:
            pass
    if psutil:
        n = psutil.cpu_count(logical=False)
        if n:
            return int(n)
    return 1


def ordered_map(fn: Callable, items: Sequence, threads: int = 1) -> List:
    """Map `fn` over `items`; results always come back in input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
