# repeater_budget/utils/logger.py
import datetime
import json
import os

from colorama import Fore, Style, init

init(autoreset=True)

LOG_ENV = "REPEATER_BUDGET_LOG"
_quiet = False


def set_quiet(flag: bool = True):
    global _quiet
    _quiet = bool(flag)


def _emit(tag, msg):
    if not _quiet:
        print(f"{tag}{Style.RESET_ALL} {msg}")


def info(msg): _emit(f"{Fore.CYAN}[i]", msg)
def good(msg): _emit(f"{Fore.GREEN}[+]", msg)
def warn(msg): _emit(f"{Fore.YELLOW}[!]", msg)
def error(msg): _emit(f"{Fore.RED}[-]", msg)
def dim(msg):
    if not _quiet:
        print(f"{Style.DIM}{msg}{Style.RESET_ALL}")


def log_event(etype, **meta):
    """Append one {time, type, meta} line to the JSONL run log, if one is configured."""
    path = os.environ.get(LOG_ENV)
    if not path:
        return
    entry = {
        "time": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "type": etype,
        "meta": meta,
    }
    try:
        with open(path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry, default=str) + "\n")
    except Exception as e:
        error(f"Write log failed: {e}")
