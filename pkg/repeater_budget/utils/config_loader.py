# repeater_budget/utils/config_loader.py
import csv
import json
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

from thefuzz import process

from .errors import ConfigError, ValidationError

BASE = os.path.dirname(os.path.dirname(__file__))  # package root
FEATURES_DIR = os.path.join(BASE, "features")


def get_feature_config_path(feature_name):
    return os.path.join(FEATURES_DIR, feature_name, "config.json")


def load_feature_config(feature_name) -> Dict[str, Any]:
    path = get_feature_config_path(feature_name)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except Exception:
        return {}


def get_master_features_path():
    return os.path.join(BASE, "features.json")


def load_json_document(path: str) -> Dict[str, Any]:
    """Read a user-supplied JSON document; raises ConfigError naming the path."""
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}", field=path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}", field=path) from e
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}", field=path) from e


def save_json_document(path: str, data: Dict[str, Any]):
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def closest(name: str, choices: Iterable[str], cutoff: int = 60) -> Optional[str]:
    choices = list(choices)
    if not choices:
        return None
    hit = process.extractOne(name, choices, score_cutoff=cutoff)
    return hit[0] if hit else None


def check_keys(doc: Dict[str, Any], allowed: Iterable[str], path: str):
    """Reject keys not in `allowed`, suggesting the nearest valid one."""
    if not isinstance(doc, dict):
        raise ValidationError(f"{path} must be a JSON object", field=path)
    allowed = list(allowed)
    for key in doc:
        if key not in allowed:
            hint = closest(key, allowed)
            msg = f"unknown key '{key}'"
            if hint:
                msg += f" (did you mean '{hint}'?)"
            raise ValidationError(msg, field=f"{path}.{key}")


def require(doc: Dict[str, Any], key: str, path: str):
    if key not in doc:
        raise ValidationError(f"missing key '{key}'", field=f"{path}.{key}")
    return doc[key]


def in_units(value: float, scale: float) -> float:
    """SI value expressed in document units, rounded to 15 significant digits.

    Reading the result back with the inverse scale reproduces `value` for any
    document number with <= 15 significant digits.
    """
    return float(f"{value * scale:.15g}")


def save_csv(path: str, rows: Iterable[Dict[str, Any]], columns: Sequence[str]):
    """Write dict rows with a fixed column order; floats use repr so values survive a reload."""
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in
                             ((k, row.get(k, "")) for k in columns)})


def load_csv(path: str) -> List[Dict[str, str]]:
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}", field=path)
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))
    except (OSError, csv.Error, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}", field=path) from e
