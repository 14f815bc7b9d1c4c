# repeater_budget/feature_loader.py
import importlib
import json
import os
from types import ModuleType
from typing import Dict, List, Optional

from .utils.config_loader import FEATURES_DIR, get_master_features_path
from .utils.logger import warn

PACKAGE = __name__.rsplit(".", 1)[0]

_cache: Dict[str, ModuleType] = {}


def list_enabled_features() -> List[str]:
    path = get_master_features_path()
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        # {"features": [{"module": "...", "enabled": true}, ...]}
        if "features" in data and isinstance(data["features"], list):
            return [
                fe.get("module")
                for fe in data["features"]
                if fe and fe.get("enabled", True) and fe.get("module")
            ]
        # {"enabled_features": ["emitter", ...]}
        return data.get("enabled_features", [])
    except Exception:
        return []


def get_all_feature_names() -> List[str]:
    """Inspect the features directory and return every feature package name."""
    try:
        return sorted(
            name
            for name in os.listdir(FEATURES_DIR)
            if os.path.isdir(os.path.join(FEATURES_DIR, name)) and not name.startswith("_")
        )
    except Exception:
        return []


def load_feature_cli(name: str) -> Optional[ModuleType]:
    """features/<name>/cli.py, or None for library-only features."""
    if name in _cache:
        return _cache[name]
    if not os.path.exists(os.path.join(FEATURES_DIR, name, "cli.py")):
        return None
    try:
        mod = importlib.import_module(f"{PACKAGE}.features.{name}.cli")
    except ImportError as e:
        warn(f"feature '{name}' failed to import: {e}")
        return None
    _cache[name] = mod
    return mod


def register_features(app) -> List[str]:
    """Call register_commands(app) of each enabled feature; returns the names that registered."""
    registered = []
    for fname in list_enabled_features():
        if fname not in get_all_feature_names():
            warn(f"features.json names unknown feature '{fname}'")
            continue
        mod = load_feature_cli(fname)
        if mod is not None and hasattr(mod, "register_commands"):
            mod.register_commands(app)
            registered.append(fname)
    return registered
