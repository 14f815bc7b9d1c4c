# repeater_budget/features/gp/io.py
"""Model documents. Floats are written as hex strings so a reloaded model predicts bit-identically."""
from typing import Any, Dict

import numpy as np

from ...utils.config_loader import check_keys, load_json_document, require, save_json_document
from ...utils.errors import ValidationError
from .core import GpHyper, GpModel

KIND = "gp-matern52"
KEYS = ("kind", "inputs", "values", "mu0", "v0", "lengthscales", "jitter", "w_hyp")


def _hex(x) -> str:
    return float(x).hex()


def _unhex(s, field: str) -> float:
    try:
        return float.fromhex(s) if isinstance(s, str) else float(s)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"bad number {s!r}", field=field) from e


def model_to_document(model: GpModel) -> Dict[str, Any]:
    return {
        "kind": KIND,
        "inputs": [[_hex(v) for v in row] for row in model.train_inputs],
        "values": [_hex(v) for v in model.train_values],
        "mu0": _hex(model.hyper.mu0),
        "v0": _hex(model.hyper.v0),
        "lengthscales": [_hex(v) for v in model.hyper.lengthscales],
        "jitter": _hex(model.jitter),
        "w_hyp": model.w_hyp,
    }


def model_from_document(doc: Dict[str, Any], path: str = "model") -> GpModel:
    check_keys(doc, KEYS, path)
    if doc.get("kind", KIND) != KIND:
        raise ValidationError(f"unsupported model kind {doc.get('kind')!r}", field=f"{path}.kind")
    inputs = np.array([[_unhex(v, f"{path}.inputs") for v in row] for row in require(doc, "inputs", path)])
    values = np.array([_unhex(v, f"{path}.values") for v in require(doc, "values", path)])
    hyper = GpHyper(
        mu0=_unhex(require(doc, "mu0", path), f"{path}.mu0"),
        v0=_unhex(require(doc, "v0", path), f"{path}.v0"),
        lengthscales=[_unhex(v, f"{path}.lengthscales") for v in require(doc, "lengthscales", path)],
    )
    jitter = _unhex(doc["jitter"], f"{path}.jitter") if "jitter" in doc else None
    return GpModel(inputs, values, hyper, jitter=jitter, w_hyp=doc.get("w_hyp"))


def save_model(model: GpModel, path: str):
    save_json_document(path, model_to_document(model))


def load_model(path: str) -> GpModel:
    return model_from_document(load_json_document(path))
