import json

import pytest
import typer

from repeater_budget import feature_loader
from repeater_budget.utils.config_loader import (
    check_keys,
    closest,
    in_units,
    load_csv,
    load_feature_config,
    load_json_document,
    require,
    save_csv,
    save_json_document,
)
from repeater_budget.utils.errors import ConfigError, EmptyFeasibleSetError, ValidationError, error_json
from repeater_budget.utils.parallel import ordered_map, resolve_threads

FEATURES = ["bayes_opt", "emitter", "gp", "repeater", "resonance", "uncertainty"]


def test_check_keys_suggests_nearest():
    check_keys({"l_km": 1}, ("l_km", "eps_r"), "repeater")
    with pytest.raises(ValidationError) as e:
        check_keys({"eps_rr": 1}, ("l_km", "eps_r"), "repeater")
    assert e.value.field == "repeater.eps_rr"
    assert "did you mean 'eps_r'" in e.value.message
    with pytest.raises(ValidationError):
        check_keys([1, 2], ("a",), "doc")
    assert closest("zzzz", ["l_km"]) is None


def test_require():
    assert require({"a": 1}, "a", "doc") == 1
    with pytest.raises(ValidationError) as e:
        require({}, "mean", "device")
    assert e.value.field == "device.mean"


def test_json_documents(tmp_path):
    path = tmp_path / "sub" / "doc.json"
    save_json_document(str(path), {"b": 1, "a": [1.5]})
    assert load_json_document(str(path)) == {"a": [1.5], "b": 1}
    with pytest.raises(ConfigError):
        load_json_document(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError) as e:
        load_json_document(str(bad))
    assert e.value.field == str(bad)


def test_csv_keeps_column_order_and_floats(tmp_path):
    path = str(tmp_path / "rows.csv")
    save_csv(path, [{"y": 0.1 + 0.2, "x": 1}], ("x", "y", "note"))
    rows = load_csv(path)
    assert list(rows[0]) == ["x", "y", "note"]
    assert float(rows[0]["y"]) == 0.1 + 0.2
    assert rows[0]["note"] == ""
    with pytest.raises(ConfigError):
        load_csv(str(tmp_path / "missing.csv"))


def test_in_units():
    assert in_units(12e-9, 1e9) == 12.0
    assert in_units(0.225e-9, 1e9) == 0.225


def test_resolve_threads(monkeypatch):
    assert resolve_threads(3) == 3
    monkeypatch.setenv("REPEATER_BUDGET_THREADS", "5")
    assert resolve_threads(None) == 5
    assert resolve_threads(2) == 2
    monkeypatch.setenv("REPEATER_BUDGET_THREADS", "lots")
    assert resolve_threads(None) >= 1


def test_ordered_map_keeps_order():
    items = list(range(40))
    assert ordered_map(lambda x: x * x, items, threads=4) == [x * x for x in items]


def test_error_json():
    doc = json.loads(error_json(EmptyFeasibleSetError("nothing fits", field="eta_emitter")))
    assert doc == {"error": "EmptyFeasibleSetError", "message": "nothing fits", "field": "eta_emitter"}
    assert json.loads(error_json(KeyError("x")))["field"] is None


def test_features_are_discovered():
    assert sorted(feature_loader.list_enabled_features()) == FEATURES
    assert feature_loader.get_all_feature_names() == FEATURES
    assert feature_loader.load_feature_cli("gp") is None
    assert load_feature_config("uncertainty")["k_neighbors"] == 8
    assert load_feature_config("no_such_feature") == {}


def test_register_features():
    app = typer.Typer()
    registered = feature_loader.register_features(app)
    assert registered == ["emitter", "repeater", "bayes_opt", "uncertainty", "resonance"]
