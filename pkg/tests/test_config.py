import json

import pytest

from run_state import init_run, load_run, summary, update_step
from src.config import _DEFAULTS, _deep_merge, get_path, load_config, numerics
from src.errors import ConfigError
from src.utils import dumps_csv, dumps_json, parse_float_list, parse_kv, to_jsonable


def test_deep_merge_keeps_siblings():
    merged = _deep_merge({"a": {"x": 1, "y": 2}, "b": 3}, {"a": {"y": 5}})
    assert merged == {"a": {"x": 1, "y": 5}, "b": 3}


def test_defaults_without_file(workdir):
    cfg = load_config()
    assert numerics(cfg, "spectral")["delta"] == 0.05
    assert get_path(cfg, "output_dir") == "output"


def test_yaml_file_is_merged(workdir):
    (workdir / "config.yaml").write_text("numerics:\n  spectral:\n    kmax: 12.5\n")
    cfg = load_config()
    assert numerics(cfg, "spectral")["kmax"] == 12.5
    assert numerics(cfg, "spectral")["delta"] == 0.05


def test_env_overrides(workdir, monkeypatch):
    monkeypatch.setenv("HALFWAVE_OUTPUT_DIR", "elsewhere")
    monkeypatch.setenv("HALFWAVE_THREADS", "3")
    cfg = load_config()
    assert get_path(cfg, "output_dir") == "elsewhere"
    assert cfg["threads"] == 3


def test_malformed_file_skipped_unless_strict(workdir):
    path = workdir / "bad.json"
    path.write_text('{\n  "threads": 1,\n  oops\n}\n')
    assert load_config(str(path))["threads"] == _DEFAULTS["threads"]
    with pytest.raises(ConfigError) as info:
        load_config(str(path), strict=True)
    assert info.value.lineno == 3
    assert "line 3" in str(info.value)


def test_strict_rejects_unknown_keys(workdir):
    path = workdir / "typo.json"
    path.write_text(json.dumps({"numerics": {"spectral": {"kmaxx": 3}}}))
    with pytest.raises(ConfigError):
        load_config(str(path), strict=True)
    with pytest.raises(ConfigError):
        load_config(str(workdir / "missing.json"), strict=True)


def test_parse_kv_errors():
    assert parse_kv("kind=zero a=1") == {"kind": "zero", "a": "1"}
    with pytest.raises(ConfigError):
        parse_kv("kind zero")
    with pytest.raises(ConfigError):
        parse_kv("a=1 a=2")
    with pytest.raises(ConfigError):
        parse_kv("a=1 b=2", allowed=("a",))
    with pytest.raises(ConfigError):
        parse_float_list("1,two")
    assert parse_float_list("10, 20,40") == [10.0, 20.0, 40.0]


def test_serialization_splits_complex():
    out = to_jsonable({"jm": 1 + 2j, "n": 3, "xs": [0.5]})
    assert out == {"jm_re": 1.0, "jm_im": 2.0, "n": 3, "xs": [0.5]}
    assert json.loads(dumps_json({"v": 1j}))["v_im"] == 1.0
    text = dumps_csv(["x", "y"], [[1.0 / 3.0, 2]])
    assert text == "x,y\n0.333333333333,2\n"


def test_run_ledger_lifecycle(workdir):
    init_run("demo", steps=("a", "b"))
    update_step("demo", "a", status="running")
    update_step("demo", "a", status="success", outputs={"value": 1})
    update_step("demo", "b", error="broke")
    state = load_run("demo")
    assert summary(state) == {"a": "success", "b": "failed"}
    assert state["steps"]["a"]["outputs"] == {"value": 1}
    assert state["steps"]["a"]["finished_at"] is not None
    events = [h["event"] for h in state["history"]]
    assert events == ["step:a:running", "step:a:success", "step:b:error"]
    assert load_run("never") is None


def test_env_override_does_not_stick(workdir, monkeypatch):
    monkeypatch.setenv("HALFWAVE_OUTPUT_DIR", "elsewhere")
    cfg = load_config()
    cfg["numerics"]["spectral"]["kmax"] = -1.0
    numerics(cfg, "jost")["tol"] = -1.0
    monkeypatch.delenv("HALFWAVE_OUTPUT_DIR")
    fresh = load_config()
    assert get_path(fresh, "output_dir") == "output"
    assert _DEFAULTS["paths"]["output_dir"] == "output"
    assert numerics(fresh, "spectral")["kmax"] == _DEFAULTS["numerics"]["spectral"]["kmax"] > 0
    assert numerics(None, "jost")["tol"] > 0


def test_explicit_file_replaces_search(workdir):
    (workdir / "config.json").write_text(json.dumps({"threads": 7}))
    (workdir / "other.yaml").write_text("numerics:\n  spectral:\n    kmax: 9\n")
    cfg = load_config(str(workdir / "other.yaml"))
    assert numerics(cfg, "spectral")["kmax"] == 9
    assert cfg["threads"] == _DEFAULTS["threads"]
    assert load_config()["threads"] == 7
