import json

import numpy as np
import pytest

from fsl.baseline import ENV_VAR, FILENAME, SHIPPED, BaselineStore, canonical, default_dir, digest, record_key
from fsl.config import (
    ConfigError, RunConfig, load_json, operator_from_config, read_vector, space_from_config, weight_from_config,
)


def test_canonical_and_digest_are_order_free():
    a, b = {"x": 1, "y": [1, 2]}, {"y": [1, 2], "x": 1}
    assert canonical(a) == canonical(b) == '{"x":1,"y":[1,2]}'
    assert digest(a) == digest(b) and len(digest(a)) == 16
    assert record_key("c", "grid1d", a) == f"c|grid1d|{digest(a)}"


def test_env_var_selects_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_VAR, str(tmp_path / "x"))
    assert default_dir() == tmp_path / "x"
    monkeypatch.delenv(ENV_VAR)
    monkeypatch.setenv("XDG_DATA_HOME", str(tmp_path / "xdg"))
    assert default_dir() == tmp_path / "xdg" / "fsl" / "baselines"


def test_append_only_latest_wins(tmp_path):
    st = BaselineStore(tmp_path, shipped=None)
    assert len(st) == 0 and st.bands("c", "f", {}) is None
    st.append("c", "f", {"a": 1}, {"x": {"min": 1, "max": 2, "spread": 2}}, "h1", date="2026-01-01")
    st.append("c", "f", {"a": 1}, {"x": {"min": 1, "max": 3, "spread": 3}}, "h2", date="2026-01-02")
    lines = (tmp_path / FILENAME).read_text().splitlines()
    assert len(lines) == 2
    fresh = BaselineStore(tmp_path, shipped=None)
    rec = fresh.get("c", "f", {"a": 1})
    assert rec["bands"]["x"]["max"] == 3 and rec["provenance"]["config_hash"] == "h2"
    assert set(rec["provenance"]) == {"date", "commit", "config_hash"}
    assert len(fresh) == 1


def test_user_layer_overrides_shipped(tmp_path):
    shipped = tmp_path / "ship.jsonl"
    rec = {"key": record_key("c", "f", {}), "check": "c", "fixture": "f", "params": {}, "bands": {"v": 1},
           "provenance": {}}
    shipped.write_text(json.dumps(rec) + "\n")
    st = BaselineStore(tmp_path / "user", shipped=shipped)
    assert st.bands("c", "f", {}) == {"v": 1}
    st.append("c", "f", {}, {"v": 2}, "h")
    assert BaselineStore(tmp_path / "user", shipped=shipped).bands("c", "f", {}) == {"v": 2}
    assert json.loads(shipped.read_text())["bands"] == {"v": 1}


def test_shipped_store_is_present():
    recs = [json.loads(l) for l in SHIPPED.read_text().splitlines() if l.strip()]
    assert {r["fixture"] for r in recs} == {"grid1d", "grid2d"}


def test_load_json_forms(tmp_path):
    assert load_json("grid1d")["side"] == 64
    assert load_json('{"a": 1}') == {"a": 1}
    p = tmp_path / "s.json"
    p.write_text('{"type": "grid", "dim": 1, "side": 8, "spacing": 0.125}')
    assert space_from_config(str(p)).n_points == 8
    with pytest.raises(ConfigError):
        load_json(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_json(str(bad))


@pytest.mark.parametrize("cfg", [{"type": "grid", "dim": 1}, {"type": "torus"},
                                 {"type": "grid", "dim": 1, "side": 8, "spacing": 0.1, "boundary": "x"}])
def test_space_config_errors(cfg):
    with pytest.raises(ConfigError):
        space_from_config(cfg)


def test_graph_space_and_operator():
    sp = space_from_config({"type": "graph", "n": 4, "edges": [[0, 1, 1], [1, 2, 1], [2, 3, 1], [3, 0, 1]]})
    op = operator_from_config(sp)
    assert sp.n_points == 4 and op.kernel_dim == 1
    with pytest.raises(ConfigError):
        operator_from_config(sp, {"kind": "wave"})


def test_weight_configs(sp1):
    assert weight_from_config(sp1).is_constant
    w = weight_from_config(sp1, {"type": "power", "center": 3, "exponent": 0.5})
    assert w.values[3] == w.values.min()
    e = weight_from_config(sp1, {"type": "explicit", "values": [2.0] * 64})
    assert np.all(e.values == 2.0)
    for bad in ({"type": "explicit", "values": [1.0]}, {"type": "power"}, {"type": "x"},
                {"type": "explicit", "values": [-1.0] * 64}):
        with pytest.raises(ConfigError):
            weight_from_config(sp1, bad)


def test_read_vector(tmp_path):
    p = tmp_path / "v.csv"
    p.write_text("1, 2\n3 4\n")
    assert read_vector(p, 4).tolist() == [1, 2, 3, 4]
    with pytest.raises(ConfigError):
        read_vector(p, 5)
    p.write_text("1 x")
    with pytest.raises(ConfigError):
        read_vector(p, 2)


def test_run_config_validation_and_hash():
    a = RunConfig.from_sources(space="grid2d", samples=10)
    assert a.fixture == "grid2d"
    b = RunConfig.from_sources(space="grid2d", samples=10, report="x.json", rebaseline=True)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != RunConfig.from_sources(space="grid2d", samples=11).config_hash()
    assert RunConfig.from_sources(space={"type": "grid", "dim": 1, "side": 8, "spacing": 0.125}).fixture \
        .startswith("space-")
    with pytest.raises(ConfigError):
        RunConfig.from_sources(samples=0)
    with pytest.raises(ConfigError):
        RunConfig.from_sources(band=40)
