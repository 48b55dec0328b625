import json

import numpy as np
import pytest

from fsl.baseline import FILENAME
from fsl.cli import main
from fsl.equivalence import equivalence_suite
from fsl.suites import CSV_HEADER, emit_plot_data, parse_plot_data


@pytest.fixture
def field_csv(tmp_path, op1):
    from fsl.sampling import random_fields

    p = tmp_path / "f.csv"
    p.write_text("\n".join(repr(float(v)) for v in random_fields(op1, 1, 7)[0]) + "\n")
    return p


def test_verify_calderon_end_to_end(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", "--suite", "calderon", "--report", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["pass"] and rep["seed"] == 7
    res = next(c for c in rep["checks"] if c["check"] == "calderon-residual")
    assert res["ratios"]["max"] <= 1e-6
    assert set(res) >= {"check", "params", "ratios", "baseline", "pass"}


def test_unknown_suite_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["verify", "--suite", "nonsense"])
    assert e.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_rebaseline_on_fresh_store(tmp_path):
    store = tmp_path / "store"
    args = ["verify", "--suite", "weights", "--suite", "lp-identity", "--samples", "20",
            "--baseline-dir", str(store)]
    assert not (store / FILENAME).exists()
    assert main(args + ["--rebaseline"]) == 0
    lines = (store / FILENAME).read_text().splitlines()
    assert {json.loads(l)["check"] for l in lines} == {"power-weight-constants", "fefferman-stein", "lp-identity"}
    assert main(args) == 0
    assert len((store / FILENAME).read_text().splitlines()) == len(lines)


def test_baseline_mismatch_reports_both_values(tmp_path, capsys):
    store = tmp_path / "store"
    args = ["verify", "--suite", "lp-identity", "--samples", "10", "--baseline-dir", str(store)]
    assert main(args + ["--rebaseline"]) == 0
    rec = json.loads((store / FILENAME).read_text())
    for b in rec["bands"].values():
        b["min"] *= 3
        b["max"] *= 3
    with open(store / FILENAME, "a") as fh:
        fh.write(json.dumps(rec) + "\n")
    capsys.readouterr()
    assert main(args) == 1
    assert "outside baseline" in capsys.readouterr().out


def test_empty_report_gives_header_only():
    assert emit_plot_data({"checks": []}) == ",".join(CSV_HEADER) + "\n"


def test_three_p_values_three_rows(op1):
    rep = equivalence_suite(op1, "lp-identity", samples=5, weights=("unit",))
    report = {"checks": [{"suite": "equivalences", "check": rep.check, "params": rep.params,
                          "ratios": rep.ratios, "pass": rep.passed, "cases": [c.to_dict() for c in rep.cases]}]}
    rows = parse_plot_data(emit_plot_data(report))
    assert len(rows) == 3
    assert [r["params"]["p"] for r in rows] == [1.5, 2.0, 3.0]


def test_csv_round_trip_full_precision(tmp_path):
    rj, rc = tmp_path / "r.json", tmp_path / "r.csv"
    assert main(["verify", "--suite", "calderon", "--suite", "apps", "--samples", "10",
                 "--report", str(rj), "--csv", str(rc)]) == 0
    rep = json.loads(rj.read_text())
    rows = parse_plot_data(rc.read_text())
    want = []
    for c in rep["checks"]:
        for case in c.get("cases") or [{"ratios": c["ratios"]}]:
            want.append(case["ratios"])
    assert len(rows) == len(want)
    for r, w in zip(rows, want):
        assert (r["min"], r["max"], r["median"]) == (w["min"], w["max"], w["median"])
    assert emit_plot_data(rep) == rc.read_text()
    rc2 = tmp_path / "again.csv"
    assert main(["report", str(rj), "--csv", str(rc2)]) == 0
    assert rc2.read_text() == rc.read_text()


def test_verify_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        main(["verify", "--suite", "norms", "--suite", "two-partitions", "--samples", "10", "--report", str(p)])
    strip = lambda t: [l for l in t.splitlines() if '"timestamp"' not in l]  # noqa: E731
    assert strip(a.read_text()) == strip(b.read_text())


def test_build(tmp_path):
    out = tmp_path / "b.json"
    assert main(["build", "--space", "grid2d", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["n_points"] == 256 and d["spectrum"]["kernel_dim"] == 1 and d["cubes"]


def test_norm(tmp_path, field_csv, op1):
    from fsl.norms import NormParams, triebel_norm

    out = tmp_path / "n.json"
    assert main(["norm", "--kind", "F", "--alpha", "0.3", "--p", "1.5", "--q", "2", "--input", str(field_csv),
                 "--out", str(out)]) == 0
    f = np.loadtxt(field_csv)
    want = triebel_norm(op1, f, NormParams(alpha=0.3, p=1.5, q=2.0)).value
    assert json.loads(out.read_text())["value"] == want


def test_decompose(tmp_path, field_csv):
    out = tmp_path / "d.json"
    assert main(["decompose", "--M", "2", "--input", str(field_csv), "--out", str(out), "--dense"]) == 0
    d = json.loads(out.read_text())
    assert d["residual"] <= 1e-6
    assert {"level", "cube_id", "s_Q", "support_eps", "b"} <= set(d["atoms"][0])


def test_apply(tmp_path, field_csv, op1):
    from fsl.apps import fractional_power

    out = tmp_path / "g.txt"
    assert main(["apply", "--op", "fractional", "--s", "1.0", "--input", str(field_csv), "--out", str(out)]) == 0
    assert np.allclose(np.loadtxt(out), fractional_power(op1, np.loadtxt(field_csv), 1.0), rtol=0, atol=0)
    assert main(["apply", "--op", "multiplier", "--symbol", '{"type":"constant","value":1}',
                 "--input", str(field_csv), "--out", str(out)]) == 0
    assert np.allclose(np.loadtxt(out), 0.5 * np.loadtxt(field_csv), atol=1e-10)


@pytest.mark.parametrize("argv", [
    ["apply", "--op", "fractional", "--input", "IN"],
    ["apply", "--op", "multiplier", "--symbol", '{"type":"bogus"}', "--input", "IN"],
    ["norm", "--input", "missing.csv"],
    ["verify", "--samples", "0"],
    ["report", "missing.json"],
])
def test_bad_input_exits_2(argv, field_csv, capsys):
    argv = [str(field_csv) if a == "IN" else a for a in argv]
    assert main(argv) == 2
    assert "fsl:" in capsys.readouterr().err
