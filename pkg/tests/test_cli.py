import csv
import json

import pytest

from stickyquake import cli

FAST = ["--paths", "200", "--dt", "1e-2", "--seed", "3"]


def write_config(tmp_path, doc):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_digest=")
    return lines[0].split("=", 1)[1], list(csv.reader(lines[1:]))


@pytest.mark.parametrize("kind", ["rdbm", "edge", "vertex", "graph", "quake"])
def test_simulate_is_reproducible(tmp_path, kind, capsys):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert cli.main(["simulate", kind, "--out", str(out), "--threads", "1" if run == "a" else "3"]
                        + FAST) == cli.EXIT_OK
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert "summary.json" in outs[0]
    assert "digest" in capsys.readouterr().out


def test_zero_horizon_gives_empty_outputs(tmp_path):
    cfg = write_config(tmp_path, {"t_max": 0})
    for kind in ("rdbm", "quake"):
        out = tmp_path / kind
        assert cli.main(["simulate", kind, "--config", cfg, "--out", str(out)]) == cli.EXIT_OK
        _, rows = read_csv(next(out.glob("*s.csv")))
        assert len(rows) == 1
    out = tmp_path / "gr"
    assert cli.main(["gr-curve", "--config", cfg, "--out", str(out)]) == cli.EXIT_OK
    _, rows = read_csv(out / "gr_curve.csv")
    assert rows[0] == ["n", "empirical_survival", "analytic_survival"]
    assert [[float(v) for v in r] for r in rows[1:]] == [[0.0, 1.0, 1.0]]


def test_invalid_config_exits_2(tmp_path, capsys):
    bad = write_config(tmp_path, {"model": {"regions": [{"id": 0, "m": 0, "v": 1, "sigma": 1}]}})
    assert cli.main(["simulate", "quake", "--config", bad, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    unknown = write_config(tmp_path, {"colour": "red"})
    assert cli.main(["validate", "rdbm", "--config", unknown]) == cli.EXIT_CONFIG


def test_quake_on_five_ary_network(tmp_path):
    cfg = write_config(tmp_path, {"model": {"network": {"kind": "k_ary", "k": 5, "depth": 1}},
                                  "t_max": 20.0})
    out = tmp_path / "q"
    assert cli.main(["simulate", "quake", "--config", cfg, "--out", str(out)] + FAST) == 0
    _, rows = read_csv(out / "catalogs.csv")
    assert rows[0][:3] == ["catalog", "i", "region"]
    regions = {int(r[2]) for r in rows[1:]}
    assert regions <= set(range(6)) and 0 in regions
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_catalogs"] == 200


def test_gr_curve_header_and_digest(tmp_path):
    out = tmp_path / "gr"
    assert cli.main(["gr-curve", "--out", str(out)] + FAST) == cli.EXIT_OK
    digest, rows = read_csv(out / "gr_curve.csv")
    assert rows[0] == ["n", "empirical_survival", "analytic_survival"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    assert len(digest) == 16


def test_validate_quake_writes_report_and_curve(tmp_path, capsys):
    out = tmp_path / "v"
    code = cli.main(["validate", "quake", "--out", str(out)] + FAST)
    assert code in (cli.EXIT_OK, cli.EXIT_FAIL)
    doc = json.loads((out / "validate_quake.json").read_text())
    assert doc["suite"] == "quake" and doc["seed"] == 3 and doc["reports"]
    assert (out / "gr_curve.csv").exists()
    assert "checks passed" in capsys.readouterr().out


def test_help_lists_config_keys(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for key in ("model.h_star", "model.network.kind", "fault_injection.flip_drift", "exit codes"):
        assert key in text
