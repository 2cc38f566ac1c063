import csv
import io
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spadenoise import __version__
from spadenoise.cli import main, run, write_csv
from spadenoise.config import (
    ConfigError,
    ExperimentConfig,
    parse_config,
    parse_grid,
    serialize_config,
    validate,
)
from spadenoise.experiments import cmd_decoupled_fisher_sweep, cmd_fisher_sweep, cmd_group_check, group_residuals
from spadenoise.fisher import fisher_bispade_analytic


def read_csv(text):
    lines = text.split("\n")
    assert lines[0].startswith("#schema:")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_parse_grid_forms():
    assert parse_grid("0, 0.01, 0.1") == [0.0, 0.01, 0.1]
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert len(parse_grid("0:3:0.01")) == 301
    assert parse_grid("1,2,4", integer=True) == [1, 2, 4]
    for bad in ("", "0:1", "1:0:0.1", "0:1:-1", "a,b"):
        with pytest.raises(ConfigError):
            parse_grid(bad)
    with pytest.raises(ConfigError):
        parse_grid("1.5", integer=True)


def test_parse_config_and_diagnostics():
    text = "# sweep\ncommand = fisher-sweep\nsigma_tilde = 0, 0.5\nd = 0:1:0.5\ndim = 32\n"
    cfg = parse_config(text)
    assert cfg.command == "fisher-sweep" and cfg.sigma_tilde == [0.0, 0.5] and cfg.dim == 32
    with pytest.raises(ConfigError) as exc:
        parse_config("command = fisher-sweep\nd = 0, x\n")
    assert exc.value.line == 2 and exc.value.field == "d"
    with pytest.raises(ConfigError) as exc:
        parse_config("colour = blue\n")
    assert exc.value.field == "colour"
    with pytest.raises(ConfigError):
        parse_config("no equals sign\n")
    with pytest.raises(ConfigError):
        parse_config("command = make-coffee\n")


def test_validate_rules():
    with pytest.raises(ConfigError):
        validate(ExperimentConfig(command="prob-check"))  # no seed
    with pytest.raises(ConfigError):
        validate(ExperimentConfig(command="fisher-sweep", d=[]))
    with pytest.raises(ConfigError):
        validate(ExperimentConfig(command="prob-check", seed=1, n=[40], dim=64))
    with pytest.raises(ConfigError):
        validate(ExperimentConfig(command="decoupled-fisher-sweep", epsilon=[0.0]))
    with pytest.raises(ConfigError):
        validate(ExperimentConfig(command="fisher-sweep", d=[-1.0]))
    validate(ExperimentConfig(command="protocol-sim", seed=0))


grid = st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=5)


@settings(max_examples=50)
@given(grid, grid, st.integers(2, 128), st.integers(0, 2 ** 63), st.sampled_from(["csv", "json"]))
def test_config_round_trip(d, sigma, dim, seed, fmt):
    cfg = ExperimentConfig(command="prob-check", d=d, sigma_tilde=sigma, dim=dim, seed=seed, format=fmt,
                           n=[0, 1], samples=20000)
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize_config(again) == text


def test_fisher_sweep_defaults():
    schema, rows = cmd_fisher_sweep(ExperimentConfig())
    assert [name for name, _ in schema] == ["sigma_tilde", "d", "fisher", "fisher_over_fmax"]
    assert len(rows) == 4 * 301
    first = rows[0]
    assert first["sigma_tilde"] == 0 and first["d"] == 0 and first["fisher_over_fmax"] == 1.0
    assert rows[1]["fisher_over_fmax"] > 0.9999
    zero = [r for r in rows if r["sigma_tilde"] == 0.5 and r["d"] == 0.0]
    assert zero[0]["fisher"] == 0.0
    assert all(r["fisher"] >= 0 for r in rows)


def test_decoupled_sweep():
    _, rows = cmd_decoupled_fisher_sweep(ExperimentConfig())
    crit = [r for r in rows if r["epsilon"] == math.sqrt(3) / 2]
    assert max(abs(r["fisher"] - fisher_bispade_analytic(r["d"], 0.5)) for r in crit) < 1e-10
    s95 = {r["sigma_eps"] for r in rows if r["epsilon"] == 0.95}
    assert len(s95) == 1
    assert s95.pop() == pytest.approx(0.5 * math.sqrt(2 * (1 - math.sqrt(1 - 0.9025))), rel=1e-14)
    lo = {r["d"]: r["fisher"] for r in rows if r["epsilon"] == 0.05}
    mid = {r["d"]: r["fisher"] for r in rows if r["epsilon"] == 0.5}
    # the ordering holds below the crossing near d = 1.729 and reverses beyond it
    assert all(lo[d] > mid[d] for d in lo if 0 < d <= 1.72)
    assert lo[2.0] < mid[2.0]
    with pytest.raises(ConfigError):
        cmd_decoupled_fisher_sweep(ExperimentConfig(sigma_tilde=[0.1, 0.5]))


def test_group_check_report():
    rep = cmd_group_check(ExperimentConfig())
    assert rep["passed"]
    m1 = rep["groups"][0]
    assert m1["ladder_average_residual"] == 0.0
    g3 = group_residuals(3, 64)
    (entry,) = [e for e in g3["erasure"] if (e["p"], e["q"]) == (2, 5)]
    assert entry["residual"] < 1e-15
    (keep,) = [e for e in g3["preservation"] if (e["p"], e["q"]) == (1, 1)]
    assert keep["residual"] < 1e-15
    assert {(e["p"], e["q"]) for e in g3["excluded"]} == {(0, 6), (6, 0)}
    with pytest.raises(ConfigError):
        cmd_group_check(ExperimentConfig(dim=8, m=[3]))


def test_csv_format():
    text = write_csv([("x", "float"), ("k", "int"), ("s", "str")], [{"x": 0.1, "k": 3, "s": "a"}])
    assert text == "#schema: x:float,k:int,s:str\nx,k,s\n0.10000000000000001,3,a\n"
    assert "\r" not in text
    assert float("0.10000000000000001") == 0.1


def test_cli_fisher_sweep_replay(tmp_path, capsys):
    cfg = tmp_path / "fig.cfg"
    cfg.write_text("command = fisher-sweep\nsigma_tilde = 0, 0.1\nd = 0:0.5:0.05\n", encoding="utf-8")
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["fisher-sweep", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["fisher-sweep", "--config", str(cfg), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = read_csv(out1.read_text(encoding="utf-8"))
    assert len(rows) == 2 * 11
    for r in rows:
        assert float(r["fisher"]) == fisher_bispade_analytic(float(r["d"]), float(r["sigma_tilde"]))


def test_cli_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "fig.cfg"
    cfg.write_text("sigma_tilde = 0, 0.1\nd = 0, 0.5\n", encoding="utf-8")
    assert main(["fisher-sweep", "--config", str(cfg), "--sigma-tilde", "0.5", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"config", "results", "provenance"}
    assert doc["provenance"] == {"seed": None, "dim": 64, "version": __version__}
    assert {r["sigma_tilde"] for r in doc["results"]} == {0.5}
    assert doc["config"]["sigma_tilde"] == [0.5]


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["prob-check", "--samples", "20000"]) == 1  # missing seed
    bad = tmp_path / "bad.cfg"
    bad.write_text("d = 0, nope\n", encoding="utf-8")
    assert main(["fisher-sweep", "--config", str(bad)]) == 1
    assert "line 1" in capsys.readouterr().err
    assert main(["fisher-sweep", "--config", str(tmp_path / "missing.cfg")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["fisher-sweep", "--d", "0:1"])
    assert exc.value.code == 1
    assert main(["group-check"]) == 0


def test_check_failure_exit_code(monkeypatch):
    cfg = ExperimentConfig(command="group-check", m=[3])
    text, code, _ = run(cfg)
    assert code == 0 and json.loads(text)["results"]["passed"]
    # m = 3 phases are inexact, so a zero threshold must trip the check
    monkeypatch.setattr("spadenoise.experiments.CHECK_THRESHOLD", 0.0)
    text, code, _ = run(cfg)
    assert code == 2 and not json.loads(text)["results"]["passed"]


def test_prob_check_report(capsys):
    assert main(["prob-check", "--seed", "3", "--samples", "20000", "--sigma-tilde", "0", "--d", "0, 0.5"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["provenance"]["seed"] == 3 and doc["provenance"]["dim"] == 64
    assert all(p["z"] == 0.0 for p in doc["results"]["points"])
    assert doc["results"]["pass_rate"] == 1.0


def test_protocol_sim_outputs(tmp_path):
    out = tmp_path / "p.csv"
    args = ["protocol-sim", "--seed", "0", "--m", "1,2", "--lambda", "0, 0.01, 0.02, 0.04, 0.08, 0.16",
            "--out", str(out)]
    assert main(args) == 0
    rows = read_csv(out.read_text(encoding="utf-8"))
    assert [k for k in rows[0]] == ["m", "N", "noise_mode", "lambda", "seed", "error"]
    assert all(float(r["error"]) < 1e-12 for r in rows if float(r["lambda"]) == 0)
    assert all(float(r["error"]) < 1e-8 for r in rows if r["m"] == "1")
    side = json.loads((tmp_path / "p.csv.json").read_text(encoding="utf-8"))
    assert "fitted_slope" in side["results"]["reports"][0]
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first
