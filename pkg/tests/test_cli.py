import json
import subprocess
import sys

import numpy as np
import pytest
from test_portfolio import METAL_LEDGER

from sectorfolio import cli


def write_config(tmp_path, **overrides):
    cfg = {
        "symbols": {"AAA": {"simulate": {"seed": 1}}, "BBB": {"simulate": {"seed": 2, "drift": 0.0006}}},
        "market_index": {"symbol": "IDX", "simulate": {"seed": 9}},
        "start": "2019-01-01",
        "end": "2021-08-27",
        "models": ["persistence", "ols"],
        "walk_forward": {"test_size": 60},
        "portfolio": {"train_end": "2020-12-31", "test_start": "2021-01-01", "n_samples": 2000},
        "seed": 42,
        "out": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


def test_full_pipeline_and_byte_identical_rerun(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    steps = [("ingest",), ("evaluate", "--scheme", "both"), ("frontier",),
             ("backtest", "--weights", "optimal"), ("backtest", "--weights", "min_var"),
             ("backtest", "--weights", "equal"), ("report",)]
    for step in steps:
        assert run(*step, "--config", cfg) == 0, step
    first = snapshot(out)
    assert {"AAA.csv", "BBB.csv", "IDX.csv", "frontier.csv", "frontier.json", "summary.csv",
            "backtest_optimal.json", "report_AAA_ols_sliding.json", "report_BBB_persistence_expanding.csv"} <= set(first)
    # rerun everything, this time with parallel folds
    cfg2 = write_config(tmp_path, walk_forward={"test_size": 60, "n_jobs": 4})
    for step in steps:
        assert run(*step, "--config", cfg2) == 0, step
    assert snapshot(out) == first
    printed = capsys.readouterr().out
    assert "rmse_over_mean_pct" in printed


def test_frontier_summary_contents(tmp_path):
    cfg = write_config(tmp_path)
    assert run("ingest", "--config", cfg) == 0
    assert run("frontier", "--config", cfg) == 0
    summary = json.loads((tmp_path / "out" / "frontier.json").read_text())
    for key in ("min_variance", "optimal", "equal_weight"):
        assert sum(summary[key]["weights"].values()) == pytest.approx(1.0, abs=1e-9)
    assert summary["n_samples"] == 2000
    assert summary["training_window"]["end"] <= "2020-12-31"
    lines = (tmp_path / "out" / "frontier.csv").read_text().splitlines()
    assert len(lines) == 2001


def test_seed_override_changes_frontier(tmp_path):
    cfg = write_config(tmp_path)
    run("ingest", "--config", cfg)
    run("frontier", "--config", cfg)
    a = (tmp_path / "out" / "frontier.csv").read_bytes()
    run("frontier", "--config", cfg, "--seed", 7)
    b = (tmp_path / "out" / "frontier.csv").read_bytes()
    assert a != b
    assert json.loads((tmp_path / "out" / "frontier.json").read_text())["seed"] == 7


def test_single_symbol_frontier(tmp_path):
    cfg = write_config(tmp_path, symbols={"AAA": {"simulate": {"seed": 1}}}, market_index=None)
    assert run("ingest", "--config", cfg) == 0
    assert run("frontier", "--config", cfg) == 0
    summary = json.loads((tmp_path / "out" / "frontier.json").read_text())
    assert summary["optimal"]["weights"] == {"AAA": 1.0}


def test_arima_preset_window(tmp_path):
    cfg = write_config(tmp_path, start="2021-01-01", symbols={"AAA": {"simulate": {"seed": 1}}})
    run("ingest", "--config", cfg)
    assert run("evaluate", "--config", cfg, "--model", "arima") == 0
    rep = json.loads((tmp_path / "out" / "report_AAA_arima_expanding.json").read_text())
    assert rep["config"]["train_size"] == 122


def _write_prices(path, rows):
    lines = ["Date,Open,High,Low,Close,Volume"]
    for d, p in rows:
        lines.append(f"{d},{p},{p},{p},{p},1000")
    path.write_text("\n".join(lines) + "\n")


def test_metal_ledger_replay_through_cli(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    symbols = {}
    for sym, (entry, _, exit_) in METAL_LEDGER.items():
        _write_prices(data / f"{sym}.csv", [("2021-01-01", entry), ("2021-08-31", exit_)])
        symbols[sym] = {"path": str(data / f"{sym}.csv")}
    # 2021-01-01 and 2021-08-31 are both weekdays; alignment fills the days in between
    cfg = write_config(tmp_path, symbols=symbols, market_index=None, start="2021-01-01", end="2021-08-31",
                       portfolio={"test_start": "2021-01-01", "test_end": "2021-08-31"})
    weights = tmp_path / "amounts.json"
    weights.write_text(json.dumps({"amounts": {k: v[1] for k, v in METAL_LEDGER.items()}}))
    assert run("ingest", "--config", cfg) == 0
    assert run("backtest", "--config", cfg, "--weights", "file", "--weights-file", weights) == 0
    ledger = json.loads((tmp_path / "out" / "backtest_file.json").read_text())
    assert abs(ledger["total_return_pct"] - 188.95) <= 0.1
    tata = next(e for e in ledger["entries"] if e["symbol"] == "TATASTEEL")
    assert round(tata["shares"], 2) == 13.19
    assert sum(e["amount"] for e in ledger["entries"]) == pytest.approx(ledger["capital"])


def test_equal_weights_on_flat_prices(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    symbols = {}
    for sym, price in (("F1", 10.0), ("F2", 55.5)):
        _write_prices(data / f"{sym}.csv", [("2021-01-04", price), ("2021-03-01", price)])
        symbols[sym] = {"path": str(data / f"{sym}.csv")}
    cfg = write_config(tmp_path, symbols=symbols, market_index=None, start=None, end=None, portfolio={})
    assert run("ingest", "--config", cfg) == 0
    assert run("backtest", "--config", cfg, "--weights", "equal") == 0
    ledger = json.loads((tmp_path / "out" / "backtest_equal.json").read_text())
    assert ledger["total_return_pct"] == 0.0
    assert ledger["realized"]["sharpe"] is None


# ----------------------------------------------------------------- failures

def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, colour="blue")
    assert run("ingest", "--config", cfg) == 2
    assert "colour" in capsys.readouterr().err
    cfg = write_config(tmp_path, portfolio={"capitl": 5})
    assert run("ingest", "--config", cfg) == 2


def test_bad_path_exits_2(tmp_path):
    cfg = write_config(tmp_path, symbols={"X": {"path": str(tmp_path / "nope.csv")}}, market_index=None)
    assert run("ingest", "--config", cfg) == 2
    assert run("ingest", "--config", tmp_path / "missing.json") == 2


def test_unknown_model_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path)
    run("ingest", "--config", cfg)
    assert run("evaluate", "--config", cfg, "--model", "lstm") == 2
    err = capsys.readouterr().err
    assert "valid names" in err and "persistence" in err


def test_missing_prerequisites_exit_2(tmp_path):
    cfg = write_config(tmp_path)
    assert run("frontier", "--config", cfg) == 2
    assert run("evaluate", "--config", cfg) == 2
    assert run("report", "--config", cfg) == 2
    run("ingest", "--config", cfg)
    assert run("backtest", "--config", cfg, "--weights", "optimal") == 2
    cfg = write_config(tmp_path, portfolio={"test_start": "2030-01-01"})
    assert run("backtest", "--config", cfg, "--weights", "equal") == 2


def test_classification_without_index_exits_2(tmp_path):
    cfg = write_config(tmp_path, market_index=None)
    run("ingest", "--config", cfg)
    assert run("evaluate", "--config", cfg, "--model", "logit") == 2


def test_usage_error_exit_code():
    proc = subprocess.run([sys.executable, "-m", "sectorfolio", "frobnicate"], capture_output=True)
    assert proc.returncode == 2


def test_internal_error_exit_1(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)

    def boom(cfg, args):
        raise RuntimeError("unexpected")

    monkeypatch.setitem(cli.COMMANDS, "ingest", boom)
    assert run("ingest", "--config", cfg) == 1


def test_config_defaults():
    cfg = cli.RunConfig.from_dict({})
    assert cfg.portfolio.capital == 100000.0
    assert cfg.portfolio.n_samples == 10000
    assert cfg.portfolio.risk_free == 0.01
    assert cfg.walk_forward.for_model("ols", "expanding").train_size == 245
    assert cfg.walk_forward.for_model("mars", "expanding").train_size == 122
    assert cfg.walk_forward.test_size == 14
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_dict({"symbols": {"A": {"path": "a", "endpoint": "b"}}})
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_dict({"start": "yesterday"})
    assert np.datetime64(cli.RunConfig.from_dict({"start": "2020-02-03"}).start) == np.datetime64("2020-02-03")
