import json
import subprocess
import sys
import urllib.request

import pytest

from itinopt.bench import strip_wall_clock
from itinopt.catalog import load_catalog
from itinopt.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_catalog_json_and_files(capsys, tmp_path):
    code, out, _ = run(capsys, "--seed", "5", "--out-dir", str(tmp_path), "gen-catalog", "--cost-history", "20")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] == 1
    cat = load_catalog(tmp_path / "catalog.json")
    assert cat.sizes == (6, 6, 6, 6)
    header = (tmp_path / "cost_history.csv").read_text().splitlines()[0]
    assert header == "days_to_departure,season_index,demand_factor,distance,observed_price"


def test_gen_catalog_csv(capsys):
    code, out, _ = run(capsys, "gen-catalog", "--format", "csv", "--segments", "2", "--options", "3")
    assert code == 0
    assert len(out.strip().splitlines()) == 1 + 6


def test_global_flags_after_subcommand(capsys):
    _, a, _ = run(capsys, "--seed", "4", "gen-catalog")
    _, b, _ = run(capsys, "gen-catalog", "--seed", "4")
    assert a == b


def test_optimize_with_catalog_file(capsys, tmp_path):
    run(capsys, "--seed", "2", "--out-dir", str(tmp_path), "gen-catalog")
    code, out, _ = run(capsys, "--catalog", str(tmp_path / "catalog.json"), "optimize",
                       "--budget", "5000", "--max-time", "60", "--mode", "greedy",
                       "--prefer", "flight.tier=basic")
    assert code == 0
    doc = json.loads(out)
    assert doc["complete"] and "timings" not in doc
    assert doc["match_report"]["total"] == 3


def test_optimize_prefs_file(capsys, tmp_path):
    prefs = tmp_path / "p.json"
    prefs.write_text(json.dumps({"budget": 5000, "max_time": 60, "objective_weights": [0, 0, 1]}))
    code, out, _ = run(capsys, "optimize", "--prefs", str(prefs), "--population", "30", "--timings")
    assert code == 0 and "timings" in json.loads(out)


@pytest.mark.parametrize("argv", [
    ["optimize"],
    ["optimize", "--budget", "-5", "--max-time", "3"],
    ["--catalog", "/nonexistent.json", "oracle"],
    ["loadtest", "--users", "0"],
    ["nosuchcommand"],
    ["--format", "xml", "gen-catalog"],
])
def test_usage_errors_exit_2(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_oracle_subcommand(capsys):
    code, out, _ = run(capsys, "--seed", "1", "oracle", "--budget", "1200")
    assert code == 0
    doc = json.loads(out)
    assert doc["n_itineraries"] == 1296 and doc["front"]


def test_convergence_writes_history(capsys, tmp_path):
    code, out, err = run(capsys, "--out-dir", str(tmp_path), "convergence", "--runs", "2")
    assert code == 0 and "PASS" in err
    assert (tmp_path / "history.csv").read_text().startswith("seed,generation,best_score")
    assert json.loads(out)["n_runs"] == 2


def test_threshold_failure_exit_1(capsys, monkeypatch):
    import itinopt.cli as cli

    monkeypatch.setattr(cli, "SUSTAINABILITY_MIN_REDUCTION", 101.0)
    code, _, err = run(capsys, "sustainability", "--n", "2", "--population", "20")
    assert code == 1
    assert "FAIL: reduction_pct" in err


def test_loadtest_small(capsys):
    code, out, err = run(capsys, "loadtest", "--users", "1,2", "--requests-per-user", "1", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0].startswith("users,requests,answered")


@pytest.mark.parametrize("argv", [
    ["gen-catalog"],
    ["oracle"],
    ["optimize", "--budget", "3000", "--max-time", "40", "--population", "30"],
    ["accuracy", "--n", "3", "--population", "20"],
    ["convergence", "--runs", "1", "--population", "20"],
    ["sustainability", "--n", "2", "--population", "20"],
    ["loadtest", "--users", "1,2", "--requests-per-user", "1"],
])
def test_subcommands_deterministic(capsys, argv):
    outs = []
    for _ in range(2):
        main(["--seed", "11", *argv])
        outs.append(strip_wall_clock(json.loads(capsys.readouterr().out)))
    assert outs[0] == outs[1]


def test_serve_subprocess(tmp_path):
    proc = subprocess.Popen([sys.executable, "-m", "itinopt.cli", "serve", "--port", "0"],
                            stderr=subprocess.PIPE, text=True)
    try:
        line = proc.stderr.readline()
        assert line.startswith("serving on ")
        url = line.split()[-1]
        with urllib.request.urlopen(url + "/v1/health", timeout=10) as resp:
            assert json.loads(resp.read())["status"] == "ok"
    finally:
        proc.terminate()
        proc.wait(timeout=10)
