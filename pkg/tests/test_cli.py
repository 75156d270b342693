import json
import subprocess
import sys

import pytest

from conftest import mixed_instance
from valuenet import load_instance, save_instance
from valuenet.cli import EXIT_INPUT, EXIT_LIMIT, EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_generate_to_stdout_is_deterministic(capsys):
    code, first, _ = run(capsys, "generate", "--n-l", "8", "--m", "2", "--seed", "4")
    assert code == EXIT_OK
    assert run(capsys, "generate", "--n-l", "8", "--m", "2", "--seed", "4")[1] == first
    assert json.loads(first)["format"] == 1


def test_generate_and_convert(tmp_path, capsys):
    target = tmp_path / "g.json"
    assert run(capsys, "generate", "--n-l", "6", "--m", "1", "--n-f", "3", "-o", str(target))[0] == EXIT_OK
    assert run(capsys, "convert", str(target), str(tmp_path / "g.mps"))[0] == EXIT_OK
    assert (tmp_path / "g.aux").exists()
    assert load_instance(tmp_path / "g.mps").same_data(load_instance(target))


def test_network_stats_and_dot(tmp_path, capsys):
    dot = tmp_path / "n.dot"
    code, out, _ = run(capsys, "network", "catalog:reduction", "--exact", "--dot", str(dot))
    stats = json.loads(out)
    assert code == EXIT_OK
    assert stats["nodes"] == 8 and stats["widths"] == [1, 2, 2, 3] and stats["edges"] == 10
    assert dot.read_text().startswith('digraph "reduction"')
    code, out, _ = run(capsys, "network", "catalog:merge", "--budget", "2", "--strengthen")
    assert code == EXIT_OK and json.loads(out)["kind"] == "approx"


def test_solve_writes_report_and_log(tmp_path, capsys):
    log, rep = tmp_path / "log.tsv", tmp_path / "rep.json"
    code, _, _ = run(capsys, "solve", "catalog:indicator_gap", "--log", str(log), "--report", str(rep),
                     "--known-optimum", "100")
    assert code == EXIT_OK
    data = json.loads(rep.read_text())
    assert data["status"] == "Optimal" and data["objective"] == 100 and data["gap"] == 0
    assert log.read_text().startswith("iter\tlower_bound")


def test_bound_and_oracle_agree(capsys):
    _, out, _ = run(capsys, "oracle", "catalog:reduction")
    truth = json.loads(out)["objective"]
    code, out, _ = run(capsys, "bound", "catalog:reduction", "--variant", "dd", "--budget", "inf")
    assert code == EXIT_OK and json.loads(out)["lower_bound"] == truth
    _, out, _ = run(capsys, "bound", "catalog:reduction", "--variant", "hpr")
    assert json.loads(out)["lower_bound"] <= truth


def test_iteration_limit_exit_code(tmp_path, capsys):
    path = tmp_path / "m.json"
    save_instance(mixed_instance(43), path)
    code, out, _ = run(capsys, "solve", str(path), "--budget", "1", "--no-strengthen", "--max-iters", "0")
    assert code == EXIT_LIMIT
    assert json.loads(out)["status"] == "LimitReached"


def test_oracle_cap_exit_code(capsys):
    assert run(capsys, "oracle", "catalog:reduction", "--cap", "4")[0] == EXIT_LIMIT


@pytest.mark.parametrize("argv", [
    ["solve", "catalog:nothing"],
    ["solve", "/nonexistent/file.json"],
])
def test_input_errors(argv, capsys):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INPUT and err


def test_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": 1}')
    assert run(capsys, "network", str(bad))[0] == EXIT_INPUT


@pytest.mark.parametrize("argv", [
    ["solve"],
    ["solve", "catalog:reduction", "--budget", "zero"],
    ["nonsense"],
    ["generate", "--n-l", "5", "--m", "1", "--beta", "2"],
])
def test_usage_errors(argv, capsys):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_sweep_table(capsys):
    code, out, _ = run(capsys, "sweep", "--n-l", "8", "--m", "1", "--alpha", "1", "--beta", "0.3",
                       "--n-f", "4", "--seeds", "2", "--budget", "2")
    lines = out.strip().splitlines()
    assert code == EXIT_OK and len(lines) == 2
    assert lines[0].split("\t")[:5] == ["n_l", "m", "alpha", "beta", "count"]
    assert lines[1].split("\t")[:5] == ["8", "1", "1", "0.3", "2"]


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "valuenet.cli", "oracle", "catalog:merge"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["objective"] == -3
