import csv
import json

import pytest

from lfen import cli
from lfen.api import LfenSolution
from lfen.runner import BenchRow, UsageError, check_method


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def solve_json(stdout: str) -> dict:
    return json.loads(stdout[:stdout.index("\n}") + 2])


def test_solve_pm_opm3(capsys, tmp_path):
    out_csv = tmp_path / "row.csv"
    code, stdout, _ = run(capsys, "solve", "--class", "pm", "--n", "3", "--m", "2", "--seed", "1",
                          "--method", "opm3", "--out", str(out_csv))
    assert code == 0
    rec = solve_json(stdout)
    assert rec["status"] == "optimal" and rec["certified"]
    with open(out_csv) as fh:
        (row,) = list(csv.DictReader(fh))
    assert row["status"] == "optimal"
    assert float(row["mult_gap"]) <= 1e-6


def test_generate_then_solve_from_file(capsys, tmp_path):
    game = tmp_path / "g.lfg"
    assert run(capsys, "generate", "--class", "nf", "--m", "2", "--seed", "4", "--out", str(game))[0] == 0
    code, a, _ = run(capsys, "solve", "--game", str(game), "--method", "pure-pure")
    code2, b, _ = run(capsys, "solve", "--class", "nf", "--m", "2", "--seed", "4",
                      "--method", "pure-pure")
    assert code == code2 == 0
    assert solve_json(a)["value"] == solve_json(b)["value"]


def test_verify_accepts_and_rejects(capsys, tmp_path):
    sol = tmp_path / "sol.json"
    args = ("--class", "nf", "--m", "2", "--seed", "2")
    assert run(capsys, "solve", *args, "--method", "onf3", "--solution", str(sol))[0] == 0
    code, out, _ = run(capsys, "verify", *args, "--solution", str(sol))
    assert code == 0 and out.startswith("OK")
    rec = json.loads(sol.read_text())
    rec["rhos"][0] = [0.7, 0.7]
    sol.write_text(json.dumps(rec))
    code, out, _ = run(capsys, "verify", *args, "--solution", str(sol))
    assert code == 1 and "FAIL" in out


def test_verify_tampered_value(capsys, tmp_path):
    sol = tmp_path / "sol.json"
    args = ("--class", "pm", "--m", "2", "--seed", "3")
    run(capsys, "solve", *args, "--method", "opm3", "--solution", str(sol))
    rec = json.loads(sol.read_text())
    rec["value"] += 0.5
    sol.write_text(json.dumps(rec))
    code, out, _ = run(capsys, "verify", *args, "--solution", str(sol))
    assert code == 1 and "differs" in out


def test_bench_rows(capsys, tmp_path):
    out = tmp_path / "bench.csv"
    code, stdout, _ = run(capsys, "bench", "--class", "pm", "--m", "2..3", "--seed", "1..2",
                          "--method", "opm3,implicit-enum", "--out", str(out))
    assert code == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(BenchRow.FIELDS)
    assert len(rows) == 1 + 2 * 2 * 2 + 2 * 2
    avgs = [r for r in rows[1:] if r[3] == "avg"]
    assert len(avgs) == 4 and all(r[5] == "2/2 optimal" for r in avgs)
    lines = (tmp_path / "bench.csv.solutions.jsonl").read_text().splitlines()
    assert len(lines) == 8


def test_bench_self_check(capsys):
    code, stdout, _ = run(capsys, "bench", "--class", "nf", "--m", "2", "--seed", "1..2",
                          "--method", "implicit-enum", "--self-check")
    assert code == 0 and "CHECK FAILED" not in stdout


def test_oracle_and_export(capsys, tmp_path):
    code, stdout, _ = run(capsys, "oracle", "--class", "pm", "--m", "2", "--seed", "1",
                          "--delta", "0.25,0.75")
    assert code == 0
    rec = json.loads(stdout)
    code, stdout, _ = run(capsys, "oracle", "--class", "pm", "--m", "2", "--seed", "1",
                          "--delta", "0.25,0.75", "--backend", "enumeration")
    assert json.loads(stdout)["value"] == pytest.approx(rec["value"], abs=1e-7)
    path = tmp_path / "m.lp"
    assert run(capsys, "export", "--class", "pm", "--m", "2", "--method", "lpfm3",
               "--export", "lp", str(path))[0] == 0
    assert path.read_text().rstrip().endswith("End")


@pytest.mark.parametrize("argv", [
    ["solve", "--class", "nf", "--method", "opm3"],
    ["solve", "--class", "pm", "--method", "onf1"],
    ["solve", "--class", "nf", "--method", "onf3", "--mode", "pessimistic"],
    ["solve", "--method", "onf3"],
    ["oracle", "--class", "nf", "--delta", "0.5,0.6"],
    ["export", "--class", "nf", "--method", "onf3", "--export", "lp", "/tmp/never.lp"],
    ["bench", "--class", "nf", "--m", "4..2", "--method", "onf3"],
    ["verify", "--game", "/nonexistent.lfg", "--solution", "/nonexistent.json"],
])
def test_usage_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_bad_export_format_exits_2(capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(["export", "--class", "nf", "--method", "onf3", "--export", "mps", "/tmp/x"])
    assert err.value.code == 2


def test_parse_range():
    assert cli.parse_range("2..4") == [2, 3, 4]
    assert cli.parse_range("1,3") == [1, 3]
    with pytest.raises(UsageError):
        cli.parse_range("5..3")


def test_check_method():
    check_method("blackbox", "nf", "pessimistic")
    with pytest.raises(UsageError):
        check_method("nope", "nf", "optimistic")


def test_zero_lower_bound_caps_gap():
    sol = LfenSolution(None, None, 0.0, False, 0.0, "x", "time_limit", 0.0, 3.0)
    row = BenchRow.from_solution(sol, "nf", 3, 2, 1, "onf3")
    assert row.mult_gap == 1e5 and row.add_gap == 3.0
