import json
import subprocess
import sys

import pytest

from qpflow.cli import main
from qpflow.instance import random_instance
from qpflow.io import write_instance

PAIR = "p qpflow 2 2 1\ne 1 2 1\ne 1 2 2\nd 1 1 1\nd 2 1 -1\n"


@pytest.fixture
def pair_file(tmp_path):
    path = tmp_path / "pair.txt"
    path.write_text(PAIR)
    return path


def test_solve_certifies(pair_file, capsys):
    assert main(["solve", "--input", str(pair_file), "--q", "2", "--p", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["terminated"] == "certified"
    assert out["objective_trace"][-1] == pytest.approx(0.366902303439166, rel=1e-4)


def test_solve_writes_csv(pair_file, tmp_path, capsys):
    dest = tmp_path / "trace.csv"
    code = main(["solve", "--input", str(pair_file), "--q", "2", "--p", "2", "--format", "csv", "--output", str(dest)])
    assert code == 0
    assert capsys.readouterr().out == ""
    assert dest.read_text().startswith("iter,objective,residual,gap_bound,seconds\n")


def test_uncertified_exit_code(tmp_path):
    path = tmp_path / "r.txt"
    write_instance(random_instance(4, n=8, m=15, k=2), path)
    args = ["solve", "--input", str(path), "--q", "1.5", "--p", "2", "--eps", "1e-6", "--max-iters", "0"]
    assert main(args) == 2


def test_infeasible_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("p qpflow 2 1 1\ne 1 2 1\nd 1 1 1\n")
    assert main(["solve", "--input", str(path), "--q", "2", "--p", "2"]) == 3
    assert "commodity 1" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--input", "{bad}", "--q", "2", "--p", "2"],
        ["solve", "--input", "{pair}", "--q", "2.5", "--p", "2"],
        ["solve", "--input", "{pair}", "--q", "2", "--p", "1"],
        ["solve", "--input", "{missing}", "--q", "2", "--p", "2"],
        ["solve", "--q", "2", "--p", "2"],
        ["frobnicate"],
    ],
)
def test_parse_and_argument_errors_exit_4(argv, pair_file, tmp_path):
    bad = tmp_path / "garbage.txt"
    bad.write_text("p qpflow 2 1 1\ne 1 2 zero\n")
    paths = {"bad": str(bad), "pair": str(pair_file), "missing": str(tmp_path / "nope.txt")}
    argv = [a.format(**paths) for a in argv]
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 4


def test_oracle_command(pair_file, capsys):
    assert main(["oracle", "--input", str(pair_file), "--q", "2", "--p", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["objective"] == pytest.approx(0.366902303439166, rel=1e-9)


def test_oracle_size_limit(tmp_path):
    path = tmp_path / "big.txt"
    path.write_text("p qpflow 2 201 1\n" + "e 1 2 1\n" * 201)
    assert main(["oracle", "--input", str(path), "--q", "2", "--p", "2"]) == 5


def test_check_command(capsys):
    code = main(["check", "--q-grid", "1.5", "--p-grid", "2,3", "--k-grid", "1", "2", "--samples", "200"])
    assert code == 0
    assert capsys.readouterr().out.rstrip().endswith("ALL PASS")


def test_solve_json_is_byte_identical(pair_file, tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        dest = tmp_path / name
        args = ["solve", "--input", str(pair_file), "--q", "1.5", "--p", "3", "--no-timings", "--output", str(dest)]
        assert main(args) == 0
        outs.append(dest.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point(pair_file):
    proc = subprocess.run(
        [sys.executable, "-m", "qpflow", "solve", "--input", str(pair_file), "--q", "2", "--p", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "certified" in proc.stderr
