import json

import numpy as np
import pytest
from conftest import parallel_pair

from qpflow import InfeasibleInstanceError, InstanceFormatError
from qpflow.driver import DriverConfig, solve
from qpflow.instance import random_instance
from qpflow.io import (
    CSV_COLUMNS,
    JSON_FIELDS,
    emit_report,
    format_instance,
    load_report,
    parse_instance,
    parse_instance_text,
    write_instance,
)

MINIMAL = """\
# two parallel edges
p qpflow 2 2 1
e 1 2 1.0
e 1 2 2
d 1 1 1
d 2 1 -1.0
"""


def test_minimal_file():
    inst = parse_instance_text(MINIMAL, q=1.5, p=3.0)
    assert inst.graph.n == 2 and inst.graph.m == 2 and inst.k == 1
    np.testing.assert_array_equal(inst.graph.weights, [1.0, 2.0])
    np.testing.assert_array_equal(inst.demands, [[1.0], [-1.0]])
    assert (inst.q, inst.p) == (1.5, 3.0)


def test_missing_demands_are_zero():
    inst = parse_instance_text("p qpflow 3 2 2\ne 1 2 1\ne 2 3 1\nd 1 2 0.5\nd 3 2 -0.5\n")
    np.testing.assert_array_equal(inst.demands, [[0, 0.5], [0, 0], [0, -0.5]])


def test_infeasible_names_the_commodity():
    with pytest.raises(InfeasibleInstanceError, match="commodity 2"):
        parse_instance_text("p qpflow 2 1 2\ne 1 2 1\nd 1 2 1\n")


@pytest.mark.parametrize(
    "text, line, pattern",
    [
        ("e 1 2 1\n", 1, "must come first"),
        ("p qpflow 2 1 1\np qpflow 2 1 1\n", 2, "duplicate problem"),
        ("p qpflow 2 1\n", 1, "problem line"),
        ("p qpflow 2 1 1\ne 1 3 1\n", 2, "outside"),
        ("p qpflow 2 1 1\ne 1 1 1\n", 2, "self-loop"),
        ("p qpflow 2 1 1\ne 1 2 0\n", 2, "positive"),
        ("p qpflow 2 1 1\ne 1 2 1,5\n", 2, "decimal"),
        ("p qpflow 2 1 1\ne 1 2 nan\n", 2, "decimal"),
        ("p qpflow 2 1 1\ne 1 2 1\ne 1 2 1\n", 3, "more than"),
        ("p qpflow 2 1 1\ne 1 2 1\nd 1 1 1\nd 1 1 2\n", 4, "duplicate demand"),
        ("p qpflow 2 1 1\ne 1 2 1\nd 1 2 1\n", 3, "commodity 2 outside"),
        ("p qpflow 2 1 1\nx 1\n", 2, "unknown record"),
        ("p qpflow 2 1.5 1\n", 1, "integer"),
    ],
)
def test_errors_carry_line_numbers(text, line, pattern):
    with pytest.raises(InstanceFormatError, match=pattern) as info:
        parse_instance_text(text)
    assert str(info.value).startswith(f"line {line}: ")


def test_edge_count_mismatch_and_missing_header():
    with pytest.raises(InstanceFormatError, match="declared 2 edges, found 1"):
        parse_instance_text("p qpflow 2 2 1\ne 1 2 1\n")
    with pytest.raises(InstanceFormatError, match="missing problem line"):
        parse_instance_text("# nothing\n")


def test_instance_round_trip(tmp_path):
    inst = random_instance(9, n=6, m=9, k=3, q=1.5, p=2.0)
    path = tmp_path / "inst.txt"
    write_instance(inst, path, comment="seed 9")
    back = parse_instance(path, q=1.5, p=2.0)
    np.testing.assert_array_equal(back.graph.tails, inst.graph.tails)
    np.testing.assert_array_equal(back.graph.heads, inst.graph.heads)
    np.testing.assert_array_equal(back.graph.weights, inst.graph.weights)
    np.testing.assert_array_equal(back.demands, inst.demands)
    assert format_instance(back) == format_instance(inst)


def test_json_report_round_trip(tmp_path):
    _, rep = solve(parallel_pair(1.0, 2.0))
    path = tmp_path / "r.json"
    text = emit_report(rep, "json", path)
    data = load_report(path)
    assert set(data) == set(JSON_FIELDS)
    assert data["objective_trace"] == rep.objective_trace
    assert data["terminated"] == "certified"
    assert json.loads(text) == data


def test_csv_report(tmp_path):
    _, rep = solve(parallel_pair(1.0, 2.0))
    path = tmp_path / "r.csv"
    emit_report(rep, "csv", path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert all(len(line.split(",")) == 5 for line in lines)
    cols = load_report(path)
    assert cols["objective"] == rep.objective_trace
    assert cols["iter"] == list(range(rep.iterations + 1))


def test_zero_iteration_trace_has_one_row():
    _, rep = solve(parallel_pair())
    text = emit_report(rep, "csv")
    assert len(text.splitlines()) == 2
    assert len(json.loads(emit_report(rep))["objective_trace"]) == 1


def test_unknown_format():
    _, rep = solve(parallel_pair())
    with pytest.raises(ValueError):
        emit_report(rep, "xml")


def test_identical_runs_give_identical_bytes():
    inst = random_instance(3, n=6, m=10, k=2, q=1.5, p=2.0)
    cfg = DriverConfig(record_timings=False)
    a = emit_report(solve(inst, cfg)[1])
    b = emit_report(solve(inst, cfg)[1])
    assert a == b
