"""
Instance files and machine-readable solve reports.

Instance format (line oriented, ``#`` starts a comment, ids are 1-based)::

    p qpflow <n> <m> <k>
    e <tail> <head> <weight>      # exactly m edge lines, in edge order
    d <vertex> <commodity> <value> # optional; unspecified demands are 0

Numbers are parsed locale independently: a decimal point, an optional
exponent, no thousands separators.  Reports serialize floats with Python's
shortest round-trip representation, so reading a report back reproduces
every number bit for bit.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import re
from pathlib import Path

import numpy as np

from .driver import SolveReport
from .errors import InfeasibleInstanceError, InstanceFormatError
from .graph import Graph, validate_instance
from .instance import ProblemInstance

__all__ = [
    "parse_instance",
    "parse_instance_text",
    "format_instance",
    "write_instance",
    "report_to_dict",
    "emit_report",
    "load_report",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("iter", "objective", "residual", "gap_bound", "seconds")
JSON_FIELDS = (
    "objective_trace",
    "residual_trace",
    "gap_bounds",
    "iterations",
    "terminated",
    "feasibility_residual",
    "timings",
    "params",
)

_INT = re.compile(r"[+-]?\d+\Z")
_FLOAT = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\Z")


def _int(tok: str, what: str, lineno: int) -> int:
    if not _INT.match(tok):
        raise InstanceFormatError(f"{what} must be an integer, got {tok!r}", lineno)
    return int(tok)


def _float(tok: str, what: str, lineno: int) -> float:
    if not _FLOAT.match(tok):
        raise InstanceFormatError(f"{what} must be a decimal number, got {tok!r}", lineno)
    val = float(tok)
    if not math.isfinite(val):
        raise InstanceFormatError(f"{what} overflows: {tok!r}", lineno)
    return val


def parse_instance_text(text: str, q: float = 2.0, p: float = 2.0, eps: float = 1e-3) -> ProblemInstance:
    """Parse instance text; see the module docstring for the format."""
    header = None
    tails, heads, weights = [], [], []
    demand_lines: dict[tuple[int, int], int] = {}
    demands = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kind = tok[0]
        if kind == "p":
            if header is not None:
                raise InstanceFormatError("duplicate problem line", lineno)
            if len(tok) != 5 or tok[1] != "qpflow":
                raise InstanceFormatError("problem line must read 'p qpflow <n> <m> <k>'", lineno)
            n, m, k = (_int(t, name, lineno) for t, name in zip(tok[2:], ("n", "m", "k")))
            if n < 2 or m < 1 or k < 1:
                raise InstanceFormatError(f"need n >= 2, m >= 1, k >= 1; got n={n} m={m} k={k}", lineno)
            header = (n, m, k)
            demands = np.zeros((n, k))
            continue
        if header is None:
            raise InstanceFormatError("problem line 'p qpflow n m k' must come first", lineno)
        n, m, k = header
        if kind == "e":
            if len(tok) != 4:
                raise InstanceFormatError("edge line must read 'e <tail> <head> <weight>'", lineno)
            u = _int(tok[1], "tail", lineno)
            v = _int(tok[2], "head", lineno)
            w = _float(tok[3], "weight", lineno)
            for name, val in (("tail", u), ("head", v)):
                if not 1 <= val <= n:
                    raise InstanceFormatError(f"{name} {val} outside 1..{n}", lineno)
            if u == v:
                raise InstanceFormatError(f"self-loop at vertex {u}", lineno)
            if w <= 0:
                raise InstanceFormatError(f"edge weight must be positive, got {tok[3]}", lineno)
            if len(tails) == m:
                raise InstanceFormatError(f"more than the declared {m} edges", lineno)
            tails.append(u - 1)
            heads.append(v - 1)
            weights.append(w)
        elif kind == "d":
            if len(tok) != 4:
                raise InstanceFormatError("demand line must read 'd <vertex> <commodity> <value>'", lineno)
            v = _int(tok[1], "vertex", lineno)
            j = _int(tok[2], "commodity", lineno)
            val = _float(tok[3], "demand", lineno)
            if not 1 <= v <= n:
                raise InstanceFormatError(f"vertex {v} outside 1..{n}", lineno)
            if not 1 <= j <= k:
                raise InstanceFormatError(f"commodity {j} outside 1..{k}", lineno)
            if (v, j) in demand_lines:
                raise InstanceFormatError(
                    f"duplicate demand for vertex {v}, commodity {j} (first on line {demand_lines[(v, j)]})",
                    lineno,
                )
            demand_lines[(v, j)] = lineno
            demands[v - 1, j - 1] = val
        else:
            raise InstanceFormatError(f"unknown record type {kind!r}", lineno)
    if header is None:
        raise InstanceFormatError("missing problem line 'p qpflow n m k'")
    n, m, k = header
    if len(tails) != m:
        raise InstanceFormatError(f"declared {m} edges, found {len(tails)}")
    graph = Graph(n, tails, heads, weights)
    report = validate_instance(graph, demands)
    if not report.ok:
        comp, j, imb = report.violations[0]
        where = "" if comp < 0 else f" on the component containing vertex {_first_vertex(graph, comp) + 1}"
        raise InfeasibleInstanceError(
            f"demands of commodity {j + 1} sum to {imb!r}{where}, not zero",
            report.violations,
        )
    return ProblemInstance(graph, demands, q, p, eps)


def _first_vertex(graph: Graph, comp: int) -> int:
    return int(np.flatnonzero(graph.component_labels == comp)[0])


def parse_instance(path, q: float = 2.0, p: float = 2.0, eps: float = 1e-3) -> ProblemInstance:
    """Read and validate an instance file."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_instance_text(text, q, p, eps)


def format_instance(instance: ProblemInstance, comment: str | None = None) -> str:
    """Instance text that :func:`parse_instance_text` reads back exactly."""
    g = instance.graph
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"p qpflow {g.n} {g.m} {instance.k}")
    for u, v, w in zip(g.tails.tolist(), g.heads.tolist(), g.weights.tolist()):
        lines.append(f"e {u + 1} {v + 1} {w!r}")
    D = instance.demands
    for v, j in zip(*np.nonzero(D)):
        lines.append(f"d {v + 1} {j + 1} {float(D[v, j])!r}")
    return "\n".join(lines) + "\n"


def write_instance(instance: ProblemInstance, path, comment: str | None = None) -> None:
    Path(path).write_text(format_instance(instance, comment), encoding="utf-8")


def _plain(obj):
    """Convert numpy scalars and containers to JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def report_to_dict(report: SolveReport) -> dict:
    return {name: _plain(getattr(report, name)) for name in JSON_FIELDS}


def _csv_text(report: SolveReport) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for t in range(len(report.objective_trace)):
        seconds = report.seconds[t] if t < len(report.seconds) else 0.0
        writer.writerow(
            [
                t,
                repr(float(report.objective_trace[t])),
                repr(float(report.residual_trace[t])),
                repr(float(report.gap_bounds[t])),
                repr(float(seconds)),
            ]
        )
    return buf.getvalue()


def emit_report(report: SolveReport, fmt: str = "json", path=None) -> str:
    """Serialize ``report`` as JSON or CSV; write it to ``path`` if given.

    Returns the serialized text.  JSON keys are sorted so equal reports
    give identical bytes.
    """
    if fmt == "json":
        text = json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"
    elif fmt == "csv":
        text = _csv_text(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}; use 'json' or 'csv'")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_report(path, fmt: str | None = None):
    """Read a report written by :func:`emit_report`.

    JSON gives a dict; CSV gives a dict of column lists (``iter`` as ints,
    the rest as floats).  The format is inferred from the suffix if omitted.
    """
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "json")
    text = path.read_text(encoding="utf-8")
    if fmt == "json":
        return json.loads(text)
    if fmt == "csv":
        rows = list(csv.reader(_io.StringIO(text)))
        if not rows or tuple(rows[0]) != CSV_COLUMNS:
            raise ValueError(f"CSV header must be {','.join(CSV_COLUMNS)}")
        cols = {c: [] for c in CSV_COLUMNS}
        for row in rows[1:]:
            cols["iter"].append(int(row[0]))
            for c, v in zip(CSV_COLUMNS[1:], row[1:]):
                cols[c].append(float(v))
        return cols
    raise ValueError(f"unknown report format {fmt!r}")
