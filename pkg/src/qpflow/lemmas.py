"""
Seeded validation harness for the inequalities the refinement loop rests on.

Every check is an inequality ``L <= R`` evaluated on a batch of random
samples.  A sample passes when ``L <= R + 1e-9 |R| + 1e-12``.

Bregman divergences are evaluated without catastrophic cancellation.  For
``g(y) = |y|^r`` and ``f != 0``,

    |f + x|^r - |f|^r - r |f|^(r-2) f x = |f|^r phi_r(x / f),
    phi_r(u) = |1 + u|^r - 1 - r u,

with ``phi_r`` taken from its binomial series for small ``|u|``.  For the
edge function ``l(x) = (sum_j |x_j|^q)^p`` write ``S = sum_j |f_j|^q`` and
``delta = sum_j |f_j + x_j|^q - S``; then

    l(f + x) - l(f) - <grad l(f), x> = S^p phi_p(delta / S) + p S^(p-1) sum_j D_j,

where ``D_j`` is the Bregman divergence of ``|.|^q`` on coordinate ``j``.
Both terms are nonnegative, so nothing cancels.  Sums over the commodity
axis use Neumaier compensated summation.

Samples draw magnitudes log-uniformly from ``[1e-3, 1e3]`` with random
signs, plus atoms at ``0``, ``x = f`` and ``x = -f``.  The first rows of
every batch are fixed adversarial cases (``x = -f``, ``x = 0``, ``f = 0``,
``x = f``).  Each grid cell draws from its own stream keyed by
``(seed, cell index)``, so any reported sample can be regenerated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .objective import QPParams, edge_bregman, gamma, neumaier_sum, power_bregman
from .residual import _derivs, _third, build_residual, cost_values, lambda_value, self_concordance_beta

__all__ = [
    "LemmaCheck",
    "CellResult",
    "LemmaSummary",
    "ValidationReport",
    "CHECKS",
    "validate_lemmas",
    "replay_sample",
    "power_bregman",
    "edge_bregman",
    "neumaier_sum",
    "passes",
    "REL_SLACK",
    "ABS_SLACK",
]

REL_SLACK = 1e-9
ABS_SLACK = 1e-12


def passes(L, R):
    """Elementwise ``L <= R + 1e-9 |R| + 1e-12``."""
    L = np.asarray(L, dtype=float)
    R = np.asarray(R, dtype=float)
    return L <= R + REL_SLACK * np.abs(R) + ABS_SLACK


# ---------------------------------------------------------------- samplers


def _signed_loguniform(rng, shape, lo=1e-3, hi=1e3):
    mag = np.exp(rng.uniform(math.log(lo), math.log(hi), size=shape))
    return mag * rng.choice(np.array([-1.0, 1.0]), size=shape)


def _pair(rng, n: int, k: int):
    """Anchor/step rows with atoms; rows 0..3 are fixed adversarial cases."""
    f = _signed_loguniform(rng, (n, k))
    x = _signed_loguniform(rng, (n, k))
    u = rng.random((n, k))
    f = np.where(u < 0.08, 0.0, f)
    x = np.where((u >= 0.08) & (u < 0.13), 0.0, x)
    x = np.where((u >= 0.13) & (u < 0.18), -f, x)
    x = np.where((u >= 0.18) & (u < 0.23), f, x)
    rows = min(n, 4)
    base = np.linspace(0.5, 2.0, k)
    fixed_f = [base, base, np.zeros(k), base][:rows]
    fixed_x = [-base, np.zeros(k), base, base][:rows]
    f[:rows] = fixed_f
    x[:rows] = fixed_x
    return f, x


# ------------------------------------------------------------------ checks


@dataclass(frozen=True)
class LemmaCheck:
    """One inequality: ``sample(rng, n, params) -> dict`` and ``sides(dict, params) -> (L, R)``."""

    name: str
    statement: str
    sample: object
    sides: object


def _scalar_sample(rng, n, prm):
    f, x = _pair(rng, n, 1)
    return {"f": f[:, 0], "x": x[:, 0]}


def _vector_sample(rng, n, prm):
    f, x = _pair(rng, n, prm.k)
    return {"f": f, "x": x}


def _scaling_sample(rng, n, prm):
    d = _scalar_sample(rng, n, prm)
    t = np.exp(rng.uniform(0.0, math.log(1e3), size=n))
    t[: min(n, 2)] = 1.0
    d["t"] = t
    return d


def _norm_sample(rng, n, prm):
    u = _signed_loguniform(rng, (n, prm.k))
    u = np.where(rng.random((n, prm.k)) < 0.1, 0.0, u)
    return {"u": u}


def _hessian_sample(rng, n, prm):
    x = _signed_loguniform(rng, (n, prm.k))
    v = rng.normal(size=(n, prm.k))
    return {"x": x, "v": v}


def _weighted_sample(rng, n, prm):
    d = _vector_sample(rng, n, prm)
    d["w"] = np.exp(rng.uniform(math.log(0.1), math.log(10.0), size=n))
    return d


def _sc_sample(rng, n, prm):
    F = _signed_loguniform(rng, (n, prm.k))
    F = np.where(rng.random((n, prm.k)) < 0.2, 0.0, F)
    x = _signed_loguniform(rng, (n, prm.k))
    return {"F": F, "x": x}


def _g(x, f, q):
    return gamma(x, np.abs(f), q)


def _l26_lo(d, prm):
    q = prm.q
    return (q - 1.0) / (q * 2.0**q) * _g(d["x"], d["f"], q), power_bregman(d["f"], d["x"], q)


def _l26_hi(d, prm):
    q = prm.q
    return power_bregman(d["f"], d["x"], q), 2.0**q * _g(d["x"], d["f"], q)


def _l27_lo(d, prm):
    p, f, x = prm.p, d["f"], d["x"]
    L = p / 8.0 * np.abs(f) ** (p - 2.0) * x * x + 2.0 ** -(p + 1.0) * np.abs(x) ** p
    return L, power_bregman(f, x, p)


def _l27_hi(d, prm):
    p, f, x = prm.p, d["f"], d["x"]
    R = 2.0 * p * p * np.abs(f) ** (p - 2.0) * x * x + p**p * np.abs(x) ** p
    return power_bregman(f, x, p), R


def _l28_lo(d, prm):
    q, t = prm.q, d["t"]
    return t**q * _g(d["x"], d["f"], q), _g(t * d["x"], d["f"], q)


def _l28_hi(d, prm):
    q, t = prm.q, d["t"]
    return _g(t * d["x"], d["f"], q), t * t * _g(d["x"], d["f"], q)


def _anchor_power(f, prm):
    return neumaier_sum(np.abs(f) ** prm.q) ** (prm.p - 1.0)


def _gsum(x, f, q):
    return neumaier_sum(_g(x, f, q))


def _l31_lo(d, prm):
    q, p, pq = prm.q, prm.p, prm.pq
    f, x = d["f"], d["x"]
    L = p * (q - 1.0) / 16.0 * _anchor_power(f, prm) * _gsum(x, f, q)
    L = L + (q - 1.0) / (pq - 1.0) * 2.0 ** -(pq + 2.0) * neumaier_sum(np.abs(x) ** pq)
    return L, edge_bregman(f, x, q, p)


def _upper_rest(f, x, prm):
    q, p, k, pq = prm.q, prm.p, prm.k, prm.pq
    R = 7.0 / k * _anchor_power(f, prm) * _gsum(6.0 * k * p * x, f, q)
    return R + 3.0 * (6.0 * p * k) ** pq / k * neumaier_sum(np.abs(x) ** pq)


def _l31_hi(d, prm):
    return edge_bregman(d["f"], d["x"], prm.q, prm.p), _upper_rest(d["f"], d["x"], prm)


def _library_rest(F, X, w, prm):
    """Nonlinear part of the library's residual, one sample per parallel edge."""
    n = F.shape[0]
    g = Graph(2, np.zeros(n, dtype=np.int64), np.ones(n, dtype=np.int64), w)
    model = build_residual(F, g, prm)
    vals = cost_values(model, X) - model.A * X
    return neumaier_sum(vals)


def _l34_8(d, prm):
    w = d["w"]
    L = w**prm.pq * edge_bregman(d["f"], d["x"], prm.q, prm.p)
    return L, _library_rest(d["f"], d["x"], w, prm)


def _l34_9(d, prm):
    lam = lambda_value(prm).value
    f, x = d["f"], d["x"]
    return lam * _upper_rest(f, x, prm), edge_bregman(f, lam * x, prm.q, prm.p)


def _l43(d, prm):
    return _g(d["x"], d["f"], prm.q), np.abs(d["x"]) ** prm.q


def _l44_lo(d, prm):
    u, p = d["u"], prm.p
    return neumaier_sum(np.abs(u) ** p), neumaier_sum(np.abs(u)) ** p


def _l44_hi(d, prm):
    u, p, k = d["u"], prm.p, prm.k
    return neumaier_sum(np.abs(u)) ** p, k ** (p - 1.0) * neumaier_sum(np.abs(u) ** p)


def _hess_parts(d, prm):
    q, p, pq = prm.q, prm.p, prm.pq
    x, v = d["x"], d["v"]
    S = neumaier_sum(np.abs(x) ** q)
    diag = neumaier_sum(np.abs(x) ** (q - 2.0) * v * v)
    cross = neumaier_sum(np.abs(x) ** (q - 2.0) * x * v)
    quad = pq * (q - 1.0) * S ** (p - 1.0) * diag + p * (p - 1.0) * q * q * S ** (p - 2.0) * cross**2
    return S, diag, quad


def _l45_lo(d, prm):
    S, diag, quad = _hess_parts(d, prm)
    return prm.pq * (prm.q - 1.0) * S ** (prm.p - 1.0) * diag, quad


def _l45_hi(d, prm):
    S, diag, quad = _hess_parts(d, prm)
    return quad, prm.pq * (prm.pq - 1.0) * S ** (prm.p - 1.0) * diag


def _sc(d, prm):
    F, x = d["F"], d["x"]
    n = F.shape[0]
    g = Graph(2, np.zeros(n, dtype=np.int64), np.ones(n, dtype=np.int64))
    model = build_residual(F, g, prm)
    s = model.scale
    # keep points off the branch point |s x| = f
    near = np.abs(s * np.abs(x) - model.f) <= 1e-6 * np.maximum(model.f, 1e-300)
    x = np.where(near, 2.0 * x, x)
    _, d2 = _derivs(model.A, model.B, model.C, model.f, x, prm.q, prm.pq, s)
    d3 = _third(model.B, model.C, model.f, x, prm.q, prm.pq, s)
    beta = self_concordance_beta(prm)
    return np.abs(d3).ravel(), (3.0 * beta * np.abs(d2 / x)).ravel()


CHECKS: tuple[LemmaCheck, ...] = (
    LemmaCheck("l_q sandwich lower", "(q-1)/(q 2^q) gamma_q(x,|f|) <= D_q(f,x)", _scalar_sample, _l26_lo),
    LemmaCheck("l_q sandwich upper", "D_q(f,x) <= 2^q gamma_q(x,|f|)", _scalar_sample, _l26_hi),
    LemmaCheck("l_p sandwich lower", "(p/8)|f|^(p-2)x^2 + 2^-(p+1)|x|^p <= D_p(f,x)", _scalar_sample, _l27_lo),
    LemmaCheck("l_p sandwich upper", "D_p(f,x) <= 2p^2|f|^(p-2)x^2 + p^p|x|^p", _scalar_sample, _l27_hi),
    LemmaCheck("gamma scaling lower", "t^q gamma(x,f) <= gamma(tx,f), t >= 1", _scaling_sample, _l28_lo),
    LemmaCheck("gamma scaling upper", "gamma(tx,f) <= t^2 gamma(x,f), t >= 1", _scaling_sample, _l28_hi),
    LemmaCheck("edge refinement lower", "lower model <= D_l(f,x)", _vector_sample, _l31_lo),
    LemmaCheck("edge refinement upper", "D_l(f,x) <= upper model", _vector_sample, _l31_hi),
    LemmaCheck("residual upper coupling", "E(F+X) - E(F) <= R(X;F)", _weighted_sample, _l34_8),
    LemmaCheck("residual lower coupling", "E(F+lam X) - E(F) >= lam R(X;F)", _vector_sample, _l34_9),
    LemmaCheck("gamma domination", "gamma_q(x,|f|) <= |x|^q", _scalar_sample, _l43),
    LemmaCheck("norm comparison lower", "||u||_p^p <= ||u||_1^p", _norm_sample, _l44_lo),
    LemmaCheck("norm comparison upper", "||u||_1^p <= k^(p-1) ||u||_p^p", _norm_sample, _l44_hi),
    LemmaCheck("diagonal hessian lower", "pq(q-1) S^(p-1) diag <= v'Hv", _hessian_sample, _l45_lo),
    LemmaCheck("diagonal hessian upper", "v'Hv <= pq(pq-1) S^(p-1) diag", _hessian_sample, _l45_hi),
    LemmaCheck("self-concordance", "|c'''| <= 3 beta |c''/x|", _sc_sample, _sc),
)


# ------------------------------------------------------------------ report


@dataclass(frozen=True)
class CellResult:
    check: str
    q: float
    p: float
    k: int
    samples: int
    passed: int
    worst_margin: float  # max of (L - R) / max(|L|, |R|) over non-degenerate samples, floored at -1
    worst_index: int

    @property
    def ok(self) -> bool:
        return self.passed == self.samples


@dataclass(frozen=True)
class LemmaSummary:
    check: str
    samples: int
    passed: int
    worst_margin: float
    worst_cell: CellResult

    @property
    def ok(self) -> bool:
        return self.passed == self.samples


@dataclass(frozen=True)
class ValidationReport:
    seed: int
    samples: int
    q_grid: tuple
    p_grid: tuple
    k_grid: tuple
    cells: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cells)

    def summaries(self) -> list[LemmaSummary]:
        out = []
        for chk in CHECKS:
            cells = [c for c in self.cells if c.check == chk.name]
            if not cells:
                continue
            worst = max(cells, key=lambda c: (not c.ok, c.worst_margin))
            out.append(
                LemmaSummary(
                    chk.name,
                    sum(c.samples for c in cells),
                    sum(c.passed for c in cells),
                    worst.worst_margin,
                    worst,
                )
            )
        return out

    def failures(self) -> list[CellResult]:
        return [c for c in self.cells if not c.ok]

    def format_text(self) -> str:
        lines = [
            f"seed={self.seed} samples/cell={self.samples} "
            f"q={list(self.q_grid)} p={list(self.p_grid)} k={list(self.k_grid)}",
            f"{'check':<26} {'samples':>10} {'passed':>10} {'worst margin':>14}  status",
        ]
        for s in self.summaries():
            lines.append(
                f"{s.check:<26} {s.samples:>10} {s.passed:>10} {s.worst_margin:>14.3e}  {'PASS' if s.ok else 'FAIL'}"
            )
        for c in self.failures():
            lines.append(
                f"offending sample: check={c.check!r} q={c.q} p={c.p} k={c.k} index={c.worst_index} "
                f"(replay_sample(seed={self.seed}, check={c.check!r}, q={c.q}, p={c.p}, k={c.k}, "
                f"samples={self.samples}, index={c.worst_index}))"
            )
        lines.append("ALL PASS" if self.ok else "FAILURES PRESENT")
        return "\n".join(lines)


def _cell_rng(seed: int, cell: int, check: int):
    return np.random.default_rng([int(seed), int(cell), int(check)])


def _evaluate(chk_index: int, cell: int, prm: QPParams, samples: int, seed: int):
    chk = CHECKS[chk_index]
    data = chk.sample(_cell_rng(seed, cell, chk_index), samples, prm)
    with np.errstate(over="ignore", invalid="ignore"):
        L, R = chk.sides(data, prm)
    return data, np.asarray(L, dtype=float), np.asarray(R, dtype=float)


def _grid(q_grid, p_grid, k_grid):
    cells = []
    for q in q_grid:
        for p in p_grid:
            for k in k_grid:
                cells.append(QPParams(float(q), float(p), int(k)))
    return cells


def validate_lemmas(
    q_grid=(1.1, 1.5, 2.0),
    p_grid=(2.0, 3.0, 4.0),
    k_grid=(1, 2, 4, 8),
    samples: int = 10_000,
    seed: int = 0,
    checks=None,
) -> ValidationReport:
    """Run every inequality check on ``samples`` draws per grid cell.

    ``checks`` optionally restricts the run to a subset of check names.
    Deterministic for a fixed seed.  Non-finite sides count as failures.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    wanted = None if checks is None else set(checks)
    unknown = (wanted or set()) - {c.name for c in CHECKS}
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")
    cells = []
    for ci, prm in enumerate(_grid(q_grid, p_grid, k_grid)):
        for hi, chk in enumerate(CHECKS):
            if wanted is not None and chk.name not in wanted:
                continue
            _, L, R = _evaluate(hi, ci, prm, samples, seed)
            finite = np.isfinite(L) & np.isfinite(R)
            ok = passes(L, R) & finite
            with np.errstate(divide="ignore", invalid="ignore"):
                margin = (L - R) / np.maximum(np.maximum(np.abs(L), np.abs(R)), 1e-300)
            # samples with both sides exactly zero say nothing about tightness
            degenerate = (L == 0) & (R == 0)
            margin = np.where(degenerate, -np.inf, margin)
            margin = np.where(finite, np.nan_to_num(margin, nan=-np.inf), np.inf)
            # report the worst failing sample if any, else the tightest one
            score = np.where(ok, margin, np.inf)
            idx = int(np.argmax(score)) if not ok.all() else int(np.argmax(margin))
            cells.append(
                CellResult(
                    chk.name, prm.q, prm.p, prm.k, int(L.size), int(ok.sum()), max(float(np.max(margin)), -1.0), idx
                )
            )
    return ValidationReport(int(seed), int(samples), tuple(q_grid), tuple(p_grid), tuple(k_grid), tuple(cells))


def replay_sample(seed: int, check: str, q: float, p: float, k: int, samples: int, index: int, q_grid=None, p_grid=None, k_grid=None):
    """Regenerate one sample of a check; returns ``(inputs, L, R)``.

    The grids must match the original run (defaults reproduce a run over
    the single cell ``(q, p, k)``).
    """
    names = [c.name for c in CHECKS]
    hi = names.index(check)
    grid = _grid(q_grid or (q,), p_grid or (p,), k_grid or (k,))
    target = QPParams(float(q), float(p), int(k))
    ci = next(i for i, g in enumerate(grid) if (g.q, g.p, g.k) == (target.q, target.p, target.k))
    data, L, R = _evaluate(hi, ci, target, samples, seed)
    picked = {key: np.asarray(val)[index] for key, val in data.items()}
    if check == "self-concordance":
        # the check flattens (sample, commodity) pairs
        i, j = divmod(index, target.k)
        picked = {"F": data["F"][i], "x": data["x"][i], "entry": j}
    return picked, float(L[index]), float(R[index])
