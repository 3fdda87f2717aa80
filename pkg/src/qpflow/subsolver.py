"""
Single-commodity convex circulation solver for the residual problem.

Each commodity column of the residual problem is

    minimize  sum_e c_ej(x_e)   subject to   B.T x = 0.

Writing ``x = Z theta`` with ``Z`` the fundamental cycle matrix makes the
constraint implicit, leaving an unconstrained convex problem in ``theta``
that is solved by damped Newton with Armijo backtracking.  For ``q < 2``
each iteration also tries a step whose curvature is raised to the secant
slope ``(c'(x) - c'(0)) / x``; on stiff ``|x|^q`` coordinates plain Newton
flips the sign of ``x`` without shrinking it, and the secant step fixes
that.  The lower of the two line-searched points is kept.

Optimality is certified by a duality gap.  For vertex potentials ``phi``
and ``z = B phi`` every circulation satisfies ``<z, x> = 0``, hence

    min_x sum_e c_e(x_e) >= -sum_e c_e^*(z_e).

``phi`` is the curvature-weighted least-squares fit of ``c'(x)``; at the
optimum the fit is exact and the gap closes.  The Newton decrement alone is not trusted: at
zero anchors with ``q < 2`` the curvature is infinite and the quadratic
model undervalues the remaining decrease.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ParameterError
from .graph import CycleBasis, Graph
from .residual import ResidualModel, _derivs, _terms

__all__ = [
    "SubsolverConfig",
    "CommoditySolution",
    "ResidualSolution",
    "SubsolverWarning",
    "solve_commodity",
    "solve_residual",
    "duality_gap",
    "resolve_threads",
]


class SubsolverWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SubsolverConfig:
    """Tolerances of the Newton circulation solver.

    ``inner_tol`` bounds the additive suboptimality of each commodity's
    objective; it is certified through a duality gap.
    """

    inner_tol: float = 1e-10
    max_newton_iters: int = 200
    backtrack: float = 0.5
    armijo: float = 1e-4
    grad_tol: float = 1e-12

    def __post_init__(self):
        for name in ("inner_tol", "max_newton_iters", "backtrack", "armijo", "grad_tol"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.inner_tol >= 1:
            raise ParameterError("inner_tol must be < 1")
        if not (self.backtrack < 1 and self.armijo < 0.5):
            raise ParameterError("need backtrack < 1 and armijo < 0.5")


@dataclass(frozen=True, eq=False)
class CommoditySolution:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    decrement: float  # half squared Newton decrement at exit
    gap: float  # duality gap at exit (inf if never evaluated)


@dataclass(frozen=True, eq=False)
class ResidualSolution:
    X: np.ndarray
    columns: tuple

    @property
    def converged(self) -> bool:
        return all(c.converged for c in self.columns)

    @property
    def value(self) -> float:
        return float(sum(c.value for c in self.columns))

    @property
    def newton_iterations(self) -> int:
        return sum(c.iterations for c in self.columns)


def _conjugate(A, B, C, f, z, q, pq, s, iters=200):
    """``sup_y z y - c(y)`` per edge, maximizer found by bisection on ``c'``."""
    # c' is increasing with c'(0) = A, and c'(y) - A >= C pq |y|^(pq-1) sign(y)
    gap = z - A
    reach = (np.abs(gap) / (C * pq)) ** (1.0 / (pq - 1.0))
    lo = np.where(gap < 0, -reach, 0.0)
    hi = np.where(gap > 0, reach, 0.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        d1, _ = _derivs(A, B, C, f, mid, q, pq, s)
        below = d1 < z
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(np.abs(hi), 1e-300)):
            break
    y = 0.5 * (lo + hi)
    return z * y - _terms(A, B, C, f, y, q, pq, s)


def _fit_potential_differences(graph: Graph, d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """``B phi`` for the fit ``min_phi sum_e (d1_e - (B phi)_e)^2 / d2_e``.

    Mismatch on edge ``e`` costs about ``delta^2 / (2 c''_e)`` in the dual,
    so stiff edges get little weight and flat ones must match closely.
    """
    with np.errstate(divide="ignore"):
        w = 1.0 / d2
    finite = np.isfinite(w)
    big = np.max(w[finite]) if finite.any() else 1.0
    w = np.where(finite, w, 0.0)
    w = np.where(d2 > 0, w, 1e6 * max(big, 1.0))
    w = w / np.max(w)
    sw = np.sqrt(w)
    Bd = graph.incidence.toarray()
    phi, *_ = np.linalg.lstsq(sw[:, None] * Bd, sw * d1, rcond=None)
    z = Bd @ phi
    # a bridge is the only edge across its cut, so its potential
    # difference can be set independently of every other edge
    bridges = graph.bridges
    z[bridges] = d1[bridges]
    return z


def _majorized_curvature(A, d1, d2, x):
    """``max(c'', (c' - A) / x)``.

    The secant slope through the origin dominates the curvature of the
    ``|x|^q`` part when ``q < 2``, giving a quadratic upper model.  Plain
    Newton maps a stiff coordinate ``x`` to ``x (q - 2) / (q - 1)`` and
    can oscillate; the secant curvature sends it to zero instead.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        sec = np.where(x != 0, (d1 - A) / x, 0.0)
    return np.maximum(d2, sec)



def _gap_terms(graph: Graph, model: ResidualModel, j: int, x: np.ndarray):
    A, B, C, f = model.column(j)
    prm = model.params
    q, pq, s = prm.q, prm.pq, model.scale
    d1, d2 = _derivs(A, B, C, f, x, q, pq, s)
    z = _fit_potential_differences(graph, d1, d2)
    primal = _terms(A, B, C, f, x, q, pq, s)
    conj = _conjugate(A, B, C, f, z, q, pq, s)
    gap = max(0.0, float(np.sum(primal)) + float(np.sum(conj)))
    # summation round-off allowance
    noise = 1e-15 * (float(np.sum(np.abs(primal))) + float(np.sum(np.abs(conj))))
    return gap, noise


def duality_gap(graph: Graph, model: ResidualModel, j: int, x: np.ndarray) -> float:
    """Upper bound on ``sum_e c_ej(x_e) - min``; ``x`` must be a circulation."""
    return _gap_terms(graph, model, j, x)[0]


def solve_commodity(
    graph: Graph,
    basis: CycleBasis,
    model: ResidualModel,
    j: int,
    cfg: SubsolverConfig = SubsolverConfig(),
) -> CommoditySolution:
    """Minimize commodity ``j``'s residual cost over circulations.

    The returned ``x`` is an exact combination of basis cycles, so its
    residues vanish up to summation round-off.  ``converged`` is True when
    the duality gap is within ``inner_tol`` (plus a round-off allowance of
    ``1e-15`` times the summed term magnitudes).
    """
    m = graph.m
    if len(basis) == 0:
        return CommoditySolution(np.zeros(m), 0.0, 0, True, 0.0, 0.0)
    Z = basis.matrix
    A, B, C, f = model.column(j)
    prm = model.params
    q, pq, s = prm.q, prm.pq, model.scale
    floor = 1e-12 / s

    def value(x):
        return float(np.sum(_terms(A, B, C, f, x, q, pq, s)))

    def direction(g, d2):
        """Newton step in cycle coordinates and half its squared decrement."""
        H = Z.T @ (d2[:, None] * Z)
        try:
            ridge = 1e-14 * max(1.0, float(np.max(np.diag(H))))
            factor = cho_factor(H + ridge * np.eye(H.shape[0]), check_finite=True)
            step = -cho_solve(factor, g)
            dec = 0.5 * float(-g @ step)
            if np.isfinite(dec) and dec >= 0:
                return step, dec
        except (LinAlgError, ValueError):
            pass
        # near-singular curvature: steepest descent scaled by the diagonal
        return -g / np.maximum(np.diag(H), 1e-300), np.inf

    def search(x, val, g, step):
        """Armijo backtracking; returns ``(x, value)`` or None."""
        slope = float(g @ step)
        dx = Z @ step
        t = 1.0
        for _ in range(80):
            trial = x + t * dx
            tval = value(trial)
            if tval <= val + cfg.armijo * t * slope and tval < val:
                return trial, tval, t
            t *= cfg.backtrack
        return None

    x = np.zeros(m)
    val = 0.0
    dec = np.inf
    it = 0
    converged = False
    gap = np.inf
    while it < cfg.max_newton_iters:
        d1, d2 = _derivs(A, B, C, f, x, q, pq, s, floor)
        g = Z.T @ d1
        if np.max(np.abs(g)) <= cfg.grad_tol:
            dec = 0.0
            break
        step, dec = direction(g, d2)
        it += 1
        candidates = [search(x, val, g, step)]
        if dec <= cfg.inner_tol:
            # near-stationary: the full step may still shave round-off
            trial = x + Z @ step
            tval = value(trial)
            candidates.append((trial, tval, 1.0) if tval <= val else None)
            gap, noise = _gap_terms(graph, model, j, x)
            if gap <= cfg.inner_tol + noise:
                converged = True
                best = min((c for c in candidates if c is not None), key=lambda c: c[1], default=None)
                if best is not None:
                    x, val = best[0], best[1]
                break
        if q < 2.0:
            # stiff |x|^q coordinates make Newton oscillate; also try the
            # secant-curvature step and keep the better of the two
            maj = _majorized_curvature(A, d1, d2, x)
            if np.any(maj > d2):
                candidates.append(search(x, val, g, direction(g, maj)[0]))
        candidates = [c for c in candidates if c is not None]
        if not candidates:
            # no representable decrease left
            break
        x, val, _ = min(candidates, key=lambda c: c[1])
    if not converged:
        gap, noise = _gap_terms(graph, model, j, x)
        converged = gap <= cfg.inner_tol + noise
    return CommoditySolution(x, val, it, converged, float(dec), float(gap))


def resolve_threads(threads: int | None) -> int:
    """Explicit count, else ``QPFLOW_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("QPFLOW_THREADS", "").strip()
        threads = int(env) if env else 1
    if threads < 1:
        raise ParameterError("thread count must be >= 1")
    return threads


def solve_residual(
    graph: Graph,
    basis: CycleBasis,
    model: ResidualModel,
    cfg: SubsolverConfig = SubsolverConfig(),
    threads: int | None = None,
) -> ResidualSolution:
    """Solve every commodity column; columns run concurrently if ``threads > 1``."""
    k = model.params.k
    threads = min(resolve_threads(threads), k)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(lambda j: solve_commodity(graph, basis, model, j, cfg), range(k)))
    else:
        cols = [solve_commodity(graph, basis, model, j, cfg) for j in range(k)]
    bad = [j for j, c in enumerate(cols) if not c.converged]
    if bad:
        warnings.warn(f"subsolver did not certify inner_tol for commodities {bad}", SubsolverWarning)
    X = np.column_stack([c.x for c in cols])
    return ResidualSolution(X, tuple(cols))
