"""
Iterative refinement driver.

Starting from a feasible flow, every outer iteration builds the residual
model around the current flow ``F``, solves the residual circulation
problem for a step ``X`` and updates ``F <- F + alpha X``.  With
``alpha = 1`` this is the textbook refinement loop; by default ``alpha`` is
the minimizer of ``E(F + alpha X)`` over ``alpha >= 1``, which can only lower
the objective further and keeps every per-iteration guarantee.

Termination is certificate based.  Two upper bounds on ``E(F) - OPT`` are
tracked: the refinement bound ``lambda * (-R(X) + inner_error)`` and a
Lagrangian duality gap from fitted vertex potentials.  The smaller one is
reported as the gap bound.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InfeasibleInstanceError, ParameterError, QPFlowError
from .graph import Graph, as_demands, cycle_basis, residues, validate_instance
from .instance import ProblemInstance
from .objective import QPParams, gradient, objective
from .residual import build_residual, lambda_value, residual_value
from .subsolver import SubsolverConfig, SubsolverWarning, solve_residual

__all__ = [
    "DriverConfig",
    "SolveReport",
    "DriftError",
    "initial_flow",
    "gap_certificate",
    "dual_lower_bound",
    "extrapolate_step",
    "solve",
]

CERTIFIED = "certified"
UNCERTIFIED = "uncertified"


class DriftError(QPFlowError):
    """Accumulated round-off moved the flow off the feasible affine set."""


@dataclass(frozen=True)
class DriverConfig:
    """Outer-loop settings.

    ``max_outer_iters`` defaults to ``ceil(p * lambda * log(m / eps))``,
    clipped to ``iter_cap``.  ``stop_tol`` overrides the certificate
    threshold ``(eps E(F) + eps) / (1 + eps)``.
    """

    eps: float = 1e-3
    max_outer_iters: int | None = None
    iter_cap: int = 20_000
    stop_tol: float | None = None
    subsolver: SubsolverConfig = field(default_factory=SubsolverConfig)
    extrapolate: bool = True
    dual_certificate: bool = True
    threads: int | None = None
    record_timings: bool = True
    drift_tol: float = 1e-7

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ParameterError(f"eps must lie in (0, 1), got {self.eps}")
        if self.iter_cap < 0 or (self.max_outer_iters is not None and self.max_outer_iters < 0):
            raise ParameterError("iteration caps must be nonnegative")


@dataclass
class SolveReport:
    """Per-iteration trace of a :func:`solve` run.

    Entry ``t`` of every trace refers to the iterate ``F^t``: its objective,
    the residual value ``R(X^t; F^t)`` and the gap bound for ``F^t``.
    """

    objective_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    gap_bounds: list = field(default_factory=list)
    lambda_gap_bounds: list = field(default_factory=list)
    dual_gap_bounds: list = field(default_factory=list)
    feasibility_residual: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    iterations: int = 0
    terminated: str = UNCERTIFIED
    subsolver_warnings: int = 0
    newton_iterations: int = 0
    timings: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.terminated == CERTIFIED

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def gap_bound(self) -> float:
        return self.gap_bounds[-1]


def _grounded_laplacian_solve(graph: Graph, conductance: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``L phi = rhs`` with ``phi = 0`` at the lowest vertex of each component."""
    Bm = graph.incidence
    L = (Bm.T @ (Bm.multiply(conductance[:, None]))).toarray()
    labels = graph.component_labels
    grounded = np.zeros(graph.n, dtype=bool)
    for c in range(graph.n_components):
        grounded[np.flatnonzero(labels == c)[0]] = True
    keep = ~grounded
    phi = np.zeros_like(rhs)
    if keep.any():
        factor = cho_factor(L[np.ix_(keep, keep)])
        phi[keep] = cho_solve(factor, rhs[keep])
        # one step of iterative refinement
        r = rhs[keep] - L[np.ix_(keep, keep)] @ phi[keep]
        phi[keep] += cho_solve(factor, r)
    return phi


def initial_flow(graph: Graph, demands, params: QPParams | None = None) -> np.ndarray:
    """Per-commodity electrical flow with resistances ``w_e^2``.

    Minimizes ``sum_e w_e^2 x_e^2`` subject to ``B.T x = d_j`` for every
    column; the result routes the demands exactly up to round-off.
    """
    d = as_demands(graph, demands)
    validate_instance(graph, d).raise_if_infeasible()
    cond = 1.0 / graph.weights**2
    phi = _grounded_laplacian_solve(graph, cond, d)
    return cond[:, None] * np.asarray(graph.incidence @ phi)


def gap_certificate(residual: float, lam: float, inner_err: float) -> float:
    """Refinement bound ``E(F) - OPT <= lam * (-residual) + lam * inner_err``.

    Valid when ``residual`` comes from a residual solve certified to
    ``inner_err``; clamped at zero.
    """
    return max(0.0, lam * (-residual) + lam * inner_err)


def _conjugate_sum(Z: np.ndarray, weights: np.ndarray, params: QPParams) -> float:
    """``sum_e (w_e^pq ||.||_q^pq)^*(Z_e)``."""
    r = params.pq
    qd = params.q / (params.q - 1.0)
    a = weights**r
    s = np.sum(np.abs(Z) ** qd, axis=1) ** (1.0 / qd)
    rr = r / (r - 1.0)
    return float(np.sum((r - 1.0) * a * (s / (a * r)) ** rr))


def dual_lower_bound(flow, graph: Graph, demands, params: QPParams) -> float:
    """Lagrangian lower bound on the optimum from potentials fitted to ``flow``.

    Potentials ``phi`` solve the least-squares fit ``B phi ~ grad E(flow)``;
    the dual value ``t <phi, D> - E^*(t B phi)`` is then maximized over the
    scale ``t >= 0`` in closed form.  Exact at the optimum.
    """
    d = as_demands(graph, demands)
    G = gradient(flow, graph, params)
    Bm = graph.incidence
    phi = graph.laplacian_pinv @ np.asarray(Bm.T @ G)
    Z = np.asarray(Bm @ phi)
    lin = float(np.sum(phi * d))
    conj = _conjugate_sum(Z, graph.weights, params)
    if lin <= 0.0 or conj <= 0.0:
        return 0.0
    rr = params.pq / (params.pq - 1.0)
    t = (lin / (rr * conj)) ** (1.0 / (rr - 1.0))
    return max(0.0, lin * t - conj * t**rr)


def extrapolate_step(F: np.ndarray, X: np.ndarray, graph: Graph, params: QPParams, max_doublings: int = 200) -> float:
    """Minimizer of ``alpha -> E(F + alpha X)`` over ``alpha >= 1``.

    The map is convex, so its derivative is monotone: double until the
    derivative turns nonnegative, then bisect.
    """

    def slope(a):
        return float(np.sum(gradient(F + a * X, graph, params) * X))

    if not np.any(X) or slope(1.0) >= 0.0:
        return 1.0
    lo, hi = 1.0, 2.0
    for _ in range(max_doublings):
        if slope(hi) >= 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        return lo
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if slope(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    best = 1.0
    e_best = objective(F + X, graph, params)
    for a in (lo, hi):
        e = objective(F + a * X, graph, params)
        if e < e_best:
            best, e_best = a, e
    return best


def _default_iters(params: QPParams, lam: float, m: int, eps: float) -> float:
    return math.ceil(params.p * lam * math.log(max(m, 2) / eps))


def solve(instance: ProblemInstance, cfg: DriverConfig | None = None, flow0=None):
    """Run the refinement loop; return ``(F, report)``.

    ``report.terminated`` is ``"certified"`` once the gap bound guarantees
    ``E(F) <= (1 + eps) OPT + eps``, otherwise ``"uncertified"`` (cap hit).
    """
    cfg = cfg or DriverConfig(eps=instance.eps)
    eps = cfg.eps
    graph, D = instance.graph, instance.demands
    params = instance.params
    clock = time.perf_counter if cfg.record_timings else (lambda: 0.0)
    t_start = clock()

    feas = validate_instance(graph, D)
    if not feas.ok:
        feas.raise_if_infeasible()
    basis = cycle_basis(graph)
    lam = lambda_value(params)
    F = initial_flow(graph, D) if flow0 is None else np.array(flow0, dtype=float)
    t_init = clock() - t_start

    cap = cfg.iter_cap
    default_T = _default_iters(params, lam.value, graph.m, eps)
    if cfg.max_outer_iters is not None:
        cap = min(cap, cfg.max_outer_iters)
    cap = int(min(cap, default_T))

    report = SolveReport(
        params={
            "q": params.q,
            "p": params.p,
            "k": params.k,
            "n": graph.n,
            "m": graph.m,
            "eps": eps,
            "lambda": lam.value,
            "inner_tol": cfg.subsolver.inner_tol,
            "max_outer_iters": cap,
            "extrapolate": cfg.extrapolate,
        }
    )
    d_scale = 1.0 + float(np.max(np.abs(D))) if D.size else 1.0
    inner_err = params.k * cfg.subsolver.inner_tol
    t_sub = t_cert = 0.0

    t = 0
    while True:
        E = objective(F, graph, params)
        drift = float(np.max(np.abs(residues(graph, F) - D))) if D.size else 0.0
        if drift > cfg.drift_tol * d_scale:
            raise DriftError(f"feasibility drift {drift:.3g} at iteration {t}")
        t0 = clock()
        model = build_residual(F, graph, params)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SubsolverWarning)
            sol = solve_residual(graph, basis, model, cfg.subsolver, cfg.threads)
        report.subsolver_warnings += sum(issubclass(w.category, SubsolverWarning) for w in caught)
        report.newton_iterations += sol.newton_iterations
        X = sol.X
        R = residual_value(model, X)
        if R > 0.0:
            # zero is feasible; never step uphill
            X, R = np.zeros_like(X), 0.0
        t1 = clock()
        lam_gap = gap_certificate(R, lam.value, inner_err)
        dual_gap = math.inf
        if cfg.dual_certificate:
            dual_gap = max(0.0, E - dual_lower_bound(F, graph, D, params))
        gap = min(lam_gap, dual_gap)
        t_cert += clock() - t1
        t_sub += t1 - t0

        report.objective_trace.append(E)
        report.residual_trace.append(R)
        report.lambda_gap_bounds.append(lam_gap)
        report.dual_gap_bounds.append(dual_gap)
        report.gap_bounds.append(gap)
        report.feasibility_residual.append(drift)
        report.seconds.append(clock() - t_start)

        threshold = cfg.stop_tol if cfg.stop_tol is not None else (eps * E + eps) / (1.0 + eps)
        if gap <= threshold:
            report.terminated = CERTIFIED
            break
        if t >= cap:
            report.terminated = UNCERTIFIED
            break
        alpha = extrapolate_step(F, X, graph, params) if cfg.extrapolate else 1.0
        report.step_sizes.append(alpha)
        F = F + alpha * X
        t += 1

    report.iterations = t
    report.timings = {
        "initialize": t_init,
        "subsolve": t_sub,
        "certificate": t_cert,
        "total": clock() - t_start,
    }
    return F, report
