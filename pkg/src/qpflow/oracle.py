"""
Brute-force reference solvers used to check the refinement machinery.

Nothing here shares code paths with the driver beyond the objective
itself: feasibility is handled by orthogonal projection onto the affine
set ``{B.T F = D}`` (Laplacian pseudo-inverse, or an SVD null-space basis)
instead of cycle coordinates.  Two minimizers are available: projected
gradient with Barzilai-Borwein steps and Armijo backtracking, and L-BFGS
in orthonormal circulation coordinates.  The latter copes with the steep
curvature of ``|x|^q`` near zero for ``q`` close to 1, where plain
projected gradient crawls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize, minimize_scalar

from .errors import ParameterError, SizeLimitError
from .graph import Graph, as_demands, validate_instance
from .instance import ProblemInstance
from .objective import gradient, objective
from .residual import ResidualModel, _derivs, cost_values

__all__ = [
    "OracleConfig",
    "OracleResult",
    "projected_gradient",
    "lbfgs_circulation",
    "oracle_solve",
    "oracle_residual",
    "minimize_1d",
    "finite_diff",
    "MAX_EDGES",
    "MAX_COMMODITIES",
]

MAX_EDGES = 200
MAX_COMMODITIES = 4


@dataclass(frozen=True)
class OracleConfig:
    """Projected-gradient settings.

    The run stops once the objective decreased by less than
    ``tol * max(1, |E|)`` over ``window`` consecutive iterations.
    """

    max_iters: int = 1_000_000
    tol: float = 1e-13
    window: int = 50
    step0: float = 1e-3
    armijo: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self):
        if not (self.max_iters > 0 and self.tol > 0 and self.window > 0 and self.step0 > 0):
            raise ParameterError("oracle settings must be positive")


@dataclass(frozen=True, eq=False)
class OracleResult:
    flow: np.ndarray
    objective: float
    iterations: int
    stagnated: bool


def _projector(graph: Graph) -> np.ndarray:
    """Orthogonal projector onto the circulation space ``ker B.T``."""
    Bd = graph.incidence.toarray()
    return np.eye(graph.m) - Bd @ graph.laplacian_pinv @ Bd.T


def projected_gradient(fun, grad, graph: Graph, x0: np.ndarray, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """Minimize ``fun`` over ``x0 + circulations`` by projected gradient.

    ``x0`` must already satisfy the linear constraints; every iterate
    differs from it by an exactly projected circulation.
    """
    P = _projector(graph)
    x0 = np.array(x0, dtype=float)
    x = x0.copy()
    fx = fun(x)
    g = P @ grad(x)
    step = cfg.step0
    history = [fx]
    x_prev = g_prev = None
    it = 0
    stagnated = False
    while it < cfg.max_iters:
        gg = float(np.sum(g * g))
        if gg == 0.0 or not np.isfinite(gg):
            stagnated = True
            break
        if x_prev is not None:
            s = x - x_prev
            y = g - g_prev
            sy = float(np.sum(s * y))
            if sy > 0:
                step = float(np.sum(s * s)) / sy
        while True:
            # project the whole displacement so round-off cannot accumulate
            # outside the circulation space
            trial = x0 + P @ (x - step * g - x0)
            ft = fun(trial)
            if ft <= fx - cfg.armijo * step * gg:
                break
            step *= cfg.backtrack
            if step < 1e-300:
                break
        it += 1
        if not ft < fx:
            stagnated = True
            break
        x_prev, g_prev = x, g
        x, fx = trial, ft
        g = P @ grad(x)
        history.append(fx)
        if len(history) > cfg.window:
            drop = history[-cfg.window - 1] - fx
            if drop <= cfg.tol * max(1.0, abs(fx)):
                stagnated = True
                break
    return OracleResult(x, float(fx), it, stagnated)


def lbfgs_circulation(fun, grad, graph: Graph, x0: np.ndarray, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """Minimize ``fun`` over ``x0 + circulations`` by L-BFGS.

    Circulations are parameterized by an orthonormal basis ``N`` of
    ``ker B.T``, so the reduced gradient is ``N.T grad`` and the projected
    gradient is ``N N.T grad``.
    """
    x0 = np.array(x0, dtype=float)
    N = null_space(graph.incidence.toarray().T)
    shape = (N.shape[1],) + x0.shape[1:]
    if N.shape[1] == 0:
        return OracleResult(x0, float(fun(x0)), 0, True)

    def fg(y):
        x = x0 + N @ y.reshape(shape)
        return fun(x), (N.T @ grad(x)).ravel()

    res = minimize(
        fg,
        np.zeros(int(np.prod(shape))),
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": cfg.max_iters,
            "maxfun": 2 * cfg.max_iters,
            "maxcor": 30,
            "ftol": cfg.tol,
            "gtol": 0.0,
        },
    )
    x = x0 + N @ res.x.reshape(shape)
    fx = float(fun(x))
    f_start = float(fun(x0))
    if f_start < fx:
        x, fx = x0, f_start
    return OracleResult(x, fx, int(res.nit), bool(res.success))


def oracle_solve(instance: ProblemInstance, cfg: OracleConfig = OracleConfig(), method: str = "lbfgs") -> OracleResult:
    """Reference solution of the full flow problem (small instances only).

    ``method`` is ``"lbfgs"`` (default), ``"pgd"`` (projected gradient) or
    ``"best"`` (run both, keep the lower objective).
    """
    graph, D = instance.graph, instance.demands
    if graph.m > MAX_EDGES or instance.k > MAX_COMMODITIES:
        raise SizeLimitError(f"oracle limited to m <= {MAX_EDGES}, k <= {MAX_COMMODITIES}")
    validate_instance(graph, D).raise_if_infeasible()
    params = instance.params
    Bd = graph.incidence.toarray()
    F0 = Bd @ graph.laplacian_pinv @ as_demands(graph, D)
    args = (lambda F: objective(F, graph, params), lambda F: gradient(F, graph, params), graph, F0, cfg)
    if method == "pgd":
        return projected_gradient(*args)
    if method == "lbfgs":
        return lbfgs_circulation(*args)
    if method == "best":
        return min(projected_gradient(*args), lbfgs_circulation(*args), key=lambda r: r.objective)
    raise ParameterError(f"unknown oracle method {method!r}")


def oracle_residual(
    graph: Graph, model: ResidualModel, cfg: OracleConfig = OracleConfig(), method: str = "pgd"
) -> OracleResult:
    """Minimizer of ``R(X; F)`` over circulations, started from ``X = 0``.

    ``method`` is ``"pgd"`` (projected gradient, the default), ``"lbfgs"``
    or ``"best"`` (run both, keep the lower value).
    """
    prm = model.params
    s = model.scale

    def fun(X):
        return float(np.sum(cost_values(model, X)))

    def grad(X):
        d1, _ = _derivs(model.A, model.B, model.C, model.f, X, prm.q, prm.pq, s)
        return d1

    args = (fun, grad, graph, np.zeros(model.shape), cfg)
    if method == "pgd":
        return projected_gradient(*args)
    if method == "lbfgs":
        return lbfgs_circulation(*args)
    if method == "best":
        return min(projected_gradient(*args), lbfgs_circulation(*args), key=lambda r: r.objective)
    raise ParameterError(f"unknown oracle method {method!r}")


def minimize_1d(fun, lo: float, hi: float, xtol: float = 1e-12):
    """Bounded scalar minimization; returns ``(argmin, min)``."""
    res = minimize_scalar(fun, bounds=(lo, hi), method="bounded", options={"xatol": xtol, "maxiter": 10_000})
    return float(res.x), float(res.fun)


def finite_diff(fn, point, scale: float = 1.0) -> np.ndarray:
    """Central-difference gradient of a scalar function.

    Coordinate ``i`` uses ``h_i = scale * max(1, |x_i|) * 1e-6``; the
    truncation error is ``O(h^2)``.
    """
    x = np.array(point, dtype=float)
    out = np.empty_like(x)
    flat, grad = x.reshape(-1), out.reshape(-1)
    for i in range(flat.size):
        h = scale * max(1.0, abs(flat[i])) * 1e-6
        orig = flat[i]
        flat[i] = orig + h
        fp = fn(x)
        flat[i] = orig - h
        fm = fn(x)
        flat[i] = orig
        grad[i] = (fp - fm) / (2.0 * h)
    return out
