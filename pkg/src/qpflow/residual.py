"""
Residual surrogate around an anchor flow.

Given an anchor ``F`` the residual objective of a step ``X`` is

    R(X; F) = sum_{e,j} c_ej(X_ej),
    c_ej(x) = A_ej x + B_ej gamma_q(s x, |F_ej|) + C_ej |x|^(pq),   s = 6kp,

which upper-bounds ``E(F + X) - E(F)`` and, after shrinking by ``lambda``,
lower-bounds it.  It decouples across commodities, so each column is an
independent single-commodity convex circulation problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .graph import Graph, as_flow
from .objective import QPParams, gamma, signed_power

__all__ = [
    "ResidualModel",
    "Lambda",
    "build_residual",
    "residual_value",
    "residual_columns",
    "cost_values",
    "cost_derivatives",
    "cost_third_derivative",
    "self_concordance_beta",
    "self_concordance_check",
    "lambda_value",
]


@dataclass(frozen=True, eq=False)
class ResidualModel:
    """Per-(edge, commodity) cost coefficients, all ``m x k`` arrays."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    f: np.ndarray
    params: QPParams

    def __post_init__(self):
        for name in ("A", "B", "C", "f"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.A.shape == self.B.shape == self.C.shape == self.f.shape):
            raise DimensionError("coefficient arrays must share one shape")
        if self.A.ndim != 2 or self.A.shape[1] != self.params.k:
            raise DimensionError("coefficients must be m x k with k = params.k")

    @property
    def scale(self) -> float:
        """The step magnification ``6kp`` inside the gamma term."""
        return 6.0 * self.params.k * self.params.p

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def column(self, j: int):
        """Coefficient vectors ``(A, B, C, f)`` of commodity ``j``."""
        return self.A[:, j], self.B[:, j], self.C[:, j], self.f[:, j]


def build_residual(flow, graph: Graph, params: QPParams) -> ResidualModel:
    """Materialize the residual cost coefficients around the anchor ``flow``."""
    F = as_flow(graph, flow)
    if F.shape[1] != params.k:
        raise DimensionError(f"flow has {F.shape[1]} commodities, params say {params.k}")
    q, p, k, pq = params.q, params.p, params.k, params.pq
    wpq = (graph.weights**pq)[:, None]
    norm_pow = np.sum(np.abs(F) ** q, axis=1, keepdims=True) ** (p - 1.0)
    A = wpq * pq * norm_pow * signed_power(F, q - 1.0)
    B = np.broadcast_to(wpq * (7.0 / k) * norm_pow, F.shape)
    C = np.broadcast_to(wpq * 3.0 * (6.0 * p * k) ** pq / k, F.shape)
    return ResidualModel(A, B, C, np.abs(F), params)


def _terms(A, B, C, f, x, q, pq, s):
    return A * x + B * gamma(s * x, f, q) + C * np.abs(x) ** pq


def cost_values(model: ResidualModel, X) -> np.ndarray:
    """Elementwise ``c_ej(X_ej)``; ``X`` must have the model's shape."""
    X = np.asarray(X, dtype=float)
    if X.shape != model.shape:
        raise DimensionError(f"step has shape {X.shape}, model expects {model.shape}")
    p = model.params
    return _terms(model.A, model.B, model.C, model.f, X, p.q, p.pq, model.scale)


def residual_columns(model: ResidualModel, X) -> np.ndarray:
    """Per-commodity residual values (length ``k``)."""
    return np.sum(cost_values(model, X), axis=0)


def residual_value(model: ResidualModel, X) -> float:
    """``R(X; F)`` for the anchor the model was built around."""
    return float(np.sum(residual_columns(model, X)))


def _derivs(A, B, C, f, x, q, pq, s, floor=0.0):
    """First and second derivatives of the cost, vectorized.

    The inner (quadratic) branch is used on ``|s x| <= f`` when ``f > 0``.
    ``floor`` replaces ``|x|`` in the outer-branch curvature when it is
    smaller, keeping ``|x|^(q-2)`` finite at ``x = 0``.
    """
    ax = np.abs(x)
    sgn = np.sign(x)
    inner = (f > 0) & (s * ax <= f)
    with np.errstate(divide="ignore", invalid="ignore"):
        fq2 = np.where(inner, f, 1.0) ** (q - 2.0)
        d1_in = B * q * fq2 * s * s * x
        d2_in = B * q * fq2 * s * s
        d1_out = B * s**q * q * ax ** (q - 1.0) * sgn
        axf = np.maximum(ax, floor)
        d2_out = np.where(B > 0, B * s**q * q * (q - 1.0) * axf ** (q - 2.0), 0.0)
    pw1 = C * pq * ax ** (pq - 1.0) * sgn
    pw2 = C * pq * (pq - 1.0) * ax ** (pq - 2.0)
    d1 = A + np.where(inner, d1_in, d1_out) + pw1
    d2 = np.where(inner, d2_in, d2_out) + pw2
    return d1, d2


def cost_derivatives(model: ResidualModel, e: int, j: int, x: float):
    """``(c, c', c'')`` of the cost on edge ``e``, commodity ``j`` at ``x``.

    At the branch point ``|6kp x| = f`` the inner-branch curvature is
    returned.  With ``f = 0`` and ``q < 2`` the curvature at ``x = 0`` is
    ``inf`` (the cost behaves like ``|x|^q`` there).
    """
    p = model.params
    A, B, C, f = (float(a[e, j]) for a in (model.A, model.B, model.C, model.f))
    c = float(_terms(A, B, C, f, float(x), p.q, p.pq, model.scale))
    d1, d2 = _derivs(A, B, C, f, np.float64(x), p.q, p.pq, model.scale)
    return c, float(d1), float(d2)


def _third(B, C, f, x, q, pq, s):
    """Third derivative of the cost, vectorized (``0 * inf`` terms read as 0)."""
    ax = np.abs(x)
    sgn = np.sign(x)
    outer = ~((f > 0) & (s * ax <= f)) & (B > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        pw = C * pq * (pq - 1.0) * (pq - 2.0) * ax ** (pq - 3.0) * sgn
        pw = np.where(pq == 2.0, 0.0, pw)
        gq = B * s**q * q * (q - 1.0) * (q - 2.0) * ax ** (q - 3.0) * sgn
        gq = np.where(q == 2.0, 0.0, gq)
    return pw + np.where(outer, gq, 0.0)


def cost_third_derivative(model: ResidualModel, e: int, j: int, x: float) -> float:
    p = model.params
    B, C, f = float(model.B[e, j]), float(model.C[e, j]), float(model.f[e, j])
    return float(_third(B, C, f, np.float64(x), p.q, p.pq, model.scale))


def self_concordance_beta(params: QPParams) -> float:
    return max(2.0 - params.q, params.pq - 2.0) / 3.0


def self_concordance_check(model: ResidualModel, e: int, j: int, x: float, rtol: float = 1e-9) -> bool:
    """Whether ``|c'''(x)| <= 3 beta |c''(x) / x|`` with the standard beta.

    Meaningful for ``x != 0`` away from the branch point.
    """
    if x == 0:
        raise ValueError("self-concordance ratio is undefined at x = 0")
    _, _, d2 = cost_derivatives(model, e, j, x)
    d3 = cost_third_derivative(model, e, j, x)
    rhs = 3.0 * self_concordance_beta(model.params) * abs(d2 / x)
    return abs(d3) <= rhs * (1.0 + rtol) + 1e-300


@dataclass(frozen=True)
class Lambda:
    """Step parameter and the two explicit bounds it is the max of."""

    value: float
    bound1: float
    bound2: float


def lambda_value(params: QPParams) -> Lambda:
    """``max(k p (4032/(q-1))^(1/(q-1)), 1728 k ((pq-1)/(q-1))^(1/(pq-1)) p^(pq/(pq-1)))``."""
    q, p, k, pq = params.q, params.p, params.k, params.pq
    log1 = math.log(k * p) + math.log(4032.0 / (q - 1.0)) / (q - 1.0)
    log2 = (
        math.log(1728.0 * k)
        + math.log((pq - 1.0) / (q - 1.0)) / (pq - 1.0)
        + math.log(p) * pq / (pq - 1.0)
    )
    if max(log1, log2) > 700.0:
        raise ParameterError(f"lambda overflows double precision for q={q}, p={p}, k={k}")
    b1 = k * p * (4032.0 / (q - 1.0)) ** (1.0 / (q - 1.0))
    b2 = 1728.0 * k * ((pq - 1.0) / (q - 1.0)) ** (1.0 / (pq - 1.0)) * p ** (pq / (pq - 1.0))
    return Lambda(max(b1, b2), b1, b2)
