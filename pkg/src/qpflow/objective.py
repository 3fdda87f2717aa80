"""
The composite q/p-norm flow objective and its building blocks.

For a flow ``F`` (``m x k``) on a weighted graph the objective is

    E(F) = sum_e w_e^(pq) * (sum_j |F_ej|^q)^p = sum_e w_e^(pq) * ||F_e||_q^(pq)

with ``1 < q <= 2 <= p``.  ``ell(x) = ||x||_q^(pq)`` denotes the unweighted
per-edge term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, ParameterError
from .graph import Graph, as_flow

__all__ = [
    "QPParams",
    "check_q",
    "gamma",
    "gamma_vec",
    "signed_power",
    "objective",
    "edge_objective",
    "gradient",
    "edge_gradient",
    "edge_hessian",
    "bregman",
    "power_bregman",
    "edge_bregman",
    "neumaier_sum",
]


def check_q(q: float) -> float:
    q = float(q)
    if not (1.0 < q <= 2.0):
        raise ParameterError(f"q must lie in (1, 2], got {q}")
    return q


@dataclass(frozen=True)
class QPParams:
    """Norm exponents ``q`` (inner) and ``p`` (outer) and commodity count ``k``."""

    q: float
    p: float
    k: int = 1

    def __post_init__(self):
        q = check_q(self.q)
        p = float(self.p)
        if not (np.isfinite(p) and p >= 2.0):
            raise ParameterError(f"p must be finite and >= 2, got {p}")
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError(f"k must be a positive integer, got {self.k}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "k", int(self.k))

    @property
    def pq(self) -> float:
        return self.p * self.q

    def with_k(self, k: int) -> "QPParams":
        return QPParams(self.q, self.p, k)


def signed_power(x, a):
    """``|x|^a * sign(x)``, zero at zero for every ``a > 0``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** a


def gamma(x, f, q):
    """Quadratic/power error function of ``x`` around the anchor ``f >= 0``.

    ``(q/2) f^(q-2) x^2`` when ``|x| <= f`` and ``|x|^q - (1 - q/2) f^q``
    otherwise; ``f = 0`` gives ``|x|^q``.  Broadcasts over arrays.

    >>> round(float(gamma(0.5, 1.0, 1.5)), 6)
    0.1875
    """
    q = check_q(q)
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise DomainError("gamma anchor f must be nonnegative")
    ax = np.abs(x)
    inner = (ax <= f) & (f > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = 0.5 * q * np.where(inner, f, 1.0) ** (q - 2.0) * x * x
        outer = ax**q - (1.0 - 0.5 * q) * f**q
    out = np.where(inner, quad, outer)
    return out[()] if out.ndim == 0 else out


def gamma_vec(x, f, q) -> float:
    """Coordinatewise sum of :func:`gamma` over two equal-length vectors."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if x.shape != f.shape:
        raise DimensionError(f"length mismatch: {x.shape} vs {f.shape}")
    return float(np.sum(gamma(x, f, q)))


def _row_power_sums(F: np.ndarray, q: float) -> np.ndarray:
    return np.sum(np.abs(F) ** q, axis=-1)


def edge_objective(x, params: QPParams):
    """``ell(x) = ||x||_q^(pq)`` along the last axis."""
    return _row_power_sums(np.asarray(x, dtype=float), params.q) ** params.p


def objective(flow, graph: Graph, params: QPParams) -> float:
    F = as_flow(graph, flow)
    return float(np.sum(graph.weights**params.pq * _row_power_sums(F, params.q) ** params.p))


def edge_gradient(x, params: QPParams) -> np.ndarray:
    """Gradient of ``ell`` along the last axis (rows are independent edges)."""
    x = np.asarray(x, dtype=float)
    q, p = params.q, params.p
    s = _row_power_sums(x, q)[..., None]
    return params.pq * s ** (p - 1.0) * signed_power(x, q - 1.0)


def gradient(flow, graph: Graph, params: QPParams) -> np.ndarray:
    """Gradient of :func:`objective`, an ``m x k`` array."""
    F = as_flow(graph, flow)
    return (graph.weights**params.pq)[:, None] * edge_gradient(F, params)


def edge_hessian(x, params: QPParams) -> np.ndarray:
    """Hessian of ``ell`` at a single ``k``-vector ``x``.

    Undefined at zero coordinates when ``q < 2``; those raise
    :class:`DomainError`.
    """
    x = np.asarray(x, dtype=float).ravel()
    q, p = params.q, params.p
    if q < 2.0 and np.any(x == 0):
        raise DomainError("edge Hessian is unbounded at a zero coordinate for q < 2")
    s = np.sum(np.abs(x) ** q)
    g = signed_power(x, q - 1.0)
    diag = params.pq * (q - 1.0) * s ** (p - 1.0) * np.abs(x) ** (q - 2.0)
    rank_one = p * (p - 1.0) * q * q * s ** (p - 2.0)
    return np.diag(diag) + rank_one * np.outer(g, g)


_SERIES_RADIUS = 0.05
_SERIES_TERMS = 16


def neumaier_sum(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Compensated sum along ``axis``."""
    a = np.moveaxis(np.asarray(a, dtype=float), axis, -1)
    s = np.zeros(a.shape[:-1])
    c = np.zeros(a.shape[:-1])
    for i in range(a.shape[-1]):
        v = a[..., i]
        t = s + v
        big = np.abs(s) >= np.abs(v)
        c += np.where(big, (s - t) + v, (v - t) + s)
        s = t
    return s + c


def _phi(u: np.ndarray, r: float) -> np.ndarray:
    """``|1 + u|^r - 1 - r u`` without cancellation near ``u = 0``."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < _SERIES_RADIUS
    us = u[small]
    term = 0.5 * r * (r - 1.0) * us * us
    acc = term.copy()
    for n in range(2, _SERIES_TERMS + 1):
        term = term * ((r - n) / (n + 1.0)) * us
        acc += term
    out[small] = acc
    ub = u[~small]
    out[~small] = np.abs(1.0 + ub) ** r - 1.0 - r * ub
    return np.maximum(out, 0.0)


def power_bregman(f, x, r: float) -> np.ndarray:
    """``|f + x|^r - |f|^r - r |f|^(r-2) f x``, elementwise and cancellation free."""
    f = np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    f, x = np.broadcast_arrays(f, x)
    out = np.abs(x) ** r
    nz = f != 0
    with np.errstate(over="ignore"):
        out = np.where(nz, np.abs(f) ** r * _phi(np.where(nz, x / np.where(nz, f, 1.0), 0.0), r), out)
    return out


def edge_bregman(f, x, q: float, p: float) -> np.ndarray:
    """Bregman divergence of ``(sum_j |.|^q)^p`` at rows of ``f`` along rows of ``x``."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    S = neumaier_sum(np.abs(f) ** q)
    Dq = power_bregman(f, x, q)
    lin = q * np.abs(f) ** (q - 1.0) * np.sign(f) * x
    sumD = neumaier_sum(Dq)
    delta = neumaier_sum(np.concatenate([Dq, lin], axis=1))
    pos = S > 0
    Ssafe = np.where(pos, S, 1.0)
    with np.errstate(over="ignore"):
        inner = Ssafe**p * _phi(np.where(pos, delta / Ssafe, 0.0), p) + p * Ssafe ** (p - 1.0) * sumD
    T = neumaier_sum(np.abs(x) ** q)
    return np.where(pos, inner, T**p)


def bregman(f, x, params: QPParams):
    """Bregman divergence of ``ell`` at ``f`` in direction ``x``.

    Evaluated as ``S^p phi_p(delta / S) + p S^(p-1) sum_j D_j`` with
    ``S = sum_j |f_j|^q``, ``delta = sum_j |f_j + x_j|^q - S``,
    ``phi_r(u) = |1 + u|^r - 1 - r u`` and ``D_j`` the Bregman divergence
    of ``|.|^q``.  Both terms are nonnegative, so the result never goes
    negative through cancellation.  Rows along the last axis are edges.
    """
    f = np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    if f.shape != x.shape:
        raise DimensionError(f"shape mismatch: {f.shape} vs {x.shape}")
    k = f.shape[-1] if f.ndim else 1
    out = edge_bregman(f.reshape(-1, k), x.reshape(-1, k), params.q, params.p)
    return float(out[0]) if f.ndim <= 1 else out.reshape(f.shape[:-1])
