"""
Undirected multigraphs, incidence arithmetic and circulation bases.

Sign convention
---------------
Every edge ``e = (u, v)`` carries an orientation from its tail ``u`` to its
head ``v``.  The edge-vertex incidence matrix ``B`` (shape ``m x n``) has
``B[e, u] = +1`` and ``B[e, v] = -1``.  A flow ``x`` routes the demand
``d = B.T @ x``, so a positive value on ``e`` moves mass out of the tail and
into the head: the tail sees a residue of ``+x_e`` (net outflow), the head
``-x_e``.  Demands therefore use ``+`` for sources and ``-`` for sinks.

Vertex ids are 0-based everywhere inside the package; instance files use
1-based ids and are translated by :mod:`qpflow.io`.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DimensionError, InfeasibleInstanceError, QPFlowError

__all__ = [
    "Graph",
    "CycleBasis",
    "FeasibilityReport",
    "residues",
    "cycle_basis",
    "validate_instance",
    "as_demands",
    "as_flow",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """An undirected multigraph with oriented, positively weighted edges.

    Parameters
    ----------
    n : int
        Number of vertices (ids ``0 .. n-1``).
    tails, heads : array_like of int
        Edge endpoints.  Parallel edges are allowed, self-loops are not.
    weights : array_like of float, optional
        Positive edge weights (default all ones).
    """

    n: int
    tails: np.ndarray
    heads: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        n = int(self.n)
        tails = np.array(self.tails, dtype=np.int64).ravel()
        heads = np.array(self.heads, dtype=np.int64).ravel()
        if self.weights is None:
            weights = np.ones(tails.shape[0])
        else:
            weights = np.array(self.weights, dtype=float).ravel()
        if n < 2:
            raise QPFlowError(f"graph needs at least 2 vertices, got {n}")
        if tails.shape != heads.shape or tails.shape != weights.shape:
            raise DimensionError("tails, heads and weights must have equal length")
        if tails.size < 1:
            raise QPFlowError("graph needs at least one edge")
        if tails.min() < 0 or heads.min() < 0 or tails.max() >= n or heads.max() >= n:
            raise QPFlowError(f"edge endpoint outside [0, {n - 1}]")
        loops = np.flatnonzero(tails == heads)
        if loops.size:
            raise QPFlowError(f"self-loop on edge {int(loops[0])}")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise QPFlowError("edge weights must be finite and positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "tails", _frozen(tails))
        object.__setattr__(self, "heads", _frozen(heads))
        object.__setattr__(self, "weights", _frozen(weights))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], weights=None) -> "Graph":
        """Build from an iterable of ``(tail, head)`` pairs (0-based)."""
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        return cls(n, edges[:, 0], edges[:, 1], weights)

    @property
    def m(self) -> int:
        return int(self.tails.shape[0])

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.tails.tolist(), self.heads.tolist()))

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Sparse ``m x n`` incidence matrix ``B`` (see module docstring)."""
        m = self.m
        rows = np.repeat(np.arange(m), 2)
        cols = np.column_stack([self.tails, self.heads]).ravel()
        vals = np.tile([1.0, -1.0], m)
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, self.n))

    @cached_property
    def _components(self) -> tuple[int, np.ndarray]:
        adj = sp.coo_matrix(
            (np.ones(self.m), (self.tails, self.heads)), shape=(self.n, self.n)
        )
        count, labels = connected_components(adj, directed=False)
        return int(count), _frozen(labels.astype(np.int64))

    @property
    def n_components(self) -> int:
        return self._components[0]

    @property
    def component_labels(self) -> np.ndarray:
        """Component id of every vertex; ids are numbered by lowest vertex."""
        return self._components[1]

    @cached_property
    def laplacian_pinv(self) -> np.ndarray:
        """Dense pseudo-inverse of the unweighted Laplacian ``B.T @ B``."""
        L = (self.incidence.T @ self.incidence).toarray()
        return _frozen(np.linalg.pinv(L, hermitian=True))

    @cached_property
    def bridges(self) -> np.ndarray:
        """Boolean mask of edges that lie on no cycle."""
        basis = cycle_basis(self)
        if len(basis) == 0:
            return _frozen(np.ones(self.m, dtype=bool))
        return _frozen(~np.any(basis.matrix != 0, axis=1))


def as_flow(graph: Graph, flow) -> np.ndarray:
    """Return ``flow`` as a float ``m x k`` array, checking the row count."""
    x = np.asarray(flow, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != graph.m:
        raise DimensionError(f"flow must have {graph.m} rows, got shape {np.shape(flow)}")
    return x


def as_demands(graph: Graph, demands) -> np.ndarray:
    """Return ``demands`` as a float ``n x k`` array, checking the row count."""
    d = np.asarray(demands, dtype=float)
    if d.ndim == 1:
        d = d[:, None]
    if d.ndim != 2 or d.shape[0] != graph.n:
        raise DimensionError(f"demands must have {graph.n} rows, got shape {np.shape(demands)}")
    return d


def residues(graph: Graph, flow) -> np.ndarray:
    """Vertex residues ``B.T @ flow`` (net outflow per vertex and commodity).

    A 1-D flow gives a 1-D result, an ``m x k`` flow an ``n x k`` result.

    >>> g = Graph.from_edges(2, [(0, 1)])
    >>> residues(g, [1.0])
    array([ 1., -1.])
    """
    squeeze = np.ndim(flow) == 1
    x = as_flow(graph, flow)
    out = np.asarray(graph.incidence.T @ x)
    return out[:, 0] if squeeze else out


@dataclass(frozen=True, eq=False)
class CycleBasis:
    """Fundamental cycle basis of a graph's circulation space.

    ``cycles[i]`` is a pair ``(edge_ids, signs)`` with signs in ``{+1, -1}``;
    the sign of the lowest edge id in every cycle is ``+1``.
    ``non_tree[i]`` is the edge that closes cycle ``i``.
    """

    m: int
    cycles: tuple
    non_tree: tuple

    def __len__(self) -> int:
        return len(self.cycles)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense ``m x r`` matrix whose columns are the basis cycles."""
        C = np.zeros((self.m, len(self.cycles)))
        for i, (idx, sgn) in enumerate(self.cycles):
            C[idx, i] = sgn
        return _frozen(C)

    def vectors(self) -> list[np.ndarray]:
        """Each cycle as a dense integer edge vector."""
        out = []
        for idx, sgn in self.cycles:
            v = np.zeros(self.m, dtype=np.int64)
            v[idx] = sgn
            out.append(v)
        return out


def _spanning_forest(graph: Graph):
    """BFS forest, roots and neighbours visited in increasing id order."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(graph.n)]
    for e, (u, v) in enumerate(graph.edges):
        adj[u].append((v, e))
        adj[v].append((u, e))
    for nbrs in adj:
        nbrs.sort()
    parent = [-1] * graph.n
    parent_edge = [-1] * graph.n
    depth = [-1] * graph.n
    tree = np.zeros(graph.m, dtype=bool)
    for root in range(graph.n):
        if depth[root] >= 0:
            continue
        depth[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, e in adj[u]:
                if depth[v] < 0:
                    depth[v] = depth[u] + 1
                    parent[v] = u
                    parent_edge[v] = e
                    tree[e] = True
                    queue.append(v)
    return parent, parent_edge, depth, tree


def cycle_basis(graph: Graph) -> CycleBasis:
    """Fundamental cycle basis from a deterministic BFS spanning forest.

    The result has ``m - n + c`` cycles (``c`` = number of components) and
    every cycle ``z`` satisfies ``B.T @ z == 0`` exactly.
    """
    parent, parent_edge, depth, tree = _spanning_forest(graph)
    tails, heads = graph.tails, graph.heads
    cycles, closers = [], []
    for e in np.flatnonzero(~tree).tolist():
        u, v = int(tails[e]), int(heads[e])
        # e sends one unit u -> v; return it along the tree path v -> u
        entries = {e: 1}
        a, b = v, u
        up_from_v, up_from_u = [], []
        while depth[a] > depth[b]:
            up_from_v.append(a)
            a = parent[a]
        while depth[b] > depth[a]:
            up_from_u.append(b)
            b = parent[b]
        while a != b:
            up_from_v.append(a)
            up_from_u.append(b)
            a, b = parent[a], parent[b]
        for c in up_from_v:  # traversed child -> parent
            te = parent_edge[c]
            entries[te] = entries.get(te, 0) + (1 if tails[te] == c else -1)
        for c in up_from_u:  # traversed parent -> child
            te = parent_edge[c]
            entries[te] = entries.get(te, 0) + (1 if heads[te] == c else -1)
        idx = np.array(sorted(entries), dtype=np.int64)
        sgn = np.array([entries[i] for i in idx], dtype=np.int64)
        if sgn[0] < 0:
            sgn = -sgn
        cycles.append((_frozen(idx), _frozen(sgn)))
        closers.append(e)
    return CycleBasis(graph.m, tuple(cycles), tuple(closers))


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of :func:`validate_instance`.

    ``violations`` lists ``(component, commodity, imbalance)``; component
    ``-1`` flags a nonzero global column sum.
    """

    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_infeasible(self) -> None:
        if self.violations:
            comp, j, imb = self.violations[0]
            where = "globally" if comp < 0 else f"in component {comp}"
            raise InfeasibleInstanceError(
                f"demand of commodity {j} does not sum to zero {where} (imbalance {imb:.3g})",
                self.violations,
            )


def validate_instance(graph: Graph, demands) -> FeasibilityReport:
    """Check that every demand column sums to zero on each component."""
    d = as_demands(graph, demands)
    scale = float(np.max(np.abs(d))) if d.size else 0.0
    tol = 1e-12 * scale
    labels = graph.component_labels
    violations = []
    for j in range(d.shape[1]):
        col = d[:, j]
        total = math.fsum(col)
        if abs(total) > tol:
            violations.append((-1, j, total))
        if graph.n_components > 1:
            for c in range(graph.n_components):
                s = math.fsum(col[labels == c])
                if abs(s) > tol:
                    violations.append((c, j, s))
    return FeasibilityReport(tuple(violations))
