"""Problem instances and a seeded random instance generator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .graph import Graph, as_demands, validate_instance
from .objective import QPParams

__all__ = ["ProblemInstance", "random_instance"]


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A graph, an ``n x k`` demand matrix and the norm parameters."""

    graph: Graph
    demands: np.ndarray
    q: float = 2.0
    p: float = 2.0
    eps: float = 1e-3

    def __post_init__(self):
        d = np.array(as_demands(self.graph, self.demands), dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "demands", d)
        if not (0.0 < self.eps < 1.0):
            raise ParameterError(f"eps must lie in (0, 1), got {self.eps}")
        self.params  # validates q and p

    @property
    def k(self) -> int:
        return int(self.demands.shape[1])

    @property
    def params(self) -> QPParams:
        return QPParams(self.q, self.p, self.k)

    def validate(self):
        return validate_instance(self.graph, self.demands)


def random_instance(
    seed,
    n: int = 8,
    m: int = 14,
    k: int = 2,
    q: float = 2.0,
    p: float = 2.0,
    eps: float = 1e-3,
    weight_range: tuple[float, float] = (0.5, 2.0),
) -> ProblemInstance:
    """Connected random multigraph with random zero-sum demands.

    A random spanning tree is padded with ``m - n + 1`` uniformly random
    extra edges (parallel edges may occur).  Every commodity gets a random
    zero-sum demand supported on at least two vertices.
    """
    if m < n - 1:
        raise ParameterError("m must be at least n - 1 for a connected graph")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = []
    for i in range(1, n):
        a, b = int(order[i]), int(order[rng.integers(i)])
        edges.append((a, b) if rng.random() < 0.5 else (b, a))
    while len(edges) < m:
        a, b = rng.choice(n, size=2, replace=False)
        edges.append((int(a), int(b)))
    edges = [edges[i] for i in rng.permutation(m)]
    weights = rng.uniform(*weight_range, size=m)
    graph = Graph.from_edges(n, edges, weights)
    demands = np.zeros((n, k))
    for j in range(k):
        support = rng.choice(n, size=int(rng.integers(2, n + 1)), replace=False)
        vals = rng.normal(size=support.size)
        vals -= vals.mean()
        demands[support, j] = vals
        # exact zero sum after the centring round-off
        demands[support[-1], j] = -np.sum(demands[support[:-1], j])
    return ProblemInstance(graph, demands, q, p, eps)
