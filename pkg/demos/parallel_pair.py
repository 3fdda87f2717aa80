"""
Routing one unit over two parallel edges
========================================

The smallest instance with a real choice: one unit of one commodity from
vertex 0 to vertex 1 over two parallel edges.  With weights 1 and 2 and
``q = p = 2`` the objective is ``x^4 + 16 (1 - x)^4``, whose minimum has a
closed form.  The refinement solver should reach it and say so.
"""

import numpy as np

from qpflow import Graph, ProblemInstance, solve

# two parallel edges 0 -> 1; demands are +1 at the source and -1 at the sink
graph = Graph.from_edges(2, [(0, 1), (0, 1)], weights=[1.0, 2.0])
instance = ProblemInstance(graph, demands=np.array([[1.0], [-1.0]]), q=2.0, p=2.0, eps=1e-3)

flow, report = solve(instance)

# setting the derivative of x^4 + 16 (1 - x)^4 to zero gives x = c / (1 + c), c = 16^(1/3)
c = 16.0 ** (1.0 / 3.0)
closed_form = 16.0 / (1.0 + c) ** 3

print("flow on each edge:", flow.ravel())
print("objective        :", report.objective)
print("closed form      :", closed_form)
print("certified        :", report.certified, "after", report.iterations, "outer iterations")
print("gap bound        :", report.gap_bound)
