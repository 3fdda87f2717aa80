"""
Sampling the inequalities behind the method
===========================================

The solver's guarantees rest on a set of scalar and vector inequalities
(error-function sandwiches, the two-sided coupling between the objective
and its residual model, the Hessian sandwich, self-concordance).  The
validator samples each one over a grid of ``(q, p, k)`` with a fixed seed
and reports the tightest margin seen.  A margin near zero means the bound
is sharp; a negative margin far from zero means it has slack.
"""

from qpflow import validate_lemmas
from qpflow.lemmas import replay_sample

report = validate_lemmas(q_grid=(1.1, 2.0), p_grid=(2.0, 4.0), k_grid=(1, 4), samples=2_000, seed=1)
print(report.format_text())

# any sample can be regenerated on its own, which is how a failure would be inspected
cell = next(c for c in report.cells if c.check == "gamma scaling lower")
inputs, left, right = replay_sample(1, cell.check, cell.q, cell.p, cell.k, 2_000, cell.worst_index,
                                    q_grid=(1.1, 2.0), p_grid=(2.0, 4.0), k_grid=(1, 4))
print()
print("tightest 'gamma scaling lower' sample:", {k: float(v) for k, v in inputs.items()})
print("left side", left, "right side", right)
