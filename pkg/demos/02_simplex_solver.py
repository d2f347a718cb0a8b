"""A log-barrier Newton solver on the probability simplex.

The solver never leaves the interior: every iterate has strictly positive
weights that sum to one. Here it minimizes the distance to a point outside
the simplex, whose answer is the Euclidean projection, and a linear
function, whose answer is a vertex.
"""

import numpy as np

from hybrid_ncl import SolverOptions, SolverProblem, check_gradient, solve

q = np.array([0.9, 0.8, -0.7])
problem = SolverProblem(3, lambda w: float(np.sum((w - q) ** 2)), lambda w: 2 * (w - q))
print("gradient check deviation:", check_gradient(problem, np.array([0.2, 0.3, 0.5])))

res = solve(problem)
print("projection of", q, "->", np.round(res.w, 8))
print("converged", res.converged, "after", res.outer_iterations, "barrier stages and",
      res.inner_iterations, "Newton steps")
print("smallest coordinate ever visited:", res.min_iterate_entry)
print()
print("  mu        objective    kkt residual")
for mu, f, r in res.history:
    print(f"  {mu:8.1e}  {f:.8f}  {r:.2e}")

cost = np.array([1.0, 2.0, 3.0])
linear = SolverProblem(3, lambda w: float(cost @ w), lambda w: cost)
res = solve(linear, SolverOptions(kkt_tolerance=1e-10))
print()
print("linear cost", cost, "-> w =", np.round(res.w, 10))
