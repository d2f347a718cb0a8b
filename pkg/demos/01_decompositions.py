"""Where does ensemble error come from?

Builds a small three-model ensemble and splits its error two ways: the
weighted-member-error minus ambiguity identity for one fixed ensemble, and
bias / variance / covariance across repeated training trials.
"""

import numpy as np

from hybrid_ncl import PredictionMatrix, ambiguity_decomposition, bvc_decomposition, combine

rng = np.random.default_rng(0)
n = 200
x = np.linspace(0, 1, n)
y = np.sin(2 * np.pi * x)

# three members with different systematic errors plus their own noise
members = np.c_[y + 0.3, y - 0.2 + 0.1 * rng.normal(size=n), 0.8 * y + 0.2 * rng.normal(size=n)]
preds = PredictionMatrix(members, y, ("shifted_up", "shifted_down", "shrunk"))
w = np.array([0.3, 0.5, 0.2])

rep = ambiguity_decomposition(preds, w)
print("member MSEs        ", np.round(preds.member_mse(), 4))
print("weighted member MSE", round(rep.weighted_member_mse, 6))
print("ambiguity          ", round(rep.ambiguity, 6))
print("ensemble MSE       ", round(rep.ensemble_mse, 6))
print("direct MSE         ", round(float(np.mean((combine(preds, w) - y) ** 2)), 6))

# repeated trials: each member is refit on fresh noise, so its output varies
trials = []
for t in range(30):
    shared = 0.15 * rng.normal(size=n)  # noise common to all members makes them covary
    F = np.c_[y + 0.1 + shared + 0.1 * rng.normal(size=n),
              y - 0.1 + shared + 0.1 * rng.normal(size=n),
              y + 0.05 + 0.2 * rng.normal(size=n)]
    trials.append(PredictionMatrix(F, y))

bvc = bvc_decomposition(trials, y)
m = 3
print()
print("bias^2     ", round(bvc.bias_term, 6))
print("variance   ", round(bvc.variance_term, 6), "-> contributes", round(bvc.variance_term / m, 6))
print("covariance ", round(bvc.covariance_term, 6), "-> contributes", round((1 - 1 / m) * bvc.covariance_term, 6))
print("sum        ", round(bvc.reconstructed_mse, 6))
print("empirical  ", round(float(np.mean([(tr.values.mean(axis=1) - y) ** 2 for tr in trials])), 6))
