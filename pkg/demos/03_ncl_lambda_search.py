"""Negative-correlation weighting on a Friedman-style regression problem.

Six regressors are tuned by 5-fold CV on the training split. Their
validation predictions then feed the penalized objective, and the penalty
strength lambda is chosen by the coarse-to-fine search. A fixed grid sweep
shows how the test error moves with lambda.
"""

import numpy as np

from hybrid_ncl import NclConfig, diversity_score, fit_weights, predict, search_lambda
from hybrid_ncl.pipeline import ExperimentConfig, lambda_sweep, train_stage

cfg = ExperimentConfig(synthetic={"kind": "friedman1", "n": 800, "noise_sd": 1.0, "seed": 7}, seed=7)
val, test, cv = train_stage(cfg)

print("sub-model       best params                                   val RMSE")
for name, rmse in zip(val.model_names, np.sqrt(val.member_mse())):
    print(f"  {name:16s}{str(cv[name].best_params):46s}{rmse:.4f}")
print("diversity (median |corr|):", round(diversity_score(val), 4))

fit = search_lambda(val)
print()
print("lambda* =", fit.lambda_star, "after", fit.n_solves, "solver runs")
print("weights:", {k: round(float(v), 4) for k, v in zip(val.model_names, fit.weights)})
_, err = predict(fit, test)
print("test RMSE / MAE / MAPE:", round(err.rmse, 4), round(err.mae, 4), round(err.mape, 4))

only_best = fit_weights(val, NclConfig(lam=0.0))
print("lambda = 0 keeps only", [val.model_names[j] for j in only_best.support])

print()
print("lambda  val RMSE  test RMSE")
for row in lambda_sweep(val, test):
    print(f"  {row['lambda']:.1f}   {row['val_rmse']:.4f}    {row['test_rmse']:.4f}")
