"""Nine weighting schemes, eight datasets, one Friedman test.

Every scheme combines the same validation predictions. Test errors are
ranked per dataset, the Friedman statistic checks whether the mean ranks
differ, and the Nemenyi critical difference says which pairs do.
"""

import numpy as np

from hybrid_ncl.pipeline import batch_compare, synthetic_suite

# two noise levels of each generator keep the demo quick
configs = [c for c in synthetic_suite(seed=1, n=500) if c.name.endswith(("-1", "-3"))]
result = batch_compare(configs)

table = result.tables["rmse"]
print("test RMSE by dataset")
print("  " + " ".join(f"{m:>8s}" for m in table.methods))
for name, row in zip(table.datasets, table.errors):
    print(f"  {' '.join(f'{v:8.4f}' for v in row)}  {name}")

chi2, p = result.friedman["rmse"]
print()
print(f"Friedman chi2 = {chi2:.2f}, p = {p:.2e}; Nemenyi CD = {result.cd:.3f}")
for i in np.argsort(table.mean_ranks):
    print(f"  {table.methods[i]:8s} mean rank {table.mean_ranks[i]:.2f}")
print("significantly different pairs:", result.significant["rmse"] or "none")
