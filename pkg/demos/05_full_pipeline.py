"""One dataset end to end, with everything written to disk.

Generates a CSV, runs stage 1 (model pool) and stage 2 (all weighters),
and prints the report that lands next to the intermediate CSVs.
"""

import json
import tempfile
from pathlib import Path

from hybrid_ncl.pipeline import ExperimentConfig, run_experiment
from hybrid_ncl.zoo import synth_dataset, write_dataset_csv

work = Path(tempfile.mkdtemp(prefix="hybrid_ncl_demo_"))
X, y = synth_dataset("piecewise", 600, noise_sd=0.3, seed=3)
write_dataset_csv(X, y, work / "piecewise.csv")

report = run_experiment(ExperimentConfig(name="piecewise", dataset_csv=str(work / "piecewise.csv"),
                                         seed=3, out_dir=str(work / "runs")))
print("run directory:", report.run_dir)
print("files:", sorted(p.name for p in report.run_dir.iterdir()))
print()
print("method    test RMSE   vs BEM")
for r in report.methods.values():
    print(f"  {r.method:8s}{r.test_error.rmse:9.4f}  {r.improvement_vs_bem['rmse']:+6.1f}%")

data = json.loads((report.run_dir / "report.json").read_text())
ncl = next(m for m in data["methods"] if m["method"] == "NCL")
print()
print("NCL model entry:", json.dumps(ncl["model"], indent=None)[:160], "...")
