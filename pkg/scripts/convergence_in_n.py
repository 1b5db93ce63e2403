"""Paired N=100 / N=1000 Laplace runs for both priors over three noise seeds.

Prints the per-run table and the median posterior-mean error per (prior, N).

    python scripts/convergence_in_n.py --iterations 200000 --workers 4
"""
import argparse
import json
from dataclasses import asdict
from pathlib import Path

from robin_bayes.experiments import comparison_table, convergence_in_n, median_errors

p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
p.add_argument("--iterations", type=int, default=200_000)
p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
p.add_argument("--N", type=int, nargs="+", default=[100, 1000])
p.add_argument("--mesh", type=int, nargs=2, default=[100, 20], metavar=("NX", "NY"))
p.add_argument("--workers", type=int, default=1)
p.add_argument("--out", type=Path, help="optional JSON file for the raw rows")
args = p.parse_args()

rows = convergence_in_n(Ns=tuple(args.N), seeds=tuple(args.seeds), iterations=args.iterations,
                        mesh_shape=(*args.mesh, 1.0, 0.2), workers=args.workers)
print(comparison_table(rows))
med = median_errors(rows)
for fam in ("matern", "squared_exp"):
    lo, hi = min(args.N), max(args.N)
    verdict = "decreases" if med[(fam, hi)] < med[(fam, lo)] else "does NOT decrease"
    print(f"{fam}: median error {verdict} from N={lo} to N={hi}")
if args.out:
    args.out.write_text(json.dumps([asdict(r) for r in rows], indent=1) + "\n")
