"""Single-level, corrected two-level and literal two-level chains on one small Laplace problem.

Reports posterior means, Monte Carlo standard errors and the z-score of each
two-level variant against the single-level chain.

    python scripts/sampler_comparison.py --iterations 200000
"""
import argparse

import numpy as np

from robin_bayes.experiments import compare_samplers, z_scores

p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
p.add_argument("--iterations", type=int, default=200_000)
p.add_argument("--fine", type=int, nargs=2, default=[40, 8])
p.add_argument("--coarse", type=int, nargs=2, default=[20, 4])
p.add_argument("--N", type=int, default=50)
args = p.parse_args()

np.set_printoptions(precision=4, suppress=True)
res = compare_samplers(fine=tuple(args.fine), coarse=tuple(args.coarse), N=args.N,
                       iterations=args.iterations)
for r in res:
    print(f"{r.mode:<18} accept={r.acceptance:.3f} fine solves={r.n_fine_evals:>7} "
          f"time={r.seconds:.1f}s\n  mean={r.mean}\n  mcse={r.mcse}")
for r in res[1:]:
    print(f"z({r.mode} vs single) = {z_scores(r, res[0])}")
