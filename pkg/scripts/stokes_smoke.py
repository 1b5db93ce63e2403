"""Scaled two-level Stokes inversion with a squared-exponential prior.

    python scripts/stokes_smoke.py --iterations 50000
"""
import argparse
import json

from robin_bayes.experiments import stokes_smoke

p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
p.add_argument("--iterations", type=int, default=50_000)
p.add_argument("--N", type=int, default=100)
p.add_argument("--mode", default="two-level", choices=["single", "two-level", "literal-two-level"])
args = p.parse_args()

res = stokes_smoke(N=args.N, iterations=args.iterations, mode=args.mode)
print(json.dumps(res.as_dict(), indent=1))
