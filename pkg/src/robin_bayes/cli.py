"""``robin-bayes simulate|sample|analyze|verify --config run.json [--out dir]``.

Every command is a pure function of its config, input files and seeds; no
timestamps or timings are written to files so reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .config import ConfigError, RunConfig
from .fem_common import SolverError
from .mcmc import ChainAborted, run_chain
from .observation import Dataset, generate_data
from .verification import run_suite

DATASET = "dataset.json"
MANIFEST = "manifest.json"

log = logging.getLogger("robin_bayes")


class CommandError(RuntimeError):
    pass


def _sha256(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _descriptor(d: dict) -> dict:
    """Everything in a dataset dict except the observations themselves."""
    return {k: v for k, v in d.items() if k not in ("points", "values")}


def _expected_descriptor(cfg: RunConfig) -> dict:
    """Descriptor that ``simulate`` would write for this config."""
    probe = Dataset(cfg.model.spec(), cfg.model.mesh.shape(), np.zeros(0), np.zeros(0),
                    cfg.data.sigma_noise, cfg.data.seed, np.asarray(cfg.data.theta0))
    return _descriptor(probe.to_dict())


def chain_name(index: int, n_chains: int) -> str:
    return "chain.csv" if n_chains == 1 else f"chain_{index}.csv"


def load_dataset(cfg: RunConfig, path: Path) -> tuple[Dataset, str]:
    """Read a dataset and refuse it unless it matches the config's model."""
    if not path.exists():
        raise CommandError(f"dataset {path} not found; run 'simulate' first")
    text = path.read_text()
    raw = json.loads(text)
    got, want = _descriptor(raw), _expected_descriptor(cfg)
    if got != want:
        diff = sorted(k for k in set(got) | set(want) if got.get(k) != want.get(k))
        raise CommandError(f"dataset {path} does not match config (differs in: {', '.join(diff)})")
    if len(raw["points"]) != cfg.data.N:
        raise CommandError(f"dataset has N={len(raw['points'])}, config says N={cfg.data.N}")
    return Dataset.from_dict(raw), _sha256(text)


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    mesh = cfg.model.mesh.build()
    t0 = time.perf_counter()
    ds = generate_data(cfg.model.spec(), mesh, np.asarray(cfg.data.theta0), cfg.data.N,
                       cfg.data.sigma_noise, cfg.data.seed)
    elapsed = time.perf_counter() - t0
    _write(out / DATASET, ds.to_json())
    print(f"simulate: {cfg.model.kind} N={ds.N} sigma={ds.sigma_noise:g} "
          f"mesh={mesh.nx}x{mesh.ny} forward solve {elapsed:.3f}s -> {out / DATASET}")
    return 0


def _run_one(cfg: RunConfig, ds: Dataset, index: int):
    coarse = cfg.model.coarse_mesh.build() if cfg.model.coarse_mesh is not None else None
    return run_chain(cfg.mcmc.chain_config(index), cfg.prior.spec(ds.N), ds,
                     cfg.model.mesh.build(), mode=cfg.mcmc.mode, coarse_mesh=coarse)


def cmd_sample(cfg: RunConfig, out: Path) -> int:
    ds, ds_hash = load_dataset(cfg, out / DATASET)
    n = cfg.mcmc.n_chains
    t0 = time.perf_counter()
    if n > 1 and cfg.mcmc.workers > 1:
        with ProcessPoolExecutor(max_workers=min(n, cfg.mcmc.workers)) as pool:
            records = list(pool.map(_run_one, [cfg] * n, [ds] * n, range(n)))
    else:
        records = [_run_one(cfg, ds, i) for i in range(n)]
    chains = []
    for i, rec in enumerate(records):
        text = analysis.trace_csv(rec)
        name = chain_name(i, n)
        _write(out / name, text)
        chains.append({
            "file": name,
            "seed": cfg.mcmc.seed + i,
            "sha256": _sha256(text),
            "n_samples": len(rec),
            "acceptance_rate": float(rec.acceptance_rate),
            "n_failed": int(rec.n_failed),
            "n_fine_evals": int(rec.n_fine_evals),
            "n_coarse_accepted": int(rec.n_coarse_accepted),
            "final_step": float(rec.step_trace[-1]) if len(rec) else None,
        })
    config_json = cfg.to_json()
    manifest = {
        "config": cfg.to_dict(),
        "dataset": {"file": DATASET, "sha256": ds_hash},
        "input_hash": _sha256(config_json + ds_hash),
        "chains": chains,
    }
    _write(out / MANIFEST, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    for c in chains:
        print(f"sample: {c['file']} samples={c['n_samples']} acceptance={c['acceptance_rate']:.3f} "
              f"failed={c['n_failed']}")
    print(f"sample: {n} chain(s) in {time.perf_counter() - t0:.1f}s -> {out}")
    return 0


def load_chains(cfg: RunConfig, out: Path):
    """Chains listed in the manifest, checked against their recorded hashes."""
    path = out / MANIFEST
    if not path.exists():
        raise CommandError(f"manifest {path} not found; run 'sample' first")
    manifest = json.loads(path.read_text())
    if manifest["config"] != cfg.to_dict():
        raise CommandError("manifest was produced by a different config")
    _, ds_hash = load_dataset(cfg, out / DATASET)
    if manifest["dataset"]["sha256"] != ds_hash:
        raise CommandError("dataset changed since sampling")
    records = []
    for c in manifest["chains"]:
        text = (out / c["file"]).read_text()
        if _sha256(text) != c["sha256"]:
            raise CommandError(f"{c['file']} does not match its manifest hash")
        records.append(analysis.read_trace_csv(
            text, acceptance_rate=c["acceptance_rate"], n_failed=c["n_failed"],
            n_fine_evals=c["n_fine_evals"], n_coarse_accepted=c["n_coarse_accepted"]))
    return records


def _pool(records):
    """Concatenate chains; acceptance is the sample-weighted mean."""
    if len(records) == 1:
        return records[0]
    cat = lambda attr: np.concatenate([getattr(r, attr) for r in records])
    weights = np.array([len(r) for r in records], dtype=float)
    rate = float(np.average([r.acceptance_rate for r in records], weights=weights))
    return analysis.ChainRecord(cat("iterations"), cat("samples"), cat("logliks"),
                                cat("accept_flags"), cat("step_trace"), rate,
                                sum(r.n_failed for r in records), sum(r.n_fine_evals for r in records),
                                sum(r.n_coarse_accepted for r in records))


def cmd_analyze(cfg: RunConfig, out: Path) -> int:
    records = load_chains(cfg, out)
    pooled = _pool(records)
    a = cfg.analysis
    summary = analysis.summarize(pooled, np.asarray(cfg.data.theta0), m_beta=cfg.model.m_beta,
                                 epsilon=a.epsilon, level=a.level, grid_size=a.grid_size)
    _write(out / "summary.json", summary.to_json())
    _write(out / "band.csv", summary.band_csv())
    _write(out / "histogram.csv", analysis.histogram_csv(pooled))
    _write(out / "trace.csv", analysis.trace_csv(pooled))
    errs = " ".join(f"{k}={v:.4g}" for k, v in sorted(summary.errors.items()))
    print(f"analyze: samples={len(pooled)} acceptance={pooled.acceptance_rate:.3f} "
          f"coverage={summary.coverage:.3f} {errs}")
    print("analyze: mean theta = " + " ".join(f"{v:.4f}" for v in summary.mean_coeffs))
    return 0


def cmd_verify(suite: str, **overrides) -> int:
    ok = True
    for result in run_suite(suite, **overrides):
        print(result.line(), flush=True)
        ok &= result.passed
    print("verify: " + ("all checks passed" if ok else "FAILED"))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robin-bayes", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("simulate", "generate a synthetic dataset"),
                        ("sample", "run MCMC on the dataset"),
                        ("analyze", "summarise the chains"),
                        ("verify", "run the built-in verification suites")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=name != "verify", type=Path)
        sp.add_argument("--out", type=Path, help="output directory (overrides the config)")
        if name == "verify":
            sp.add_argument("--suite", choices=["fem", "prior", "mcmc", "all"], default="all")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.suite)
        cfg = RunConfig.load(args.config)
        out = args.out if args.out is not None else Path(cfg.output)
        return {"simulate": cmd_simulate, "sample": cmd_sample, "analyze": cmd_analyze}[args.command](cfg, out)
    except (ConfigError, CommandError, SolverError, ChainAborted, ValueError, OSError) as exc:
        print(f"robin-bayes {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
