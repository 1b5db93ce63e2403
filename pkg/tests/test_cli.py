import json
from pathlib import Path

import numpy as np
import pytest

from robin_bayes import cli
from robin_bayes.config import ConfigError, RunConfig
from robin_bayes.observation import Dataset

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def smoke_config(tmp_path, **sections):
    d = json.loads((CONFIGS / "smoke.json").read_text())
    for name, values in sections.items():
        d[name].update(values)
    d["output"] = str(tmp_path / "run")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(d))
    return path


def run(*args):
    return cli.main([str(a) for a in args])


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_shipped_configs_load_and_round_trip(name):
    cfg = RunConfig.load(CONFIGS / name)
    assert RunConfig.from_dict(json.loads(cfg.to_json())) == cfg


@pytest.mark.parametrize("section,key", [(None, "modle"), ("model", "nz"), ("prior", "alpha_"),
                                         ("mcmc", "iters"), ("analysis", "eps")])
def test_unknown_keys_are_rejected(section, key):
    d = RunConfig().to_dict()
    (d if section is None else d[section])[key] = 1
    with pytest.raises(ConfigError, match=key):
        RunConfig.from_dict(d)


def test_nested_mesh_unknown_key_rejected():
    d = RunConfig().to_dict()
    d["model"]["mesh"]["Lz"] = 1.0
    with pytest.raises(ConfigError, match="Lz"):
        RunConfig.from_dict(d)


@pytest.mark.parametrize("patch", [
    {"model": {"kind": "heat"}},
    {"prior": {"family": "cauchy"}},
    {"data": {"theta0": [1.0, 2.0, 3.0]}},  # K mismatch
    {"mcmc": {"burn_in": 60000}},
    {"mcmc": {"mode": "two-level"}},  # no coarse mesh
    {"data": {"sigma_noise": 0.0}},
])
def test_invalid_values_are_rejected(patch):
    d = RunConfig().to_dict()
    for section, values in patch.items():
        d[section].update(values)
    with pytest.raises(ConfigError):
        RunConfig.from_dict(d)


def test_bad_config_exits_nonzero(tmp_path, capsys):
    path = smoke_config(tmp_path, mcmc={"typo": 1})
    assert run("simulate", "--config", path) == 2
    assert "typo" in capsys.readouterr().err


def test_smoke_pipeline(tmp_path, capsys):
    path = smoke_config(tmp_path)
    out = tmp_path / "run"
    assert run("simulate", "--config", path) == 0
    ds = Dataset.from_json((out / "dataset.json").read_text())
    assert ds.N == 20 and ds.values.shape == (20,)
    assert run("sample", "--config", path) == 0
    lines = (out / "chain.csv").read_text().splitlines()
    assert len(lines) == 1 + 10  # 200 iterations, 100 burn-in, thinning 10
    assert run("analyze", "--config", path) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["diagnostics"]["n_samples"] == 10
    assert {"band.csv", "histogram.csv", "trace.csv", "manifest.json"} <= {p.name for p in out.iterdir()}
    assert "coverage=" in capsys.readouterr().out


def test_out_flag_overrides_config(tmp_path):
    path = smoke_config(tmp_path)
    assert run("simulate", "--config", path, "--out", tmp_path / "elsewhere") == 0
    assert (tmp_path / "elsewhere" / "dataset.json").exists()
    assert not (tmp_path / "run").exists()


def test_stokes_dataset_has_vector_observations(tmp_path):
    path = smoke_config(tmp_path, model={"kind": "stokes"}, data={"N": 3, "sigma_noise": 0.5})
    assert run("simulate", "--config", path) == 0
    ds = Dataset.from_json((tmp_path / "run" / "dataset.json").read_text())
    assert ds.values.shape == (3, 2)


def test_single_observation(tmp_path):
    path = smoke_config(tmp_path, data={"N": 1})
    assert run("simulate", "--config", path) == 0
    assert len(json.loads((tmp_path / "run" / "dataset.json").read_text())["points"]) == 1


def test_sample_refuses_mismatched_dataset(tmp_path, capsys):
    path = smoke_config(tmp_path)
    assert run("simulate", "--config", path) == 0
    other = smoke_config(tmp_path, data={"sigma_noise": 0.2})
    assert run("sample", "--config", other) == 2
    assert "sigma_noise" in capsys.readouterr().err


def test_sample_without_dataset_fails(tmp_path):
    assert run("sample", "--config", smoke_config(tmp_path)) == 2


def test_analyze_detects_tampered_chain(tmp_path, capsys):
    path = smoke_config(tmp_path)
    for cmd in ("simulate", "sample"):
        assert run(cmd, "--config", path) == 0
    chain = tmp_path / "run" / "chain.csv"
    chain.write_text(chain.read_text().replace("1\n", "0\n", 1))
    assert run("analyze", "--config", path) == 2
    assert "hash" in capsys.readouterr().err


def test_pipeline_is_byte_identical(tmp_path):
    path = smoke_config(tmp_path)
    outputs = []
    for name in ("a", "b"):
        for cmd in ("simulate", "sample", "analyze"):
            assert run(cmd, "--config", path, "--out", tmp_path / name) == 0
        outputs.append({p.name: p.read_bytes() for p in (tmp_path / name).iterdir()})
    assert outputs[0] == outputs[1]


def test_multiple_chains_pool(tmp_path):
    path = smoke_config(tmp_path, mcmc={"n_chains": 2, "workers": 2})
    for cmd in ("simulate", "sample", "analyze"):
        assert run(cmd, "--config", path) == 0
    out = tmp_path / "run"
    a, b = (out / "chain_0.csv").read_text(), (out / "chain_1.csv").read_text()
    assert a != b
    assert json.loads((out / "summary.json").read_text())["diagnostics"]["n_samples"] == 20


def test_two_level_sample(tmp_path):
    path = smoke_config(tmp_path, model={"coarse_mesh": {"nx": 10, "ny": 2, "Lx": 1.0, "Ly": 0.2}},
                        mcmc={"mode": "two-level"})
    for cmd in ("simulate", "sample"):
        assert run(cmd, "--config", path) == 0
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["chains"][0]["n_fine_evals"] < 200


def test_verify_prior_suite_passes(capsys):
    assert run("verify", "--suite", "prior") == 0
    assert "PASS" in capsys.readouterr().out


def test_verify_fails_with_perturbed_stiffness(capsys):
    assert cli.cmd_verify("fem", stiffness_perturbation=0.5) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out
