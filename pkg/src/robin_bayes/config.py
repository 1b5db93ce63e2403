"""Run configuration: JSON sections mapped onto frozen dataclasses.

Unknown keys are rejected at every level so typos fail loudly.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .mcmc import MODES, SINGLE, ChainConfig
from .mesh import Mesh, build_rect_mesh
from .observation import ModelSpec, Sinusoid
from .prior import Family, PriorSpec

DEFAULT_THETA0 = (-0.6, 0.7, 2.0, 0.1, -0.08)


class ConfigError(ValueError):
    pass


def _build(cls, data, section: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"[{section}] must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


@dataclass(frozen=True)
class MeshConfig:
    nx: int = 100
    ny: int = 20
    Lx: float = 1.0
    Ly: float = 0.2

    def build(self) -> Mesh:
        return build_rect_mesh(self.nx, self.ny, self.Lx, self.Ly)

    def shape(self) -> tuple:
        return (self.nx, self.ny, float(self.Lx), float(self.Ly))


@dataclass(frozen=True)
class HConfig:
    family: str = "sinusoid"
    amplitude: float = 10.0
    frequency: float = 12.0
    offset: float = 1.0

    def __post_init__(self):
        if self.family != "sinusoid":
            raise ValueError(f"unknown h family {self.family!r}")


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "laplace"
    mesh: MeshConfig = field(default_factory=MeshConfig)
    coarse_mesh: Optional[MeshConfig] = None
    h: HConfig = field(default_factory=HConfig)
    rho_g: tuple = (5.0, 5.0)
    m_beta: float = 0.0

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "mesh" in d:
            d["mesh"] = _build(MeshConfig, d["mesh"], "model.mesh")
        if d.get("coarse_mesh") is not None:
            d["coarse_mesh"] = _build(MeshConfig, d["coarse_mesh"], "model.coarse_mesh")
        if "h" in d:
            d["h"] = _build(HConfig, d["h"], "model.h")
        if "rho_g" in d:
            d["rho_g"] = tuple(d["rho_g"])
        out = _build(cls, d, "model")
        out.spec()  # validates kind, rho_g, m_beta
        return out

    def spec(self) -> ModelSpec:
        h = Sinusoid(self.h.amplitude, self.h.frequency, self.h.offset)
        try:
            return ModelSpec(self.kind, h, self.rho_g, self.m_beta)
        except ValueError as exc:
            raise ConfigError(f"[model] {exc}") from exc


@dataclass(frozen=True)
class PriorConfig:
    family: str = "matern"
    alpha: float = 1.0
    r: float = 1.0
    K: int = 2
    rescale: bool = False

    def spec(self, N: Optional[int] = None) -> PriorSpec:
        try:
            return PriorSpec(Family(self.family), self.alpha, self.r, self.K,
                             N if self.rescale else None)
        except ValueError as exc:
            raise ConfigError(f"[prior] {exc}") from exc


@dataclass(frozen=True)
class DataConfig:
    theta0: tuple = DEFAULT_THETA0
    N: int = 100
    sigma_noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "theta0", tuple(float(v) for v in self.theta0))
        if len(self.theta0) % 2 != 1:
            raise ValueError("theta0 needs 2K+1 coefficients")
        if self.N < 1 or not self.sigma_noise > 0:
            raise ValueError("need N >= 1 and sigma_noise > 0")


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 50_000
    burn_in: int = 10_000
    gamma0: float = 1e-7
    target_accept: float = 0.33
    adapt_interval: int = 1000
    adapt_gain: float = 2.0
    thinning: int = 10
    seed: int = 1
    mode: str = SINGLE
    n_chains: int = 1
    workers: int = 1
    init: str = "truth"
    init_shift: float = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.n_chains < 1 or self.workers < 1:
            raise ValueError("n_chains and workers must be positive")
        self.chain_config(0)

    def chain_config(self, index: int) -> ChainConfig:
        return ChainConfig(self.iterations, self.burn_in, self.gamma0, self.target_accept,
                           self.adapt_interval, self.adapt_gain, self.thinning,
                           self.seed + index, self.init, self.init_shift)


@dataclass(frozen=True)
class AnalysisConfig:
    epsilon: float = 0.05
    level: float = 0.95
    grid_size: int = 200

    def __post_init__(self):
        if not 0 <= self.epsilon < 0.5 or not 0 < self.level < 1 or self.grid_size < 2:
            raise ValueError("need 0 <= epsilon < 1/2, 0 < level < 1, grid_size >= 2")


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    data: DataConfig = field(default_factory=DataConfig)
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: str = "runs/default"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(d) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
        cfg = cls(
            model=ModelConfig.from_dict(d.get("model")),
            prior=_build(PriorConfig, d.get("prior"), "prior"),
            data=_build(DataConfig, d.get("data"), "data"),
            mcmc=_build(McmcConfig, d.get("mcmc"), "mcmc"),
            analysis=_build(AnalysisConfig, d.get("analysis"), "analysis"),
            output=str(d.get("output", cls.output)),
        )
        cfg.prior.spec(cfg.data.N)
        if len(cfg.data.theta0) != 2 * cfg.prior.K + 1:
            raise ConfigError("[data] theta0 length must be 2K+1 for the prior's K")
        if cfg.mcmc.mode != SINGLE and cfg.model.coarse_mesh is None:
            raise ConfigError("[model] two-level modes need a coarse_mesh")
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"]["rho_g"] = list(self.model.rho_g)
        d["data"]["theta0"] = list(self.data.theta0)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"
