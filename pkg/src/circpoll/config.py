"""JSON run configuration for the command-line tool.

A config is one JSON object with up to four sections; every key is optional
except the ``system`` section for commands that need a single system::

    {
      "system":   {"lambda": 0.5, "alpha": 1.0,
                   "batch": {"kind": "deterministic", "k": 1},
                   "service": {"kind": "exponential", "rate": 1.0}},
      "sim":      {"horizon": 2e5, "warmup": null, "seed": 42, "replications": 20,
                   "pasta_rate": 1.0, "profile_grid": [0.1, 0.2, ...]},
      "discrete": {"n_queues": 10, "total_switchover": 1.0},
      "figures":  {"rho_grid": [...], "n_grid": [...], ...}
    }

Unknown keys are rejected at every level. :func:`dump_config` writes the
fully populated canonical form, so ``dump(parse(dump(parse(x))))`` equals
``dump(parse(x))``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .dists import SystemParams, make_batch_dist, make_service_dist
from .errors import CircPollError, InvalidConfig
from .sim_core import DEFAULT_GRID, SimConfig

FIG1_BATCHES = ({"kind": "deterministic", "k": 5},)
FIG1_SERVICE = {"kind": "exponential", "rate": 1.0}
FIG2_BATCHES = (
    {"kind": "deterministic", "k": 5},
    {"kind": "binomial_zt", "n": 15, "mean": 5},
    {"kind": "poisson_zt", "mean": 5},
    {"kind": "negbinom_zt", "r": 5, "mean": 5},
    {"kind": "geometric", "mean": 5},
)
FIG2_SERVICE = {"kind": "deterministic", "b": 0.2}


@dataclass(frozen=True)
class FigureSettings:
    rho_grid: tuple[float, ...] = (0.2, 0.45, 0.7, 0.95)
    n_grid: tuple[int, ...] = (2, 5, 10, 20, 50)
    alpha: float = 1.0
    total_switchover: float = 1.0
    figure1_batches: tuple[Mapping[str, Any], ...] = FIG1_BATCHES
    figure1_service: Mapping[str, Any] = field(default_factory=lambda: dict(FIG1_SERVICE))
    figure2_batches: tuple[Mapping[str, Any], ...] = FIG2_BATCHES
    figure2_service: Mapping[str, Any] = field(default_factory=lambda: dict(FIG2_SERVICE))
    # horizon at load rho is sim.horizon * (1 - rho) ** -horizon_load_exponent
    horizon_load_exponent: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    lam: float | None = None
    alpha: float | None = None
    batch: Mapping[str, Any] | None = None
    service: Mapping[str, Any] | None = None
    sim: SimConfig = field(default_factory=SimConfig)
    n_queues: int = 10
    total_switchover: float | None = None
    figures: FigureSettings = field(default_factory=FigureSettings)

    def has_system(self) -> bool:
        return self.lam is not None

    def system(self) -> SystemParams:
        if not self.has_system():
            raise InvalidConfig("config has no 'system' section")
        return SystemParams(self.lam, self.alpha, make_batch_dist(self.batch), make_service_dist(self.service))


_SECTIONS = {"system", "sim", "discrete", "figures"}
_SYSTEM_KEYS = {"lambda", "alpha", "batch", "service"}
_SIM_KEYS = {"horizon", "warmup", "seed", "replications", "pasta_rate", "profile_grid"}
_DISCRETE_KEYS = {"n_queues", "total_switchover"}
_FIG_KEYS = {
    "rho_grid",
    "n_grid",
    "alpha",
    "total_switchover",
    "figure1_batches",
    "figure1_service",
    "figure2_batches",
    "figure2_service",
    "horizon_load_exponent",
}


def _obj(v: Any, where: str) -> Mapping[str, Any]:
    if not isinstance(v, Mapping):
        raise InvalidConfig(f"{where} must be a JSON object")
    return v


def _no_extra(d: Mapping[str, Any], allowed: set[str], where: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise InvalidConfig(f"unknown key(s) in {where}: {', '.join(extra)}")


def _real(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise InvalidConfig(f"{where} must be a finite number, got {v!r}")
    return float(v)


def _int(v: Any, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise InvalidConfig(f"{where} must be an integer, got {v!r}")
    return int(v)


def _reals(v: Any, where: str) -> tuple[float, ...]:
    if not isinstance(v, list):
        raise InvalidConfig(f"{where} must be a list")
    return tuple(_real(x, where) for x in v)


def _batch_check(spec: Any, where: str) -> dict:
    try:
        make_batch_dist(_obj(spec, where))
    except CircPollError as e:
        raise InvalidConfig(f"{where}: {e}") from e
    return dict(spec)


def _service_check(spec: Any, where: str) -> dict:
    try:
        make_service_dist(_obj(spec, where))
    except CircPollError as e:
        raise InvalidConfig(f"{where}: {e}") from e
    return dict(spec)


def parse_config(doc: Mapping[str, Any]) -> RunConfig:
    doc = _obj(doc, "config")
    _no_extra(doc, _SECTIONS, "config")
    kw: dict[str, Any] = {}

    if "system" in doc:
        s = _obj(doc["system"], "system")
        _no_extra(s, _SYSTEM_KEYS, "system")
        for key in _SYSTEM_KEYS:
            if key not in s:
                raise InvalidConfig(f"system.{key} is required")
        kw["lam"] = _real(s["lambda"], "system.lambda")
        kw["alpha"] = _real(s["alpha"], "system.alpha")
        kw["batch"] = _batch_check(s["batch"], "system.batch")
        kw["service"] = _service_check(s["service"], "system.service")

    sim = _obj(doc.get("sim", {}), "sim")
    _no_extra(sim, _SIM_KEYS, "sim")
    skw: dict[str, Any] = {}
    if "horizon" in sim:
        skw["horizon"] = _real(sim["horizon"], "sim.horizon")
    if sim.get("warmup") is not None:
        skw["warmup"] = _real(sim["warmup"], "sim.warmup")
    if "seed" in sim:
        skw["seed"] = _int(sim["seed"], "sim.seed")
    if "replications" in sim:
        skw["replications"] = _int(sim["replications"], "sim.replications")
    if "pasta_rate" in sim:
        skw["pasta_rate"] = _real(sim["pasta_rate"], "sim.pasta_rate")
    if "profile_grid" in sim:
        skw["profile_grid"] = _reals(sim["profile_grid"], "sim.profile_grid")
    kw["sim"] = SimConfig(**skw)

    dsc = _obj(doc.get("discrete", {}), "discrete")
    _no_extra(dsc, _DISCRETE_KEYS, "discrete")
    if "n_queues" in dsc:
        kw["n_queues"] = _int(dsc["n_queues"], "discrete.n_queues")
        if kw["n_queues"] < 1:
            raise InvalidConfig("discrete.n_queues must be >= 1")
    if dsc.get("total_switchover") is not None:
        kw["total_switchover"] = _real(dsc["total_switchover"], "discrete.total_switchover")
        if kw["total_switchover"] < 0:
            raise InvalidConfig("discrete.total_switchover must be >= 0")

    fig = _obj(doc.get("figures", {}), "figures")
    _no_extra(fig, _FIG_KEYS, "figures")
    fkw: dict[str, Any] = {}
    if "rho_grid" in fig:
        fkw["rho_grid"] = _reals(fig["rho_grid"], "figures.rho_grid")
        if any(not (0.0 < r < 1.0) for r in fkw["rho_grid"]):
            raise InvalidConfig("figures.rho_grid values must lie in (0, 1)")
    if "n_grid" in fig:
        if not isinstance(fig["n_grid"], list):
            raise InvalidConfig("figures.n_grid must be a list")
        fkw["n_grid"] = tuple(_int(n, "figures.n_grid") for n in fig["n_grid"])
        if any(n < 1 for n in fkw["n_grid"]):
            raise InvalidConfig("figures.n_grid values must be >= 1")
    for key in ("alpha", "total_switchover", "horizon_load_exponent"):
        if key in fig:
            fkw[key] = _real(fig[key], f"figures.{key}")
    for key in ("figure1_batches", "figure2_batches"):
        if key in fig:
            if not isinstance(fig[key], list) or not fig[key]:
                raise InvalidConfig(f"figures.{key} must be a nonempty list")
            fkw[key] = tuple(_batch_check(b, f"figures.{key}") for b in fig[key])
    for key in ("figure1_service", "figure2_service"):
        if key in fig:
            fkw[key] = _service_check(fig[key], f"figures.{key}")
    kw["figures"] = FigureSettings(**fkw)
    return RunConfig(**kw)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise InvalidConfig(f"cannot read config {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise InvalidConfig(f"malformed JSON in {path}: {e}") from e
    return parse_config(doc)


def config_to_dict(c: RunConfig) -> dict:
    out: dict[str, Any] = {}
    if c.has_system():
        out["system"] = {"lambda": c.lam, "alpha": c.alpha, "batch": dict(c.batch), "service": dict(c.service)}
    s = c.sim
    out["sim"] = {
        "horizon": s.horizon,
        "warmup": s.warmup,
        "seed": s.seed,
        "replications": s.replications,
        "pasta_rate": s.pasta_rate,
        "profile_grid": list(s.profile_grid),
    }
    out["discrete"] = {"n_queues": c.n_queues, "total_switchover": c.total_switchover}
    f = c.figures
    out["figures"] = {
        "rho_grid": list(f.rho_grid),
        "n_grid": list(f.n_grid),
        "alpha": f.alpha,
        "total_switchover": f.total_switchover,
        "figure1_batches": [dict(b) for b in f.figure1_batches],
        "figure1_service": dict(f.figure1_service),
        "figure2_batches": [dict(b) for b in f.figure2_batches],
        "figure2_service": dict(f.figure2_service),
        "horizon_load_exponent": f.horizon_load_exponent,
    }
    return out


def dump_config(c: RunConfig) -> str:
    return json.dumps(config_to_dict(c), indent=2) + "\n"


def with_overrides(c: RunConfig, seed: int | None = None, reps: int | None = None, horizon: float | None = None) -> RunConfig:
    kw: dict[str, Any] = {}
    if seed is not None:
        kw["seed"] = seed
    if reps is not None:
        kw["replications"] = reps
    if horizon is not None:
        kw["horizon"] = horizon
    if not kw:
        return c
    return replace(c, sim=replace(c.sim, **kw))


__all__ = [
    "DEFAULT_GRID",
    "FigureSettings",
    "RunConfig",
    "config_to_dict",
    "dump_config",
    "load_config",
    "parse_config",
    "with_overrides",
]
