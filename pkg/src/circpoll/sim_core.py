"""Replicated simulation of the continuous polling system on a circle.

Each replication owns two PCG64 streams spawned from ``SeedSequence(seed)``:
the main stream (arrivals, positions, services) and an inspection stream
that only times the Poisson inspections used for the L(x) profile.
Confidence intervals are Student-t intervals across replication means.
"""
from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._backend import backend_name, get_backend
from .dists import SystemParams
from .engine import KernelModel, Streams, WorldState, initial_state, step  # noqa: F401  (re-exported)
from .errors import InvalidConfig, MissingGridPoint, SimDegenerate, UnstableSystem
from .stats import Estimate, replication_ci, time_average

DEFAULT_GRID = tuple(round(0.1 * i, 10) for i in range(1, 11))
GRID_TOL = 1e-9


@dataclass(frozen=True)
class SimConfig:
    """Run-length and sampling settings shared by both simulators.

    ``warmup=None`` picks max(10% of horizon, 50 mean cycle times) once the
    load is known.
    """

    horizon: float = 1e5
    warmup: float | None = None
    seed: int = 0
    replications: int = 10
    pasta_rate: float = 1.0
    profile_grid: tuple[float, ...] = DEFAULT_GRID
    record_arrival_distances: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InvalidConfig(f"horizon must be positive, got {self.horizon}")
        if self.warmup is not None and not (0.0 <= self.warmup < self.horizon):
            raise InvalidConfig(f"need 0 <= warmup < horizon, got warmup={self.warmup}, horizon={self.horizon}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise InvalidConfig(f"replications must be a positive integer, got {self.replications}")
        if not (math.isfinite(self.pasta_rate) and self.pasta_rate >= 0):
            raise InvalidConfig(f"pasta_rate must be >= 0, got {self.pasta_rate}")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise InvalidConfig(f"seed must be an integer in [0, 2^64), got {self.seed}")
        grid = tuple(float(x) for x in self.profile_grid)
        if any(not (0.0 < x <= 1.0) for x in grid) or any(a >= b for a, b in zip(grid, grid[1:])):
            raise InvalidConfig(f"profile_grid must be strictly increasing in (0, 1], got {list(grid)}")
        object.__setattr__(self, "profile_grid", grid)
        if self.record_arrival_distances < 0:
            raise InvalidConfig("record_arrival_distances must be >= 0")

    def resolved_warmup(self, cycle_time: float) -> float:
        if self.warmup is not None:
            return float(self.warmup)
        w = max(0.1 * self.horizon, 50.0 * cycle_time)
        if w >= self.horizon:
            raise InvalidConfig(
                f"default warmup {w:.6g} (50 mean cycle times) is not below the horizon {self.horizon:.6g}; "
                "raise the horizon or set warmup explicitly"
            )
        return w


def _ci(values) -> Estimate:
    v = np.asarray(values, dtype=float)
    if v.size == 1:
        return Estimate(float(v[0]), 0.0, 1)
    return replication_ci(v)


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.nan


@dataclass
class SimResult:
    mode: str
    seed: int
    replications: int
    horizon: float
    warmup: float
    backend: str
    mean_l: Estimate
    mean_batch_sojourn: Estimate
    mean_wait: Estimate | None = None
    mean_wait_within: dict[float, Estimate] = field(default_factory=dict)
    l_profile: dict[float, Estimate] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    n_queues: int | None = None
    # per-replication means, kept for joint statistics (keys: "l", "sojourn", ...)
    per_rep: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    arrival_distances: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "seed": self.seed,
            "replications": self.replications,
            "horizon": self.horizon,
            "warmup": self.warmup,
            "backend": self.backend,
            "mean_l": self.mean_l.to_dict(),
            "mean_batch_sojourn": self.mean_batch_sojourn.to_dict(),
        }
        if self.n_queues is not None:
            out["n_queues"] = self.n_queues
        if self.mean_wait is not None:
            out["mean_wait"] = self.mean_wait.to_dict()
        if self.l_profile:
            out["l_profile"] = [{"x": x, **e.to_dict()} for x, e in self.l_profile.items()]
        if self.mean_wait_within:
            out["mean_wait_within"] = [{"x": x, **e.to_dict()} for x, e in self.mean_wait_within.items()]
        out["counts"] = dict(self.counts)
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def profile_csv(self) -> str:
        buf = io.StringIO(newline="")
        buf.write("x,l_of_x_est,l_of_x_halfwidth\n")
        for x, e in self.l_profile.items():
            buf.write(f"{x:.9g},{e.mean:.9g},{e.halfwidth_95:.9g}\n")
        return buf.getvalue()


def _check_simulable(p: SystemParams) -> float:
    rho = p.rho()
    if not rho < 1.0:
        raise UnstableSystem(rho)
    if p.lam <= 0.0:
        raise SimDegenerate("arrival rate is 0: nothing to simulate")
    if p.service.mean_b <= 0.0:
        raise SimDegenerate("zero service times: the event loop would not advance")
    return rho


def rep_streams(seed: int, replications: int) -> list[tuple[np.random.PCG64, np.random.PCG64]]:
    """(main, inspection) bit generators for each replication."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(replications):
        main, insp = child.spawn(2)
        out.append((np.random.PCG64(main), np.random.PCG64(insp)))
    return out


def _map_reps(fn: Callable[[int], dict], n: int, workers: int) -> list[dict]:
    if workers <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, range(n)))


def run_continuous(
    p: SystemParams,
    cfg: SimConfig,
    backend: str | None = None,
    workers: int = 1,
    check: bool = False,
) -> SimResult:
    """Independent replications of the continuous system.

    ``check=True`` asserts the state invariants after every event (Python
    backend only, slow).
    """
    rho = _check_simulable(p)
    warmup = cfg.resolved_warmup(p.alpha / (1.0 - rho))
    kern = get_backend("python" if check else backend)
    model = KernelModel.from_params(p)
    streams = rep_streams(cfg.seed, cfg.replications)
    grid = cfg.profile_grid

    def one(i: int) -> dict:
        main, insp = streams[i]
        kw = {"check": True} if check else {}
        return kern.continuous_rep(
            model, cfg.horizon, warmup, cfg.pasta_rate, grid, main, insp, cfg.record_arrival_distances, **kw
        )

    reps = _map_reps(one, cfg.replications, workers)

    l_vals = np.array([time_average(r["l_area"], r["elapsed"]) for r in reps])
    soj = np.array([_ratio(r["soj_sum"], r["soj_n"]) for r in reps])
    wait = np.array([_ratio(r["wait_all_sum"], r["wait_all_cnt"]) for r in reps])
    G = len(grid)
    prof = np.array([r["prof_sum"] / r["n_insp"] if r["n_insp"] > 0 else np.full(G, np.nan) for r in reps])
    wwin = np.array([[_ratio(r["wait_sum"][g], r["wait_cnt"][g]) for g in range(G)] for r in reps])

    res = SimResult(
        mode="continuous",
        seed=int(cfg.seed),
        replications=cfg.replications,
        horizon=float(cfg.horizon),
        warmup=warmup,
        backend=backend_name(kern),
        mean_l=_ci(l_vals),
        mean_batch_sojourn=_ci(soj),
        mean_wait=_ci(wait),
        counts={
            "events": int(sum(r["n_events"] for r in reps)),
            "batches_arrived": int(sum(r["batches_arrived"] for r in reps)),
            "customers_arrived": int(sum(r["customers_arrived"] for r in reps)),
            "customers_completed": int(sum(r["customers_completed"] for r in reps)),
            "sojourn_samples": int(sum(r["soj_n"] for r in reps)),
            "wait_samples": int(sum(r["wait_all_cnt"] for r in reps)),
            "inspections": int(sum(r["n_insp"] for r in reps)),
        },
        per_rep={"l": l_vals, "sojourn": soj, "wait": wait, "profile": prof, "wait_within": wwin},
    )
    if cfg.pasta_rate > 0:
        res.l_profile = {x: _ci(prof[:, g]) for g, x in enumerate(grid)}
    res.mean_wait_within = {x: _ci(wwin[:, g]) for g, x in enumerate(grid)}
    if cfg.record_arrival_distances:
        res.arrival_distances = np.concatenate([r["recorded"] for r in reps])
    return res


def _grid_index(grid: Sequence[float], x: float) -> int:
    for i, g in enumerate(grid):
        if abs(g - x) <= GRID_TOL:
            return i
    raise MissingGridPoint(f"distance {x:g} is not on the profile grid {list(grid)}")


def little_interval_check(result: SimResult, p: SystemParams, x: float) -> tuple[Estimate, Estimate]:
    """Both sides of E[L] - E[L(1-x)] = lambda E[K] x E[W(x)] from simulation output.

    Each side is formed per replication, so the returned half-widths are
    honest replication CIs.
    """
    if result.mode != "continuous" or "profile" not in result.per_rep:
        raise MissingGridPoint("result carries no distance profile")
    grid = list(result.l_profile) or list(result.mean_wait_within)
    l = result.per_rep["l"]
    if abs(1.0 - x) <= GRID_TOL:
        l_inner = np.zeros_like(l)  # L(0) = 0: no customer sits exactly at the server
    else:
        if not result.l_profile:
            raise MissingGridPoint("no L(x) profile was collected (pasta_rate = 0)")
        l_inner = result.per_rep["profile"][:, _grid_index(grid, 1.0 - x)]
    w = result.per_rep["wait_within"][:, _grid_index(list(result.mean_wait_within), x)]
    lhs = _ci(l - l_inner)
    rhs = _ci(p.lam * p.batch.mean_k * x * w)
    return lhs, rhs


__all__ = [
    "SimConfig",
    "SimResult",
    "KernelModel",
    "Streams",
    "WorldState",
    "initial_state",
    "little_interval_check",
    "rep_streams",
    "run_continuous",
    "step",
]
