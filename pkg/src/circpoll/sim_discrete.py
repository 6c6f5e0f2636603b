"""Symmetric N-queue polling system, the discrete counterpart of the circle.

Each customer of a batch picks one of N queues uniformly; a single server
visits the queues cyclically with deterministic switch-over time
``total_switchover / N`` per hop and empties each queue it visits
(exhaustive service, FCFS within a queue).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._backend import backend_name, get_backend
from .analytic import mean_batch_sojourn
from .dists import SystemParams
from .engine import KernelModel
from .errors import InvalidConfig
from .sim_core import SimConfig, SimResult, _check_simulable, _ci, _map_reps, _ratio, rep_streams
from .stats import time_average

DISCIPLINES = ("exhaustive",)


@dataclass(frozen=True)
class DiscreteConfig:
    """``total_switchover=None`` uses the circle's travel time alpha."""

    n_queues: int
    total_switchover: float | None = None
    discipline: str = "exhaustive"

    def __post_init__(self):
        if isinstance(self.n_queues, bool) or int(self.n_queues) != self.n_queues or self.n_queues < 1:
            raise InvalidConfig(f"n_queues must be a positive integer, got {self.n_queues}")
        object.__setattr__(self, "n_queues", int(self.n_queues))
        s = self.total_switchover
        if s is not None and not (math.isfinite(s) and s >= 0.0):
            raise InvalidConfig(f"total_switchover must be >= 0, got {s}")
        if self.discipline not in DISCIPLINES:
            raise InvalidConfig(f"unsupported discipline {self.discipline!r}; available: {', '.join(DISCIPLINES)}")

    def switchover(self, p: SystemParams) -> float:
        return p.alpha if self.total_switchover is None else float(self.total_switchover)


def run_discrete(
    p: SystemParams,
    d: DiscreteConfig,
    cfg: SimConfig,
    backend: str | None = None,
    workers: int = 1,
) -> SimResult:
    rho = _check_simulable(p)
    sw = d.switchover(p)
    # mean cycle time is sw / (1 - rho); with no switch-over fall back to alpha as the time scale
    warmup = cfg.resolved_warmup((sw if sw > 0 else p.alpha) / (1.0 - rho))
    kern = get_backend(backend)
    model = KernelModel.from_params(p)
    streams = rep_streams(cfg.seed, cfg.replications)

    def one(i: int) -> dict:
        return kern.discrete_rep(model, d.n_queues, sw, cfg.horizon, warmup, streams[i][0])

    reps = _map_reps(one, cfg.replications, workers)
    l_vals = np.array([time_average(r["l_area"], r["elapsed"]) for r in reps])
    soj = np.array([_ratio(r["soj_sum"], r["soj_n"]) for r in reps])
    return SimResult(
        mode="discrete",
        seed=int(cfg.seed),
        replications=cfg.replications,
        horizon=float(cfg.horizon),
        warmup=warmup,
        backend=backend_name(kern),
        mean_l=_ci(l_vals),
        mean_batch_sojourn=_ci(soj),
        n_queues=d.n_queues,
        counts={
            "events": int(sum(r["n_events"] for r in reps)),
            "batches_arrived": int(sum(r["batches_arrived"] for r in reps)),
            "customers_arrived": int(sum(int(r["arrived"].sum()) for r in reps)),
            "customers_completed": int(sum(int(r["served"].sum()) for r in reps)),
            "sojourn_samples": int(sum(r["soj_n"] for r in reps)),
        },
        per_rep={"l": l_vals, "sojourn": soj},
    )


@dataclass(frozen=True)
class ConvergenceRow:
    n: float  # math.inf for the continuous limit
    rho: float
    batch_dist: str
    discrete_mean: float
    discrete_hw: float
    continuous_mean: float
    rel_gap: float


CONVERGENCE_COLUMNS = ("N", "rho", "batch_dist", "discrete_mean", "discrete_hw", "continuous_mean", "rel_gap")


def convergence_table(
    p: SystemParams,
    n_list: Iterable[int],
    cfg: SimConfig,
    switchover: float | None = None,
    backend: str | None = None,
    workers: int = 1,
) -> list[ConvergenceRow]:
    """Discrete mean batch sojourn for each N against the continuous value.

    Every N reuses the same seed (common random numbers), which makes the
    trend in N far less noisy than the individual estimates. The closing
    N=inf row is the continuous system itself.
    """
    cont = mean_batch_sojourn(p)
    rho = p.rho()
    label = p.batch.label
    rows = []
    for n in n_list:
        r = run_discrete(p, DiscreteConfig(n, switchover), cfg, backend=backend, workers=workers)
        e = r.mean_batch_sojourn
        rows.append(ConvergenceRow(n, rho, label, e.mean, e.halfwidth_95, cont, (e.mean - cont) / cont))
    rows.append(ConvergenceRow(math.inf, rho, label, cont, 0.0, cont, 0.0))
    return rows


def _fmt_n(n: float) -> str:
    return "inf" if math.isinf(n) else str(int(n))


def format_row(r: ConvergenceRow) -> list[str]:
    return [
        _fmt_n(r.n),
        f"{r.rho:.9g}",
        r.batch_dist,
        f"{r.discrete_mean:.9g}",
        f"{r.discrete_hw:.9g}",
        f"{r.continuous_mean:.9g}",
        f"{r.rel_gap:.9g}",
    ]


def convergence_csv(rows: Sequence[ConvergenceRow]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CONVERGENCE_COLUMNS)
    w.writerows(format_row(r) for r in rows)
    return buf.getvalue()
