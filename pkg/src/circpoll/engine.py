"""Reference event loop for the continuous polling system.

This is the readable definition of the dynamics. ``_pykernels`` drives it to
run whole replications, and ``_kernels.pyx`` is a line-by-line port: both
consume the random streams in exactly the order used here, so the two
backends produce bit-identical output for the same seed.

Positions are absolute points on [0, 1); the server moves in the + direction.
The distance from the server at ``s`` to a point ``p`` is ``p - s`` wrapped
into [0, 1).
"""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

import numpy as np

from .dists import SystemParams, draw_service

INF = math.inf

ARRIVAL = "arrival"
INSPECT = "inspect"
START = "start"
COMPLETE = "complete"


@dataclass(frozen=True)
class KernelModel:
    """Flat view of :class:`SystemParams` consumed by the kernels."""

    lam: float
    alpha: float
    batch_cdf: tuple[float, ...]
    svc_code: int
    svc_par: tuple[float, ...]

    @classmethod
    def from_params(cls, p: SystemParams) -> "KernelModel":
        par = tuple(float(v) for v in p.service.sampler_params)
        return cls(float(p.lam), float(p.alpha), tuple(p.batch.cdf.tolist()), int(p.service.code), par)


class Streams:
    """Uniform draws from two independent bit generators.

    The main stream drives arrivals, positions and services; the inspection
    stream only times the Poisson inspections, so changing the inspection
    rate leaves the sample path untouched.
    """

    def __init__(self, main: np.random.BitGenerator, inspect: np.random.BitGenerator):
        self._main = np.random.Generator(main)
        self._insp = np.random.Generator(inspect)
        self.uniform = self._main.random
        self.uniform_inspect = self._insp.random


@dataclass
class WorldState:
    clock: float = 0.0
    server_pos: float = 0.0
    serving: bool = False
    service_end: float = INF
    in_service_batch: int = -1
    # waiting customers, sorted by position (ties in insertion order)
    positions: list[float] = field(default_factory=list)
    batch_of: list[int] = field(default_factory=list)
    arrived_at: list[float] = field(default_factory=list)
    arrival_dist: list[float] = field(default_factory=list)
    # batch_id -> [customers not yet served to completion, batch arrival time]
    batches: dict[int, list] = field(default_factory=dict)
    next_batch_id: int = 0
    next_arrival: float = INF
    next_inspection: float = INF
    inspection_rate: float = 0.0
    customers_arrived: int = 0
    customers_completed: int = 0

    @property
    def phase(self) -> str:
        return "serving" if self.serving else "traveling"

    @property
    def remaining(self) -> float:
        return self.service_end - self.clock if self.serving else 0.0

    @property
    def n_waiting(self) -> int:
        return len(self.positions)

    def distance_to(self, pos: float) -> float:
        d = pos - self.server_pos
        if d < 0.0:
            d += 1.0
        return d

    def count_within(self, x: float) -> int:
        """Number of waiting customers at distance <= x ahead of the server."""
        n = len(self.positions)
        if x >= 1.0:
            return n
        s = self.server_pos
        lo = bisect_left(self.positions, s)
        hi = s + x
        if hi < 1.0:
            return bisect_right(self.positions, hi) - lo
        return (n - lo) + bisect_right(self.positions, hi - 1.0)

    def check_invariants(self) -> None:
        assert self.customers_arrived - self.customers_completed == len(self.positions) + (1 if self.serving else 0)
        assert all(0.0 <= q < 1.0 for q in self.positions)
        assert all(a <= b for a, b in zip(self.positions, self.positions[1:]))
        assert 0.0 <= self.server_pos < 1.0
        assert sum(b[0] for b in self.batches.values()) == len(self.positions) + (1 if self.serving else 0)


def _exp(u: float, rate: float) -> float:
    return -math.log1p(-u) / rate


def initial_state(model: KernelModel, streams: Streams, pasta_rate: float) -> WorldState:
    st = WorldState(inspection_rate=pasta_rate)
    st.next_arrival = _exp(streams.uniform(), model.lam)
    if pasta_rate > 0.0:
        st.next_inspection = _exp(streams.uniform_inspect(), pasta_rate)
    return st


def _target(state: WorldState) -> int:
    """Index of the first waiting customer at or ahead of the server."""
    i = bisect_left(state.positions, state.server_pos)
    return 0 if i == len(state.positions) else i


def next_event_time(state: WorldState, model: KernelModel) -> float:
    if state.serving:
        t_own = state.service_end
    elif state.positions:
        t_own = state.clock + model.alpha * state.distance_to(state.positions[_target(state)])
    else:
        t_own = INF
    return min(state.next_arrival, state.next_inspection, t_own)


def _travel_to(state: WorldState, model: KernelModel, t: float, idx: int, d: float) -> None:
    """Move a travelling server forward to time ``t`` without passing customer ``idx``."""
    adv = (t - state.clock) / model.alpha
    if idx >= 0 and adv >= d:
        state.server_pos = state.positions[idx]
        return
    s = state.server_pos + adv
    if s >= 1.0:
        s -= 1.0
        if s >= 1.0:
            s = math.fmod(s, 1.0)
    state.server_pos = s


def step(state: WorldState, model: KernelModel, streams: Streams) -> tuple[WorldState, list[tuple]]:
    """Advance exactly one event; ``state`` is updated in place and returned.

    Events are, in order of precedence on exact ties: batch arrival,
    inspection, then the server's own event (reaching a customer or finishing
    a service).
    """
    idx = -1
    d = 0.0
    if state.serving:
        t_own = state.service_end
    elif state.positions:
        idx = _target(state)
        d = state.distance_to(state.positions[idx])
        t_own = state.clock + model.alpha * d
    else:
        t_own = INF

    obs: list[tuple] = []
    t_arr = state.next_arrival
    t_ins = state.next_inspection

    if t_arr <= t_ins and t_arr < t_own:
        if not state.serving:
            _travel_to(state, model, t_arr, idx, d)
        state.clock = t_arr
        u = streams.uniform()
        k = bisect_right(model.batch_cdf, u) + 1
        bid = state.next_batch_id
        state.next_batch_id += 1
        state.batches[bid] = [k, t_arr]
        dists = []
        for _ in range(k):
            pos = streams.uniform()
            dist = state.distance_to(pos)
            j = bisect_right(state.positions, pos)
            state.positions.insert(j, pos)
            state.batch_of.insert(j, bid)
            state.arrived_at.insert(j, t_arr)
            state.arrival_dist.insert(j, dist)
            dists.append(dist)
        state.customers_arrived += k
        state.next_arrival = t_arr + _exp(streams.uniform(), model.lam)
        obs.append((ARRIVAL, t_arr, bid, k, dists))
    elif t_ins < t_own:
        if not state.serving:
            _travel_to(state, model, t_ins, idx, d)
        state.clock = t_ins
        state.next_inspection = t_ins + _exp(streams.uniform_inspect(), state.inspection_rate)
        obs.append((INSPECT, t_ins))
    elif state.serving:
        t = state.service_end
        state.clock = t
        state.serving = False
        state.service_end = INF
        bid = state.in_service_batch
        state.in_service_batch = -1
        state.customers_completed += 1
        rec = state.batches[bid]
        rec[0] -= 1
        if rec[0] == 0:
            del state.batches[bid]
            obs.append((COMPLETE, t, bid, t - rec[1], rec[1]))
        else:
            obs.append((COMPLETE, t, bid, None, rec[1]))
    else:
        # reach the target customer and start its service
        state.clock = t_own
        state.server_pos = state.positions[idx]
        state.positions.pop(idx)
        bid = state.batch_of.pop(idx)
        t_a = state.arrived_at.pop(idx)
        a_d = state.arrival_dist.pop(idx)
        b = draw_service(model.svc_code, model.svc_par, streams.uniform)
        state.serving = True
        state.service_end = t_own + b
        state.in_service_batch = bid
        obs.append((START, t_own, t_own - t_a, t_a, a_d))
    return state, obs

