import math

import numpy as np
import pytest

from circpoll.dists import SystemParams, make_batch_dist, make_service_dist
from circpoll.engine import (
    ARRIVAL,
    COMPLETE,
    INSPECT,
    START,
    KernelModel,
    Streams,
    WorldState,
    initial_state,
    next_event_time,
    step,
)


class Scripted:
    """Stand-in for Streams that replays fixed uniforms."""

    def __init__(self, main, insp=()):
        self._m = list(main)
        self._i = list(insp)

    def uniform(self):
        return self._m.pop(0)

    def uniform_inspect(self):
        return self._i.pop(0)


def _model(k=1, b=0.25, lam=1.0, alpha=1.0):
    p = SystemParams(
        lam, alpha, make_batch_dist({"kind": "deterministic", "k": k}), make_service_dist({"kind": "deterministic", "b": b})
    )
    return KernelModel.from_params(p)


def _u_for_exp(delay, rate):
    # inverse of -log1p(-u) / rate
    return -math.expm1(-delay * rate)


def test_arrival_on_empty_circle():
    m = _model()
    st = WorldState(server_pos=0.3, next_arrival=0.5)
    st, obs = step(st, m, Scripted([0.0, 0.8, _u_for_exp(2.0, 1.0)]))
    assert st.clock == 0.5
    assert st.server_pos == pytest.approx(0.8)  # an empty circle does not stop the server
    assert st.positions == [0.8]
    assert st.arrival_dist == [pytest.approx(0.0, abs=1e-15)]
    assert st.next_arrival == pytest.approx(2.5)
    assert obs[0][0] == ARRIVAL and obs[0][3] == 1
    st.check_invariants()


def test_travel_start_and_completion():
    m = _model(b=0.25, alpha=2.0)
    st = WorldState(server_pos=0.9, positions=[0.1], batch_of=[0], arrived_at=[0.0], arrival_dist=[0.2])
    st.batches = {0: [1, 0.0]}
    st.customers_arrived = 1
    st.next_arrival = 100.0
    assert next_event_time(st, m) == pytest.approx(0.4)  # wraps around: distance 0.2 at alpha = 2
    st, obs = step(st, m, Scripted([]))
    assert obs[0][0] == START and st.serving and st.server_pos == 0.1
    assert st.clock == pytest.approx(0.4) and st.service_end == pytest.approx(0.65)
    assert obs[0][2] == pytest.approx(0.4)  # waiting time
    st.check_invariants()
    st, obs = step(st, m, Scripted([]))
    assert obs[0][0] == COMPLETE and obs[0][3] == pytest.approx(0.65)  # batch sojourn
    assert not st.serving and st.batches == {}
    st.check_invariants()


def test_retargets_to_nearer_arrival():
    m = _model(b=0.25, alpha=1.0)
    st = WorldState(server_pos=0.0, positions=[0.6], batch_of=[0], arrived_at=[0.0], arrival_dist=[0.6])
    st.batches = {0: [1, 0.0]}
    st.customers_arrived = 1
    st.next_arrival = 0.1
    # arrival at t = 0.1 lands at 0.3, between the server (now at 0.1) and the old target
    st, _ = step(st, m, Scripted([0.0, 0.3, _u_for_exp(5.0, 1.0)]))
    assert st.server_pos == pytest.approx(0.1)
    assert st.arrival_dist[0] == pytest.approx(0.2)
    st, obs = step(st, m, Scripted([]))
    assert obs[0][0] == START and st.server_pos == 0.3 and st.clock == pytest.approx(0.3)


def test_inspection_event_keeps_main_stream():
    m = _model()
    st = WorldState(next_arrival=5.0, next_inspection=1.0, inspection_rate=2.0)
    st, obs = step(st, m, Scripted([], [_u_for_exp(0.5, 2.0)]))
    assert obs == [(INSPECT, 1.0)] and st.next_inspection == pytest.approx(1.5)


def test_count_within_wraps():
    st = WorldState(server_pos=0.8, positions=[0.05, 0.2, 0.5, 0.85, 0.95])
    assert st.count_within(0.1) == 1
    assert st.count_within(0.3) == 3
    assert st.count_within(0.45) == 4
    assert st.count_within(1.0) == 5


def test_random_run_invariants_and_progress():
    p = SystemParams(
        0.7, 1.3, make_batch_dist({"kind": "geometric", "mean": 2.5}), make_service_dist({"kind": "exponential", "mean": 0.3})
    )
    m = KernelModel.from_params(p)
    streams = Streams(np.random.PCG64(1), np.random.PCG64(2))
    st = initial_state(m, streams, 0.5)
    last = 0.0
    starts = 0
    for _ in range(20000):
        t_pred = next_event_time(st, m)
        st, obs = step(st, m, streams)
        assert st.clock == t_pred and st.clock >= last
        last = st.clock
        st.check_invariants()
        starts += sum(1 for o in obs if o[0] == START)
        if st.serving:
            assert st.remaining >= 0
    assert starts > 1000
