"""Pure-Python replication kernels (fallback for the compiled ``_kernels``).

Both functions return the same dictionary of raw accumulators as their
Cython counterparts; the arithmetic is performed in the same order so the
results agree bit for bit.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque

import numpy as np

from .dists import draw_service
from .engine import ARRIVAL, COMPLETE, INSPECT, START, KernelModel, Streams, initial_state, next_event_time, step

INF = math.inf


def continuous_rep(
    model: KernelModel,
    horizon: float,
    warmup: float,
    pasta_rate: float,
    grid,
    main_bg: np.random.BitGenerator,
    insp_bg: np.random.BitGenerator,
    record_n: int = 0,
    check: bool = False,
) -> dict:
    grid = [float(x) for x in grid]
    G = len(grid)
    streams = Streams(main_bg, insp_bg)
    state = initial_state(model, streams, pasta_rate)

    l_area = 0.0
    prof_sum = [0.0] * G
    n_insp = 0
    wait_sum = [0.0] * G
    wait_cnt = [0] * G
    wait_all_sum = 0.0
    wait_all_cnt = 0
    soj_sum = 0.0
    soj_sq = 0.0
    soj_n = 0
    recorded: list[float] = []
    n_events = 0
    batches_arrived = 0

    while True:
        t_next = next_event_time(state, model)
        n_before = len(state.positions)
        t_before = state.clock
        if t_next > horizon:
            if horizon > warmup:
                l_area += n_before * (horizon - (t_before if t_before > warmup else warmup))
            break
        _, obs = step(state, model, streams)
        n_events += 1
        if state.clock > warmup:
            l_area += n_before * (state.clock - (t_before if t_before > warmup else warmup))
        if check:
            state.check_invariants()
        for ev in obs:
            kind = ev[0]
            if kind == ARRIVAL:
                batches_arrived += 1
                if ev[1] >= warmup and len(recorded) < record_n:
                    for dist in ev[4]:
                        if len(recorded) < record_n:
                            recorded.append(dist)
            elif kind == START:
                if ev[3] >= warmup:
                    w = ev[2]
                    a_d = ev[4]
                    wait_all_sum += w
                    wait_all_cnt += 1
                    for g in range(G):
                        if a_d <= grid[g]:
                            wait_sum[g] += w
                            wait_cnt[g] += 1
            elif kind == COMPLETE:
                if ev[3] is not None and ev[4] >= warmup:
                    soj_sum += ev[3]
                    soj_sq += ev[3] * ev[3]
                    soj_n += 1
            elif kind == INSPECT:
                if ev[1] >= warmup:
                    n_insp += 1
                    for g in range(G):
                        prof_sum[g] += state.count_within(grid[g])

    return {
        "l_area": l_area,
        "elapsed": max(horizon - warmup, 0.0),
        "prof_sum": np.array(prof_sum),
        "n_insp": n_insp,
        "wait_sum": np.array(wait_sum),
        "wait_cnt": np.array(wait_cnt, dtype=np.int64),
        "wait_all_sum": wait_all_sum,
        "wait_all_cnt": wait_all_cnt,
        "soj_sum": soj_sum,
        "soj_sq": soj_sq,
        "soj_n": soj_n,
        "recorded": np.array(recorded),
        "n_events": n_events,
        "customers_arrived": state.customers_arrived,
        "customers_completed": state.customers_completed,
        "batches_arrived": batches_arrived,
        "in_system_end": len(state.positions) + (1 if state.serving else 0),
    }


def _hops_to(q: int, i0: int, n: int, h_min: int) -> int:
    """Smallest h >= h_min with (i0 + h) % n == q."""
    base = (q - i0) % n
    if base >= h_min:
        return base
    return base + ((h_min - base + n - 1) // n) * n


def discrete_rep(
    model: KernelModel,
    n_queues: int,
    switchover: float,
    horizon: float,
    warmup: float,
    main_bg: np.random.BitGenerator,
) -> dict:
    """One replication of the symmetric N-queue exhaustive polling system.

    The server departs queue ``i0`` at ``t0`` and reaches queue ``i0 + h``
    (mod N) at ``t0 + h * hop``; ``h_target`` is the hop count to the first
    non-empty queue ahead, or -1 when every queue is empty.
    """
    N = n_queues
    hop = switchover / N
    uni = np.random.Generator(main_bg).random
    lam = model.lam
    cdf = model.batch_cdf

    queues: list[deque] = [deque() for _ in range(N)]
    arrived = [0] * N
    served = [0] * N
    batch_left: dict[int, list] = {}
    n_wait = 0

    t = 0.0
    serving = False
    service_end = INF
    cur = 0
    cur_batch = -1
    i0 = 0
    t0 = 0.0
    h_target = -1
    next_bid = 0

    l_area = 0.0
    soj_sum = 0.0
    soj_sq = 0.0
    soj_n = 0
    n_events = 0

    t_arr = -math.log1p(-uni()) / lam

    while True:
        if serving:
            t_own = service_end
        elif h_target >= 0:
            t_own = t0 + h_target * hop
        else:
            t_own = INF
        t_next = t_arr if t_arr < t_own else t_own
        if t_next > horizon:
            if horizon > warmup:
                l_area += n_wait * (horizon - (t if t > warmup else warmup))
            break
        if t_next > warmup:
            l_area += n_wait * (t_next - (t if t > warmup else warmup))
        t = t_next
        n_events += 1

        if t_arr < t_own:
            u = uni()
            k = bisect_right(cdf, u) + 1
            bid = next_bid
            next_bid += 1
            batch_left[bid] = [k, t]
            if not serving:
                if hop > 0.0:
                    h_min = int(math.floor((t - t0) / hop)) + 1
                    while h_min > 1 and t0 + (h_min - 1) * hop > t:
                        h_min -= 1
                    while t0 + h_min * hop <= t:
                        h_min += 1
                else:
                    t0 = t
                    h_min = 1
            for _ in range(k):
                q = int(uni() * N)
                if q >= N:
                    q = N - 1
                queues[q].append((bid, t))
                arrived[q] += 1
                n_wait += 1
                if not serving:
                    h = _hops_to(q, i0, N, h_min)
                    if h_target < 0 or h < h_target:
                        h_target = h
            t_arr = t + (-math.log1p(-uni()) / lam)
        elif serving:
            served[cur] += 1
            rec = batch_left[cur_batch]
            rec[0] -= 1
            if rec[0] == 0:
                del batch_left[cur_batch]
                if rec[1] >= warmup:
                    s = t - rec[1]
                    soj_sum += s
                    soj_sq += s * s
                    soj_n += 1
            if queues[cur]:
                bid, _ = queues[cur].popleft()
                n_wait -= 1
                cur_batch = bid
                service_end = t + draw_service(model.svc_code, model.svc_par, uni)
            else:
                serving = False
                service_end = INF
                cur_batch = -1
                i0 = cur
                t0 = t
                h_target = -1
                for h in range(1, N + 1):
                    if queues[(i0 + h) % N]:
                        h_target = h
                        break
        else:
            cur = (i0 + h_target) % N
            bid, _ = queues[cur].popleft()
            n_wait -= 1
            cur_batch = bid
            serving = True
            service_end = t + draw_service(model.svc_code, model.svc_par, uni)

    return {
        "l_area": l_area,
        "elapsed": max(horizon - warmup, 0.0),
        "soj_sum": soj_sum,
        "soj_sq": soj_sq,
        "soj_n": soj_n,
        "n_events": n_events,
        "arrived": np.array(arrived, dtype=np.int64),
        "served": np.array(served, dtype=np.int64),
        "content": np.array([len(q) for q in queues], dtype=np.int64),
        "in_service_queue": cur if serving else -1,
        "batches_arrived": next_bid,
    }
