import csv
import io
import math

import numpy as np
import pytest

from circpoll import _backend
from circpoll.dists import SystemParams, make_batch_dist, make_service_dist
from circpoll.engine import KernelModel
from circpoll.errors import InvalidConfig, UnstableSystem
from circpoll.sim_core import SimConfig
from circpoll.sim_discrete import CONVERGENCE_COLUMNS, DiscreteConfig, convergence_csv, convergence_table, run_discrete


def _fig1(rho):
    b = make_batch_dist({"kind": "deterministic", "k": 5})
    return SystemParams(rho / 5.0, 1.0, b, make_service_dist({"kind": "exponential", "rate": 1.0}))


@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_work_conservation_per_queue(backend):
    if backend == "compiled" and not _backend.compiled_available():
        pytest.skip("compiled extension not built")
    p = SystemParams(0.6, 1.0, make_batch_dist({"kind": "poisson_zt", "mean": 2.0}), make_service_dist({"kind": "exponential", "mean": 0.5}))
    out = _backend.get_backend(backend).discrete_rep(KernelModel.from_params(p), 7, 1.0, 3000.0, 300.0, np.random.PCG64(3))
    busy = np.zeros(7, dtype=np.int64)
    if out["in_service_queue"] >= 0:
        busy[out["in_service_queue"]] = 1
    np.testing.assert_array_equal(out["served"], out["arrived"] - out["content"] - busy)
    assert out["arrived"].min() > 0


def test_single_queue_matches_batch_mg1():
    """N=1 with no switch-over is an M^X/G/1 FCFS queue: E[S^B] = lambda E[X^2] / (2(1-rho)) + E[X]."""
    p = SystemParams(0.3, 1.0, make_batch_dist({"kind": "geometric", "mean": 2.0}), make_service_dist({"kind": "exponential", "mean": 0.5}))
    ek, ek2 = p.batch.mean_k, p.batch.fact2_k + p.batch.mean_k
    eb, m2 = p.service.mean_b, p.service.m2_b
    ex2 = ek * (m2 - eb * eb) + ek2 * eb * eb
    exact = p.lam * ex2 / (2 * (1 - p.rho())) + ek * eb
    r = run_discrete(p, DiscreteConfig(1, 0.0), SimConfig(horizon=1e5, replications=10, seed=2))
    assert r.mean_batch_sojourn.covers(exact, widen=1.5)


def test_single_queue_with_vacation_is_sane():
    p = _fig1(0.45)
    r = run_discrete(p, DiscreteConfig(1, 1.0), SimConfig(horizon=2e4, replications=4, seed=1))
    assert math.isfinite(r.mean_batch_sojourn.mean) and r.mean_batch_sojourn.mean > p.service.mean_b
    assert r.n_queues == 1 and r.mode == "discrete"


def test_convergence_at_moderate_load():
    rows = convergence_table(_fig1(0.45), [5, 10, 20, 200], SimConfig(horizon=2e5, replications=10, seed=1), switchover=1.0)
    by_n = {r.n: r for r in rows}
    assert abs(by_n[10].rel_gap) < 0.02
    assert by_n[5].rel_gap < 0 and by_n[10].rel_gap < 0
    assert abs(by_n[20].rel_gap) < abs(by_n[5].rel_gap)
    big = by_n[200]
    assert abs(big.discrete_mean - big.continuous_mean) <= 1.5 * big.discrete_hw
    assert by_n[math.inf].rel_gap == 0.0 and by_n[math.inf].discrete_hw == 0.0


def test_csv_shape():
    rows = convergence_table(_fig1(0.2), [2, 3], SimConfig(horizon=5e3, replications=2, seed=1), switchover=1.0)
    parsed = list(csv.reader(io.StringIO(convergence_csv(rows))))
    assert tuple(parsed[0]) == CONVERGENCE_COLUMNS
    assert [r[0] for r in parsed[1:]] == ["2", "3", "inf"]
    assert parsed[1][2] == "deterministic(k=5)"


def test_config_errors():
    for bad in ({"n_queues": 0}, {"n_queues": 2.5}, {"n_queues": 3, "total_switchover": -1.0}, {"n_queues": 3, "discipline": "gated"}):
        with pytest.raises(InvalidConfig):
            DiscreteConfig(**bad)
    assert DiscreteConfig(3).switchover(_fig1(0.2)) == 1.0
    with pytest.raises(UnstableSystem):
        run_discrete(_fig1(1.0), DiscreteConfig(3), SimConfig(horizon=100.0))
