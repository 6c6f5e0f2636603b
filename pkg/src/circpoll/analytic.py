"""Closed-form mean-value results for polling on a circle with batch arrivals.

All quantities are steady-state means. Distances are measured in the
server's travel direction, so a point at distance ``x`` is reached after the
server covers ``x`` of the unit circumference (``alpha * x`` time units of
pure travel).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dists import SystemParams, pgf_eval
from .errors import DomainError, UnstableSystem, WrongDistribution
from .quadrature import integrate_adaptive

SMALL = 1e-8


def _expm1_over(r: float, x: float = 1.0) -> float:
    """(exp(r x) - 1) / r, continuous at r = 0."""
    if abs(r) < SMALL:
        rx = r * x
        return x * (1.0 + rx / 2.0 + rx * rx / 6.0)
    return math.expm1(r * x) / r


def _check_x(x: float, lo_open: bool = False) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0) or (lo_open and x == 0.0):
        raise DomainError(f"distance must lie in [0, 1], got {x!r}")
    return x


def utilization(p: SystemParams) -> float:
    return p.rho()


def _stable_rho(p: SystemParams) -> float:
    rho = p.rho()
    if not rho < 1.0:
        raise UnstableSystem(rho)
    return rho


def _fact2_ratio(p: SystemParams) -> float:
    """E[B] E[K(K-1)] / E[K]: service of the batch-mates ahead of a random customer, doubled."""
    return p.service.mean_b * p.batch.fact2_k / p.batch.mean_k


def mean_waiting_customers(p: SystemParams) -> float:
    """Expected number of waiting customers, excluding any customer in service."""
    rho = _stable_rho(p)
    lk = p.lam * p.batch.mean_k
    return lk / (2.0 * (1.0 - rho)) * (p.alpha + lk * p.service.m2_b + _fact2_ratio(p))


# ---------------------------------------------------------------------------
# waiting time generated ahead of a tagged point


def gen_wait_service(p: SystemParams, x: float) -> float:
    """Mean total service triggered by one service at distance ``x`` from a tagged customer."""
    x = _check_x(x)
    rho = _stable_rho(p)
    return p.service.mean_b * math.exp(rho * x)


def gen_wait_travel(p: SystemParams, x: float) -> float:
    """Mean waiting time generated by the server travelling distance ``x``."""
    x = _check_x(x)
    return p.alpha * _expm1_over(p.rho(), x)


def gen_wait_residual(p: SystemParams, x: float) -> float:
    """As :func:`gen_wait_service`, started by a residual service."""
    x = _check_x(x)
    rho = _stable_rho(p)
    return p.service.residual_mean * math.exp(rho * x)


# ---------------------------------------------------------------------------
# spatial density


@dataclass(frozen=True)
class AffineDensity:
    """Mean number of waiting customers per unit distance: ``c0 + c1 * (1 - x)``."""

    c0: float
    c1: float

    def value(self, x):
        return self.c0 + self.c1 * (1.0 - np.asarray(x, dtype=float)) if np.ndim(x) else self.c0 + self.c1 * (1.0 - x)

    __call__ = value

    def integral(self) -> float:
        return self.c0 + 0.5 * self.c1

    def second_derivative(self, x: float = 0.0) -> float:
        return 0.0


def density_f(p: SystemParams) -> AffineDensity:
    rho = _stable_rho(p)
    lk = p.lam * p.batch.mean_k
    m2 = p.service.m2_b
    c0 = lk * lk * m2 / 2.0
    c1 = (p.alpha * lk + rho * lk * lk * m2 + rho * p.batch.fact2_k / p.batch.mean_k) / (1.0 - rho)
    return AffineDensity(c0, c1)


def cum_density(d: AffineDensity, x: float) -> float:
    """Mean number of waiting customers within distance ``x`` of the server."""
    x = _check_x(x)
    return (d.c0 + d.c1) * x - 0.5 * d.c1 * x * x


def integral_equation_residual(p: SystemParams, f: Callable[[float], float], x: float) -> float:
    """LHS minus RHS of the integral equation for the density at ``1 - x``.

    ``f`` may be any integrable function on [0, 1]; the convolution term is
    computed by adaptive quadrature.
    """
    x = _check_x(x)
    rho = p.rho()
    lk = p.lam * p.batch.mean_k
    eb = p.service.mean_b
    g = _expm1_over(rho, x)
    conv = integrate_adaptive(lambda z: math.exp(rho * (x - z)) * f(z), 0.0, x) if x > 0 else 0.0
    rhs = lk * (
        p.alpha * g
        + 0.5 * lk * p.service.m2_b * math.exp(rho * x)
        + _fact2_ratio(p) * g
        + eb * conv
    )
    return float(f(1.0 - x)) - rhs


# ---------------------------------------------------------------------------
# batch sojourn time


def conditional_batch_wait(p: SystemParams, x: float, k: int) -> float:
    """E[wait of the last customer | furthest customer at distance x, batch size k]."""
    x = _check_x(x)
    if k < 1:
        raise DomainError(f"batch size must be >= 1, got {k}")
    rho = _stable_rho(p)
    lk = p.lam * p.batch.mean_k
    eb, m2 = p.service.mean_b, p.service.m2_b
    d = _fact2_ratio(p)
    rx = rho * x
    mates = 1.0 + rx / 2.0 if rx < SMALL else math.expm1(rx) / rx
    return (
        (p.alpha + rho * lk * m2 + d) * x / (1.0 - rho)
        + 0.5 * lk * m2
        + (k - 1) * eb * mates
        - d * _expm1_over(rho, x)
    )


def pgf_integral(p: SystemParams) -> float:
    """Integral over [0, 1] of exp(rho x) times the batch-size PGF."""
    rho = _stable_rho(p)
    return integrate_adaptive(lambda x: math.exp(rho * x) * pgf_eval(p.batch, x), 0.0, 1.0)


def mean_batch_sojourn(p: SystemParams) -> float:
    """Mean time from a batch's arrival to the service completion of its last customer.

    The closed form carries terms in 1/lambda and 1/rho that cancel; they are
    regrouped here as (exp(rho)-1)/rho factors so the expression stays exact
    down to lambda = 0 and E[B] = 0.
    """
    rho = _stable_rho(p)
    lk = p.lam * p.batch.mean_k
    eb, m2 = p.service.mean_b, p.service.m2_b
    ek = p.batch.mean_k
    d = _fact2_ratio(p)
    kk1 = p.batch.mean_k_over_k1
    h = _expm1_over(rho)
    integral = pgf_integral(p)
    return (
        eb
        + (p.alpha + rho * lk * m2 + d) / (1.0 - rho) * kk1
        + 0.5 * lk * m2
        + ek * eb * h  # (exp(rho) - 1) / lambda
        - eb * math.exp(rho)
        + eb * rho * integral
        + d * (integral - h)
    )


def unit_batch_sojourn(p: SystemParams) -> float:
    if not p.batch.is_unit:
        raise WrongDistribution(f"unit-batch form needs K = 1, got {p.batch.label}")
    rho = _stable_rho(p)
    return p.service.mean_b + (p.lam * p.service.m2_b + p.alpha) / (2.0 * (1.0 - rho))


def light_traffic_sojourn(p: SystemParams) -> float:
    """Travel to the furthest customer plus the batch's own work."""
    return p.alpha * p.batch.mean_k_over_k1 + p.batch.mean_k * p.service.mean_b


def travel_only_sojourn(p: SystemParams) -> float:
    """Zero-service limit: mean travel time to the furthest customer of a batch."""
    return p.alpha * p.batch.mean_k_over_k1


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalysisReport:
    rho: float
    mean_l: float
    density: AffineDensity
    mean_sojourn_batch: float
    pgf_integral_value: float

    def to_dict(self) -> dict[str, float]:
        return {
            "rho": self.rho,
            "mean_l": self.mean_l,
            "f_c0": self.density.c0,
            "f_c1": self.density.c1,
            "mean_batch_sojourn": self.mean_sojourn_batch,
            "pgf_integral": self.pgf_integral_value,
        }


def analyze(p: SystemParams) -> AnalysisReport:
    return AnalysisReport(
        rho=_stable_rho(p),
        mean_l=mean_waiting_customers(p),
        density=density_f(p),
        mean_sojourn_batch=mean_batch_sojourn(p),
        pgf_integral_value=pgf_integral(p),
    )
