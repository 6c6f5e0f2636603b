"""Independent reference computations used by the tests.

Nothing here calls the package's analytic module: the formulas are written
out in their original, unsimplified shape (with the 1/lambda and 1/rho terms
that the library regroups), and integrals are done with scipy directly.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from circpoll.dists import SystemParams, make_batch_dist, make_service_dist


def quad(f, a, b):
    val, _ = integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-12, limit=500)
    return val


def pmf_moments(pmf):
    k = np.arange(1, len(pmf) + 1)
    return float(np.sum(k * pmf)), float(np.sum(k * (k - 1) * pmf)), float(np.sum(k / (k + 1) * pmf))


def pgf_direct(pmf, x):
    k = np.arange(1, len(pmf) + 1)
    return float(np.sum(pmf * x**k))


def lk(p):
    return p.lam * p.batch.mean_k


def mean_l_literal(p):
    eb, m2 = p.service.mean_b, p.service.m2_b
    rho = p.rho()
    return lk(p) / (2 * (1 - rho)) * (p.alpha + lk(p) * m2 + eb * p.batch.fact2_k / p.batch.mean_k)


def sojourn_literal(p):
    """Closed form exactly as printed, 1/lambda and 1/rho terms included (needs lambda, E[B] > 0)."""
    eb, m2 = p.service.mean_b, p.service.m2_b
    ek, f2, kk1 = p.batch.mean_k, p.batch.fact2_k, p.batch.mean_k_over_k1
    rho = p.rho()
    lam = p.lam
    pmf = p.batch.pmf
    integral = quad(lambda x: math.exp(rho * x) * pgf_direct(pmf, x), 0, 1)
    return (
        eb
        + (p.alpha + rho * lam * ek * m2 + eb * f2 / ek) / (1 - rho) * kk1
        + lam * ek * m2 / 2
        + eb * f2 / (rho * ek)
        + (math.exp(rho) - 1) / lam
        - (eb + eb * f2 / (rho * ek)) * math.exp(rho)
        + (eb * rho + eb * f2 / ek) * integral
    )


def density_coeffs_literal(p):
    rho = p.rho()
    m2 = p.service.m2_b
    c0 = lk(p) ** 2 * m2 / 2
    c1 = (p.alpha * lk(p) + rho * lk(p) ** 2 * m2 + rho * p.batch.fact2_k / p.batch.mean_k) / (1 - rho)
    return c0, c1


def conditional_wait_unreduced(p, x, k):
    """Sum of the four waiting-time contributions before cancellation.

    travel over x, the residual service (with prob. rho), the k-1 batch
    mates uniform on [0, x], and everyone already waiting within x, whose
    density is integrated numerically.
    """
    rho = p.rho()
    eb, m2 = p.service.mean_b, p.service.m2_b
    c0, c1 = density_coeffs_literal(p)
    travel = p.alpha / rho * math.expm1(rho * x)
    # rho * E[R] * e^{rho x} with E[R] = E[B^2] / (2 E[B])
    residual = rho * (m2 / (2 * eb)) * math.exp(rho * x)
    mates = (k - 1) * eb * math.expm1(rho * x) / (rho * x) if x > 0 else (k - 1) * eb
    present = quad(lambda y: eb * math.exp(rho * (x - y)) * (c0 + c1 * (1 - y)), 0, x)
    return travel + residual + mates + present


def sojourn_by_conditioning(p, cond):
    """E[B] + integral over x of sum_k p_k k x^(k-1) cond(p, x, k)."""
    pmf = p.batch.pmf
    ks = np.arange(1, len(pmf) + 1)
    live = pmf > 0

    def integrand(x):
        w = pmf[live] * ks[live] * x ** (ks[live] - 1)
        return float(sum(wi * cond(p, x, int(k)) for wi, k in zip(w, ks[live])))

    return p.service.mean_b + quad(integrand, 0, 1)


# ---------------------------------------------------------------------------
# random parameter sets


def random_batch(rng):
    kind = rng.integers(6)
    if kind == 0:
        return make_batch_dist({"kind": "deterministic", "k": int(rng.integers(1, 7))})
    if kind == 1:
        return make_batch_dist({"kind": "geometric", "p": float(rng.uniform(0.15, 1.0))})
    if kind == 2:
        return make_batch_dist({"kind": "poisson_zt", "mu": float(rng.uniform(0.3, 6.0))})
    if kind == 3:
        return make_batch_dist({"kind": "negbinom_zt", "r": int(rng.integers(1, 7)), "p": float(rng.uniform(0.3, 0.9))})
    if kind == 4:
        return make_batch_dist({"kind": "binomial_zt", "n": int(rng.integers(1, 16)), "p": float(rng.uniform(0.1, 0.9))})
    probs = rng.dirichlet(np.ones(4))
    keys = rng.choice(np.arange(1, 9), size=4, replace=False)
    return make_batch_dist({"kind": "custom", "pmf": {int(k): float(q) for k, q in zip(keys, probs)}})


def random_service(rng, mean):
    kind = rng.integers(4)
    if kind == 0:
        return make_service_dist({"kind": "deterministic", "b": mean})
    if kind == 1:
        return make_service_dist({"kind": "exponential", "mean": mean})
    if kind == 2:
        return make_service_dist({"kind": "erlang", "k": int(rng.integers(1, 5)), "mean": mean})
    scv = float(rng.uniform(0.2, 4.0))
    return make_service_dist({"kind": "custom", "mean": mean, "m2": mean * mean * (1 + scv)})


def random_params(rng, rho_lo=0.01, rho_hi=0.97) -> SystemParams:
    batch = random_batch(rng)
    rho = float(rng.uniform(rho_lo, rho_hi))
    lam = float(rng.uniform(0.1, 3.0))
    service = random_service(rng, rho / (lam * batch.mean_k))
    return SystemParams(lam, float(rng.uniform(0.1, 5.0)), batch, service)
