"""Batch-size and service-time distributions.

Batch sizes live on {1, 2, ...}. Named families whose textbook form puts
mass at zero (Poisson, binomial, negative binomial) are conditioned on
K >= 1; when a target mean is given instead of the raw parameter, the raw
parameter is re-solved so that the *truncated* mean hits the target.

Every sampler here consumes plain U[0, 1) draws (``Generator.random``) in a
fixed order. The compiled kernels consume the same bit stream in the same
order, which is what makes the two simulator backends bit-identical.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np
from scipy import optimize, stats

from .errors import DegenerateDistribution, DomainError, InvalidParameter

# Tail mass left out when materialising an infinite-support pmf. Chosen well
# below 1e-12 so the truncated pmf reproduces E[K] and E[K(K-1)] to ~1e-12.
TAIL_MASS = 1e-16

_ALIASES = {
    "det": "deterministic",
    "deterministic": "deterministic",
    "geometric": "geometric",
    "geom": "geometric",
    "poisson": "poisson_zt",
    "poisson_zt": "poisson_zt",
    "negbinom": "negbinom_zt",
    "negbinom_zt": "negbinom_zt",
    "negative_binomial": "negbinom_zt",
    "binomial": "binomial_zt",
    "binomial_zt": "binomial_zt",
    "custom": "custom",
}


@dataclass(frozen=True, eq=False)
class BatchDist:
    """Distribution of the number of customers in an arriving batch.

    ``pmf[i]`` is P(K = i + 1); the array is normalised and p_0 = 0.
    """

    kind: str
    params: Mapping[str, float]
    pmf: np.ndarray = field(repr=False)
    mean_k: float
    fact2_k: float
    mean_k_over_k1: float
    descriptor: Mapping[str, Any] = field(repr=False, default_factory=dict)

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, len(self.pmf) + 1)

    @property
    def pmf_map(self) -> dict[int, float]:
        return {k: float(p) for k, p in zip(self.support, self.pmf) if p > 0}

    @property
    def var_k(self) -> float:
        return self.fact2_k + self.mean_k - self.mean_k**2

    @property
    def is_unit(self) -> bool:
        return len(self.pmf) == 1

    @property
    def cdf(self) -> np.ndarray:
        """Cumulative table used for inverse-transform sampling (last entry 1)."""
        c = np.cumsum(self.pmf)
        c[-1] = 1.0
        return c

    @property
    def label(self) -> str:
        if self.kind == "custom":
            inner = ";".join(f"{k}:{_fmt(v)}" for k, v in self.pmf_map.items())
        else:
            inner = ",".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        return f"{self.kind}({inner})"

    def pgf(self, x):
        return pgf_eval(self, x)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


# ---------------------------------------------------------------------------
# construction


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidParameter(msg)


def _num(spec: Mapping[str, Any], key: str) -> float:
    if key not in spec:
        raise InvalidParameter(f"missing parameter {key!r}")
    try:
        v = float(spec[key])
    except (TypeError, ValueError) as exc:
        raise InvalidParameter(f"parameter {key!r} must be numeric") from exc
    _require(math.isfinite(v), f"parameter {key!r} must be finite")
    return v


def _zt_mean(kind: str, params: Mapping[str, float]) -> float:
    if kind == "poisson_zt":
        mu = params["mu"]
        return mu / -math.expm1(-mu)
    if kind == "binomial_zt":
        n, p = params["n"], params["p"]
        return n * p / (1.0 - (1.0 - p) ** n)
    if kind == "negbinom_zt":
        r, p = params["r"], params["p"]
        return r * (1.0 - p) / p / (1.0 - p**r)
    raise AssertionError(kind)


def _solve_for_mean(kind: str, target: float, fixed: dict[str, float]) -> dict[str, float]:
    """Re-tune the free parameter so the zero-truncated mean equals ``target``."""
    _require(target > 1.0, f"{kind}: target mean must exceed 1, got {target}")
    if kind == "poisson_zt":
        name, lo, hi = "mu", 1e-12, target
    elif kind == "binomial_zt":
        _require(target < fixed["n"] or math.isclose(target, fixed["n"]),
                 f"binomial_zt: target mean {target} exceeds n={fixed['n']:g}")
        if math.isclose(target, fixed["n"]):
            return {**fixed, "p": 1.0}
        name, lo, hi = "p", 1e-12, 1.0
    elif kind == "negbinom_zt":
        name, lo, hi = "p", 1e-12, 1.0 - 1e-12
    else:
        raise AssertionError(kind)

    def gap(v: float) -> float:
        return _zt_mean(kind, {**fixed, name: v}) - target

    root = optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return {**fixed, name: float(root)}


def _truncation_point(frozen, p0: float) -> int:
    """Smallest m with P(K > m | K >= 1) <= TAIL_MASS."""
    thr = TAIL_MASS * (1.0 - p0)
    guess = frozen.isf(thr)  # may be nan for very small thresholds
    m = int(guess) + 1 if math.isfinite(guess) else max(1, int(frozen.mean()) + 1)
    while frozen.sf(m) > thr:
        m = m + 1 if math.isfinite(guess) else 2 * m
    return max(m, 1)


def _materialise(kind: str, params: Mapping[str, float]) -> np.ndarray:
    if kind == "deterministic":
        k = int(params["k"])
        pmf = np.zeros(k)
        pmf[-1] = 1.0
        return pmf
    if kind == "geometric":
        p = params["p"]
        if p == 1.0:
            return np.array([1.0])
        m = max(1, math.ceil(math.log(TAIL_MASS) / math.log1p(-p)))
        ks = np.arange(1, m + 1)
        return stats.geom.pmf(ks, p)
    if kind == "poisson_zt":
        frozen = stats.poisson(params["mu"])
    elif kind == "binomial_zt":
        frozen = stats.binom(int(params["n"]), params["p"])
    elif kind == "negbinom_zt":
        frozen = stats.nbinom(params["r"], params["p"])
    else:
        raise AssertionError(kind)
    p0 = float(frozen.pmf(0))
    if not p0 < 1.0:
        raise DegenerateDistribution(f"{kind}{dict(params)} has all mass at 0")
    if kind == "binomial_zt":
        m = int(params["n"])
    else:
        m = _truncation_point(frozen, p0)
    ks = np.arange(1, m + 1)
    return frozen.pmf(ks)


def _closed_form_moments(kind: str, params: Mapping[str, float]) -> tuple[float, float, float | None]:
    """(E[K], E[K(K-1)], E[K/(K+1)] or None) in closed form."""
    if kind == "deterministic":
        k = params["k"]
        return k, k * (k - 1.0), k / (k + 1.0)
    if kind == "geometric":
        p = params["p"]
        if p == 1.0:
            return 1.0, 0.0, 0.5
        q = 1.0 - p
        if q < 1e-3:  # the closed form below cancels; the pmf sum is exact here
            return 1.0 / p, 2.0 * q / p**2, None
        # E[1/(K+1)] = (p / q^2) * (-log(1 - q) - q)
        inv = p / q**2 * (-math.log(p) - q)
        return 1.0 / p, 2.0 * q / p**2, 1.0 - inv
    if kind == "poisson_zt":
        mu = params["mu"]
        norm = -math.expm1(-mu)
        inv_full = norm / mu
        if mu < 0.05:
            return mu / norm, mu * mu / norm, None
        inv = (inv_full - math.exp(-mu)) / norm
        return mu / norm, mu * mu / norm, 1.0 - inv
    if kind == "binomial_zt":
        n, p = params["n"], params["p"]
        q = 1.0 - p
        norm = -math.expm1(n * math.log1p(-p)) if p < 1.0 else 1.0
        if n * p < 0.05:
            return n * p / norm, n * (n - 1) * p * p / norm, None
        inv_full = (1.0 - q ** (n + 1)) / ((n + 1) * p)
        inv = (inv_full - q**n) / norm
        return n * p / norm, n * (n - 1) * p * p / norm, 1.0 - inv
    if kind == "negbinom_zt":
        r, p = params["r"], params["p"]
        q = 1.0 - p
        norm = 1.0 - p**r
        return r * q / p / norm, r * (r + 1) * q * q / (p * p) / norm, None
    raise AssertionError(kind)


def make_batch_dist(spec: Mapping[str, Any]) -> BatchDist:
    """Build a :class:`BatchDist` from a descriptor such as ``{"kind": "geometric", "p": 0.2}``.

    Named kinds accept either their raw parameter or ``mean`` (re-tuned after
    zero-truncation). ``custom`` takes ``pmf``: a ``{k: probability}`` map.
    """
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise InvalidParameter("batch descriptor must be a mapping with a 'kind' key")
    raw_kind = str(spec["kind"]).lower()
    if raw_kind not in _ALIASES:
        raise InvalidParameter(f"unknown batch kind {spec['kind']!r}")
    kind = _ALIASES[raw_kind]
    allowed = {
        "deterministic": {"k"},
        "geometric": {"p", "mean"},
        "poisson_zt": {"mu", "mean"},
        "binomial_zt": {"n", "p", "mean"},
        "negbinom_zt": {"r", "p", "mean"},
        "custom": {"pmf"},
    }[kind]
    extra = set(spec) - allowed - {"kind"}
    _require(not extra, f"{kind}: unexpected keys {sorted(extra)}")

    if kind == "custom":
        return _make_custom(spec)

    params: dict[str, float]
    if kind == "deterministic":
        k = _num(spec, "k")
        _require(k >= 1 and float(k).is_integer(), f"deterministic: k must be a positive integer, got {k}")
        params = {"k": k}
    elif kind == "geometric":
        if "mean" in spec:
            m = _num(spec, "mean")
            _require(m >= 1.0, f"geometric: mean must be >= 1, got {m}")
            params = {"p": 1.0 / m}
        else:
            p = _num(spec, "p")
            _require(0.0 < p <= 1.0, f"geometric: p must lie in (0, 1], got {p}")
            params = {"p": p}
    elif kind == "poisson_zt":
        if "mean" in spec:
            params = _solve_for_mean(kind, _num(spec, "mean"), {})
        else:
            mu = _num(spec, "mu")
            _require(mu > 0.0, f"poisson_zt: mu must be positive, got {mu}")
            params = {"mu": mu}
    elif kind == "binomial_zt":
        n = _num(spec, "n")
        _require(n >= 1 and float(n).is_integer(), f"binomial_zt: n must be a positive integer, got {n}")
        if "mean" in spec:
            params = _solve_for_mean(kind, _num(spec, "mean"), {"n": n})
        else:
            p = _num(spec, "p")
            _require(0.0 < p <= 1.0, f"binomial_zt: p must lie in (0, 1], got {p}")
            params = {"n": n, "p": p}
    else:  # negbinom_zt
        r = _num(spec, "r")
        _require(r >= 1.0, f"negbinom_zt: r must be >= 1, got {r}")
        if "mean" in spec:
            params = _solve_for_mean(kind, _num(spec, "mean"), {"r": r})
        else:
            p = _num(spec, "p")
            _require(0.0 < p <= 1.0, f"negbinom_zt: p must lie in (0, 1], got {p}")
            params = {"r": r, "p": p}

    if kind == "negbinom_zt" and params["p"] == 1.0:
        raise DegenerateDistribution("negbinom_zt with p = 1 has all mass at 0")
    if kind == "poisson_zt" and -math.expm1(-params["mu"]) == 0.0:
        raise DegenerateDistribution("poisson_zt: mu too small, no mass left after truncation")

    pmf = _materialise(kind, params)
    pmf = pmf / pmf.sum()
    mean_k, fact2_k, kk1 = _closed_form_moments(kind, params)
    if kk1 is None:
        ks = np.arange(1, len(pmf) + 1)
        kk1 = float(np.dot(pmf, ks / (ks + 1.0)))
    return BatchDist(
        kind=kind,
        params=params,
        pmf=pmf,
        mean_k=float(mean_k),
        fact2_k=float(fact2_k),
        mean_k_over_k1=float(kk1),
        descriptor=dict(spec),
    )


def _make_custom(spec: Mapping[str, Any]) -> BatchDist:
    table = spec.get("pmf")
    _require(isinstance(table, Mapping) and table, "custom: 'pmf' must be a non-empty {k: p} map")
    probs: dict[int, float] = {}
    for key, val in table.items():
        try:
            k = int(key.strip()) if isinstance(key, str) else int(key)
            p = float(val)
        except (TypeError, ValueError) as exc:
            raise InvalidParameter(f"custom: bad pmf entry {key!r}: {val!r}") from exc
        _require(k >= 0 and (isinstance(key, str) or k == key),
                 f"custom: batch sizes must be non-negative integers, got {key!r}")
        _require(p >= 0.0 and math.isfinite(p), f"custom: probabilities must be >= 0, got {val!r}")
        probs[k] = probs.get(k, 0.0) + p
    total = sum(probs.values())
    _require(abs(total - 1.0) <= 1e-9, f"custom: probabilities sum to {total!r}, not 1")
    probs.pop(0, None)
    kept = sum(probs.values())
    if kept <= 0.0:
        raise DegenerateDistribution("custom pmf has all mass at 0")
    m = max(probs)
    pmf = np.zeros(m)
    for k, p in probs.items():
        pmf[k - 1] = p
    pmf /= pmf.sum()
    ks = np.arange(1, m + 1, dtype=float)
    return BatchDist(
        kind="custom",
        params={},
        pmf=pmf,
        mean_k=float(np.dot(pmf, ks)),
        fact2_k=float(np.dot(pmf, ks * (ks - 1.0))),
        mean_k_over_k1=float(np.dot(pmf, ks / (ks + 1.0))),
        descriptor={"kind": "custom", "pmf": {str(k): float(p) for k, p in sorted(probs.items())}},
    )


# ---------------------------------------------------------------------------
# PGF and sampling


def pgf_eval(d: BatchDist, x):
    """Evaluate the probability generating function E[x^K] for x in [0, 1].

    Accepts scalars or arrays; closed forms are used for the named kinds.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0) or np.any(xa > 1.0) or np.any(np.isnan(xa)):
        raise DomainError(f"PGF argument must lie in [0, 1], got {x!r}")
    P = d.params
    if d.kind == "deterministic":
        out = xa ** int(P["k"])
    elif d.kind == "geometric":
        p = P["p"]
        out = p * xa / (1.0 - (1.0 - p) * xa)
    elif d.kind == "poisson_zt":
        mu = P["mu"]
        out = np.expm1(mu * xa) / math.expm1(mu)
    elif d.kind == "binomial_zt":
        n, p = int(P["n"]), P["p"]
        q0 = (1.0 - p) ** n
        out = ((1.0 - p + p * xa) ** n - q0) / (1.0 - q0)
    elif d.kind == "negbinom_zt":
        r, p = P["r"], P["p"]
        pr = p**r
        out = ((p / (1.0 - (1.0 - p) * xa)) ** r - pr) / (1.0 - pr)
    else:
        # Horner on the materialised pmf (coefficients of x^1..x^m)
        out = np.zeros_like(xa)
        for c in d.pmf[::-1]:
            out = (out + c) * xa
    return float(out) if np.ndim(out) == 0 else out


def sample_batch(d: BatchDist, rng: np.random.Generator, size: int | None = None):
    """Draw batch sizes by inverse transform on one uniform per draw."""
    cdf = d.cdf
    if size is None:
        return bisect_right(cdf.tolist(), rng.random()) + 1
    u = rng.random(size)
    return np.searchsorted(cdf, u, side="right") + 1


# ---------------------------------------------------------------------------
# service times

SVC_DETERMINISTIC = 0
SVC_EXPONENTIAL = 1
SVC_UNIFORM = 2
SVC_ERLANG_MIX = 3
SVC_HYPEREXP2 = 4


@dataclass(frozen=True, eq=False)
class ServiceDist:
    """Service-time distribution with its first two moments.

    ``code``/``sampler_params`` describe how draws are generated; they are
    passed verbatim to the simulation kernels.
    """

    kind: str
    mean_b: float
    m2_b: float
    code: int
    sampler_params: tuple[float, ...]
    descriptor: Mapping[str, Any] = field(repr=False, default_factory=dict)

    @property
    def residual_mean(self) -> float:
        """Mean residual service time E[B^2] / (2 E[B])."""
        if self.mean_b == 0.0:
            return 0.0
        return self.m2_b / (2.0 * self.mean_b)

    @property
    def scv(self) -> float:
        return self.m2_b / self.mean_b**2 - 1.0 if self.mean_b > 0 else 0.0

    @property
    def label(self) -> str:
        return f"{self.kind}(mean={_fmt(self.mean_b)},m2={_fmt(self.m2_b)})"


def _two_moment_fit(mean: float, m2: float) -> tuple[int, tuple[float, ...]]:
    scv = m2 / mean**2 - 1.0
    if scv <= 1e-14:
        return SVC_DETERMINISTIC, (mean,)
    if scv < 1.0:
        # mixture of Erlang(k-1) and Erlang(k) with a common rate
        k = max(2, math.ceil(1.0 / scv - 1e-12))
        p = (k * scv - math.sqrt(k * (1.0 + scv) - k * k * scv)) / (1.0 + scv)
        p = min(max(p, 0.0), 1.0)
        return SVC_ERLANG_MIX, (float(k), p, (k - p) / mean)
    # balanced-means two-phase hyperexponential
    p1 = 0.5 * (1.0 + math.sqrt((scv - 1.0) / (scv + 1.0)))
    return SVC_HYPEREXP2, (p1, 2.0 * p1 / mean, 2.0 * (1.0 - p1) / mean)


def make_service_dist(spec: Mapping[str, Any]) -> ServiceDist:
    """Build a :class:`ServiceDist` from a descriptor.

    Kinds: ``deterministic`` (``b`` or ``mean``), ``exponential`` (``rate`` or
    ``mean``), ``uniform`` (``low``, ``high``), ``erlang`` (``k``, ``mean``) and
    ``custom`` (``mean``, ``m2``; sampled from a two-moment phase-type fit).
    """
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise InvalidParameter("service descriptor must be a mapping with a 'kind' key")
    kind = str(spec["kind"]).lower()
    if kind == "det":
        kind = "deterministic"
    if kind == "exp":
        kind = "exponential"
    allowed = {
        "deterministic": {"b", "mean"},
        "exponential": {"rate", "mean"},
        "uniform": {"low", "high"},
        "erlang": {"k", "mean"},
        "custom": {"mean", "m2"},
    }.get(kind)
    if allowed is None:
        raise InvalidParameter(f"unknown service kind {spec['kind']!r}")
    extra = set(spec) - allowed - {"kind"}
    _require(not extra, f"{kind}: unexpected keys {sorted(extra)}")
    desc = dict(spec)

    if kind == "deterministic":
        b = _num(spec, "b" if "b" in spec else "mean")
        # b = 0 is the zero-service limit: accepted by the analytic layer, refused by simulators
        _require(b >= 0.0, f"deterministic: service time must be >= 0, got {b}")
        return ServiceDist(kind, b, b * b, SVC_DETERMINISTIC, (b,), desc)
    if kind == "exponential":
        if "mean" in spec:
            mean = _num(spec, "mean")
            _require(mean > 0.0, f"exponential: mean must be positive, got {mean}")
            rate = 1.0 / mean
        else:
            rate = _num(spec, "rate")
        _require(rate > 0.0 and math.isfinite(rate), f"exponential: rate must be positive, got {rate}")
        return ServiceDist(kind, 1.0 / rate, 2.0 / rate**2, SVC_EXPONENTIAL, (rate,), desc)
    if kind == "uniform":
        lo, hi = _num(spec, "low"), _num(spec, "high")
        _require(0.0 <= lo <= hi and hi > 0.0, f"uniform: need 0 <= low <= high, high > 0; got {lo}, {hi}")
        return ServiceDist(kind, 0.5 * (lo + hi), (lo * lo + lo * hi + hi * hi) / 3.0, SVC_UNIFORM, (lo, hi), desc)
    if kind == "erlang":
        k = _num(spec, "k")
        mean = _num(spec, "mean")
        _require(k >= 1 and float(k).is_integer(), f"erlang: k must be a positive integer, got {k}")
        _require(mean > 0.0, f"erlang: mean must be positive, got {mean}")
        rate = k / mean
        return ServiceDist(kind, mean, k * (k + 1) / rate**2, SVC_ERLANG_MIX, (k, 0.0, rate), desc)
    mean, m2 = _num(spec, "mean"), _num(spec, "m2")
    _require(mean > 0.0, f"custom: mean must be positive, got {mean}")
    _require(m2 >= mean * mean * (1.0 - 1e-14), f"custom: m2={m2} < mean^2={mean * mean} violates Jensen")
    code, par = _two_moment_fit(mean, m2)
    return ServiceDist(kind, mean, max(m2, mean * mean), code, par, desc)


def draw_service(code: int, par: tuple[float, ...], uniform: Callable[[], float]) -> float:
    """One service draw from the kernel encoding, using ``uniform()`` for randomness."""
    if code == SVC_DETERMINISTIC:
        return par[0]
    if code == SVC_EXPONENTIAL:
        return -math.log1p(-uniform()) / par[0]
    if code == SVC_UNIFORM:
        return par[0] + (par[1] - par[0]) * uniform()
    if code == SVC_ERLANG_MIX:
        k = int(par[0])
        if par[1] > 0.0 and uniform() < par[1]:
            k -= 1
        total = 0.0
        for _ in range(k):
            total += -math.log1p(-uniform())
        return total / par[2]
    if code == SVC_HYPEREXP2:
        rate = par[1] if uniform() < par[0] else par[2]
        return -math.log1p(-uniform()) / rate
    raise ValueError(f"unknown service code {code}")


def sample_service(d: ServiceDist, rng: np.random.Generator) -> float:
    return draw_service(d.code, d.sampler_params, rng.random)


# ---------------------------------------------------------------------------
# system parameters


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Batch arrival rate ``lam``, full-circle travel time ``alpha`` and the two distributions."""

    lam: float
    alpha: float
    batch: BatchDist
    service: ServiceDist

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise InvalidParameter(f"arrival rate must be >= 0, got {self.lam}")
        if not (math.isfinite(self.alpha) and self.alpha > 0.0):
            raise InvalidParameter(f"travel time alpha must be positive, got {self.alpha}")

    def rho(self) -> float:
        return self.lam * self.batch.mean_k * self.service.mean_b

    def with_lambda(self, lam: float) -> "SystemParams":
        return SystemParams(lam, self.alpha, self.batch, self.service)

    @classmethod
    def for_load(cls, rho: float, alpha: float, batch: BatchDist, service: ServiceDist) -> "SystemParams":
        """Parameters whose arrival rate gives utilisation ``rho``."""
        return cls(rho / (batch.mean_k * service.mean_b), alpha, batch, service)
