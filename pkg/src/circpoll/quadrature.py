"""Adaptive quadrature with a hard failure mode.

Thin wrapper over QUADPACK's adaptive Gauss-Kronrod (``scipy.integrate.quad``)
that raises instead of warning when the tolerance is not met.
"""
from __future__ import annotations

import warnings
from typing import Callable

from scipy import integrate

from .errors import QuadratureFailure

ABS_TOL = 1e-10
# relative floor so large integrands do not chase an absolute target below double precision
REL_TOL = 1e-12
MAX_SUBDIVISIONS = 10_000


def integrate_adaptive(
    f: Callable[[float], float],
    a: float,
    b: float,
    abs_tol: float = ABS_TOL,
    limit: int = MAX_SUBDIVISIONS,
    rel_tol: float = REL_TOL,
) -> float:
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=limit, full_output=1)
    value, err, info = out[0], out[1], out[2]
    if len(out) > 3 and err > max(abs_tol, rel_tol * abs(value)):
        raise QuadratureFailure(
            f"quadrature on [{a}, {b}] did not reach tol {abs_tol:g} (abs) / {rel_tol:g} (rel) "
            f"(estimate {err:.3g}, {info.get('last', '?')} subintervals): {out[3]}"
        )
    return value
