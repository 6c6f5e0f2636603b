"""Replication confidence intervals and time averages."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _st

from .errors import TooFewReplications, ZeroElapsed


@dataclass(frozen=True)
class Estimate:
    mean: float
    halfwidth_95: float
    n: int

    def covers(self, value: float, widen: float = 1.0) -> bool:
        return abs(self.mean - value) <= widen * self.halfwidth_95

    def to_dict(self) -> dict:
        return {"mean": self.mean, "halfwidth": self.halfwidth_95, "n": self.n}


def t_quantile(level: float, df: int) -> float:
    """Two-sided Student-t quantile, e.g. level=0.95 gives t_{0.975, df}."""
    return float(_st.t.ppf(0.5 + level / 2.0, df))


def replication_ci(values: Sequence[float], level: float = 0.95) -> Estimate:
    """Sample mean with a Student-t half-width across independent replications."""
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 2:
        raise TooFewReplications(f"need at least 2 replications, got {n}")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    return Estimate(mean, t_quantile(level, n - 1) * sd / math.sqrt(n), n)


def time_average(accumulated: float, elapsed: float) -> float:
    """Average of a piecewise-constant path given its integral over ``elapsed``."""
    if not elapsed > 0:
        raise ZeroElapsed(f"elapsed time must be positive, got {elapsed}")
    return accumulated / elapsed
