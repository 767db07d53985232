"""Monte Carlo summaries and log-log power fits."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DomainError

Z95 = 1.96


@dataclass(frozen=True)
class Summary:
    experiment: str
    t: float
    x: float | str
    mean: float
    stderr: float
    trials: int

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.mean - Z95 * self.stderr, self.mean + Z95 * self.stderr)


def mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and standard error, with exactly rounded sums.

    ``math.fsum`` is correctly rounded, so the result does not depend on
    the order of ``values``.
    """
    n = len(values)
    if n == 0:
        raise DomainError("no samples")
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def sample_variance(values: Sequence[float]) -> float:
    n = len(values)
    if n < 2:
        raise DomainError("variance needs at least two samples")
    mean = math.fsum(values) / n
    return math.fsum((v - mean) ** 2 for v in values) / (n - 1)


def summarize(experiment: str, t: float, x, values: Sequence[float]) -> Summary:
    mean, se = mean_stderr(values)
    return Summary(experiment, t, x, mean, se, len(values))


@dataclass(frozen=True)
class PowerFit:
    exponent: float
    log_amplitude: float
    r2: float

    @property
    def amplitude(self) -> float:
        return math.exp(self.log_amplitude)


def power_fit(points: Iterable[tuple[float, float]]) -> PowerFit:
    """Least-squares line through (log t, log y): y ~ amplitude * t**exponent."""
    pts = list(points)
    if len(pts) < 3:
        raise DomainError("power_fit needs at least 3 points")
    if any(not (t > 0 and y > 0) for t, y in pts):
        raise DomainError("power_fit needs strictly positive t and y")
    lx = [math.log(t) for t, _ in pts]
    ly = [math.log(y) for _, y in pts]
    n = len(pts)
    mx, my = math.fsum(lx) / n, math.fsum(ly) / n
    sxx = math.fsum((a - mx) ** 2 for a in lx)
    if sxx == 0:
        raise DomainError("power_fit needs at least two distinct t")
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(lx, ly))
    slope = sxy / sxx
    icpt = my - slope * mx
    ss_res = math.fsum((b - icpt - slope * a) ** 2 for a, b in zip(lx, ly))
    ss_tot = math.fsum((b - my) ** 2 for b in ly)
    # a flat series leaves only rounding noise in ss_tot
    flat = ss_tot <= 1e-24 * n * (1.0 + my * my)
    r2 = 1.0 if flat else max(0.0, 1.0 - ss_res / ss_tot)
    return PowerFit(slope, icpt, r2)
