"""Martingales attached to the slice above a vertical line.

``M_t(x)`` sums mass**beta * h(relative position) over the rectangles of
Quad(t) meeting the line; ``generation_martingale`` does the same over the
2**n rectangles of generation n above x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import CapExceededError, DomainError
from .mathcore import BETA, powm, profile_h
from .quadtree import Quadtree, Rect, Slice, grow_along, meets_line, slice_leaves

TRAJECTORY_CSV_COLUMNS = ("t", "M", "N", "scaledN")


@dataclass(frozen=True)
class MartingaleSample:
    t: float
    value: float
    n: int

    @property
    def scaled_n(self) -> float:
        return self.n * self.t ** -BETA if self.t > 0 else math.nan


@dataclass(frozen=True)
class GenMartingaleSample:
    n: int
    value: float
    fragment_count: int


def _term(r: Rect, x: float, beta: float) -> float:
    rel = (x - r.x0) / (r.x1 - r.x0)
    return powm(r.mass, beta) * profile_h(min(max(rel, 0.0), 1.0), beta / 2)


def leaves_value(leaves: Iterable[Rect], x: float, beta: float = BETA) -> float:
    return math.fsum(_term(r, x, beta) for r in leaves)


def martingale_value(s: Slice, beta: float = BETA) -> float:
    """M_t(x) for a slice.

    When x sits on a split abscissa the closed slice holds both neighbouring
    columns; only the rectangles with x0 <= x < x1 are summed.
    """
    return leaves_value((f.rect for f in s.fragments if meets_line(f.rect, s.x)), s.x, beta)


def martingale_at(q: Quadtree, x: float, beta: float = BETA) -> float:
    return leaves_value(slice_leaves(q, x), x, beta)


def generation_martingale(
    q: Quadtree,
    x: float,
    n: int,
    rng: np.random.Generator,
    time_cap: float | None = None,
    beta: float = BETA,
) -> GenMartingaleSample:
    """Generation-n martingale at x.

    ``q`` is grown in place until no rectangle above x is younger than
    generation n; the sum then runs over the distinct generation-n ancestors.
    The waiting time of a rectangle of area m is Exp(m) and small areas are
    common enough that this time has no finite mean, so no cap is applied
    unless ``time_cap`` is given.
    """
    if n < 0:
        raise DomainError("n must be >= 0")
    cap = math.inf if time_cap is None else time_cap
    line = grow_along(q, x, q.clock + cap, rng, max_gen=n)
    if any(r.gen < n for r in line):
        raise CapExceededError(f"generation {n} not reached above x={x} within time {cap:g}")
    words = sorted({r.word[:n] for r in line})
    ancestors = [q.nodes[w] for w in words]
    return GenMartingaleSample(n, leaves_value(ancestors, x, beta), len(ancestors))


def trajectory(
    q: Quadtree, x: float, t_max: float, rng: np.random.Generator, beta: float = BETA
) -> list[MartingaleSample]:
    """Grow q along x up to t_max, recording M and N at every split above x."""
    series = [MartingaleSample(q.clock, martingale_at(q, x, beta), len(slice_leaves(q, x)))]

    def record(t, line):
        series.append(MartingaleSample(t, leaves_value(line, x, beta), len(line)))

    grow_along(q, x, t_max, rng, on_event=record)
    if series[-1].t < q.clock:
        last = series[-1]
        series.append(MartingaleSample(q.clock, last.value, last.n))
    return series


def limit_estimate(
    x: float, t_max: float, rng: np.random.Generator, beta: float = BETA
) -> tuple[float, list[MartingaleSample]]:
    """M_{t_max}(x) on a fresh trajectory, used as an estimate of the limit.

    Also returns the piecewise-constant trajectory sampled at split events.
    """
    if not t_max > 0:
        raise DomainError("t_max must be > 0")
    series = trajectory(Quadtree(), x, t_max, rng, beta)
    return series[-1].value, series


def values_at(
    x: float, times: Iterable[float], rng: np.random.Generator, beta: float = BETA
) -> list[tuple[float, int]]:
    """(M_t(x), N_t(x)) at increasing times along one fresh trajectory."""
    q = Quadtree()
    out = []
    for t in times:
        line = grow_along(q, x, t, rng)
        out.append((leaves_value(line, x, beta), len(line)))
    return out


def trajectory_rows(series: Iterable[MartingaleSample]) -> list[list[str]]:
    return [
        [format(s.t, ".17g"), format(s.value, ".17g"), str(s.n), format(s.scaled_n, ".17g")]
        for s in series
    ]
