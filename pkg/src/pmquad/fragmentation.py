"""Binary fragmentation processes whose particles carry a parameter in [0, 1].

A kernel maps a parent parameter x to a random outcome (s1, x1, s2, x2): the
two children have masses s1 * m, s2 * m and parameters x1, x2. The engine
lets each particle of mass m split at rate m**rate_index.

Two kernels are built in:

* ``QUAD`` -- the slice of a quadtree above a vertical line. A split point
  (u, v) lands in the parent; the column of the parent containing x is cut in
  two by the horizontal line at v, both halves keeping the position of x.
* ``CHORD`` -- a fragment of the random-chords construction, seen after
  contraction as a circle of unit length with marked points at 0 and x. A
  uniform chord either separates the marked points (two children) or cuts off
  an arc not containing them (one child; the arc leaves the lineage).

``hypothesis_residual`` measures how far a pair (b, h_c) with
h_c(x) = (x (1 - x))**c is from making sum s_i**b h_c(x_i) a martingale.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, RootError
from .mathcore import adaptive_simpson, powm, profile_h
from .streams import open_uniform

CULL_MASS = 1e-15
MC_BLOCK = 1 << 17


@dataclass(frozen=True, slots=True)
class Particle:
    mass: float
    param: float


@dataclass(frozen=True)
class DislocationOutcome:
    """Relative masses and parameters of the two pieces, s1 >= s2.

    ``lost`` names the slot (1 or 2) of a piece that leaves the process
    without becoming a particle; 0 when both pieces are children.
    """

    s1: float
    x1: float
    s2: float
    x2: float
    lost: int = 0

    @property
    def separating(self) -> bool:
        return self.lost == 0

    def children(self) -> list[tuple[float, float]]:
        out = []
        if self.lost != 1:
            out.append((self.s1, self.x1))
        if self.lost != 2:
            out.append((self.s2, self.x2))
        return out

    def lost_mass(self) -> float:
        return {0: 0.0, 1: self.s1, 2: self.s2}[self.lost]


def _ordered(a: float, xa: float, b: float, xb: float, lost_b: bool = False) -> DislocationOutcome:
    if a >= b:
        return DislocationOutcome(a, xa, b, xb, 2 if lost_b else 0)
    return DislocationOutcome(b, xb, a, xa, 1 if lost_b else 0)


def quad_split(x: float, u: float, v: float) -> DislocationOutcome:
    if x <= u:
        p = x / u if u > 0 else 0.0
        return _ordered(u * v, p, u * (1 - v), p)
    p = (x - u) / (1 - u)
    return _ordered((1 - u) * v, p, (1 - u) * (1 - v), p)


def quad_kernel_sample(x: float, rng: np.random.Generator) -> DislocationOutcome:
    if not 0.0 <= x <= 1.0:
        raise DomainError("x must lie in [0, 1]")
    u, v = open_uniform(rng), open_uniform(rng)
    return quad_split(x, u, v)


def chord_split(u: float, a: float, b: float) -> DislocationOutcome:
    """Outcome of the chord (a, b) on a unit circle marked at 0 and u."""
    in_a = 0.0 < a < u
    in_b = 0.0 < b < u
    if in_a != in_b:
        lo, hi = (a, b) if in_a else (b, a)
        if hi < lo:  # the outside endpoint sits at 0
            hi += 1.0
        left = hi - lo
        return _ordered(left, (u - lo) / left, 1.0 - left, (1.0 - hi) / (1.0 - left))
    c = abs(b - a)
    rest = 1.0 - c
    p = (u - c) / rest if in_a else u / rest
    return _ordered(rest, p, c, 0.0, lost_b=True)


def chord_kernel_sample(u: float, rng: np.random.Generator) -> DislocationOutcome:
    if not 0.0 < u < 1.0:
        raise DomainError("u must lie in (0, 1)")
    return chord_split(u, rng.random(), rng.random())


# Vectorised samplers return arrays (s1, x1, s2, x2, keep2) where keep2 is
# False when the second piece does not survive; s1, x1 always survive. This
# differs from the mass ordering of DislocationOutcome but not in law of the
# surviving family.


def quad_batch(x: float, size: int, rng: np.random.Generator):
    u = rng.random(size)
    v = rng.random(size)
    left = x <= u
    width = np.where(left, u, 1.0 - u)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(left, x / u, (x - u) / (1.0 - u))
    p = np.nan_to_num(p, nan=0.0)
    return width * v, p, width * (1.0 - v), p, np.ones(size, dtype=bool)


def chord_batch(u: float, size: int, rng: np.random.Generator):
    ab = rng.random((size, 2))
    a, b = ab[:, 0], ab[:, 1]
    in_a = (a > 0) & (a < u)
    in_b = (b > 0) & (b < u)
    sep = in_a != in_b
    lo = np.where(in_a, a, b)
    hi = np.where(in_a, b, a)
    hi = np.where(sep & (hi < lo), hi + 1.0, hi)
    c = np.abs(b - a)
    with np.errstate(divide="ignore", invalid="ignore"):
        left = hi - lo
        s1 = np.where(sep, left, 1.0 - c)
        x1 = np.where(sep, (u - lo) / left, np.where(in_a, (u - c) / (1.0 - c), u / (1.0 - c)))
        s2 = np.where(sep, 1.0 - left, c)
        x2 = np.where(sep, (1.0 - hi) / (1.0 - left), 0.0)
    return s1, x1, s2, x2, sep


def _quad_expectation(b: float, c: float, x: float, tol: float) -> float:
    """E[s1**b h_c(x1) + s2**b h_c(x2)] under the quadtree kernel.

    The v-integral is 2 / (b + 1). The remaining u-integrals are written as
    x^c u^(b-2c) (u-x)^c on [x, 1] and (1-x)^c (1-u)^(b-2c) (x-u)^c on [0, x],
    then mapped by |u - x| = L s^p with p = 3 / (1 + c), which turns the
    endpoint singularity into a smooth s**2 factor.
    """
    if x <= 0.0 or x >= 1.0:
        return 0.0 if c > 0 else 2.0 / (b + 1.0)
    p = 3.0 / (1.0 + c)
    e = b - 2.0 * c
    y = 1.0 - x

    def right(s):
        return powm(x + y * s**p, e) * s * s

    def left(s):
        return powm(y + x * s**p, e) * s * s

    i1 = p * powm(x, c) * powm(y, 1.0 + c) * adaptive_simpson(right, 0.0, 1.0, tol / 4)
    i2 = p * powm(y, c) * powm(x, 1.0 + c) * adaptive_simpson(left, 0.0, 1.0, tol / 4)
    return 2.0 / (b + 1.0) * (i1 + i2)


@dataclass(frozen=True)
class Kernel:
    name: str
    sample: Callable[[float, np.random.Generator], DislocationOutcome]
    sample_batch: Callable | None = None
    expectation: Callable[[float, float, float, float], float] | None = None


QUAD = Kernel("quad", quad_kernel_sample, quad_batch, _quad_expectation)
CHORD = Kernel("chord", chord_kernel_sample, chord_batch, None)
KERNELS = {"quad": QUAD, "chord": CHORD}


def deterministic_kernel(s1: float, s2: float) -> Kernel:
    """Unparametrised kernel: always (s1, s2), parameters passed through."""
    if not (s1 >= s2 >= 0 and s1 + s2 <= 1):
        raise DomainError("need s1 >= s2 >= 0 and s1 + s2 <= 1")

    def sample(x, rng):
        return DislocationOutcome(s1, x, s2, x)

    def batch(x, size, rng):
        full = np.full(size, 1.0)
        return s1 * full, x * full, s2 * full, x * full, np.ones(size, dtype=bool)

    def expectation(b, c, x, tol):
        return (powm(s1, b) + powm(s2, b)) * profile_h(x, c)

    return Kernel(f"fixed({s1:g},{s2:g})", sample, batch, expectation)


def _h_array(x: np.ndarray, c: float) -> np.ndarray:
    if c == 0.0:
        return np.ones_like(x)
    w = x * (1.0 - x)
    out = np.zeros_like(w)
    pos = w > 0
    out[pos] = np.exp(c * np.log(w[pos]))
    return out


def _pow_array(s: np.ndarray, b: float) -> np.ndarray:
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(b * np.log(s[pos]))
    return out


def _mc_terms(batch, b: float, c: float) -> np.ndarray:
    s1, x1, s2, x2, keep2 = batch
    second = np.where(keep2, _pow_array(s2, b) * _h_array(x2, c), 0.0)
    return _pow_array(s1, b) * _h_array(x1, c) + second


def _mc_draw(k: Kernel, x: float, samples: int, rng: np.random.Generator) -> list:
    if k.sample_batch is None:
        raise ValueError(f"kernel {k.name} has no batch sampler")
    blocks = []
    left = samples
    while left > 0:
        size = min(MC_BLOCK, left)
        blocks.append(k.sample_batch(x, size, rng))
        left -= size
    return blocks


def _mc_mean(blocks, b: float, c: float) -> tuple[float, float]:
    total, total_sq, n = [], [], 0
    for blk in blocks:
        terms = _mc_terms(blk, b, c)
        total.append(math.fsum(terms))
        total_sq.append(math.fsum(terms * terms))
        n += terms.size
    mean = math.fsum(total) / n
    var = max(math.fsum(total_sq) / n - mean * mean, 0.0) * n / (n - 1)
    return mean, math.sqrt(var / n)


def hypothesis_residual(
    k: Kernel,
    b: float,
    c: float,
    x: float,
    method: str = "quadrature",
    tol: float = 1e-10,
    samples: int = 10**6,
    rng: np.random.Generator | None = None,
):
    """E_x[s1**b h_c(x1) + s2**b h_c(x2)] - h_c(x).

    ``method="quadrature"`` returns a float; ``method="mc"`` returns
    (estimate, standard error) from ``samples`` draws.
    """
    if not 0.0 < x < 1.0:
        raise DomainError("x must lie in (0, 1)")
    if not b > 0:
        raise DomainError("b must be > 0")
    if method == "quadrature":
        if k.expectation is None:
            raise ValueError(f"kernel {k.name} has no quadrature route; use method='mc'")
        return k.expectation(b, c, x, tol) - profile_h(x, c)
    if method == "mc":
        if rng is None:
            raise ValueError("mc method needs an rng")
        mean, se = _mc_mean(_mc_draw(k, x, samples, rng), b, c)
        return mean - profile_h(x, c), se
    raise ValueError(f"unknown method {method!r}")


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise RootError(f"no sign change on [{lo}, {hi}]: f = {flo:g}, {fhi:g}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_malthus(
    k: Kernel,
    c_of_b: Callable[[float], float],
    x_probe: float = 0.5,
    bracket: tuple[float, float] = (0.1, 1.0),
    tol: float = 1e-8,
    method: str = "quadrature",
    samples: int = 200_000,
    rng: np.random.Generator | None = None,
) -> float:
    """Root in b of the residual at x_probe, with profile exponent c_of_b(b).

    The mc route draws one sample and reuses it for every b, so the residual
    is a smooth function of b and bisection is well posed.
    """
    if method == "quadrature":
        def f(b):
            return hypothesis_residual(k, b, c_of_b(b), x_probe, "quadrature", tol=1e-13)
    elif method == "mc":
        if rng is None:
            raise ValueError("mc method needs an rng")
        blocks = _mc_draw(k, x_probe, samples, rng)

        def f(b):
            c = c_of_b(b)
            return _mc_mean(blocks, b, c)[0] - profile_h(x_probe, c)
    else:
        raise ValueError(f"unknown method {method!r}")
    return bisect(f, bracket[0], bracket[1], tol)


@dataclass
class FragState:
    """Particles alive at ``time``.

    Particles lighter than CULL_MASS get no clock: they stay in the
    population but never split again; their total is ``frozen_mass``.
    """

    alive: dict[int, Particle]
    time: float
    rate_index: float = 1.0
    lost_mass: float = 0.0
    frozen_mass: float = 0.0
    splits: int = 0
    _queue: list = field(default_factory=list, repr=False)
    _next_id: int = 0

    @property
    def particles(self) -> list[Particle]:
        return list(self.alive.values())

    def total_mass(self) -> float:
        return math.fsum(p.mass for p in self.alive.values())

    def _add(self, p: Particle, now: float, rng: np.random.Generator) -> None:
        pid = self._next_id
        self._next_id += 1
        self.alive[pid] = p
        if p.mass < CULL_MASS:
            self.frozen_mass += p.mass
            return
        rate = p.mass if self.rate_index == 1.0 else powm(p.mass, self.rate_index)
        heapq.heappush(self._queue, (now + rng.standard_exponential() / rate, pid))


def start_state(init: Particle, rate_index: float, rng: np.random.Generator) -> FragState:
    state = FragState({}, 0.0, rate_index)
    state._add(init, 0.0, rng)
    return state


def advance(state: FragState, k: Kernel, t_end: float, rng: np.random.Generator) -> FragState:
    """Run the event loop until t_end (in place)."""
    q = state._queue
    while q and q[0][0] <= t_end:
        t, pid = heapq.heappop(q)
        parent = state.alive.pop(pid)
        out = k.sample(parent.param, rng)
        state.lost_mass += parent.mass * out.lost_mass()
        for s, x in out.children():
            m = parent.mass * s
            if m > 0.0:
                state._add(Particle(m, x), t, rng)
        state.splits += 1
    state.time = max(state.time, t_end)
    return state


def run_fragmentation(
    init: Particle,
    k: Kernel,
    rate_index: float,
    t_end: float,
    rng: np.random.Generator,
) -> FragState:
    if t_end < 0:
        raise DomainError("t_end must be >= 0")
    return advance(start_state(init, rate_index, rng), k, t_end, rng)


def malthusian_sum(state: FragState, b: float, c: float) -> float:
    return math.fsum(powm(p.mass, b) * profile_h(p.param, c) for p in state.alive.values())


RESIDUAL_CSV_COLUMNS = ("kernel", "b", "c", "x", "method", "residual", "stderr")
