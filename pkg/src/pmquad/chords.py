"""Random non-crossing chords in the unit disk.

Points of the circle are parametrised by arc length in [0, 1). Chords are
proposed with i.i.d. uniform endpoints and kept only when they cross none of
the chords already kept.

``separating_fragments`` computes, by arc arithmetic, the faces of the disk
cut by the chords that meet the straight segment [x, y], together with their
boundary length and the relative position of their two distinguished points.
``signature_oracle`` recomputes the same masses by brute force in the plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CollisionError

FRAGMENT_CSV_COLUMNS = ("component_index", "mass", "param")
CHORD_CSV_COLUMNS = ("a", "b", "attempt_index")


@dataclass(frozen=True)
class Chord:
    a: float
    b: float

    def __post_init__(self):
        if self.a == self.b:
            raise CollisionError("chord endpoints coincide")


@dataclass
class ChordSet:
    chords: list[Chord] = field(default_factory=list)
    attempts: int = 0
    accepted_at: list[int] = field(default_factory=list)


def _in_arc(z: float, a: float, b: float) -> bool:
    """z in the open counterclockwise arc from a to b."""
    if a < b:
        return a < z < b
    return z > a or z < b


def crosses(c1: Chord, c2: Chord) -> bool:
    if len({c1.a, c1.b, c2.a, c2.b}) < 4:
        raise CollisionError("chords share an endpoint")
    return _in_arc(c2.a, c1.a, c1.b) != _in_arc(c2.b, c1.a, c1.b)


def build_chordset(attempts: int, rng: np.random.Generator) -> ChordSet:
    s = ChordSet()
    for i in range(attempts):
        c = Chord(rng.random(), rng.random())
        s.attempts += 1
        if not any(crosses(old, c) for old in s.chords):
            s.chords.append(c)
            s.accepted_at.append(i)
    return s


@dataclass(frozen=True)
class SeparatingFragment:
    mass: float
    param: float


def _maximal_span(intervals: list[tuple[float, float]]) -> float:
    """Total length covered by the maximal intervals of a laminar family."""
    total = []
    reach = -math.inf
    for lo, hi in sorted(intervals, key=lambda iv: (iv[0], -iv[1])):
        if lo > reach:
            total.append(hi - lo)
            reach = hi
    return math.fsum(total)


def _split_chords(s: ChordSet, x: float, y: float):
    """Chords in coordinates relative to x, split into separating / not."""
    d = (y - x) % 1.0
    sep, other = [], []
    for c in s.chords:
        ra, rb = (c.a - x) % 1.0, (c.b - x) % 1.0
        if 0.0 in (ra, rb) or d in (ra, rb):
            raise CollisionError("x or y coincides with a chord endpoint")
        lo, hi = min(ra, rb), max(ra, rb)
        if lo < d < hi:
            sep.append((lo, hi))
        else:
            other.append((lo, hi))
    sep.sort()
    return d, sep, other


def separating_fragments(s: ChordSet, x: float, y: float) -> list[SeparatingFragment]:
    """Faces met by the segment [x, y], ordered from x to y.

    The mass of a face is the length of its boundary arcs minus the arcs cut
    off by the maximal non-separating chords inside them. Its parameter is
    the contracted arc length from one distinguished point to the other
    along the x-to-y side, divided by the mass, folded into [0, 1/2].
    """
    if x == y:
        raise CollisionError("x and y coincide")
    d, sep, other = _split_chords(s, x, y)
    # boundary points on the x->y side (P) and on the y->x side (Q)
    P = [0.0] + [lo for lo, _ in sep] + [d]
    Q = [1.0] + [hi for _, hi in sep] + [d]
    out = []
    for k in range(len(sep) + 1):
        a_lo, a_hi = P[k], P[k + 1]
        b_lo, b_hi = Q[k + 1], Q[k]
        near = _maximal_span([iv for iv in other if a_lo < iv[0] and iv[1] < a_hi])
        far = _maximal_span([iv for iv in other if b_lo < iv[0] and iv[1] < b_hi])
        la = (a_hi - a_lo) - near
        lb = (b_hi - b_lo) - far
        mass = la + lb
        p = la / mass
        out.append(SeparatingFragment(mass, min(p, 1.0 - p)))
    return out


def cut_off_mass(s: ChordSet, x: float, y: float) -> float:
    """Arc length removed by maximal non-separating chords."""
    d, sep, other = _split_chords(s, x, y)
    bounds = sorted({0.0, d, 1.0, *(v for iv in sep for v in iv)})
    total = []
    for lo, hi in zip(bounds, bounds[1:]):
        total.append(_maximal_span([iv for iv in other if lo < iv[0] and iv[1] < hi]))
    return math.fsum(total)


def _xy(theta):
    ang = 2.0 * np.pi * np.asarray(theta)
    return np.cos(ang), np.sin(ang)


def signature_oracle(s: ChordSet, x: float, y: float, grid: int = 100_000) -> list[tuple[float, int]]:
    """Brute-force face masses along [x, y], ordered from x to y.

    Each of ``grid`` evenly spaced circle points is labelled by the side of
    every chord it lies on (sign of a planar cross product). Probe points on
    the segment between consecutive chord crossings give the labels of the
    faces the segment visits. Returns (fraction of circle points, face id).
    """
    if grid < 1000:
        raise ValueError("grid must be >= 1000")
    pts = (np.arange(grid) + 0.5) / grid
    gx, gy = _xy(pts)
    (xx, xy_), (yx, yy) = _xy(x), _xy(y)
    n = len(s.chords)
    if n == 0:
        return [(1.0, 0)]
    ax, ay = _xy([c.a for c in s.chords])
    bx, by = _xy([c.b for c in s.chords])
    ex, ey = bx - ax, by - ay

    def side(px, py):
        return (ex[:, None] * (py[None, :] - ay[:, None]) - ey[:, None] * (px[None, :] - ax[:, None])) > 0

    labels = side(gx, gy)  # n x grid
    packed = np.packbits(labels, axis=0)
    keys = [bytes(col) for col in packed.T]

    # crossing parameters of chords with the segment x + tau (y - x)
    dx, dy = yx - xx, yy - xy_
    taus = []
    for i in range(n):
        den = dx * ey[i] - dy * ex[i]
        if den == 0:
            continue
        tau = ((ax[i] - xx) * ey[i] - (ay[i] - xy_) * ex[i]) / den
        lam = ((ax[i] - xx) * dy - (ay[i] - xy_) * dx) / den
        if 0 < tau < 1 and 0 < lam < 1:
            taus.append(tau)
    cuts = [0.0] + sorted(taus) + [1.0]
    mids = np.array([(a + b) / 2 for a, b in zip(cuts, cuts[1:])])
    probe = side(xx + mids * dx, xy_ + mids * dy)
    probe_keys = [bytes(col) for col in np.packbits(probe, axis=0).T]

    counts: dict[bytes, int] = {}
    for k in keys:
        counts[k] = counts.get(k, 0) + 1
    return [(counts.get(k, 0) / grid, i) for i, k in enumerate(probe_keys)]


def separating_sum(s: ChordSet, x: float, y: float, beta: float) -> float:
    """Sum of mass**beta * (p (1 - p))**beta over the separating fragments."""
    return math.fsum(
        f.mass ** beta * (f.param * (1.0 - f.param)) ** beta for f in separating_fragments(s, x, y)
    )


def attempt_trajectory(
    attempts: int, x: float, y: float, rng: np.random.Generator, beta: float
) -> list[float]:
    """separating_sum after each of ``attempts`` proposals (index 0 is the empty set).

    Reported as a diagnostic only: the chord process is not claimed to keep
    this sum constant in mean when indexed by proposals.
    """
    s = build_chordset(attempts, rng)
    out = [separating_sum(ChordSet(), x, y, beta)]
    kept = ChordSet()
    j = 0
    for i in range(attempts):
        if j < len(s.chords) and s.accepted_at[j] == i:
            kept.chords.append(s.chords[j])
            kept.accepted_at.append(i)
            j += 1
        kept.attempts = i + 1
        out.append(separating_sum(kept, x, y, beta))
    return out
