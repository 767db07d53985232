"""The random quadtree process on the unit square.

Rectangles are addressed by words over {1, 2, 3, 4}: splitting the rectangle
``w`` at a point produces ``w1`` (north-east), ``w2`` (north-west), ``w3``
(south-west) and ``w4`` (south-east). Every rectangle ever created stays in
``Quadtree.nodes`` so ancestors can be looked up after the fact; the current
covering is ``Quadtree.leaves``.

Point location is half-open, [x0, x1) x [y0, y1), with the right and top edges
of the unit square closed. Slices (``slice_query``) use closed rectangles.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import CollisionError, DomainError
from .streams import open_uniform

POISSON_INVERSION_MAX = 30.0


@dataclass(frozen=True)
class SplitPoint:
    x: float
    y: float
    time: float


@dataclass(eq=False, slots=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float
    word: str = ""
    birth: float = 0.0
    mass: float = field(init=False)
    split: SplitPoint | None = field(default=None, init=False)
    children: tuple[Rect, ...] = field(default=(), init=False)

    def __post_init__(self):
        self.mass = (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def gen(self) -> int:
        return len(self.word)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def contains(self, px: float, py: float) -> bool:
        inx = self.x0 <= px < self.x1 or px == self.x1 == 1.0
        iny = self.y0 <= py < self.y1 or py == self.y1 == 1.0
        return inx and iny

    def extent(self) -> tuple[float, float, float, float]:
        return (self.x0, self.x1, self.y0, self.y1)


class Quadtree:
    """Leaves, genealogy and insertion log of one quadtree trajectory.

    ``slice_only`` is set once the tree has been grown with ``grow_along``:
    from then on only the rectangles above that abscissa are up to date with
    ``clock``.
    """

    def __init__(self):
        self.root = Rect(0.0, 1.0, 0.0, 1.0)
        self.nodes: dict[str, Rect] = {"": self.root}
        self.leaves: dict[str, Rect] = {"": self.root}
        self.history: list[tuple[SplitPoint, str]] = []
        self.clock = 0.0
        self.slice_only: float | None = None

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]], times: Iterable[float] | None = None):
        q = cls()
        points = list(points)
        times = list(times) if times is not None else [float(i + 1) for i in range(len(points))]
        for (px, py), t in zip(points, times):
            q.insert(px, py, t)
        return q

    @property
    def n_points(self) -> int:
        return len(self.history)

    def locate(self, px: float, py: float) -> Rect:
        """Leaf containing (px, py), found by walking down from the root."""
        node = self.root
        while node.children:
            sp = node.split
            east = px >= sp.x
            north = py >= sp.y
            if east:
                node = node.children[0] if north else node.children[3]
            else:
                node = node.children[1] if north else node.children[2]
        return node

    def insert(self, px: float, py: float, t: float) -> tuple[Rect, ...]:
        if not (0.0 < px < 1.0 and 0.0 < py < 1.0):
            raise DomainError(f"split point must be interior, got ({px}, {py})")
        if self.history and not t > self.history[-1][0].time:
            raise ValueError("insertion times must be strictly increasing")
        leaf = self.locate(px, py)
        if px == leaf.x0 or py == leaf.y0:
            raise CollisionError(f"point ({px}, {py}) lies on a leaf edge")
        return self._split(leaf, px, py, t)

    def _split(self, leaf: Rect, px: float, py: float, t: float) -> tuple[Rect, ...]:
        sp = SplitPoint(px, py, t)
        w = leaf.word
        kids = (
            Rect(px, leaf.x1, py, leaf.y1, w + "1", t),
            Rect(leaf.x0, px, py, leaf.y1, w + "2", t),
            Rect(leaf.x0, px, leaf.y0, py, w + "3", t),
            Rect(px, leaf.x1, leaf.y0, py, w + "4", t),
        )
        leaf.split = sp
        leaf.children = kids
        del self.leaves[w]
        for k in kids:
            self.nodes[k.word] = k
            self.leaves[k.word] = k
        self.history.append((sp, w))
        self.clock = max(self.clock, t)
        return kids

    def leaf_list(self) -> list[Rect]:
        return [self.leaves[w] for w in sorted(self.leaves)]

    def total_mass(self) -> float:
        return math.fsum(r.mass for r in self.leaves.values())

    def points(self) -> list[tuple[float, float]]:
        return [(sp.x, sp.y) for sp, _ in self.history]

    def replay(self) -> Quadtree:
        """Rebuild a fresh tree from the insertion log."""
        q = Quadtree()
        for sp, parent in self.history:
            kids = q.insert(sp.x, sp.y, sp.time)
            if kids[0].word[:-1] != parent:
                raise AssertionError("replay diverged from the recorded genealogy")
        q.clock = self.clock
        q.slice_only = self.slice_only
        return q

    def copy(self) -> Quadtree:
        return self.replay()


def _poisson_times(t: float, rng: np.random.Generator) -> list[float]:
    """Arrival times on (0, t] of a unit-rate Poisson process."""
    if t <= 0.0:
        return []
    if t <= POISSON_INVERSION_MAX:
        u = rng.random()
        k, p = 0, math.exp(-t)
        cdf = p
        while u > cdf and p > 0.0:
            k += 1
            p *= t / k
            cdf += p
        return sorted(rng.uniform(0.0, t, size=k).tolist())
    times = []
    s = rng.standard_exponential()
    while s <= t:
        times.append(s)
        s += rng.standard_exponential()
    return times


def extend_poisson(q: Quadtree, t_end: float, rng: np.random.Generator) -> Quadtree:
    """Add the Poisson points of (q.clock, t_end] to the whole tree, in place."""
    if q.slice_only is not None:
        raise ValueError("tree was grown along a single line; off-line leaves are stale")
    t0 = q.clock
    for dt in _poisson_times(t_end - t0, rng):
        tau = t0 + dt
        if q.history and not tau > q.history[-1][0].time:
            continue  # rounding tie with the previous arrival
        while True:
            px, py = open_uniform(rng), open_uniform(rng)
            try:
                q.insert(px, py, tau)
                break
            except CollisionError:
                continue
    q.clock = max(q.clock, float(t_end))
    return q


def build_poisson(t: float, rng: np.random.Generator) -> Quadtree:
    """Quad(t): Poisson(t) points with uniform arrival times, inserted in time order."""
    if t < 0:
        raise DomainError("t must be >= 0")
    return extend_poisson(Quadtree(), t, rng)


def build_fixed(n: int, rng: np.random.Generator) -> Quadtree:
    """Quadtree with n uniform points, recorded at synthetic times 1..n."""
    if n < 0:
        raise DomainError("n must be >= 0")
    q = Quadtree()
    for i in range(n):
        while True:
            px, py = open_uniform(rng), open_uniform(rng)
            try:
                q.insert(px, py, float(i + 1))
                break
            except CollisionError:
                continue
    return q


@dataclass(frozen=True)
class SliceFragment:
    mass: float
    relpos: float
    rect: Rect


@dataclass(frozen=True)
class Slice:
    x: float
    fragments: tuple[SliceFragment, ...]

    @property
    def n(self) -> int:
        return len(self.fragments)


def _fragment(r: Rect, x: float) -> SliceFragment:
    return SliceFragment(r.mass, (x - r.x0) / (r.x1 - r.x0), r)


def slice_query(q: Quadtree, x: float) -> Slice:
    """Leaves whose closed horizontal extent contains x; n is N_t(x)."""
    if not 0.0 <= x <= 1.0:
        raise DomainError("x must lie in [0, 1]")
    frags = tuple(_fragment(r, x) for r in q.leaf_list() if r.x0 <= x <= r.x1)
    return Slice(x, frags)


def meets_line(r: Rect, x: float) -> bool:
    """Half-open test used wherever a leaf must be counted once."""
    return r.x0 <= x < r.x1 or x == r.x1 == 1.0


def slice_leaves(q: Quadtree, x: float) -> list[Rect]:
    return [r for r in q.leaf_list() if meets_line(r, x)]


def extremes(q: Quadtree) -> tuple[float, float]:
    """(I, S): smallest and largest leaf area."""
    masses = [r.mass for r in q.leaves.values()]
    return min(masses), max(masses)


def _min_gap(values: Iterable[float]) -> float:
    v = sorted([0.0, *values, 1.0])
    gaps = [b - a for a, b in zip(v, v[1:])]
    g = min(gaps)
    if g <= 0.0:
        raise CollisionError("two coordinates coincide")
    return g


def gap_lower_bound(points: Sequence[Sequence[float]]) -> float:
    """Lower bound on the smallest leaf area from coordinate gaps.

    Gaps are taken in {0, x_1, ..., x_n, 1} (and likewise for y): every leaf
    side is a difference of two values of that set, so the product of the
    two minimal gaps never exceeds any leaf area, including in floating point.
    """
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return _min_gap(xs) * _min_gap(ys)


def tagged_trajectory(q: Quadtree, u: float, v: float) -> list[Rect]:
    """Ancestral line of the leaf containing (u, v), root first."""
    chain = [q.root]
    node = q.root
    while node.children:
        sp = node.split
        if u == sp.x or v == sp.y:
            raise CollisionError("tagged point shares a coordinate with a split point")
        if u > sp.x:
            node = node.children[0] if v > sp.y else node.children[3]
        else:
            node = node.children[1] if v > sp.y else node.children[2]
        chain.append(node)
    return chain


def sample_sizebiased_product(n: int, rng: np.random.Generator) -> float:
    """Product of 2n independent variables with density 2m on (0, 1)."""
    if n < 0:
        raise DomainError("n must be >= 0")
    if n == 0:
        return 1.0
    draws = rng.random((2 * n, 2)).max(axis=1)
    return float(np.prod(draws))


def _uniform_in(r: Rect, rng: np.random.Generator) -> tuple[float, float]:
    while True:
        px = r.x0 + (r.x1 - r.x0) * open_uniform(rng)
        py = r.y0 + (r.y1 - r.y0) * open_uniform(rng)
        if r.x0 < px < r.x1 and r.y0 < py < r.y1:
            return px, py


def sample_tagged_mass(n: int, rng: np.random.Generator) -> float:
    """Area of the generation-n tagged rectangle.

    Only the points landing in the current tagged leaf matter for its
    ancestral line, so the tree is grown by inserting those alone.
    """
    q = Quadtree()
    u, v = open_uniform(rng), open_uniform(rng)
    for k in range(n):
        leaf = q.locate(u, v)
        while True:
            px, py = _uniform_in(leaf, rng)
            if px != u and py != v:
                break
        q.insert(px, py, float(k + 1))
    return tagged_trajectory(q, u, v)[n].mass


def grow_along(
    q: Quadtree,
    x: float,
    t_end: float,
    rng: np.random.Generator,
    *,
    max_gen: int | None = None,
    on_event: Callable[[float, list[Rect]], None] | None = None,
) -> list[Rect]:
    """Advance the Poisson process, restricted to the leaves above x.

    Arrivals in a leaf of area m come at rate m, so only the leaves meeting
    the vertical line at x need to be simulated for anything measured on that
    line. With ``max_gen`` only leaves of generation < max_gen receive
    points. ``on_event(t, slice_leaves)`` is called after every split.
    Returns the leaves meeting the line when the clock stops.
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError("x must lie in [0, 1]")
    q.slice_only = x
    line = slice_leaves(q, x)
    if max_gen is None:
        active, idle = line, []
    else:
        active = [r for r in line if r.gen < max_gen]
        idle = [r for r in line if r.gen >= max_gen]
    t = q.clock
    while active:
        total = sum(r.mass for r in active)
        t_next = t + rng.standard_exponential() / total
        if t_next > t_end:
            break
        t = t_next
        pick = rng.random() * total
        i = 0
        acc = active[0].mass
        while acc <= pick and i + 1 < len(active):
            i += 1
            acc += active[i].mass
        leaf = active.pop(i)
        px, py = _uniform_in(leaf, rng)
        kids = q._split(leaf, px, py, t)
        # kids are NE, NW, SW, SE; keep the column holding x
        col = (kids[0], kids[3]) if px <= x else (kids[1], kids[2])
        for k in col:
            if max_gen is not None and k.gen >= max_gen:
                idle.append(k)
            else:
                active.append(k)
        if on_event is not None:
            on_event(t, active + idle)
    if math.isfinite(t_end):
        q.clock = max(q.clock, t_end)
    else:
        q.clock = t
    return active + idle


LEAF_CSV_COLUMNS = ("word", "x0", "x1", "y0", "y1", "mass", "gen", "birth")


def _g17(v: float) -> str:
    return format(v, ".17g")


def leaf_rows(q: Quadtree) -> list[list[str]]:
    return [
        [r.word, _g17(r.x0), _g17(r.x1), _g17(r.y0), _g17(r.y1), _g17(r.mass), str(r.gen), _g17(r.birth)]
        for r in q.leaf_list()
    ]


def write_leaves_csv(q: Quadtree, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEAF_CSV_COLUMNS)
        w.writerows(leaf_rows(q))


def read_leaves_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for k in ("x0", "x1", "y0", "y1", "mass", "birth"):
            row[k] = float(row[k])
        row["gen"] = int(row["gen"])
    return rows
