import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from pmquad.errors import CollisionError, DomainError
from pmquad.quadtree import (
    LEAF_CSV_COLUMNS, Quadtree, build_fixed, build_poisson, extend_poisson, extremes, gap_lower_bound,
    grow_along, read_leaves_csv, sample_sizebiased_product, sample_tagged_mass, slice_leaves, slice_query,
    tagged_trajectory, write_leaves_csv,
)
from pmquad.streams import derive_stream

coord = st.floats(min_value=1e-6, max_value=1 - 1e-6)
point_sets = st.lists(st.tuples(coord, coord), min_size=1, max_size=40, unique_by=(lambda p: p[0], lambda p: p[1]))


def test_single_point_children():
    q = Quadtree.from_points([(0.2, 0.3)])
    masses = {r.word: r.mass for r in q.leaf_list()}
    assert masses == pytest.approx({"1": 0.56, "2": 0.14, "3": 0.06, "4": 0.24})


def test_two_point_extremes():
    q = Quadtree.from_points([(0.2, 0.3), (0.6, 0.8)])
    assert sorted(r.mass for r in q.leaf_list()) == pytest.approx([0.06, 0.08, 0.08, 0.14, 0.2, 0.2, 0.24])
    small, big = extremes(q)
    assert small == pytest.approx(0.06)
    assert big == pytest.approx(0.24)
    assert gap_lower_bound(q.points()) <= small


def test_slice_counts():
    q = Quadtree.from_points([(0.2, 0.3), (0.6, 0.8)])
    assert slice_query(q, 0.1).n == 2
    assert slice_query(q, 0.4).n == 3
    # closed convention: the split abscissa meets both columns
    assert slice_query(q, 0.2).n == 5
    assert len(slice_leaves(q, 0.2)) == 3
    fr = {f.rect.word: f.relpos for f in slice_query(q, 0.4).fragments}
    assert fr["12"] == pytest.approx(0.5)
    assert fr["4"] == pytest.approx(0.25)


def test_insert_rejections():
    q = Quadtree.from_points([(0.5, 0.5)])
    with pytest.raises(CollisionError):
        q.insert(0.5, 0.7, 2.0)
    with pytest.raises(DomainError):
        q.insert(0.0, 0.3, 3.0)
    with pytest.raises(ValueError):
        q.insert(0.3, 0.3, 0.5)


@given(point_sets)
def test_leaves_partition_square(points):
    q = Quadtree.from_points(points)
    assert len(q.leaves) == 3 * len(points) + 1
    assert q.total_mass() == pytest.approx(1.0, abs=1e-12)
    for px, py in [(0.123, 0.456), (0.999, 0.001), (0.5, 0.5)]:
        assert q.locate(px, py).contains(px, py)


@given(point_sets, st.floats(0.0, 1.0))
def test_slice_masses_match_column_area(points, x):
    # the leaves above x (counted once) tile the column of width 0 at x,
    # so their heights add up to one
    q = Quadtree.from_points(points)
    heights = [r.y1 - r.y0 for r in slice_leaves(q, x)]
    assert math.fsum(heights) == pytest.approx(1.0, abs=1e-12)


@given(point_sets)
def test_gap_bound_never_exceeds_smallest_leaf(points):
    q = Quadtree.from_points(points)
    assert gap_lower_bound(points) <= extremes(q)[0]


def test_gap_bound_on_seeded_instances():
    for k in range(300):
        rng = derive_stream(99, k)
        q = build_fixed(int(rng.integers(1, 60)), rng)
        assert gap_lower_bound(q.points()) <= extremes(q)[0]


def test_gap_bound_rejects_ties():
    with pytest.raises(CollisionError):
        gap_lower_bound([(0.3, 0.1), (0.3, 0.2)])


@given(point_sets, coord, coord)
def test_tagged_trajectory_nested(points, u, v):
    assume(all(u != p[0] and v != p[1] for p in points))
    q = Quadtree.from_points(points)
    chain = tagged_trajectory(q, u, v)
    assert chain[0] is q.root
    assert chain[-1].is_leaf
    for a, b in zip(chain, chain[1:]):
        assert b.word[:-1] == a.word
        assert b.mass < a.mass
    assert chain[-1] is q.locate(u, v)


def test_replay_identical():
    q = build_poisson(50.0, derive_stream(3, 0))
    r = q.replay()
    assert [x.extent() for x in r.leaf_list()] == [x.extent() for x in q.leaf_list()]


def test_build_poisson_reproducible_and_count():
    a = build_poisson(80.0, derive_stream(5, 1))
    b = build_poisson(80.0, derive_stream(5, 1))
    assert a.points() == b.points()
    counts = [build_poisson(40.0, derive_stream(5, k)).n_points for k in range(400)]
    assert np.mean(counts) == pytest.approx(40.0, abs=4 * math.sqrt(40 / 400))


def test_extend_poisson_refuses_slice_tree():
    q = Quadtree()
    grow_along(q, 0.5, 10.0, derive_stream(1, 0))
    with pytest.raises(ValueError):
        extend_poisson(q, 20.0, derive_stream(1, 1))


def test_build_fixed_size():
    q = build_fixed(25, derive_stream(2, 0))
    assert q.n_points == 25
    assert len(q.leaves) == 76


def test_grow_along_matches_full_tree():
    # two routes to E[N_t(x)]: whole tree vs growth restricted to the line
    t, x, n = 30.0, 0.37, 3000
    full = [len(slice_leaves(build_poisson(t, derive_stream(11, k)), x)) for k in range(n)]
    line = [len(grow_along(Quadtree(), x, t, derive_stream(12, k))) for k in range(n)]
    se = math.sqrt(np.var(full) / n + np.var(line) / n)
    assert abs(np.mean(full) - np.mean(line)) < 4 * se


def test_grow_along_max_gen():
    q = Quadtree()
    line = grow_along(q, 0.5, math.inf, derive_stream(4, 0), max_gen=3)
    assert all(r.gen == 3 for r in line)
    assert len(line) == len({r.word for r in line})


def test_sizebiased_product_mean():
    rng = derive_stream(8, 0)
    assert sample_sizebiased_product(0, rng) == 1.0
    draws = [sample_sizebiased_product(2, rng) for _ in range(20000)]
    se = np.std(draws) / math.sqrt(len(draws))
    assert abs(np.mean(draws) - (4 / 9) ** 2) < 4 * se


def test_tagged_mass_generation_zero():
    assert sample_tagged_mass(0, derive_stream(1, 0)) == 1.0


def test_leaf_csv_roundtrip(tmp_path):
    q = build_poisson(30.0, derive_stream(6, 0))
    path = tmp_path / "leaves.csv"
    write_leaves_csv(q, path)
    assert path.read_text().splitlines()[0] == ",".join(LEAF_CSV_COLUMNS)
    rows = read_leaves_csv(path)
    assert [r["word"] for r in rows] == [r.word for r in q.leaf_list()]
    assert [r["mass"] for r in rows] == [r.mass for r in q.leaf_list()]
