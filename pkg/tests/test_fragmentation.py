import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmquad.errors import DomainError, RootError
from pmquad.fragmentation import (
    CHORD, QUAD, Particle, chord_batch, chord_kernel_sample, chord_split, deterministic_kernel,
    hypothesis_residual, malthusian_sum, quad_batch, quad_split, run_fragmentation, solve_malthus,
)
from pmquad.mathcore import BETA, profile_h
from pmquad.quadtree import Quadtree, grow_along
from pmquad.streams import derive_stream

unit = st.floats(min_value=1e-9, max_value=1 - 1e-9)


def test_quad_split_left_and_right():
    out = quad_split(0.2, 0.5, 0.3)
    assert (out.s1, out.s2) == pytest.approx((0.35, 0.15))
    assert out.x1 == out.x2 == pytest.approx(0.4)
    out = quad_split(0.8, 0.5, 0.3)
    assert (out.s1, out.s2) == pytest.approx((0.35, 0.15))
    assert out.x1 == pytest.approx(0.6)
    assert out.separating


@given(st.floats(0.0, 1.0), unit, unit)
def test_quad_split_properties(x, u, v):
    out = quad_split(x, u, v)
    width = u if x <= u else 1 - u
    assert out.s1 >= out.s2 >= 0
    assert out.s1 + out.s2 == pytest.approx(width, rel=1e-12)
    assert 0.0 <= out.x1 <= 1.0 and out.x1 == out.x2


def test_chord_split_cases():
    # chord (0.1, 0.6) separates 0 from u = 0.3
    out = chord_split(0.3, 0.1, 0.6)
    assert out.separating
    assert (out.s1, out.s2) == pytest.approx((0.5, 0.5))
    # chord (0.4, 0.7) cuts off an arc containing neither mark
    out = chord_split(0.3, 0.4, 0.7)
    assert not out.separating
    assert out.lost_mass() == pytest.approx(0.3)
    assert out.children() == [pytest.approx((0.7, 0.3 / 0.7))]


@given(unit, unit, unit)
def test_chord_split_properties(u, a, b):
    out = chord_split(u, a, b)
    assert out.s1 >= out.s2 >= 0
    assert out.s1 + out.s2 == pytest.approx(1.0, abs=1e-12)
    for s, x in out.children():
        assert -1e-12 <= x <= 1 + 1e-12
    if not out.separating:
        assert len(out.children()) == 1


def test_chord_batch_matches_scalar_draws():
    got = chord_batch(0.3, 500, derive_stream(1, 0))
    rng = derive_stream(1, 0)
    for i in range(500):
        o = chord_kernel_sample(0.3, rng)
        kids = o.children()
        if o.separating:
            assert {round(got[0][i], 12), round(got[2][i], 12)} == {round(o.s1, 12), round(o.s2, 12)}
        else:
            assert not got[4][i]
            assert got[0][i] == pytest.approx(kids[0][0])
            assert got[1][i] == pytest.approx(kids[0][1])


def test_quad_batch_same_law_as_scalar():
    n = 20000
    s1, x1, s2, x2, _ = quad_batch(0.3, n, derive_stream(2, 0))
    # batch pieces are not mass-ordered, so compare a symmetric statistic
    batch = (s1 ** 0.7 + s2 ** 0.7) * x1
    rng = derive_stream(2, 1)
    scalar = []
    for _ in range(n):
        o = QUAD.sample(0.3, rng)
        scalar.append((o.s1 ** 0.7 + o.s2 ** 0.7) * o.x1)
    se = math.sqrt(np.var(batch) / n + np.var(scalar) / n)
    assert abs(np.mean(batch) - np.mean(scalar)) < 4 * se


@pytest.mark.parametrize("x", [i / 10 for i in range(1, 10)])
def test_quad_residual_vanishes_at_beta(x):
    assert abs(hypothesis_residual(QUAD, BETA, BETA / 2, x)) <= 1e-8


@given(st.floats(0.2, 2.0), st.floats(0.05, 0.95))
def test_quad_residual_diagonal_closed_form(b, x):
    # with c = b/2 the u-integrals are Beta functions and the residual is
    # h(x) (2 / ((b + 1)(c + 1)) - 1)
    c = b / 2
    expected = profile_h(x, c) * (2 / ((b + 1) * (c + 1)) - 1)
    assert hypothesis_residual(QUAD, b, c, x) == pytest.approx(expected, abs=1e-9)


def test_quad_residual_perturbed():
    assert abs(hypothesis_residual(QUAD, 0.9, 0.45, 0.5)) > 1e-3


@pytest.mark.parametrize("b, c, x", [(0.8, 0.3, 0.4), (1.3, 0.9, 0.15)])
def test_quad_quadrature_agrees_with_mc(b, c, x):
    exact = hypothesis_residual(QUAD, b, c, x)
    est, se = hypothesis_residual(QUAD, b, c, x, "mc", samples=200_000, rng=derive_stream(3, 0))
    assert abs(est - exact) < 4 * se


def test_residual_errors():
    with pytest.raises(DomainError):
        hypothesis_residual(QUAD, BETA, BETA / 2, 0.0)
    with pytest.raises(ValueError):
        hypothesis_residual(CHORD, BETA, BETA, 0.5)
    with pytest.raises(ValueError):
        hypothesis_residual(QUAD, BETA, BETA / 2, 0.5, "mc")
    with pytest.raises(ValueError):
        hypothesis_residual(QUAD, BETA, BETA / 2, 0.5, "simpson")


def test_solve_malthus_quad():
    root = solve_malthus(QUAD, lambda b: b / 2, tol=1e-10)
    assert abs(root - BETA) < 1e-8


def test_solve_malthus_binary_split():
    # halves with no parameter dependence: 2 * 2**-b = 1 at b = 1
    k = deterministic_kernel(0.5, 0.5)
    assert solve_malthus(k, lambda b: 0.0, bracket=(0.1, 2.0), tol=1e-12) == pytest.approx(1.0, abs=1e-11)


def test_solve_malthus_no_sign_change():
    with pytest.raises(RootError):
        solve_malthus(QUAD, lambda b: b / 2, bracket=(0.7, 1.0))


def test_chord_mc_solver_near_beta():
    root = solve_malthus(CHORD, lambda b: b, tol=1e-4, method="mc", samples=200_000, rng=derive_stream(4, 0))
    assert abs(root - BETA) < 0.01


def test_deterministic_kernel_validation():
    with pytest.raises(DomainError):
        deterministic_kernel(0.3, 0.5)


def test_fragmentation_mass_accounting():
    # quad pieces keep only the column holding the line, so mass shrinks
    st_q = run_fragmentation(Particle(1.0, 0.4), QUAD, 1.0, 40.0, derive_stream(5, 0))
    assert 0 < st_q.total_mass() < 1
    assert all(0.0 <= p.param <= 1.0 for p in st_q.particles)
    st_c = run_fragmentation(Particle(1.0, 0.4), CHORD, 1.0, 40.0, derive_stream(5, 1))
    assert st_c.total_mass() + st_c.lost_mass == pytest.approx(1.0, abs=1e-12)
    assert st_c.lost_mass > 0


def test_fragmentation_count_matches_line_growth():
    # the slice above x is the quad fragmentation with rate equal to mass
    t, x, n = 30.0, 0.37, 3000
    frag = [len(run_fragmentation(Particle(1.0, x), QUAD, 1.0, t, derive_stream(6, k)).alive) for k in range(n)]
    line = [len(grow_along(Quadtree(), x, t, derive_stream(7, k))) for k in range(n)]
    se = math.sqrt(np.var(frag) / n + np.var(line) / n)
    assert abs(np.mean(frag) - np.mean(line)) < 4 * se


@pytest.mark.parametrize("k, c, rate", [(QUAD, BETA / 2, 1.0), (CHORD, BETA, 0.5)])
def test_malthusian_sum_is_a_martingale(k, c, rate):
    x, n = 0.3, 3000
    vals = [malthusian_sum(run_fragmentation(Particle(1.0, x), k, rate, 4.0, derive_stream(8, i)), BETA, c)
            for i in range(n)]
    se = np.std(vals) / math.sqrt(n)
    assert abs(np.mean(vals) - profile_h(x, c)) < 4 * se


def test_fragmentation_negative_time():
    with pytest.raises(DomainError):
        run_fragmentation(Particle(1.0, 0.5), QUAD, 1.0, -1.0, derive_stream(0, 0))
