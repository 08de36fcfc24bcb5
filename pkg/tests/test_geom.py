"""Half-plane primitives: isometries, distance, balls, horoballs, overlap areas.

The Monte Carlo cross-checks live in oracles.py and share nothing with the
quadrature path they certify.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cuspflow import (
    Ball,
    HPoint,
    Horoball,
    Isometry,
    apply,
    apply_horoball,
    ball_area,
    ball_horoball_area,
    ball_horoball_area_batch,
    dist,
    horoball_gap,
    horoball_signed_distance,
    shrink_horoball,
)
from oracles import ball_horoball_mc, geodesic_dist, hyp_ball_mc


def rand_isometry(rng) -> Isometry:
    while True:
        a, b, c, d = rng.normal(size=4)
        if abs(a * d - b * c) > 1e-3:
            m = np.array([[a, b], [c, d]])
            if a * d - b * c < 0:
                m[1] *= -1.0
            return Isometry.from_matrix(m)


coord = st.floats(min_value=-5.0, max_value=5.0)
height = st.floats(min_value=0.05, max_value=20.0)


class TestApply:
    def test_identity_fixes_points(self):
        p = HPoint(0.0, 1.0)
        assert apply(Isometry.identity(), p) == p

    def test_horizontal_translation(self):
        q = apply(Isometry(1.0, 1.0, 0.0, 1.0), HPoint(0.0, 1.0))
        assert q.x == pytest.approx(1.0, abs=1e-15)
        assert q.y == pytest.approx(1.0, abs=1e-15)

    def test_inversion(self):
        q = apply(Isometry(0.0, -1.0, 1.0, 0.0), HPoint(0.0, 2.0))
        assert q.x == pytest.approx(0.0, abs=1e-15)
        assert q.y == pytest.approx(0.5, abs=1e-15)

    @given(coord, height, st.integers(0, 10**6))
    @settings(max_examples=200, deadline=None)
    def test_image_stays_in_half_plane(self, x, y, seed):
        g = rand_isometry(np.random.default_rng(seed))
        assert apply(g, HPoint(x, y)).y > 0.0


class TestIsometry:
    def test_matrix_normalized_to_unit_determinant(self):
        g = Isometry.from_matrix(np.array([[3.0, 0.0], [0.0, 3.0]]))
        assert abs(np.linalg.det(g.matrix) - 1.0) < 1e-12

    def test_inverse_composes_to_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            g = rand_isometry(rng)
            assert (g @ g.inverse()).same_up_to_sign(Isometry.identity(), tol=1e-10)

    def test_composition_associative(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            g, h, k = (rand_isometry(rng) for _ in range(3))
            assert ((g @ h) @ k).same_up_to_sign(g @ (h @ k), tol=1e-9)

    def test_sign_quotient(self):
        g = Isometry(1.0, 2.0, 0.0, 1.0)
        h = Isometry(-1.0, -2.0, 0.0, -1.0)
        assert g.same_up_to_sign(h)

    def test_degenerate_matrix_rejected(self):
        with pytest.raises(ValueError):
            Isometry(1.0, 2.0, 2.0, 4.0)


class TestDist:
    def test_coincident_points(self):
        assert dist(HPoint(0.0, 1.0), HPoint(0.0, 1.0)) == 0.0

    def test_vertical_is_log_ratio(self):
        assert dist(HPoint(0.0, 1.0), HPoint(0.0, math.e**2)) == pytest.approx(2.0, abs=1e-12)

    def test_unit_offset_matches_arc_length_oracle(self):
        d = dist(HPoint(0.0, 1.0), HPoint(1.0, 1.0))
        assert d == pytest.approx(math.acosh(1.5), abs=1e-12)
        assert d == pytest.approx(geodesic_dist(1j, 1.0 + 1j), abs=1e-9)

    def test_arc_length_oracle_on_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            z = complex(rng.uniform(-3, 3), math.exp(rng.uniform(-2, 2)))
            w = complex(rng.uniform(-3, 3), math.exp(rng.uniform(-2, 2)))
            d = dist(HPoint(z.real, z.imag), HPoint(w.real, w.imag))
            assert d == pytest.approx(geodesic_dist(z, w), abs=1e-9)

    @given(coord, height, coord, height)
    @settings(max_examples=200, deadline=None)
    def test_symmetry(self, x1, y1, x2, y2):
        p, q = HPoint(x1, y1), HPoint(x2, y2)
        assert dist(p, q) == pytest.approx(dist(q, p), abs=1e-12)

    def test_isometry_invariance(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(10_000):
            g = rand_isometry(rng)
            p = HPoint(rng.uniform(-4, 4), math.exp(rng.uniform(-2, 2)))
            q = HPoint(rng.uniform(-4, 4), math.exp(rng.uniform(-2, 2)))
            worst = max(worst, abs(dist(apply(g, p), apply(g, q)) - dist(p, q)))
        assert worst < 1e-9

    def test_point_below_axis_rejected(self):
        with pytest.raises(ValueError):
            HPoint(0.0, -1.0)


class TestBallArea:
    def test_zero_radius(self):
        assert ball_area(0.0) == 0.0

    def test_closed_form(self):
        assert ball_area(1.0) == pytest.approx(2 * math.pi * (math.cosh(1.0) - 1.0), abs=1e-12)

    def test_against_monte_carlo(self):
        rng = np.random.default_rng(2)
        for r in (0.5, 1.0, 2.0, 4.0):
            mc = hyp_ball_mc(r, 400_000, rng)
            assert abs(ball_area(r) - mc) / mc < 0.02

    def test_strictly_increasing(self):
        rs = np.linspace(0.0, 6.0, 50)
        vals = [ball_area(float(r)) for r in rs]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            ball_area(-1.0)


class TestBallEuclidean:
    def test_boundary_points_at_hyperbolic_radius(self):
        # The claimed Euclidean disk (x, y cosh r; y sinh r) must have its
        # boundary at hyperbolic distance exactly r from the center.
        rng = np.random.default_rng(3)
        for _ in range(5):
            c = HPoint(rng.uniform(-2, 2), math.exp(rng.uniform(-1, 1)))
            r = rng.uniform(0.2, 3.0)
            cx, cy, re = Ball(c, r).euclidean()
            assert cx == pytest.approx(c.x, abs=1e-14)
            assert cy == pytest.approx(c.y * math.cosh(r), abs=1e-12)
            assert re == pytest.approx(c.y * math.sinh(r), abs=1e-12)
            for th in rng.uniform(0.0, 2 * math.pi, 100):
                b = HPoint(cx + re * math.cos(th), cy + re * math.sin(th))
                assert dist(c, b) == pytest.approx(r, abs=1e-9)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            Ball(HPoint(0.0, 1.0), -0.5)


class TestHoroballSignedDistance:
    def test_on_boundary(self):
        assert horoball_signed_distance(Horoball(0.0, 1.0, base_at_infinity=True), HPoint(0.0, 1.0)) == 0.0

    def test_one_below_level_e(self):
        h = Horoball(0.0, math.e, base_at_infinity=True)
        assert horoball_signed_distance(h, HPoint(0.0, 1.0)) == pytest.approx(1.0, abs=1e-12)

    def test_vertical_drop(self):
        h = Horoball(0.0, 1.0, base_at_infinity=True)
        assert horoball_signed_distance(h, HPoint(5.0, math.exp(-2.0))) == pytest.approx(2.0, abs=1e-12)

    def test_sign_agrees_with_membership(self):
        rng = np.random.default_rng(13)
        balls = [Horoball(0.0, 1.0, base_at_infinity=True), Horoball(2.0, 1.5), Horoball(-1.0, 0.3)]
        for h in balls:
            for _ in range(200):
                p = HPoint(rng.uniform(-4, 4), math.exp(rng.uniform(-3, 2)))
                sd = horoball_signed_distance(h, p)
                assert h.contains(p) == (sd <= 1e-12)

    def test_isometry_equivariance(self):
        rng = np.random.default_rng(17)
        h0 = Horoball(0.0, 1.0, base_at_infinity=True)
        for _ in range(500):
            g = rand_isometry(rng)
            p = HPoint(rng.uniform(-3, 3), math.exp(rng.uniform(-2, 2)))
            before = horoball_signed_distance(h0, p)
            after = horoball_signed_distance(apply_horoball(g, h0), apply(g, p))
            assert after == pytest.approx(before, abs=1e-9)

    def test_nonpositive_size_rejected(self):
        with pytest.raises(ValueError):
            Horoball(0.0, -2.0)


class TestShrinkAndGap:
    def test_shrink_raises_signed_distance_by_t(self):
        h = Horoball(0.0, 1.0, base_at_infinity=True)
        p = HPoint(0.3, 0.4)
        for t in (0.0, 0.7, 2.0):
            got = horoball_signed_distance(shrink_horoball(h, t), p)
            assert got == pytest.approx(horoball_signed_distance(h, p) + t, abs=1e-12)

    def test_gap_of_tangent_horoballs_is_zero(self):
        # unit horoball at infinity and the diameter-1 horoball at 0 touch at i
        a = Horoball(0.0, 1.0, base_at_infinity=True)
        b = Horoball(0.0, 1.0)
        assert horoball_gap(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_gap_grows_under_shrinking(self):
        a = Horoball(0.0, 1.0, base_at_infinity=True)
        b = Horoball(0.0, 1.0)
        assert horoball_gap(shrink_horoball(a, 1.0), b) == pytest.approx(1.0, abs=1e-12)
        assert horoball_gap(shrink_horoball(a, 1.0), shrink_horoball(b, 0.5)) == pytest.approx(1.5, abs=1e-12)


# Overlap values frozen after the Monte Carlo oracle agreed with the
# quadrature at every probe.
FROZEN_OVERLAP = [
    (2.0, 1.0, 1.5391399497834592),
    (1.0, 0.5, 0.4599522648012534),
    (3.0, 0.0, 11.952844539003024),
    (2.0, -0.5, 7.781028845516776),
    (8.0, 6.0, 5.334356410721444),
    (3.0, -1.0, 22.88167395181293),
]


class TestBallHoroballArea:
    @pytest.mark.parametrize("r,t,want", FROZEN_OVERLAP)
    def test_frozen_values(self, r, t, want):
        assert ball_horoball_area(r, t) == pytest.approx(want, abs=1e-8)

    def test_zero_when_ball_cannot_reach(self):
        assert ball_horoball_area(1.0, 2.0) == 0.0
        assert ball_horoball_area(1.0, 1.0) == 0.0
        assert ball_horoball_area(0.5, 2.0) == 0.0

    def test_monte_carlo_cross_check(self):
        rng = np.random.default_rng(23)
        for r, t in ((2.0, 1.0), (3.0, 0.0), (2.0, -0.5)):
            mc = ball_horoball_mc(r, t, 400_000, rng)
            assert abs(ball_horoball_area(r, t) - mc) / mc < 0.02

    def test_center_inside_beats_center_on_boundary(self):
        assert ball_horoball_area(3.0, -1.0) >= ball_horoball_area(3.0, 0.0)

    def test_monotone_in_depth_on_grid(self):
        for t0 in (0.5, 1.0, 2.0):
            grid = np.linspace(0.0, 5.0, 26)
            vals = [ball_horoball_area(float(T + t0), float(T)) for T in grid]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_deep_center_exhausts_ball(self):
        # far inside the horoball the whole ball is swallowed
        r = 2.0
        assert ball_horoball_area(r, -40.0) == pytest.approx(ball_area(r), rel=1e-9)

    def test_never_exceeds_ball_area(self):
        rng = np.random.default_rng(29)
        for _ in range(200):
            r = rng.uniform(0.1, 6.0)
            t = rng.uniform(-4.0, 6.0)
            assert ball_horoball_area(r, t) <= ball_area(r) + 1e-9

    def test_batch_matches_adaptive(self):
        rng = np.random.default_rng(31)
        r = rng.uniform(0.1, 8.0, 300)
        t = rng.uniform(-3.0, 8.0, 300)
        got = ball_horoball_area_batch(r, t)
        want = np.array([ball_horoball_area(float(a), float(b)) for a, b in zip(r, t)])
        assert np.max(np.abs(got - want) / (1.0 + np.abs(want))) < 1e-7
