"""Hexagons, pants, gluing, deformation, shortening, serialization, sampling."""

import math
from fractions import Fraction

import numpy as np
import pytest

from cuspflow import (
    CUSP_BOUNDARY_LENGTH,
    HPoint,
    PantsSpec,
    Stratum,
    alpha_deformation,
    assemble,
    base_tuple,
    cusp_shorten,
    dist,
    glue,
    hexagon_solve,
    horoball_signed_distance,
    pants_holonomy,
    sample_band,
    sample_strata,
    sample_thick,
    stratum_area,
    surface_from_text,
    surface_to_text,
)
from oracles import axes_distance


def base_surface():
    return base_tuple(2.0).panted.surface


class TestHexagonSolve:
    def test_symmetric_unit_hexagon(self):
        h = hexagon_solve(1.0, 1.0, 1.0)
        want = math.acosh((math.cosh(1.0) + math.cosh(1.0) ** 2) / math.sinh(1.0) ** 2)
        assert h.e01 == h.e12 == h.e20
        assert h.e12 == pytest.approx(want, abs=1e-12)
        assert h.e12 == pytest.approx(1.7049128323580138, abs=1e-12)

    def test_one_zero_side(self):
        h = hexagon_solve(0.0, 1.0, 1.0)
        want = (1.0 + math.cosh(1.0) ** 2) / math.sinh(1.0) ** 2
        assert math.cosh(h.e12) == pytest.approx(want, rel=1e-12)

    def test_longer_opposite_side_pushes_seam_out(self):
        assert hexagon_solve(2.0, 1.0, 1.0).e12 > hexagon_solve(1.0, 1.0, 1.0).e12

    def test_residuals_and_closure_on_random_inputs(self):
        rng = np.random.default_rng(41)
        for _ in range(200):
            l0, l1, l2 = rng.uniform(0.1, 3.0, 3)
            h = hexagon_solve(float(l0), float(l1), float(l2))
            assert max(h.relation_residuals()) < 1e-10
            assert h.holonomy_defect() < 1e-8

    def test_cusped_sides_become_infinite(self):
        h = hexagon_solve(0.0, 0.0, 1.0)
        assert math.isinf(h.e01)
        assert math.isfinite(h.f2) and h.f2 == 1.0

    def test_ideal_triangle_rejected(self):
        with pytest.raises(ValueError):
            hexagon_solve(0.0, 0.0, 0.0)


class TestPantsHolonomy:
    def test_closed_boundary_traces(self):
        s = pants_holonomy(PantsSpec(1.0, 1.0, 1.0))
        for b in range(3):
            tr = abs(s.boundary_holonomy(0, b).trace())
            assert tr == pytest.approx(2.0 * math.cosh(0.5), abs=1e-9)

    def test_two_cusp_pants(self):
        s = pants_holonomy(PantsSpec(0.0, 0.0, 0.8))
        assert abs(s.boundary_holonomy(0, 0).trace()) == pytest.approx(2.0, abs=1e-10)
        assert abs(s.boundary_holonomy(0, 1).trace()) == pytest.approx(2.0, abs=1e-10)
        assert abs(s.boundary_holonomy(0, 2).trace()) == pytest.approx(2.0 * math.cosh(0.4), abs=1e-9)

    def test_neck_pants(self):
        s = pants_holonomy(PantsSpec(0.7, 0.7, 0.0))
        assert abs(s.boundary_holonomy(0, 2).trace()) == pytest.approx(2.0, abs=1e-10)

    def test_boundary_word_product_is_identity(self):
        # the three boundary classes compose to the pants relation in cyclic
        # order, with per-slot orientation free
        import itertools

        from cuspflow import Isometry

        for spec in (PantsSpec(1.0, 1.0, 1.0), PantsSpec(0.0, 0.0, 1.3)):
            s = pants_holonomy(spec)
            hs = [s.boundary_holonomy(0, b) for b in range(3)]
            hit = False
            for inv in itertools.product((False, True), repeat=3):
                g = Isometry.identity()
                for h, flip in zip(hs, inv):
                    g = g @ (h.inverse() if flip else h)
                hit = hit or g.same_up_to_sign(Isometry.identity(), tol=1e-9)
            assert hit

    def test_area_is_two_pi(self):
        s = pants_holonomy(PantsSpec(0.0, 0.0, 1.0))
        assert s.area_pi == Fraction(2)


class TestGlue:
    def test_base_surface_bookkeeping(self):
        s = base_surface()
        assert s.pants_count == 3
        assert s.area_pi == Fraction(6)
        assert s.area == pytest.approx(6.0 * math.pi, rel=1e-12)
        assert len(s.cusps) == 5
        assert max(s.seam_defects) < 1e-8

    def test_trace_length_identity_across_surface(self):
        s = base_surface()
        for p in range(s.pants_count):
            for b, length in enumerate(s.specs[p].lengths):
                tr = abs(s.boundary_holonomy(p, b).trace())
                assert tr == pytest.approx(2.0 * math.cosh(length / 2.0), abs=1e-9)

    def test_cusp_holonomies_parabolic(self):
        s = base_surface()
        for c in s.cusps:
            assert abs(c.holonomy.trace()) == pytest.approx(2.0, abs=1e-10)

    def test_single_seam_glue(self):
        a = pants_holonomy(PantsSpec(0.0, 0.0, 1.0))
        b = pants_holonomy(PantsSpec(1.0, 1.0, 0.0))
        s = glue([a, b], [((0, 0, 2), (1, 0, 0))])
        assert s.pants_count == 2
        assert s.area_pi == Fraction(4)
        assert max(s.seam_defects) < 1e-9

    def test_length_mismatch_rejected(self):
        a = pants_holonomy(PantsSpec(0.0, 0.0, 1.0))
        b = pants_holonomy(PantsSpec(1.1, 1.1, 0.0))
        with pytest.raises(ValueError):
            glue([a, b], [((0, 0, 2), (1, 0, 0))])

    def test_nonfree_boundary_rejected(self):
        a = pants_holonomy(PantsSpec(0.0, 0.0, 1.0))
        b = pants_holonomy(PantsSpec(1.0, 1.0, 0.0))
        with pytest.raises(ValueError):
            glue([a, b], [((0, 0, 0), (1, 0, 0))])


class TestAlphaDeformation:
    def test_alpha_zero_is_identity(self):
        ps = base_tuple(2.0).panted
        ps0 = alpha_deformation(ps, 0.0)
        assert surface_to_text(ps0.surface) == surface_to_text(ps.surface)

    def test_only_distinguished_slot_changes(self):
        ps = base_tuple(2.0).panted
        ps4 = alpha_deformation(ps, 0.4)
        for p in range(3):
            want = list(ps.surface.specs[p].lengths)
            if p == ps.p_index:
                want[ps.d0] = 0.4
            assert list(ps4.surface.specs[p].lengths) == pytest.approx(want, abs=1e-15)

    def test_seam_geodesic_identity(self):
        # realized distance between the two interior seams follows the
        # half-hexagon relation in alpha
        ps = base_tuple(2.0).panted
        for alpha in (0.4, 1.0):
            psa = alpha_deformation(ps, alpha)
            s = psa.surface
            d = axes_distance(
                s.boundary_holonomy(psa.p_index, psa.d1).matrix,
                s.boundary_holonomy(psa.p_index, psa.d2).matrix,
            )
            l1 = s.specs[psa.p_index].lengths[psa.d1]
            l2 = s.specs[psa.p_index].lengths[psa.d2]
            sh = math.sinh(l1 / 2.0) * math.sinh(l2 / 2.0)
            ch = math.cosh(l1 / 2.0) * math.cosh(l2 / 2.0)
            want = math.acosh((math.cosh(alpha / 2.0) + ch) / sh)
            assert d == pytest.approx(want, abs=1e-6)
            # positive lower bound, uniform in alpha
            assert d >= math.acosh((1.0 + ch) / sh) - 1e-9

    def test_group_map_respects_words(self):
        # the same generator word evaluated on two family members: products
        # of images match images of concatenations
        rng = np.random.default_rng(43)
        ps = base_tuple(2.0).panted
        sa = alpha_deformation(ps, 0.3).surface
        n = len(sa.generators)

        def rand_word():
            k = int(rng.integers(1, 4))
            return tuple(
                (int(rng.integers(0, n)), int(rng.choice((-1, 1)))) for _ in range(k)
            )

        for _ in range(100):
            w1, w2 = rand_word(), rand_word()
            lhs = sa.word_image(w1 + w2)
            rhs = sa.word_image(w1) @ sa.word_image(w2)
            assert lhs.same_up_to_sign(rhs, tol=1e-8)

    def test_group_entries_continuous_in_alpha(self):
        # track a word through the deformed pants' own generators
        ps = base_tuple(2.0).panted
        off = ps.surface.gen_offset(ps.p_index)
        word = ((off, 1), (off + 1, 1), (off, -1))
        diffs = []
        for step in (0.2, 0.1, 0.05):
            a = alpha_deformation(ps, 0.4).surface.word_image(word).matrix
            b = alpha_deformation(ps, 0.4 + step).surface.word_image(word).matrix
            if np.sum(np.abs(a + b)) < np.sum(np.abs(a - b)):
                b = -b
            diffs.append(np.max(np.abs(a - b)))
        assert diffs[0] > diffs[1] > diffs[2] > 0.0

    def test_negative_alpha_rejected(self):
        with pytest.raises(ValueError):
            alpha_deformation(base_tuple(2.0).panted, -0.1)


class TestCuspShorten:
    def test_zero_is_identity(self):
        c = base_surface().cusps[0]
        s = cusp_shorten(c, 0.0)
        assert s.boundary_length == c.boundary_length
        assert s.anchor.same_up_to_sign(c.anchor, tol=1e-12)

    def test_boundary_length_scales(self):
        c = base_surface().cusps[0]
        assert cusp_shorten(c, 1.0).boundary_length == pytest.approx(
            c.boundary_length / math.e, rel=1e-12
        )

    def test_boundary_to_boundary_distance(self):
        c = base_surface().cusps[0]
        s = cusp_shorten(c, 2.0)
        p = HPoint(0.25, 1.7)
        gap = horoball_signed_distance(s.horoball(), p) - horoball_signed_distance(
            c.horoball(), p
        )
        assert gap == pytest.approx(2.0, abs=1e-10)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            cusp_shorten(base_surface().cusps[0], -0.5)


class TestSerialization:
    def test_round_trip_is_exact(self):
        s = base_surface()
        t = surface_from_text(surface_to_text(s))
        for g, h in zip(s.generators, t.generators):
            assert np.array_equal(g.matrix, h.matrix)
        for c, d in zip(s.cusps, t.cusps):
            assert c.key == d.key
            assert np.array_equal(c.anchor.matrix, d.anchor.matrix)
            assert c.boundary_length == d.boundary_length
        assert s.edges == t.edges
        assert s.root == t.root
        assert surface_to_text(t) == surface_to_text(s)

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            surface_from_text("not a surface\n")


class TestSamplingAndStrata:
    def test_band_area_formula(self):
        s = base_surface()
        key = s.cusps[0].key
        x0 = s.cusp_by_key(key).boundary_length
        got = stratum_area(s, Stratum("band", key=key, depth_lo=0.5, depth_hi=1.5))
        assert got == pytest.approx(x0 * (math.exp(-0.5) - math.exp(-1.5)), rel=1e-12)

    def test_areas_partition_surface(self):
        s = base_surface()
        total = 0.0
        for p in range(s.pants_count):
            total += stratum_area(s, Stratum("thick", pants=p))
        for c in s.cusps:
            total += stratum_area(
                s, Stratum("band", key=c.key, depth_lo=0.0, depth_hi=math.inf)
            )
        assert total == pytest.approx(s.area, rel=1e-6)

    def test_band_samples_land_in_band(self):
        # chart coordinates carry the depth directly; the global lift must
        # land at the same depth inside the cusp's canonical horoball
        s = base_surface()
        rng = np.random.default_rng(47)
        for c in (s.cusps[0], s.cusps[1], s.cusps[3]):
            pts = sample_band(s, c.key, 0.8, 1.9, 25, rng)
            hb = c.horoball()
            for p in pts:
                sd = horoball_signed_distance(hb, p.lift(s))
                assert -1.9 - 1e-6 <= sd <= -0.8 + 1e-6

    def test_thick_samples_avoid_all_cusps(self):
        s = base_surface()
        rng = np.random.default_rng(53)
        pts = sample_thick(s, 0, 60, rng)
        for p in pts:
            assert p.pants == 0
            z = p.lift(s)
            for c in s.cusps:
                assert horoball_signed_distance(c.horoball(), z) >= -1e-6

    def test_strata_sampler_respects_weights(self):
        s = base_surface()
        rng = np.random.default_rng(59)
        strata = [
            Stratum("thick", pants=0),
            Stratum("band", key=s.cusps[0].key, depth_lo=0.0, depth_hi=2.0),
        ]
        pts = sample_strata(s, strata, 400, rng)
        assert len(pts) == 400
        n_band = sum(1 for p, _ in pts if p.kind == "cusp")
        w = stratum_area(s, strata[1]) / (
            stratum_area(s, strata[0]) + stratum_area(s, strata[1])
        )
        se = math.sqrt(w * (1 - w) / 400.0)
        assert abs(n_band / 400.0 - w) < 5.0 * se

    def test_cusp_boundary_length_constant(self):
        assert CUSP_BOUNDARY_LENGTH == 2.0
        for c in base_surface().cusps:
            assert c.boundary_length == pytest.approx(2.0, rel=1e-12)
