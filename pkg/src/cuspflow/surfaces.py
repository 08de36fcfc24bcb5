"""Hyperbolic surfaces assembled from pairs of pants.

A pair of pants (three-holed sphere, cusps allowed) is the double of a
right-angled hexagon across alternating sides. Each pants is built in an
explicit chart: the shortest-seam configuration places boundary axes on
concentric circles around the origin, the three seam reflections generate the
holonomy, and every boundary carries either a frame (geodesic boundary, for
gluing) or a parabolic anchor (cusp, normalizing the canonical horoball to
{y >= 1} with holonomy z -> z + 2).

Surfaces are trees of pants glued seam-to-seam at marked points with zero
twist. All placement matrices, generators, cusp anchors, and the region data
used for uniform sampling live on the immutable surface object.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geom import Horoball, HPoint, Isometry

CUSP_BOUNDARY_LENGTH = 2.0

_FLIP = np.array([[0.0, -1.0], [1.0, 0.0]])


def _norm1(m: np.ndarray) -> np.ndarray:
    return m / math.sqrt(abs(np.linalg.det(m)))


def _mob(m: np.ndarray, z: complex) -> complex:
    a, b, c, d = m.ravel()
    return (a * z + b) / (c * z + d)


def _refl_circle(c: float, r: float) -> np.ndarray:
    return np.array([[c, r * r - c * c], [1.0, -c]]) / r


def _refl_vert(v: float) -> np.ndarray:
    return np.array([[-1.0, 2.0 * v], [0.0, 1.0]])


def _axis_endpoints(g: np.ndarray) -> tuple[float, float]:
    """Fixed points of a hyperbolic element as (repelling, attracting)."""
    a, b, c, d = g.ravel()
    if abs(c) < 1e-15:
        x2 = b / (d - a)
        return (x2, math.inf) if abs(a) > abs(d) else (math.inf, x2)
    s = math.sqrt((a + d) ** 2 - 4.0)
    x1 = ((a - d) - s) / (2.0 * c)
    x2 = ((a - d) + s) / (2.0 * c)
    if 1.0 / abs(c * x1 + d) ** 2 < 1.0:
        return (x2, x1)
    return (x1, x2)


def _frame_from_boundary(B: np.ndarray, m: complex) -> np.ndarray:
    """Isometry taking (i, upward vertical) to (m, the directed axis of B)."""
    xm, xp = _axis_endpoints(B)
    if xp == math.inf:
        M = np.array([[1.0, xm], [0.0, 1.0]])
    elif xm == math.inf:
        M = np.array([[xp, -1.0], [1.0, 0.0]])
    else:
        k = 1.0 if xp > xm else -1.0
        M = _norm1(np.array([[xp, xm * k], [1.0, k]]))
    v = _mob(np.linalg.inv(M), m).imag
    return _norm1(M @ np.diag([math.sqrt(v), 1.0 / math.sqrt(v)]))


def _isect_circle_circle(c1: float, r1: float, c2: float, r2: float) -> complex:
    x = (r1 * r1 - r2 * r2 - c1 * c1 + c2 * c2) / (2.0 * (c2 - c1))
    return complex(x, math.sqrt(max(r1 * r1 - (x - c1) ** 2, 0.0)))


def _isect_vert_circle(v: float, c: float, r: float) -> complex:
    return complex(v, math.sqrt(max(r * r - (v - c) ** 2, 0.0)))


def _invert_word(word: tuple) -> tuple:
    return tuple((gi, -e) for gi, e in reversed(word))


# ---------------------------------------------------------------------------
# Hexagons


@dataclass(frozen=True)
class RightAngledHexagon:
    """Right-angled hexagon with alternating sides f0,f1,f2 and e01,e12,e20.

    Side e_ij joins sides f_i and f_j; a zero f-length denotes an ideal
    vertex and sends the two adjacent e-lengths to infinity.
    """

    f0: float
    f1: float
    f2: float
    e01: float
    e12: float
    e20: float

    def side_cycle(self) -> tuple[float, ...]:
        return (self.f0, self.e01, self.f1, self.e12, self.f2, self.e20)

    def relation_residuals(self) -> tuple[float, float, float]:
        """Residuals of cosh(f_k) = sinh(f_i)sinh(f_j)cosh(e_ij) - cosh(f_i)cosh(f_j).

        Entries with non-finite sides come back as 0 (no finite relation to
        check there).
        """
        f = (self.f0, self.f1, self.f2)
        e = (self.e12, self.e20, self.e01)
        out = []
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            if not (math.isfinite(e[k]) and math.isfinite(f[i]) and math.isfinite(f[j])):
                out.append(0.0)
                continue
            lhs = math.cosh(f[k])
            rhs = math.sinh(f[i]) * math.sinh(f[j]) * math.cosh(e[k]) - math.cosh(
                f[i]
            ) * math.cosh(f[j])
            out.append(lhs - rhs)
        return tuple(out)

    def holonomy_defect(self) -> float:
        """Closure defect of the edge walk around the hexagon.

        Translating along each side and turning by a right angle at each
        corner must return to the starting frame; the walk product is then
        +-identity and the defect is the entrywise distance to the nearer
        sign. Requires all six sides finite.
        """
        sides = self.side_cycle()
        if not all(math.isfinite(s) for s in sides):
            raise ValueError("holonomy walk needs all six sides finite")
        c = math.cos(math.pi / 4.0)
        turn = np.array([[c, -c], [c, c]])
        M = np.eye(2)
        for s in sides:
            h = math.exp(0.5 * s)
            M = M @ np.array([[h, 0.0], [0.0, 1.0 / h]]) @ turn
        M = _norm1(M)
        return float(
            min(np.abs(M - np.eye(2)).max(), np.abs(M + np.eye(2)).max())
        )


def _hexagon_edge(fk: float, fi: float, fj: float) -> float:
    """Length of the edge joining sides f_i, f_j (opposite f_k)."""
    den = math.sinh(fi) * math.sinh(fj)
    if den == 0.0:
        return math.inf
    arg = (math.cosh(fk) + math.cosh(fi) * math.cosh(fj)) / den
    return math.acosh(max(arg, 1.0))


def hexagon_solve(l0: float, l1: float, l2: float) -> RightAngledHexagon:
    """Solve for the right-angled hexagon with alternating sides (l0, l1, l2).

    Each derived side is determined by the opposite alternating side through
    the hexagon cosine relation. Zero lengths (ideal vertices) are allowed as
    long as not all three vanish; the adjacent derived sides come back
    infinite.
    """
    ls = (float(l0), float(l1), float(l2))
    for l in ls:
        if l < 0.0 or math.isnan(l):
            raise ValueError(f"side lengths must be >= 0, got {ls}")
    if ls == (0.0, 0.0, 0.0):
        raise ValueError("all three alternating sides zero (ideal triangle)")
    e12 = _hexagon_edge(ls[0], ls[1], ls[2])
    e20 = _hexagon_edge(ls[1], ls[2], ls[0])
    e01 = _hexagon_edge(ls[2], ls[0], ls[1])
    return RightAngledHexagon(ls[0], ls[1], ls[2], e01, e12, e20)


# ---------------------------------------------------------------------------
# Pants charts


@dataclass(frozen=True)
class PantsSpec:
    """Boundary lengths of a pair of pants; a zero length encodes a cusp."""

    l0: float
    l1: float
    l2: float

    def __post_init__(self) -> None:
        ls = self.lengths
        if any((l < 0.0 or math.isnan(l) or math.isinf(l)) for l in ls):
            raise ValueError(f"boundary lengths must be finite and >= 0: {ls}")
        if all(l == 0.0 for l in ls):
            raise ValueError("a pants needs at least one positive boundary length")

    @property
    def lengths(self) -> tuple[float, float, float]:
        return (float(self.l0), float(self.l1), float(self.l2))

    @property
    def cusp_count(self) -> int:
        return sum(1 for l in self.lengths if l == 0.0)


_W0 = ((1, -1), (0, -1))
_W1 = ((0, +1),)
_W2 = ((1, +1),)


@dataclass(frozen=True)
class _Boundary:
    kind: str  # 'geo' or 'cusp'
    length: float
    word: tuple
    frame: np.ndarray | None = None
    anchor: np.ndarray | None = None


@dataclass(frozen=True)
class _Curve:
    """A vertical line ('v', x-position) or semicircle ('c', center, radius)."""

    kind: str
    a: float
    b: float = 0.0


@dataclass(frozen=True)
class _SidePredicate:
    curve: _Curve
    sign: float  # region satisfies sign * margin(z) >= 0

    def margin(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.curve.kind == "v":
            return self.sign * (x - self.curve.a)
        dx = x - self.curve.a
        return self.sign * (dx * dx + y * y - self.curve.b * self.curve.b)


@dataclass(frozen=True)
class _PantsChart:
    spec: PantsSpec
    rotation: int
    gens: tuple[np.ndarray, np.ndarray]
    bnd: dict
    sides: tuple[_SidePredicate, ...]
    horoballs: dict  # boundary index -> canonical Horoball in chart coords
    corners: tuple[complex, ...]
    mirror: np.ndarray  # reflection matrix whose mirror doubles the hexagon


def _chart_case_a(li: tuple[float, float, float]):
    l0, l1, l2 = li
    f0, f1, f2 = l0 / 2.0, l1 / 2.0, l2 / 2.0
    d = math.acosh(
        (math.cosh(f0) + math.cosh(f1) * math.cosh(f2))
        / (math.sinh(f1) * math.sinh(f2))
    )
    th1 = 2.0 * math.atan(math.exp(-f1))
    th2 = 2.0 * math.atan(math.exp(-f2))
    m12 = _refl_vert(0.0)
    c01, r01 = 1.0 / math.cos(th1), math.tan(th1)
    c20, r20 = math.exp(d) / math.cos(th2), math.exp(d) * math.tan(th2)
    m01 = _refl_circle(c01, r01)
    m20 = _refl_circle(c20, r20)
    marked = {1: 1j, 2: math.exp(d) * 1j}
    mirrors = {
        "e12": _Curve("v", 0.0),
        "e01": _Curve("c", c01, r01),
        "e20": _Curve("c", c20, r20),
    }
    axes = {1: _Curve("c", 0.0, 1.0), 2: _Curve("c", 0.0, math.exp(d))}
    return (m01, m12, m20), marked, mirrors, axes, _Curve("c", c01, r01)


def _chart_case_b(li: tuple[float, float, float]):
    l0, _, l2 = li
    f0, f2 = l0 / 2.0, l2 / 2.0
    th2 = 2.0 * math.atan(math.exp(-f2))
    c20, r20 = 1.0 / math.cos(th2), math.tan(th2)
    v1 = c20 + r20 * math.cosh(f0)
    m12 = _refl_vert(0.0)
    m01 = _refl_vert(v1)
    m20 = _refl_circle(c20, r20)
    marked = {2: 1j}
    mirrors = {
        "e12": _Curve("v", 0.0),
        "e01": _Curve("v", v1),
        "e20": _Curve("c", c20, r20),
    }
    axes = {2: _Curve("c", 0.0, 1.0)}
    return (m01, m12, m20), marked, mirrors, axes, _Curve("v", v1)


def _chart_case_c(li: tuple[float, float, float]):
    l0, _, _ = li
    w = 2.0 / (1.0 + math.cosh(l0 / 2.0))
    m12 = _refl_vert(0.0)
    m01 = _refl_vert(1.0)
    m20 = _refl_circle(w / 2.0, w / 2.0)
    marked: dict = {}
    mirrors = {
        "e12": _Curve("v", 0.0),
        "e01": _Curve("v", 1.0),
        "e20": _Curve("c", w / 2.0, w / 2.0),
    }
    axes: dict = {}
    return (m01, m12, m20), marked, mirrors, axes, _Curve("v", 1.0)


def build_pants_chart(spec: PantsSpec) -> _PantsChart:
    """Construct the chart of a pants: generators, boundary records, region data.

    Boundaries with positive length receive a frame mapping the standard
    vertical frame to the marked point on the directed boundary axis, with the
    pants interior standardized to the left of the direction of travel. Cusps
    receive an anchor normalizing the canonical horoball.
    """
    l = list(spec.lengths)
    zeros = [i for i in range(3) if l[i] == 0.0]
    if len(zeros) == 3:
        raise ValueError("ideal pants (three cusps degenerate) not supported")
    if len(zeros) == 0:
        rot = 0
    elif len(zeros) == 1:
        rot = zeros[0]
    else:
        rot = ({0, 1, 2} - set(zeros)).pop()
    li = tuple(l[(k + rot) % 3] for k in range(3))

    if li[1] > 0.0 and li[2] > 0.0:
        (m01, m12, m20), marked, mirrors, axes, l01_curve = _chart_case_a(li)
    elif li[2] > 0.0:
        (m01, m12, m20), marked, mirrors, axes, l01_curve = _chart_case_b(li)
    else:
        (m01, m12, m20), marked, mirrors, axes, l01_curve = _chart_case_c(li)

    a = _norm1(m01 @ m12)
    b = _norm1(m12 @ m20)
    mats = {1: a, 2: b, 0: _norm1(np.linalg.inv(a @ b))}
    words = {1: _W1, 2: _W2, 0: _W0}

    if li[0] > 0.0:
        x1, x2 = _axis_endpoints(mats[0])
        axes[0] = _Curve("c", (x1 + x2) / 2.0, abs(x2 - x1) / 2.0)

    bnd: dict = {}
    horoballs: dict = {}
    for k in range(3):
        ext = (k + rot) % 3
        B, word = mats[k], words[k]
        if li[k] > 0.0:
            if k == 0:
                ax = axes[0]
                if l01_curve.kind == "v":
                    m = _isect_vert_circle(l01_curve.a, ax.a, ax.b)
                else:
                    m = _isect_circle_circle(l01_curve.a, l01_curve.b, ax.a, ax.b)
            else:
                m = marked[k]
            bnd[ext] = _Boundary(
                kind="geo", length=li[k], word=word, frame=_frame_from_boundary(B, m)
            )
        else:
            aa, _, cc, dd = B.ravel()
            if abs(cc) < 1e-14:
                n0 = np.eye(2)
            else:
                n0 = _norm1(np.array([[(aa - dd) / (2.0 * cc), -1.0], [1.0, 0.0]]))
            Q = np.linalg.inv(n0) @ B @ n0
            q = Q[0, 1] / Q[0, 0]
            word_pos = word
            if q < 0.0:
                q = -q
                word_pos = _invert_word(word)
            s = math.sqrt(q / 2.0)
            anchor = _norm1(n0 @ np.diag([s, 1.0 / s]))
            bnd[ext] = _Boundary(kind="cusp", length=0.0, word=word_pos, anchor=anchor)
            ha, hb_, hc, hd = anchor.ravel()
            if abs(hc) < 1e-12:
                # y-scale of an upper-triangular det +-1 map is |a/d|
                horoballs[ext] = Horoball(0.0, abs(ha / hd), base_at_infinity=True)
            else:
                horoballs[ext] = Horoball(ha / hc, 1.0 / (hc * hc))

    def proxy(rec: _Boundary) -> complex:
        if rec.kind == "geo":
            return _mob(rec.frame, 1j)
        return _mob(rec.anchor, 1j)

    # Standardize geodesic-boundary frames so the pants interior lies on the
    # left of the directed axis; inverting the stored word keeps the global
    # invariant that the two words of a glued seam are mutually inverse.
    for i in list(bnd):
        rec = bnd[i]
        if rec.kind != "geo":
            continue
        f_inv = np.linalg.inv(rec.frame)
        side_signs = [
            _mob(f_inv, proxy(bnd[j])).real for j in bnd if j != i
        ]
        if not (
            all(s > 1e-9 for s in side_signs) or all(s < -1e-9 for s in side_signs)
        ):
            raise ArithmeticError(
                f"ambiguous interior side for boundary {i} of {spec}: {side_signs}"
            )
        if side_signs[0] > 0.0:
            bnd[i] = _Boundary(
                kind="geo",
                length=rec.length,
                word=_invert_word(rec.word),
                frame=_norm1(rec.frame @ _FLIP),
            )

    sides, corners = _region_data(mirrors, axes)
    return _PantsChart(
        spec=spec,
        rotation=rot,
        gens=(a, b),
        bnd=bnd,
        sides=sides,
        horoballs=dict(horoballs),
        corners=corners,
        mirror=m12,
    )


def _region_data(mirrors, axes):
    """Half-hexagon membership predicates and its finite corner list.

    The hexagon is the intersection of one half-plane or disk-complement per
    side; convexity of right-angled hexagons makes these predicates exact.
    """
    sides: list[_SidePredicate] = []
    corners: list[complex] = []

    e12, e01, e20 = mirrors["e12"], mirrors["e01"], mirrors["e20"]
    sides.append(_SidePredicate(e12, +1.0))  # x >= 0
    if e01.kind == "v":
        sides.append(_SidePredicate(e01, -1.0))  # x <= v1
    else:
        sides.append(_SidePredicate(e01, +1.0))  # outside the mirror circle
    sides.append(_SidePredicate(e20, +1.0))

    # Axis sides: the hexagon lies outside every boundary-axis circle except
    # the outer concentric axis (internal index 2 in the two-axis case),
    # which encloses it.
    internal_axes = {k: axes[k] for k in axes}
    for k, ax in internal_axes.items():
        if k == 2 and 1 in internal_axes:
            sides.append(_SidePredicate(ax, -1.0))
        else:
            sides.append(_SidePredicate(ax, +1.0))

    ax0 = internal_axes.get(0)
    if 1 in internal_axes:  # concentric-axes chart
        d_outer = internal_axes[2].b
        corners = [1j, _isect_circle_circle(0.0, 1.0, e01.a, e01.b)]
        if ax0 is not None:
            corners.append(_isect_circle_circle(e01.a, e01.b, ax0.a, ax0.b))
            corners.append(_isect_circle_circle(ax0.a, ax0.b, e20.a, e20.b))
        corners.append(_isect_circle_circle(e20.a, e20.b, 0.0, d_outer))
        corners.append(complex(0.0, d_outer))
    elif 2 in internal_axes:  # one vertical mirror pair, one axis circle
        corners = [1j, _isect_circle_circle(0.0, 1.0, e20.a, e20.b)]
        if ax0 is not None:
            corners.append(_isect_circle_circle(e20.a, e20.b, ax0.a, ax0.b))
            corners.append(_isect_vert_circle(e01.a, ax0.a, ax0.b))
    else:  # two ideal vertices, single geodesic boundary
        corners = [
            _isect_circle_circle(e20.a, e20.b, ax0.a, ax0.b),
            _isect_vert_circle(1.0, ax0.a, ax0.b),
        ]
    return tuple(sides), tuple(corners)


# ---------------------------------------------------------------------------
# Assembled surfaces


@dataclass(frozen=True)
class CuspRegion:
    """A cusp of the quotient surface, normalized by its anchor isometry.

    The anchor maps the strip chart {0 <= x < boundary_length-scaled, y >= 1}
    onto the canonical cusp region; the holonomy is the image of z -> z + 2
    under the anchor and generates the cusp stabilizer.
    """

    key: tuple
    boundary_length: float
    holonomy: Isometry
    anchor: Isometry
    word: tuple

    def horoball(self) -> Horoball:
        a, _, c, d = self.anchor.matrix.ravel()
        if abs(c) < 1e-12:
            return Horoball(0.0, abs(a / d), base_at_infinity=True)
        return Horoball(a / c, 1.0 / (c * c))


@dataclass(frozen=True)
class FuchsianSurface:
    """A glued tree of pants with explicit holonomy matrices.

    ``generators`` lists the global holonomy generators, two per pants.
    ``placements`` positions each pants chart in the common cover; the chart
    of pants p maps into the cover through placements[p]. Cusps are indexed
    by key (pants index, boundary index).
    """

    specs: tuple
    edges: tuple
    root: int
    charts: tuple
    placements: tuple
    generators: tuple
    cusps: tuple
    free_boundaries: tuple
    seam_defects: tuple

    @property
    def pants_count(self) -> int:
        return len(self.specs)

    @property
    def area_pi(self) -> Fraction:
        """Exact area as a rational multiple of pi."""
        return Fraction(2 * self.pants_count)

    @property
    def area(self) -> float:
        return float(self.area_pi) * math.pi

    def cusp_by_key(self, key: tuple) -> CuspRegion:
        for c in self.cusps:
            if c.key == key:
                return c
        raise KeyError(f"no cusp with key {key}")

    def gen_offset(self, pants_idx: int) -> int:
        return 2 * pants_idx

    def global_word(self, pants_idx: int, local_word: tuple) -> tuple:
        off = self.gen_offset(pants_idx)
        return tuple((off + gi, e) for gi, e in local_word)

    def word_image(self, word: tuple) -> Isometry:
        m = np.eye(2)
        for gi, e in word:
            g = self.generators[gi].matrix
            m = m @ (g if e > 0 else np.linalg.inv(g))
        return Isometry.from_matrix(_norm1(m))

    def boundary_holonomy(self, pants_idx: int, bidx: int) -> Isometry:
        rec = self.charts[pants_idx].bnd[bidx]
        return self.word_image(self.global_word(pants_idx, rec.word))


def assemble(specs, edges, root: int = 0) -> FuchsianSurface:
    """Glue pants along the given seam pairing into one surface.

    ``edges`` pairs boundary slots ((p, i), (q, j)); the gluing graph must be
    a tree and paired boundaries must be geodesics of equal length. Frames are
    matched flip-to-flip at the marked points (zero twist).
    """
    specs = tuple(s if isinstance(s, PantsSpec) else PantsSpec(*s) for s in specs)
    charts = tuple(build_pants_chart(s) for s in specs)
    n = len(specs)
    if not (0 <= root < n):
        raise ValueError(f"root {root} out of range")

    used: dict = {}
    adj: dict = {}
    for (p, i), (q, j) in edges:
        for (pp, ii) in ((p, i), (q, j)):
            if (pp, ii) in used:
                raise ValueError(f"boundary {(pp, ii)} glued twice")
            used[(pp, ii)] = True
            rec = charts[pp].bnd[ii]
            if rec.kind != "geo":
                raise ValueError(f"cannot glue cusp boundary {(pp, ii)}")
        lp = charts[p].bnd[i].length
        lq = charts[q].bnd[j].length
        if abs(lp - lq) > 1e-9:
            raise ValueError(
                f"seam length mismatch at {(p, i)}~{(q, j)}: {lp} vs {lq}"
            )
        adj.setdefault(p, []).append((i, q, j))
        adj.setdefault(q, []).append((j, p, i))

    placements: dict = {root: np.eye(2)}
    todo = [root]
    while todo:
        p = todo.pop()
        for (i, q, j) in adj.get(p, []):
            if q in placements:
                continue
            fp = charts[p].bnd[i].frame
            fq = charts[q].bnd[j].frame
            placements[q] = _norm1(placements[p] @ fp @ _FLIP @ np.linalg.inv(fq))
            todo.append(q)
    if len(placements) != n:
        raise ValueError("gluing graph is not connected")
    if len(edges) != n - 1:
        raise ValueError("gluing graph must be a tree")

    gens = []
    for p in range(n):
        g_p = placements[p]
        g_inv = np.linalg.inv(g_p)
        for g in charts[p].gens:
            gens.append(Isometry.from_matrix(_norm1(g_p @ g @ g_inv)))

    surf_defects = []
    for (p, i), (q, j) in edges:
        bp = (
            placements[p]
            @ _local_word_image(charts[p], charts[p].bnd[i].word)
            @ np.linalg.inv(placements[p])
        )
        bq = (
            placements[q]
            @ _local_word_image(charts[q], charts[q].bnd[j].word)
            @ np.linalg.inv(placements[q])
        )
        e = _norm1(bp @ bq)
        surf_defects.append(
            float(min(np.abs(e - np.eye(2)).max(), np.abs(e + np.eye(2)).max()))
        )

    cusps = []
    free = []
    placements_t = tuple(placements[p] for p in range(n))
    surface = FuchsianSurface(
        specs=specs,
        edges=tuple(tuple(map(tuple, e)) for e in edges),
        root=root,
        charts=charts,
        placements=placements_t,
        generators=tuple(gens),
        cusps=(),
        free_boundaries=(),
        seam_defects=tuple(surf_defects),
    )
    for p in range(n):
        for i, rec in sorted(charts[p].bnd.items()):
            if (p, i) in used:
                continue
            if rec.kind == "cusp":
                word = surface.global_word(p, rec.word)
                anchor = Isometry.from_matrix(_norm1(placements[p] @ rec.anchor))
                cusps.append(
                    CuspRegion(
                        key=(p, i),
                        boundary_length=CUSP_BOUNDARY_LENGTH,
                        holonomy=surface.word_image(word),
                        anchor=anchor,
                        word=word,
                    )
                )
            else:
                free.append((p, i))
    return FuchsianSurface(
        specs=specs,
        edges=surface.edges,
        root=root,
        charts=charts,
        placements=placements_t,
        generators=tuple(gens),
        cusps=tuple(cusps),
        free_boundaries=tuple(free),
        seam_defects=tuple(surf_defects),
    )


def _local_word_image(chart: _PantsChart, word: tuple) -> np.ndarray:
    m = np.eye(2)
    for gi, e in word:
        g = chart.gens[gi]
        m = m @ (g if e > 0 else np.linalg.inv(g))
    return _norm1(m)


def pants_holonomy(spec) -> FuchsianSurface:
    """A single pants as a surface (its geodesic boundaries left free)."""
    if not isinstance(spec, PantsSpec):
        spec = PantsSpec(*spec)
    return assemble([spec], [], root=0)


def glue(parts, pairing) -> FuchsianSurface:
    """Glue several surfaces-with-boundary along free-boundary pairs.

    ``pairing`` entries are ((part, pants, bidx), (part, pants, bidx)); the
    referenced boundaries must be free, of equal length, and the combined
    graph must remain a tree. Pants indices are re-based part by part.
    """
    offsets = []
    specs = []
    edges = []
    for part in parts:
        offsets.append(len(specs))
        specs.extend(part.specs)
        for (p, i), (q, j) in part.edges:
            edges.append(((p + offsets[-1], i), (q + offsets[-1], j)))
    for (ap, app, ab), (bp, bpp, bb) in pairing:
        if (app, ab) not in parts[ap].free_boundaries:
            raise ValueError(f"boundary {(app, ab)} of part {ap} is not free")
        if (bpp, bb) not in parts[bp].free_boundaries:
            raise ValueError(f"boundary {(bpp, bb)} of part {bp} is not free")
        edges.append(((app + offsets[ap], ab), (bpp + offsets[bp], bb)))
    return assemble(specs, edges, root=offsets[0] + parts[0].root)


# ---------------------------------------------------------------------------
# Panted surfaces and deformation


@dataclass(frozen=True)
class PantedSurface:
    """A surface with one distinguished pants whose complement has two parts."""

    surface: FuchsianSurface
    p_index: int
    d0: int  # boundary slot of the distinguished pants that deforms
    d1: int
    d2: int

    def __post_init__(self) -> None:
        comps = _components_without(self.surface, self.p_index)
        if len(comps) != 2:
            raise ValueError(
                f"complement of distinguished pants has {len(comps)} components"
            )

    @property
    def alpha(self) -> float:
        return self.surface.specs[self.p_index].lengths[self.d0]


def _components_without(surface: FuchsianSurface, skip: int) -> list:
    nodes = [p for p in range(surface.pants_count) if p != skip]
    adj: dict = {p: [] for p in nodes}
    for (p, _), (q, _) in surface.edges:
        if p != skip and q != skip:
            adj[p].append(q)
            adj[q].append(p)
    comps = []
    seen: set = set()
    for start in nodes:
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in comp:
                    comp.add(v)
                    stack.append(v)
        seen |= comp
        comps.append(comp)
    return comps


def alpha_deformation(ps: PantedSurface, alpha: float) -> PantedSurface:
    """Replace the distinguished boundary slot's length by alpha.

    alpha = 0 restores the cusp; alpha > 0 opens it to a free geodesic
    boundary of that length. All other pants are untouched, so chart-level
    point and cusp identities transfer across the family.
    """
    if alpha < 0.0 or not math.isfinite(alpha):
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    surf = ps.surface
    new_specs = list(surf.specs)
    old = new_specs[ps.p_index].lengths
    ls = list(old)
    ls[ps.d0] = float(alpha)
    new_specs[ps.p_index] = PantsSpec(*ls)
    new_surface = assemble(new_specs, surf.edges, root=surf.root)
    return PantedSurface(
        surface=new_surface, p_index=ps.p_index, d0=ps.d0, d1=ps.d1, d2=ps.d2
    )


def cusp_shorten(c: CuspRegion, t: float) -> CuspRegion:
    """The cusp region pushed in distance t (boundary length scales by e^-t)."""
    if t < 0.0 or not math.isfinite(t):
        raise ValueError(f"shorten distance must be >= 0, got {t}")
    s = math.exp(0.5 * t)
    scale = Isometry(s, 0.0, 0.0, 1.0 / s)
    return CuspRegion(
        key=c.key,
        boundary_length=c.boundary_length * math.exp(-t),
        holonomy=c.holonomy,
        anchor=c.anchor @ scale,
        word=c.word,
    )


# ---------------------------------------------------------------------------
# Serialization


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _mat_line(m: np.ndarray) -> str:
    return " ".join(_fmt(float(v)) for v in np.asarray(m).ravel())


def _parse_mat(tokens) -> np.ndarray:
    vals = [float(t) for t in tokens]
    return np.array(vals, dtype=float).reshape(2, 2)


def surface_to_text(surface: FuchsianSurface) -> str:
    """Plain-text serialization; matrices at 17 significant digits."""
    out = io.StringIO()
    out.write("cuspflow-surface 1\n")
    out.write(f"pants {surface.pants_count}\n")
    for s in surface.specs:
        out.write("spec " + " ".join(_fmt(l) for l in s.lengths) + "\n")
    out.write(f"root {surface.root}\n")
    out.write(f"edges {len(surface.edges)}\n")
    for (p, i), (q, j) in surface.edges:
        out.write(f"edge {p} {i} {q} {j}\n")
    for p in range(surface.pants_count):
        out.write(f"placement {p} " + _mat_line(surface.placements[p]) + "\n")
    for g in surface.generators:
        out.write("generator " + _mat_line(g.matrix) + "\n")
    for c in surface.cusps:
        word = ",".join(f"{gi}:{e}" for gi, e in c.word)
        out.write(
            f"cusp {c.key[0]} {c.key[1]} {_fmt(c.boundary_length)} {word} "
            + _mat_line(c.anchor.matrix)
            + "\n"
        )
    return out.getvalue()


def surface_from_text(text: str) -> FuchsianSurface:
    """Rebuild a surface from its serialization.

    The combinatorial data is reconstructed from the stored specs and edges;
    stored matrices are then substituted verbatim so a round trip reproduces
    them bit-for-bit, after a consistency check against the rebuilt values.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines[0].split() != ["cuspflow-surface", "1"]:
        raise ValueError(f"unrecognized header: {lines[0]!r}")
    idx = 1
    n = int(lines[idx].split()[1])
    idx += 1
    specs = []
    for _ in range(n):
        parts = lines[idx].split()
        assert parts[0] == "spec"
        specs.append(PantsSpec(*map(float, parts[1:4])))
        idx += 1
    root = int(lines[idx].split()[1])
    idx += 1
    ne = int(lines[idx].split()[1])
    idx += 1
    edges = []
    for _ in range(ne):
        parts = lines[idx].split()
        assert parts[0] == "edge"
        p, i, q, j = map(int, parts[1:5])
        edges.append(((p, i), (q, j)))
        idx += 1
    rebuilt = assemble(specs, edges, root=root)

    placements = list(rebuilt.placements)
    generators = list(rebuilt.generators)
    cusps = {c.key: c for c in rebuilt.cusps}
    gen_i = 0
    for ln in lines[idx:]:
        parts = ln.split()
        if parts[0] == "placement":
            p = int(parts[1])
            m = _parse_mat(parts[2:6])
            _check_close(m, placements[p], "placement")
            placements[p] = m
        elif parts[0] == "generator":
            m = _parse_mat(parts[1:5])
            _check_close(m, generators[gen_i].matrix, "generator")
            generators[gen_i] = Isometry.from_matrix(m)
            gen_i += 1
        elif parts[0] == "cusp":
            key = (int(parts[1]), int(parts[2]))
            m = _parse_mat(parts[5:9])
            old = cusps[key]
            _check_close(m, old.anchor.matrix, "cusp anchor")
            cusps[key] = CuspRegion(
                key=key,
                boundary_length=float(parts[3]),
                holonomy=old.holonomy,
                anchor=Isometry.from_matrix(m),
                word=old.word,
            )
        else:
            raise ValueError(f"unrecognized record: {parts[0]!r}")
    ordered = tuple(cusps[c.key] for c in rebuilt.cusps)
    return FuchsianSurface(
        specs=rebuilt.specs,
        edges=rebuilt.edges,
        root=rebuilt.root,
        charts=rebuilt.charts,
        placements=tuple(placements),
        generators=tuple(generators),
        cusps=ordered,
        free_boundaries=rebuilt.free_boundaries,
        seam_defects=rebuilt.seam_defects,
    )


def _check_close(stored: np.ndarray, rebuilt: np.ndarray, what: str) -> None:
    if min(np.abs(stored - rebuilt).max(), np.abs(stored + rebuilt).max()) > 1e-9:
        raise ValueError(f"stored {what} disagrees with rebuilt value")


# ---------------------------------------------------------------------------
# Uniform sampling of surface regions


@dataclass(frozen=True)
class SurfacePoint:
    """A surface point in pants-chart coordinates, transferable across builds.

    kind 'chart' places z in the half-hexagon chart of the pants, with flip
    selecting the mirror copy; kind 'cusp' places z = x + iy in the strip
    chart of cusp (pants, bidx), where y = e^depth.
    """

    pants: int
    kind: str
    z: complex
    flip: bool = False
    bidx: int = -1

    def lift(self, surface: FuchsianSurface) -> HPoint:
        if self.kind == "chart":
            w = -self.z.conjugate() if self.flip else self.z
            return HPoint.from_complex(_mob(surface.placements[self.pants], w))
        chart = surface.charts[self.pants]
        anchor = surface.placements[self.pants] @ chart.bnd[self.bidx].anchor
        return HPoint.from_complex(_mob(anchor, self.z))

    def remap(self, pants: int) -> "SurfacePoint":
        return SurfacePoint(pants, self.kind, self.z, self.flip, self.bidx)


@dataclass(frozen=True)
class Stratum:
    """A sampling cell: the thick part of one pants, or a cusp depth band."""

    kind: str  # 'thick' or 'band'
    pants: int = -1
    key: tuple = ()
    depth_lo: float = 0.0
    depth_hi: float = math.inf


def stratum_area(surface: FuchsianSurface, st: Stratum) -> float:
    if st.kind == "thick":
        k = surface.specs[st.pants].cusp_count
        return 2.0 * math.pi - CUSP_BOUNDARY_LENGTH * k
    if st.kind == "band":
        return CUSP_BOUNDARY_LENGTH * (
            math.exp(-st.depth_lo) - math.exp(-st.depth_hi)
        )
    raise ValueError(f"unknown stratum kind {st.kind!r}")


def _circle_circle_points(x1, y1, r1, x2, y2, r2):
    dx, dy = x2 - x1, y2 - y1
    d2 = dx * dx + dy * dy
    if d2 == 0.0:
        return []
    d = math.sqrt(d2)
    a = (r1 * r1 - r2 * r2 + d2) / (2.0 * d)
    h2 = r1 * r1 - a * a
    if h2 < 0.0:
        return []
    h = math.sqrt(h2)
    mx, my = x1 + a * dx / d, y1 + a * dy / d
    return [
        (mx + h * dy / d, my - h * dx / d),
        (mx - h * dy / d, my + h * dx / d),
    ]


def _horoball_cut_heights(chart: _PantsChart) -> list:
    """Heights where canonical horocycles cross the hexagon sides.

    Together with the corner heights these bound the thick region's extent
    from below: the height function on region boundary arcs attains its
    minima at corners or at horocycle crossings.
    """
    ys = []
    for hb in chart.horoballs.values():
        if hb.base_at_infinity:
            continue
        b, s = hb.base, hb.size
        for sp in chart.sides:
            cv = sp.curve
            if cv.kind == "v":
                disc = s * s - 4.0 * (cv.a - b) ** 2
                if disc >= 0.0:
                    ys.append((s - math.sqrt(disc)) / 2.0)
            else:
                pts = _circle_circle_points(cv.a, 0.0, cv.b, b, s / 2.0, s / 2.0)
                ys.extend(p[1] for p in pts if p[1] > 1e-15)
    return ys


def _thick_bbox(chart: _PantsChart) -> tuple[float, float, float, float]:
    xs = [c.real for c in chart.corners]
    ys = [c.imag for c in chart.corners]
    enclosing = []  # (center, radius) of circles the region lies inside of
    for sp in chart.sides:
        cv = sp.curve
        if cv.kind == "c":
            if sp.sign < 0.0:
                enclosing.append((cv.a, cv.b))
            else:
                xs.append(cv.a + cv.b)
                ys.append(cv.b)
        else:
            xs.append(cv.a)
    x_hi = min(a + b for a, b in enclosing) if enclosing else max(xs)
    # With an ideal vertex at infinity the region runs up to the canonical
    # horoball level; otherwise its sides bound it.
    inf_levels = [hb.size for hb in chart.horoballs.values() if hb.base_at_infinity]
    if inf_levels:
        y_hi = min(inf_levels)
    elif enclosing:
        y_hi = min(b for _, b in enclosing)
    else:
        y_hi = max(ys)
    # Intersections exactly at an ideal vertex come out at height ~0 up to
    # roundoff; no true side crossing in these charts is anywhere near that
    # low, so a fixed threshold separates the two.
    y_cand = [c.imag for c in chart.corners] + [
        v for v in _horoball_cut_heights(chart) if v > 1e-9
    ]
    y_lo = min(y_cand) * (1.0 - 1e-9)
    if not (y_lo > 1e-6):
        raise ArithmeticError(f"thick region floor suspiciously low: {y_lo}")
    return 0.0, x_hi, y_lo, y_hi


def _thick_mask(chart: _PantsChart, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    ok = np.ones(x.shape, dtype=bool)
    for sp in chart.sides:
        ok &= sp.margin(x, y) >= 0.0
    for hb in chart.horoballs.values():
        if hb.base_at_infinity:
            ok &= y < hb.size
        else:
            dx = x - hb.base
            ok &= dx * dx + y * y >= hb.size * y
    return ok


def sample_thick(
    surface: FuchsianSurface, pants: int, count: int, rng: np.random.Generator
) -> list:
    """Uniform points of the thick part (pants minus canonical cusp regions).

    Rejection sampling in (x, 1/y), where the hyperbolic area element is
    Lebesgue; a fair coin picks the mirror half of the doubled hexagon.
    """
    chart = surface.charts[pants]
    x_lo, x_hi, y_lo, y_hi = _thick_bbox(chart)
    u_lo, u_hi = 1.0 / y_hi, 1.0 / y_lo
    out: list = []
    dry = 0
    while len(out) < count:
        m = max(1024, 4 * (count - len(out)))
        xs = rng.uniform(x_lo, x_hi, m)
        ys = 1.0 / rng.uniform(u_lo, u_hi, m)
        keep = _thick_mask(chart, xs, ys)
        if not keep.any():
            dry += 1
            if dry > 200:
                raise ArithmeticError(f"thick sampler starved for pants {pants}")
            continue
        flips = rng.integers(0, 2, int(keep.sum()))
        for xv, yv, fl in zip(xs[keep], ys[keep], flips):
            out.append(SurfacePoint(pants, "chart", complex(xv, yv), flip=bool(fl)))
            if len(out) == count:
                break
    return out


def sample_band(
    surface: FuchsianSurface,
    key: tuple,
    depth_lo: float,
    depth_hi: float,
    count: int,
    rng: np.random.Generator,
) -> list:
    """Uniform points of a cusp band depth in [depth_lo, depth_hi)."""
    if not (0.0 <= depth_lo < depth_hi):
        raise ValueError(f"bad band depths [{depth_lo}, {depth_hi})")
    xs = rng.uniform(0.0, CUSP_BOUNDARY_LENGTH, count)
    us = rng.uniform(math.exp(-depth_hi) if math.isfinite(depth_hi) else 0.0,
                     math.exp(-depth_lo), count)
    p, bidx = key
    return [
        SurfacePoint(p, "cusp", complex(x, 1.0 / u), bidx=bidx)
        for x, u in zip(xs, us)
    ]


def sample_strata(
    surface: FuchsianSurface, strata, total: int, rng: np.random.Generator
) -> list:
    """Area-proportional sample across strata; returns (point, stratum index)."""
    areas = np.array([stratum_area(surface, st) for st in strata], dtype=float)
    counts = rng.multinomial(total, areas / areas.sum())
    out: list = []
    for idx, (st, c) in enumerate(zip(strata, counts)):
        if c == 0:
            continue
        if st.kind == "thick":
            pts = sample_thick(surface, st.pants, int(c), rng)
        else:
            pts = sample_band(surface, st.key, st.depth_lo, st.depth_hi, int(c), rng)
        out.extend((p, idx) for p in pts)
    return out
