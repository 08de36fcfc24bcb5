"""Independent reference implementations used to cross-check the package.

Everything here trades speed for obviousness: plain loops, no reduction
step, no shared helpers with the production code paths beyond the public
data types.
"""

import math

import numpy as np

from cuspflow import CuspDensity, FuchsianSurface, HPoint


def hyp_ball_mc(r: float, n: int, rng: np.random.Generator) -> float:
    """Monte Carlo hyperbolic area of a radius-r ball.

    Samples the bounding box of the ball around i in (x, u=1/y) coordinates,
    where the hyperbolic area element is dx du.
    """
    yc, re = math.cosh(r), math.sinh(r)
    u_lo, u_hi = 1.0 / (yc + re), 1.0 / (yc - re)
    x = rng.uniform(-re, re, n)
    u = rng.uniform(u_lo, u_hi, n)
    y = 1.0 / u
    inside = x * x + (y - yc) ** 2 <= re * re
    return 2.0 * re * (u_hi - u_lo) * inside.mean()


def ball_horoball_mc(r: float, t: float, n: int, rng: np.random.Generator) -> float:
    """Monte Carlo area of (radius-r ball at i) ∩ (horoball y ≥ e^t).

    Same (x, u) box trick, with the u range clipped to the horoball.
    """
    yc, re = math.cosh(r), math.sinh(r)
    u_lo = 1.0 / (yc + re)
    u_hi = min(1.0 / max(yc - re, 1e-300), math.exp(-t))
    if u_hi <= u_lo:
        return 0.0
    x = rng.uniform(-re, re, n)
    u = rng.uniform(u_lo, u_hi, n)
    y = 1.0 / u
    inside = x * x + (y - yc) ** 2 <= re * re
    return 2.0 * re * (u_hi - u_lo) * inside.mean()


def geodesic_dist(z: complex, w: complex) -> float:
    """Distance by arc length along the explicit geodesic, not the cosh formula.

    Vertical pairs integrate dy/y directly.  Otherwise the geodesic is the
    half-circle through both points centered on the real axis; ds = |dz|/y
    along it integrates in closed form to log tan(theta/2).
    """
    if abs(z.real - w.real) < 1e-14:
        return abs(math.log(w.imag / z.imag))
    c = (abs(w) ** 2 - abs(z) ** 2) / (2.0 * (w.real - z.real))
    rad = abs(z - c)
    th1 = math.atan2(z.imag, z.real - c)
    th2 = math.atan2(w.imag, w.real - c)
    return abs(math.log(math.tan(th2 / 2.0)) - math.log(math.tan(th1 / 2.0)))


def axes_distance(m1, m2) -> float:
    """Distance between the axes of two hyperbolic matrices.

    Builds each axis as the half-circle between the matrix's real fixed
    points and minimizes pairwise distance numerically (coarse grid plus a
    bounded refinement), avoiding any trace identity.
    """
    from scipy.optimize import minimize_scalar

    def endpoints(m):
        a, b, c, d = np.asarray(m).ravel()
        disc = math.sqrt((a + d) ** 2 - 4.0)
        return (a - d + disc) / (2.0 * c), (a - d - disc) / (2.0 * c)

    def geo_point(p, q, s):
        c, rad = (p + q) / 2.0, abs(q - p) / 2.0
        th = math.pi / (1.0 + math.exp(-s))
        return complex(c + rad * math.cos(th), rad * math.sin(th))

    e1, e2 = endpoints(m1), endpoints(m2)

    def d_at(s1: float) -> float:
        z = geo_point(*e1, s1)
        s0 = min(np.linspace(-6.0, 6.0, 61), key=lambda s2: _dist(z, geo_point(*e2, s2)))
        r = minimize_scalar(
            lambda s2: _dist(z, geo_point(*e2, s2)),
            bounds=(s0 - 0.3, s0 + 0.3), method="bounded",
        )
        return r.fun

    s_best = min(np.linspace(-6.0, 6.0, 61), key=d_at)
    r = minimize_scalar(d_at, bounds=(s_best - 0.3, s_best + 0.3), method="bounded")
    return r.fun


def _mob(m, z: complex) -> complex:
    return (m[0][0] * z + m[0][1]) / (m[1][0] * z + m[1][1])


def _dist(z: complex, w: complex) -> float:
    q = 1.0 + abs(z - w) ** 2 / (2.0 * z.imag * w.imag)
    return math.acosh(max(q, 1.0))


def _matkey(m) -> tuple:
    flat = [m[0][0], m[0][1], m[1][0], m[1][1]]
    for v in flat:
        if abs(v) > 1e-9:
            if v < 0:
                flat = [-u for u in flat]
            break
    return tuple(round(v * 1e9) for v in flat)


def brute_force_translates(
    surface: FuchsianSurface,
    point: HPoint,
    r: float,
    f: CuspDensity,
    slack: float = 3.0,
) -> set:
    """Every translate horoball meeting the r-ball, by unpruned-word search.

    Walks words over the global generators breadth first, deduplicating by
    the sign-normalized rounded matrix, and keeps elements while any anchor
    image stays within an over-generous radius of the point. Returns a set
    of (cusp key, rounded base data) tuples for set comparison.
    """
    gens = [g.matrix for g in surface.generators]
    mats = gens + [np.linalg.inv(g) for g in gens]
    depth = {}
    for key, _val, d in f.entries:
        depth[key] = min(d, depth.get(key, math.inf))
    cusps = [c for c in surface.cusps if c.key in depth]
    anchors = [c.anchor.matrix for c in cusps]
    anchor_pts = [_mob(a, 1j) for a in anchors]
    base = complex(point.z)

    # A point buried u0 deep inside some canonical horoball spends u0 of any
    # word path just climbing back out, so the keep radius must stretch by
    # that much or the walk dies inside the cusp.
    u0 = 0.0
    for c in surface.cusps:
        a, _, cc, dd = c.anchor.matrix.ravel()
        if abs(cc) < 1e-12:
            sd = math.log(abs(a / dd) / base.imag)
        else:
            sd = math.log(abs(base - a / cc) ** 2 * (cc * cc) / base.imag)
        u0 = max(u0, -sd)
    r_keep = max(r - min(depth.values()), 0.0) + 1.0 + slack + u0

    out = set()

    def try_collect(m) -> None:
        for c, a in zip(cusps, anchors):
            na = m @ a
            aa, _, cc, dd = na.ravel()
            if abs(cc) < 1e-12:
                size = abs(aa / dd)
                sd = math.log(size / base.imag)
                kk = (c.key, True, 0.0, round(math.log(size) * 1e6))
            else:
                hb_base = aa / cc
                size = 1.0 / (cc * cc)
                sd = math.log(abs(base - hb_base) ** 2 / (size * base.imag))
                kk = (c.key, False, round(hb_base * 1e6), round(math.log(size) * 1e6))
            if sd + depth[c.key] < r:
                out.add(kk)

    ident = np.eye(2)
    frontier = [ident]
    seen = {_matkey(ident)}
    try_collect(ident)
    while frontier:
        nxt = []
        for m in frontier:
            for g in mats:
                c = g @ m
                c = c / math.sqrt(abs(np.linalg.det(c)))
                k = _matkey(c)
                if k in seen:
                    continue
                if min(_dist(_mob(c, p), base) for p in anchor_pts) > r_keep:
                    continue
                seen.add(k)
                nxt.append(c)
                try_collect(c)
        frontier = nxt
    return out


def translate_set_keys(ts) -> set:
    """The comparable key set of an enumerate_translates result."""
    out = set()
    for it in ts.items:
        hb = it.horoball
        if hb.base_at_infinity:
            out.add((it.cusp_key, True, 0.0, round(math.log(hb.size) * 1e6)))
        else:
            out.add(
                (it.cusp_key, False, round(hb.base * 1e6), round(math.log(hb.size) * 1e6))
            )
    return out
