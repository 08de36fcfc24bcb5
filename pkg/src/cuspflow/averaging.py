"""Ball averages of cusp-supported densities over the covering group.

A density assigns a constant value to a shrunk canonical cusp region; its
ball average at a point is a sum of ball/horoball intersection areas over all
translates of the supporting horoballs under the covering group. Translates
are enumerated by breadth-first search over the group generators, pruned by
the hyperbolic distance from the query point to the anchor orbit, and
deduplicated numerically (the gluing relations make distinct words coincide).

The search must not silently truncate: exceeding the node or word-length
budget raises BudgetExceeded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import HPoint, Horoball, ball_area, ball_horoball_area_batch
from .surfaces import CUSP_BOUNDARY_LENGTH, FuchsianSurface

_DEDUP_TOL = 1e-6
_PAR = np.array([[1.0, -2.0], [0.0, 1.0]])


class BudgetExceeded(RuntimeError):
    """Raised when enumeration would pass its node or word-length budget."""

    def __init__(self, message: str, nodes: int, word_len: int) -> None:
        super().__init__(message)
        self.nodes = nodes
        self.word_len = word_len


@dataclass(frozen=True)
class CuspDensity:
    """A nonuniform density supported on shrunk canonical cusp regions.

    Each entry (key, value, depth) contributes value times the indicator of
    the cusp region of ``key`` pushed in by ``depth``. Entries are constant
    on their region; the same cusp may appear at several depths.
    """

    surface: FuchsianSurface
    entries: tuple

    def __post_init__(self) -> None:
        keys = {c.key for c in self.surface.cusps}
        for key, value, depth in self.entries:
            if key not in keys:
                raise ValueError(f"density references unknown cusp {key}")
            if not (math.isfinite(value) and math.isfinite(depth)):
                raise ValueError(f"bad density entry {(key, value, depth)}")
            if value < 0.0:
                raise ValueError(f"negative density value in entry {(key, value, depth)}")
            if depth < 0.0:
                raise ValueError(f"negative shrink depth in entry {(key, value, depth)}")

    def support_keys(self) -> tuple:
        return tuple(sorted({k for k, _, _ in self.entries}))

    def scaled(self, s: float) -> "CuspDensity":
        return CuspDensity(
            self.surface, tuple((k, v * s, d) for k, v, d in self.entries)
        )

    def __add__(self, other: "CuspDensity") -> "CuspDensity":
        if other.surface is not self.surface:
            raise ValueError("cannot add densities on different surfaces")
        merged: dict = {}
        for k, v, d in self.entries + other.entries:
            merged[(k, d)] = merged.get((k, d), 0.0) + v
        entries = tuple(
            (k, v, d) for (k, d), v in sorted(merged.items()) if v != 0.0
        )
        return CuspDensity(self.surface, entries)


def cusp_flow(f: CuspDensity, t: float, scale: float = 1.0) -> CuspDensity:
    """Push the density mass cuspward: depth grows by t, value by scale * e^t.

    With scale = 1 the integral of the density is preserved.
    """
    if t < 0.0 or not math.isfinite(t):
        raise ValueError(f"flow distance must be >= 0, got {t}")
    return CuspDensity(
        f.surface,
        tuple((k, v * scale * math.exp(t), d + t) for k, v, d in f.entries),
    )


def l1_norm(f: CuspDensity) -> float:
    """Integral of |f| against the area-normalized measure of the surface."""
    total = sum(
        abs(v) * CUSP_BOUNDARY_LENGTH * math.exp(-d) for _, v, d in f.entries
    )
    return total / f.surface.area


def density_integral(f: CuspDensity) -> float:
    """Signed integral of f against the area-normalized measure."""
    total = sum(
        v * CUSP_BOUNDARY_LENGTH * math.exp(-d) for _, v, d in f.entries
    )
    return total / f.surface.area


@dataclass(frozen=True)
class TranslateItem:
    """One covering translate of a canonical cusp horoball.

    ``signed_distance`` is from the query point to the canonical horoball
    boundary; a density entry of depth d on this cusp meets a ball of radius
    r iff signed_distance + d < r.
    """

    word: tuple
    cusp_key: tuple
    horoball: Horoball
    signed_distance: float


@dataclass(frozen=True)
class TranslateSet:
    point: HPoint
    radius: float
    items: tuple
    node_count: int

    def for_cusp(self, key: tuple) -> list:
        return [it for it in self.items if it.cusp_key == key]


# Per-surface arrays for the vectorized orbit search, keyed by object id.
_COVER_CACHE: dict = {}
_COVER_CACHE_MAX = 32


@dataclass
class _Cover:
    gens_arr: np.ndarray  # generators followed by their inverses
    signed: tuple  # signed generator index per gens_arr row
    anchors: list
    anchors_inv: list
    anchor_pts: np.ndarray
    cusp_keys: list
    cusp_words: list


def _cover(surface: FuchsianSurface) -> _Cover:
    key = id(surface)
    hit = _COVER_CACHE.get(key)
    if hit is not None and hit[0] is surface:
        return hit[1]
    mats = [g.matrix for g in surface.generators]
    gens_arr = np.array(mats + [np.linalg.inv(m) for m in mats])
    signed = tuple(
        [(i, +1) for i in range(len(mats))] + [(i, -1) for i in range(len(mats))]
    )
    anchors = [c.anchor.matrix for c in surface.cusps]
    cover = _Cover(
        gens_arr=gens_arr,
        signed=signed,
        anchors=anchors,
        anchors_inv=[np.linalg.inv(a) for a in anchors],
        anchor_pts=np.array([_mobc(a, 1j) for a in anchors]),
        cusp_keys=[c.key for c in surface.cusps],
        cusp_words=[c.word for c in surface.cusps],
    )
    if len(_COVER_CACHE) >= _COVER_CACHE_MAX:
        _COVER_CACHE.pop(next(iter(_COVER_CACHE)))
    _COVER_CACHE[key] = (surface, cover)
    return cover


def _mobc(m: np.ndarray, z: complex) -> complex:
    a, b, c, d = m.ravel()
    return (a * z + b) / (c * z + d)


def _apply_pts(ms: np.ndarray, pts: np.ndarray) -> np.ndarray:
    a = ms[:, 0, 0][:, None]
    b = ms[:, 0, 1][:, None]
    c = ms[:, 1, 0][:, None]
    d = ms[:, 1, 1][:, None]
    # a point mapped to (numerical) infinity just prunes as infinitely far
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        return (a * pts[None, :] + b) / (c * pts[None, :] + d)


def _distv(z: complex, pts: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        q = 1.0 + np.abs(pts - z) ** 2 / (2.0 * pts.imag * z.imag)
    return np.arccosh(np.maximum(1.0, np.nan_to_num(q, nan=np.inf)))


def _word_pow(word: tuple, n: int) -> tuple:
    if n >= 0:
        return word * n
    inv = tuple((gi, -e) for gi, e in reversed(word))
    return inv * (-n)


def reduce_point(
    surface: FuchsianSurface, p: HPoint, max_iters: int = 400
) -> tuple[np.ndarray, tuple, float]:
    """Move p by a deck transformation toward the anchor orbit.

    Returns (h, word of h, residual distance): h is a covering-group element
    whose word is expressed in the global generators, and the residual is the
    distance from h(p) to the nearest cusp anchor point. Greedy single-step
    descent, with parabolic re-centering jumps on horocyclic plateaus and a
    two-step lookahead as fallbacks.
    """
    h, hword, cur, _ = _reduce_point_tracked(surface, p, max_iters)
    return h, hword, cur


def _reduce_point_tracked(
    surface: FuchsianSurface, p: HPoint, max_iters: int = 400
) -> tuple[np.ndarray, tuple, float, complex]:
    """reduce_point plus the reduced image of p itself.

    Points handed to us deep in a cusp chart have their position encoded in
    poorly scaled float coordinates; applying the reduction step by step in
    extended precision keeps the image accurate to ~1e-12 where a single
    double-precision application can lose five more digits.
    """
    cov = _cover(surface)
    h = np.eye(2)
    hword: tuple = ()
    w = p.z
    w_ld = np.clongdouble(p.z)

    def score(z: complex) -> float:
        return float(_distv(z, cov.anchor_pts).min())

    cur = score(w)
    for _ in range(max_iters):
        best = cur
        best_m = None
        best_w: tuple = ()
        for g, sg in zip(cov.gens_arr, cov.signed):
            d2 = score(_mobc(g, w))
            if d2 < best - 1e-12:
                best, best_m, best_w = d2, g, (sg,)
        if best_m is None:
            for c in range(len(cov.anchors)):
                ch = _mobc(cov.anchors_inv[c], w)
                n = round(ch.real / 2.0)
                if n == 0:
                    continue
                pw = np.linalg.matrix_power(_PAR if n > 0 else np.linalg.inv(_PAR), abs(n))
                j = cov.anchors[c] @ pw @ cov.anchors_inv[c]
                j /= math.sqrt(abs(np.linalg.det(j)))
                d2 = score(_mobc(j, w))
                if d2 < best - 1e-12:
                    # _PAR inverts the canonical chart translation, so the
                    # jump is holonomy^-n.
                    best, best_m, best_w = d2, j, _word_pow(cov.cusp_words[c], -n)
        if best_m is None:
            for g1, s1 in zip(cov.gens_arr, cov.signed):
                w1 = _mobc(g1, w)
                for g2, s2 in zip(cov.gens_arr, cov.signed):
                    d2 = score(_mobc(g2, w1))
                    if d2 < best - 1e-12:
                        m = g2 @ g1
                        best, best_m, best_w = d2, m / math.sqrt(abs(np.linalg.det(m))), (s2, s1)
        if best_m is None:
            break
        h = best_m @ h
        h /= math.sqrt(abs(np.linalg.det(h)))
        hword = best_w + hword
        a, b, c, d = (np.clongdouble(v) for v in best_m.ravel())
        w_ld = (a * w_ld + b) / (c * w_ld + d)
        w = complex(w_ld)
        cur = best
    return h, hword, cur, w_ld


def enumerate_translates(
    surface: FuchsianSurface,
    point: HPoint,
    r: float,
    f: CuspDensity,
    *,
    wander: float = 2.0,
    max_translates: int = 1_000_000,
    max_word_len: int | None = None,
    reduce: bool = True,
    deep_shortcut: bool = True,
) -> TranslateSet:
    """All covering translates of f's support horoballs meeting the r-ball.

    The search walks the generator graph breadth first, keeping group
    elements that move some anchor point within the pruning radius of the
    query point, and collects each translate horoball whose shrunk copy (at
    the least entry depth of its cusp) still meets the ball. Frontier
    elements are deduplicated by their joint action on the anchor points.

    reduce=True first re-centers the query point by a deck transformation,
    which keeps the search radius independent of where in the cover the
    point was handed to us; results are mapped back to the original frame.

    max_word_len=None leaves letters governed by the node budget (every
    round that keeps the frontier alive adds at least one deduplicated
    element, so termination is guaranteed). Parabolic chains gain distance
    only logarithmically in word length, crossing a cusp plateau inside
    radius r_front in ~e^{r_front/2} letters; a fixed letter cap would trip
    on them spuriously. Pass one explicitly to bound work instead.

    deep_shortcut=False disables the closed-form answer for points buried
    deeper in a cusp than every effective radius, forcing the search; that
    path exists so the two can be checked against each other.
    """
    if f.surface is not surface:
        raise ValueError("density does not live on this surface")
    if r <= 0.0 or not math.isfinite(r):
        raise ValueError(f"ball radius must be positive, got {r}")
    cov = _cover(surface)
    key_to_idx = {k: i for i, k in enumerate(cov.cusp_keys)}

    r_eff = {}
    for k, _, d in f.entries:
        cap = r - d
        if cap > 0.0:
            r_eff[key_to_idx[k]] = max(cap, r_eff.get(key_to_idx[k], -math.inf))
    if not r_eff:
        return TranslateSet(point=point, radius=r, items=(), node_count=0)

    # A point u deep inside one orbit horoball sees only that horoball: the
    # orbit horoballs are pairwise disjoint, so reaching any other one means
    # first crossing the containing boundary, u away. Once u clears every
    # effective radius the answer is at most one item, and searching would
    # cost e^u nodes for nothing.
    def deep_answer(z: complex, rmap: np.ndarray, rword: tuple):
        sd0 = np.empty(len(cov.cusp_keys))
        for c in range(len(cov.cusp_keys)):
            a, _, cc, dd = cov.anchors[c].ravel()
            if abs(cc) < 1e-12:
                sd0[c] = math.log(abs(a / dd) / z.imag)
            else:
                sd0[c] = math.log(abs(z - a / cc) ** 2 * (cc * cc) / z.imag)
        cmin = int(np.argmin(sd0))
        if -sd0[cmin] < max(r_eff.values()) + 1e-9:
            return None
        items = []
        if cmin in r_eff:
            nc = rmap @ cov.anchors[cmin]
            a, _, cc, dd = nc.ravel()
            if abs(cc) < 1e-12:
                hb = Horoball(0.0, abs(a / dd), base_at_infinity=True)
            else:
                hb = Horoball(a / cc, 1.0 / (cc * cc))
            items.append(
                TranslateItem(
                    word=rword,
                    cusp_key=cov.cusp_keys[cmin],
                    horoball=hb,
                    signed_distance=float(sd0[cmin]),
                )
            )
        return TranslateSet(point=point, radius=r, items=tuple(items), node_count=1)

    # check the input point first: reduction can drag a deep point out of
    # the canonical horoball into a non-canonical translate, hiding its
    # depth from the check below
    if deep_shortcut:
        ans = deep_answer(point.z, np.eye(2), ())
        if ans is not None:
            return ans

    if reduce:
        h, hword, d0, base_ld = _reduce_point_tracked(surface, point)
        base = complex(base_ld)
        h_inv = np.linalg.inv(h)
        hword_inv = tuple((gi, -e) for gi, e in reversed(hword))
    else:
        base = point.z
        h_inv = np.eye(2)
        hword_inv = ()
        d0 = float(_distv(base, cov.anchor_pts).min())

    if deep_shortcut and reduce:
        ans = deep_answer(base, h_inv, hword_inv)
        if ans is not None:
            return ans

    r_front = max(r_eff.values()) + 1.0 + wander + d0
    if max_word_len is None:
        max_word_len = max_translates
    frontier = np.eye(2)[None, :, :]
    frontier_words: list = [()]

    def feat(imgs: np.ndarray) -> np.ndarray:
        return np.concatenate([imgs.real, imgs.imag], axis=1)

    def qrows(fe: np.ndarray) -> np.ndarray:
        # cell size far below the group's discreteness scale, so distinct
        # elements never share a key; a float straddling a cell boundary
        # costs only a duplicate that the horoball dedup absorbs
        q = np.round(fe / _DEDUP_TOL)
        return np.clip(q, -9e17, 9e17).astype(np.int64)

    seen = {qrows(feat(_apply_pts(frontier, cov.anchor_pts))).tobytes()}
    found: dict = {c: {} for c in r_eff}

    def collect(ms: np.ndarray, words: list) -> None:
        # the keep test is on the horoball itself, not its anchor point: a
        # query inside a translate has the anchor u away but distance -u
        for c, rc in r_eff.items():
            nc = ms @ cov.anchors[c]
            a, cc, dd = nc[:, 0, 0], nc[:, 1, 0], nc[:, 1, 1]
            at_inf = np.abs(cc) < 1e-12
            t_sd = np.empty(len(ms))
            with np.errstate(divide="ignore", invalid="ignore"):
                t_sd[at_inf] = np.log(np.abs(a[at_inf] / dd[at_inf]) / base.imag)
                fin = ~at_inf
                t_sd[fin] = np.log(
                    np.abs(base - a[fin] / cc[fin]) ** 2
                    * (cc[fin] ** 2)
                    / base.imag
                )
            for i in np.nonzero(t_sd < rc)[0]:
                if at_inf[i]:
                    hb = Horoball(
                        0.0, abs(a[i] / dd[i]), base_at_infinity=True
                    )
                else:
                    hb = Horoball(a[i] / cc[i], 1.0 / (cc[i] * cc[i]))
                kk = (
                    round((0.0 if hb.base_at_infinity else hb.base) * 1e6),
                    hb.base_at_infinity,
                    round(math.log(hb.size) * 1e6),
                )
                found[c].setdefault(kk, (words[i], hb, float(t_sd[i])))

    collect(frontier, frontier_words)
    total = 1
    for _ in range(max_word_len):
        nf = len(frontier)
        cand = np.einsum("gij,njk->gnik", cov.gens_arr, frontier).reshape(-1, 2, 2)
        det = cand[:, 0, 0] * cand[:, 1, 1] - cand[:, 0, 1] * cand[:, 1, 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            cand /= np.sqrt(np.abs(det))[:, None, None]
        imgs = _apply_pts(cand, cov.anchor_pts)
        mask = _distv(base, imgs).min(axis=1) <= r_front
        idx0 = np.nonzero(mask)[0]
        cand = cand[mask]
        imgs = imgs[mask]
        if not len(cand):
            break
        q = qrows(feat(imgs))
        _, first = np.unique(q, axis=0, return_index=True)
        first.sort()
        fresh = [i for i in first if q[i].tobytes() not in seen]
        kept_idx = idx0[fresh]
        frontier = cand[fresh]
        frontier_words = [
            (cov.signed[ci // nf],) + frontier_words[ci % nf] for ci in kept_idx
        ]
        if not len(frontier):
            break
        seen.update(q[i].tobytes() for i in fresh)
        total += len(frontier)
        if total > max_translates:
            raise BudgetExceeded(
                f"translate enumeration passed {max_translates} nodes",
                nodes=total,
                word_len=len(frontier_words[0]),
            )
        collect(frontier, frontier_words)
    else:
        raise BudgetExceeded(
            f"translate enumeration passed word length {max_word_len}",
            nodes=total,
            word_len=max_word_len,
        )

    items = []
    for c in sorted(found):
        cusp_key = cov.cusp_keys[c]
        for kk in sorted(found[c]):
            word, hb, t_sd = found[c][kk]
            if reduce:
                nc = h_inv @ (
                    _word_matrix(cov, word) @ cov.anchors[c]
                )
                a, _, cc, dd = nc.ravel()
                if abs(cc) < 1e-12:
                    hb = Horoball(0.0, abs(a / dd), base_at_infinity=True)
                else:
                    hb = Horoball(a / cc, 1.0 / (cc * cc))
                word = hword_inv + word
            items.append(
                TranslateItem(
                    word=word, cusp_key=cusp_key, horoball=hb, signed_distance=t_sd
                )
            )
    return TranslateSet(point=point, radius=r, items=tuple(items), node_count=total)


def _word_matrix(cov: _Cover, word: tuple) -> np.ndarray:
    m = np.eye(2)
    for gi, e in word:
        g = cov.gens_arr[gi] if e > 0 else np.linalg.inv(cov.gens_arr[gi])
        m = m @ g
    return m / math.sqrt(abs(np.linalg.det(m)))


def beta_from_set(ts: TranslateSet, f: CuspDensity, radii) -> np.ndarray:
    """Ball averages of f from a precomputed translate set.

    Valid for any radius up to ts.radius; a set enumerated once serves the
    whole grid of radii below it.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim == 0:
        radii = radii[None]
    if (radii <= 0.0).any():
        raise ValueError("radii must be positive")
    if radii.max() > ts.radius + 1e-12:
        raise ValueError(
            f"translate set only covers radii <= {ts.radius}, asked {radii.max()}"
        )
    out = np.zeros(radii.shape, dtype=float)
    by_key: dict = {}
    for it in ts.items:
        by_key.setdefault(it.cusp_key, []).append(it.signed_distance)
    for key, value, depth in f.entries:
        sds = by_key.get(key)
        if not sds:
            continue
        t_arr = np.asarray(sds) + depth
        areas = ball_horoball_area_batch(radii[:, None], t_arr[None, :])
        out += value * areas.sum(axis=1)
    return out / (2.0 * math.pi * (np.cosh(radii) - 1.0))


def beta(
    f: CuspDensity,
    point: HPoint,
    r: float,
    **budget,
) -> float:
    """Average of f over the ball of radius r at the point."""
    ts = enumerate_translates(f.surface, point, r, f, **budget)
    return float(beta_from_set(ts, f, [r])[0])


def beta_profile(
    f: CuspDensity,
    point: HPoint,
    radii,
    **budget,
) -> np.ndarray:
    """Averages of f at one point over a whole grid of radii (one search)."""
    radii = np.asarray(radii, dtype=float)
    ts = enumerate_translates(f.surface, point, float(radii.max()), f, **budget)
    return beta_from_set(ts, f, radii)


def truncated_maximal(
    f: CuspDensity,
    point: HPoint,
    rho: float,
    r_max: float,
    grid_step: float,
    **budget,
) -> float:
    """Max ball average over the radius grid rho, rho+step, ..., <= r_max.

    A grid maximum, hence a certified lower bound for the continuum maximal
    function truncated to [rho, r_max].
    """
    if not (0.0 < rho <= r_max):
        raise ValueError(f"need 0 < rho <= r_max, got {rho}, {r_max}")
    radii = grid_radii(rho, r_max, grid_step)
    return float(beta_profile(f, point, radii, **budget).max())


def grid_radii(rho: float, r_max: float, grid_step: float) -> np.ndarray:
    """The radius grid rho, rho+step, ... capped at r_max (inclusive)."""
    if grid_step <= 0.0:
        raise ValueError(f"grid step must be positive, got {grid_step}")
    n = int(math.floor((r_max - rho) / grid_step + 1e-9)) + 1
    return rho + grid_step * np.arange(max(n, 1))
