"""Surface-doubling induction that keeps ball averages large at bounded mass.

The induction acts on good tuples: a panted surface, pairwise disjoint cusp
regions, a marked key set U carrying a nonnegative density of mass at most
two, and the distinguished pants kept clear of U. One step opens the
distinguished cusp into a neck of searched length alpha, doubles the surface
across a fresh pants, pushes the second copy's density deeper by a searched
t, and renormalizes. Each step doubles the area plus 2 pi exactly while the
mass contracts at least as fast as x -> x (1 - x / 6), and the set of points
whose ball averages reach one is re-certified by Monte Carlo sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .averaging import (
    BudgetExceeded,
    CuspDensity,
    beta_from_set,
    density_integral,
    enumerate_translates,
    grid_radii,
    l1_norm,
)
from .geom import horoball_gap
from .surfaces import (
    CUSP_BOUNDARY_LENGTH,
    PantedSurface,
    Stratum,
    alpha_deformation,
    assemble,
    cusp_shorten,
    sample_strata,
)

# Collar cut below which window points keep distance rho from mass at depth
# rho + COLLAR_DEPTH; this value makes each window fill 3/4 of its pants.
COLLAR_DEPTH = math.log(8.0 / math.pi)

MASS_CAP = 2.0
_GAP_TOL = 1e-9


class SearchError(RuntimeError):
    """A scheduled parameter search ran out of trials."""


class AlphaSearchError(SearchError):
    def __init__(self, message: str, achieved_fraction: float, alpha_best: float):
        super().__init__(message)
        self.achieved_fraction = achieved_fraction
        self.alpha_best = alpha_best


class TSearchError(SearchError):
    def __init__(self, message: str, best_t: float, best_fraction: float):
        super().__init__(message)
        self.best_t = best_t
        self.best_fraction = best_fraction
        self.best_margin = None


class TowerError(RuntimeError):
    """A tower level failed; carries the reports of the completed levels."""

    def __init__(self, message: str, reports: list):
        super().__init__(message)
        self.reports = reports


@dataclass(frozen=True)
class GoodTuple:
    """A panted surface with marked disjoint cusps and an admissible density.

    ``cusps`` holds one region per cusp of the surface (possibly pushed in),
    ``U`` the keys of those allowed to carry density. Validity: the surface
    is closed up (no free boundary), the regions are pairwise disjoint, no U
    cusp lives on the distinguished pants, and the density is nonnegative
    with at most one entry per cusp, supported inside the U regions, of mass
    at most two.
    """

    panted: PantedSurface
    cusps: tuple
    U: frozenset
    f: CuspDensity

    def __post_init__(self) -> None:
        surf = self.panted.surface
        if self.f.surface is not surf:
            raise ValueError("density lives on a different surface")
        keys = [c.key for c in self.cusps]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate cusp regions")
        if set(keys) != {c.key for c in surf.cusps}:
            raise ValueError("cusp regions do not match the surface's cusps")
        glued = 2 * len(surf.edges) + len(keys)
        if glued != 3 * surf.pants_count:
            raise ValueError("surface has free boundary")
        for i in range(len(self.cusps)):
            for j in range(i + 1, len(self.cusps)):
                g = horoball_gap(self.cusps[i].horoball(), self.cusps[j].horoball())
                if g < -_GAP_TOL:
                    raise ValueError(
                        f"cusp regions {keys[i]} and {keys[j]} overlap (gap {g:.3e})"
                    )
        if not self.U <= set(keys):
            raise ValueError("U references unknown cusps")
        for k in self.U:
            if k[0] == self.panted.p_index:
                raise ValueError(f"U cusp {k} sits on the distinguished pants")
        depth_of = {}
        region = {c.key: c for c in self.cusps}
        for k, v, d in self.f.entries:
            if k not in self.U:
                raise ValueError(f"density entry outside U at {k}")
            if v < 0.0:
                raise ValueError(f"negative density value at {k}")
            if k in depth_of:
                raise ValueError(f"density not constant on cusp {k}")
            depth_of[k] = d
            pushed = math.log(CUSP_BOUNDARY_LENGTH / region[k].boundary_length)
            if d < pushed - _GAP_TOL:
                raise ValueError(f"density at {k} spills out of its region")
        if l1_norm(self.f) > MASS_CAP + _GAP_TOL:
            raise ValueError(f"density mass {l1_norm(self.f):.6f} exceeds {MASS_CAP}")

    @property
    def surface(self):
        return self.panted.surface


@dataclass(frozen=True)
class StepParams:
    """Knobs for one doubling step.

    The radius grid runs from ``rho`` to ``r_max`` in ``grid_step`` strides;
    alpha trials are taken in decreasing order, t trials in increasing
    order. ``sample_count`` points are drawn per certification window.
    """

    rho: float = 10.0
    epsilon: float = 0.01
    r_max: float = 12.0
    grid_step: float = 0.5
    alpha_schedule: tuple = (0.5, 0.25, 0.125, 0.0625)
    t_schedule: tuple = (2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0)
    sample_count: int = 2000
    seed: int = 0
    max_translates: int = 1_000_000

    def __post_init__(self) -> None:
        if self.rho < 10.0:
            raise ValueError(f"rho must be at least 10, got {self.rho}")
        if not (0.0 < self.epsilon < 0.1):
            raise ValueError(f"epsilon must lie in (0, 1/10), got {self.epsilon}")
        if self.r_max <= self.rho:
            raise ValueError("radius cap must exceed rho")
        if self.grid_step <= 0.0:
            raise ValueError("grid step must be positive")
        al = list(self.alpha_schedule)
        if not al or al != sorted(al, reverse=True) or al[-1] <= 0.0:
            raise ValueError("alpha schedule must be positive and decreasing")
        ts = list(self.t_schedule)
        if not ts or ts != sorted(ts) or ts[0] <= 0.0:
            raise ValueError("t schedule must be positive and increasing")
        if ts[-1] > self.r_max:
            raise ValueError("t schedule runs past the radius cap")
        if self.sample_count < 1:
            raise ValueError("sample count must be positive")


@dataclass(frozen=True)
class StepReport:
    """Measured outcome of one doubling step.

    Areas are exact multiples of pi; fractions are Monte Carlo estimates of
    the certified share of each surface, with their standard errors.
    """

    alpha_used: float
    t_used: float
    l1_before: float
    l1_after: float
    l1_bound: float
    area_before_pi: Fraction
    area_after_pi: Fraction
    v_fraction_before: float
    v_fraction_after: float
    v_se_before: float
    v_se_after: float
    sample_count: int
    retained_count: int
    degraded: bool
    margins: dict

    def __post_init__(self) -> None:
        if self.area_after_pi != 2 * self.area_before_pi + 2:
            raise ValueError(
                f"area identity broken: {self.area_after_pi} != "
                f"2 * {self.area_before_pi} + 2"
            )
        if self.l1_after > self.l1_bound + 1e-9:
            raise ValueError(
                f"mass {self.l1_after:.12f} exceeds its bound {self.l1_bound:.12f}"
            )

    @property
    def area_before(self) -> float:
        return float(self.area_before_pi) * math.pi

    @property
    def area_after(self) -> float:
        return float(self.area_after_pi) * math.pi


@dataclass(frozen=True)
class TowerLevel:
    k: int
    target: Fraction
    amplitude: int
    level_norm: Fraction


@dataclass(frozen=True)
class TowerSchedule:
    """Per-level mass targets whose amplified layers still sum below one."""

    levels: tuple

    def total_norm(self) -> Fraction:
        return sum((lv.level_norm for lv in self.levels), Fraction(0))


def amplitude_schedule(K: int) -> TowerSchedule:
    """Mass target 4^-k amplified by 2^k at level k, for k = 1 .. K."""
    if K < 1:
        raise ValueError(f"need at least one level, got {K}")
    levels = tuple(
        TowerLevel(k, Fraction(1, 4**k), 2**k, Fraction(1, 2**k))
        for k in range(1, K + 1)
    )
    sched = TowerSchedule(levels)
    if not sched.total_norm() < 1:
        raise AssertionError("amplified masses must sum below one")
    return sched


def mass_recursion(n: int) -> list:
    """Exact iterates of x -> x (1 - x / 6) from 1; dominates the step masses."""
    xs = [Fraction(1)]
    for _ in range(n):
        xs.append(xs[-1] * (1 - xs[-1] / 6))
    return xs


def base_tuple(rho: float, alpha: float = 1.0) -> GoodTuple:
    """Two twice-cusped pants glued through a third, carrying unit mass.

    The density sits at depth rho + COLLAR_DEPTH on the four outer cusps, so
    every point of the designated windows (outer thick parts plus cusp
    collars of depth COLLAR_DEPTH) stays at distance at least rho from its
    support. The value (3 pi / 4) e^depth per cusp makes the total mass one.
    """
    if rho < 0.0 or not math.isfinite(rho):
        raise ValueError(f"rho must be >= 0, got {rho}")
    if not (0.0 < alpha <= 8.0):
        raise ValueError(f"alpha must lie in (0, 8], got {alpha}")
    a = float(alpha)
    surf = assemble(
        [(0.0, 0.0, a), (0.0, a, a), (0.0, 0.0, a)],
        [((0, 2), (1, 1)), ((1, 2), (2, 2))],
        root=1,
    )
    panted = PantedSurface(surf, p_index=1, d0=0, d1=1, d2=2)
    depth = rho + COLLAR_DEPTH
    value = 0.75 * math.pi * math.exp(depth)
    ukeys = sorted(c.key for c in surf.cusps if c.key != (1, 0))
    f = CuspDensity(surf, tuple((k, value, depth) for k in ukeys))
    return GoodTuple(panted, tuple(surf.cusps), frozenset(ukeys), f)


def certification_strata(gt: GoodTuple) -> tuple:
    """Sampling cells covering the surface, with the designated-window mask.

    Thick parts and cusp bands partition the surface; U cusps split at the
    collar depth and at their density depth. The mask marks the windows:
    thick parts of twice-cusped pants plus the U collars.
    """
    surf = gt.panted.surface
    depth_of = {k: d for k, _, d in gt.f.entries}
    strata = []
    mask = []
    for p in range(surf.pants_count):
        strata.append(Stratum("thick", pants=p))
        mask.append(surf.specs[p].cusp_count == 2)
    for c in surf.cusps:
        k = c.key
        if k in gt.U:
            cuts = [0.0, COLLAR_DEPTH]
            d = depth_of.get(k)
            if d is not None and d > COLLAR_DEPTH:
                cuts.append(d)
            cuts.append(math.inf)
            for lo, hi in zip(cuts, cuts[1:]):
                strata.append(Stratum("band", key=k, depth_lo=lo, depth_hi=hi))
                mask.append(hi == COLLAR_DEPTH)
        else:
            strata.append(Stratum("band", key=k, depth_lo=0.0, depth_hi=math.inf))
            mask.append(False)
    return strata, np.array(mask, dtype=bool)


def certify_profiles(
    surface,
    f: CuspDensity,
    pts,
    radii,
    *,
    max_translates: int = 1_000_000,
    max_word_len=None,
) -> tuple:
    """Grid profiles of the ball averages at each sample point.

    Points whose orbit search exceeds the budget get an all-zero row and are
    counted in the second return value; treating them as uncertified keeps
    every fraction computed from the matrix a lower bound.
    """
    B = np.zeros((len(pts), len(radii)))
    blown = 0
    r_top = float(radii[-1])
    for i, sp in enumerate(pts):
        try:
            ts = enumerate_translates(
                surface,
                sp.lift(surface),
                r_top,
                f,
                max_translates=max_translates,
                max_word_len=max_word_len,
            )
        except BudgetExceeded:
            blown += 1
            continue
        B[i] = beta_from_set(ts, f, radii)
    return B, blown


def certify_sup(
    surface,
    f: CuspDensity,
    pts,
    rho: float,
    r_max: float,
    grid_step: float,
    *,
    max_translates: int = 1_000_000,
) -> tuple:
    """One-sided lower bounds for the rho-truncated maximal function.

    The base radius grid is evaluated with the full density; then each
    deeper depth class of the support is re-evaluated alone on the grid
    shifted by its excess depth, where its contribution peaks. Dropping
    entries from a nonnegative density and sampling a finite set of radii
    both only lower the sup over r >= rho, so the returned values certify
    M_rho f from below at any search budget.
    """
    radii = grid_radii(rho, r_max, grid_step)
    B, blown = certify_profiles(
        surface, f, pts, radii, max_translates=max_translates
    )
    sup = B.max(axis=1)
    classes = sorted({d for _, v, d in f.entries if v > 0.0})
    for depth in classes[1:]:
        f_d = CuspDensity(
            surface, tuple(e for e in f.entries if e[2] == depth)
        )
        B_d, b_d = certify_profiles(
            surface,
            f_d,
            pts,
            radii + (depth - classes[0]),
            max_translates=max_translates,
        )
        sup = np.maximum(sup, B_d.max(axis=1))
        blown += b_d
    return sup, blown


def _se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 1e-12) / max(n, 1))


def find_alpha(
    gt: GoodTuple,
    window,
    eps: float,
    rho: float,
    r_max: float,
    schedule,
    *,
    grid_step: float = 0.5,
    required: float = 0.99,
    max_translates: int = 1_000_000,
) -> float:
    """Largest scheduled neck length that keeps the window certified.

    ``window`` holds points already certified at level 1 - eps on the
    undeformed surface. A trial alpha is accepted when at least ``required``
    of them keep the sup over the radius grid of the transferred averages at
    or above 1 - 2 eps; the schedule is tried in its decreasing order, so
    the first success is the largest.
    """
    al = [float(a) for a in schedule]
    if not al or al != sorted(al, reverse=True) or al[-1] <= 0.0:
        raise ValueError("alpha schedule must be positive and decreasing")
    if not window:
        return al[0]
    radii = grid_radii(rho, r_max, grid_step)
    best_frac, best_alpha = -1.0, al[0]
    for alpha in al:
        deformed = alpha_deformation(gt.panted, alpha)
        fa = CuspDensity(deformed.surface, gt.f.entries)
        B, _ = certify_profiles(
            deformed.surface, fa, window, radii, max_translates=max_translates
        )
        frac = float(np.mean(B.max(axis=1) >= 1.0 - 2.0 * eps))
        if frac >= required:
            return alpha
        if frac > best_frac:
            best_frac, best_alpha = frac, alpha
    raise AlphaSearchError(
        f"no scheduled alpha kept {required:.0%} of the window at level "
        f"{1 - 2 * eps:.4f}; best fraction {best_frac:.4f} at alpha {best_alpha}",
        achieved_fraction=best_frac,
        alpha_best=best_alpha,
    )


def find_t(
    surface,
    f1: CuspDensity,
    window2,
    eps: float,
    schedule,
    *,
    r_max: float = 12.0,
    grid_step: float = 0.5,
    max_translates: int = 1_000_000,
) -> tuple:
    """Smallest scheduled push-in depth after which averages hug the mean.

    For a trial t the gate asks beta_r(f1) >= integral(f1) - eps at every
    grid radius r in [t, r_max]. The first scheduled t passed by at least a
    1 - eps share of the window is returned along with the passing subset.
    An empty window or a vanishing density passes trivially.
    """
    sched = [float(t) for t in schedule]
    if not sched or sched != sorted(sched) or sched[0] <= 0.0:
        raise ValueError("t schedule must be positive and increasing")
    if sched[-1] > r_max:
        raise ValueError("t schedule runs past the radius cap")
    if not f1.entries or all(v == 0.0 for _, v, _ in f1.entries):
        return sched[0], list(window2)
    if not window2:
        return sched[0], []
    gate = density_integral(f1) - eps
    radii = grid_radii(sched[0], r_max, grid_step)
    B, _ = certify_profiles(
        surface, f1, window2, radii, max_translates=max_translates
    )
    best_t, best_frac = sched[0], -1.0
    for t in sched:
        live = radii >= t - 1e-12
        ok = (B[:, live] >= gate).all(axis=1)
        frac = float(np.mean(ok))
        if frac >= 1.0 - eps:
            kept = [window2[i] for i in np.nonzero(ok)[0]]
            return t, kept
        if frac > best_frac:
            best_t, best_frac = t, frac
    raise TSearchError(
        f"no scheduled t reached a {1 - eps:.4f} window fraction at gate "
        f"{gate:.4f}; best fraction {best_frac:.4f} at t {best_t}",
        best_t=best_t,
        best_fraction=best_frac,
    )


def inductive_step(gt: GoodTuple, params: StepParams, *, reuse=None) -> tuple:
    """One doubling step; returns the new tuple and its report.

    The donor surface is certified on a stratified sample, alpha and t are
    searched (or taken from ``reuse=(alpha, t)``, marking the report
    degraded), the surface is doubled across a fresh pants of neck length
    alpha, the second copy's density is pushed in by t with its regions
    shrunk to match, and the doubled surface is re-certified. Certification
    counts a point only when some radius of the class ladder (certify_sup)
    puts its average at or above one, so the window fractions are one-sided
    lower estimates.
    """
    surf = gt.panted.surface
    rng = np.random.default_rng(params.seed)
    radii = grid_radii(params.rho, params.r_max, params.grid_step)
    norm = 1.0 - 4.0 * params.epsilon - 4.0 * math.exp(-params.rho)
    l1_before = l1_norm(gt.f)

    strata, _ = certification_strata(gt)
    sampled = sample_strata(surf, strata, params.sample_count, rng)
    pts = [p for p, _ in sampled]
    sup, blown_before = certify_sup(
        surf,
        gt.f,
        pts,
        params.rho,
        params.r_max,
        params.grid_step,
        max_translates=params.max_translates,
    )
    v_before = float(np.mean(sup >= 1.0))

    if reuse is None:
        window = [pts[i] for i in np.nonzero(sup >= 1.0 - params.epsilon)[0]]
        alpha = find_alpha(
            gt,
            window,
            params.epsilon,
            params.rho,
            params.r_max,
            params.alpha_schedule,
            grid_step=params.grid_step,
            max_translates=params.max_translates,
        )
        deformed = alpha_deformation(gt.panted, alpha)
        fa = CuspDensity(deformed.surface, gt.f.entries)
        Ba, _ = certify_profiles(
            deformed.surface, fa, window, radii, max_translates=params.max_translates
        )
        w2 = [
            window[i]
            for i in np.nonzero(Ba.max(axis=1) >= 1.0 - 2.0 * params.epsilon)[0]
        ]
        t_used, retained = find_t(
            deformed.surface,
            fa,
            w2,
            params.epsilon,
            params.t_schedule,
            r_max=params.r_max,
            grid_step=params.grid_step,
            max_translates=params.max_translates,
        )
        retained_count = len(retained)
    else:
        alpha, t_used = float(reuse[0]), float(reuse[1])
        deformed = alpha_deformation(gt.panted, alpha)
        retained_count = 0

    n_p = surf.pants_count
    neck = 2 * n_p
    specs1 = [s.lengths for s in deformed.surface.specs]
    edges1 = list(deformed.surface.edges)
    pi, d0 = gt.panted.p_index, gt.panted.d0
    shat = assemble(
        specs1 + specs1 + [(0.0, alpha, alpha)],
        edges1
        + [((p + n_p, b), (q + n_p, c)) for (p, b), (q, c) in edges1]
        + [((pi, d0), (neck, 1)), ((pi + n_p, d0), (neck, 2))],
        root=neck,
    )

    mass = sum(v * CUSP_BOUNDARY_LENGTH * math.exp(-d) for _, v, d in gt.f.entries)
    m_int = mass / shat.area
    if not m_int < 1.0:
        raise ArithmeticError(f"first-copy integral {m_int} leaves no headroom")
    e1 = [(k, v / norm, d) for k, v, d in gt.f.entries]
    e2 = [
        ((k[0] + n_p, k[1]), (1.0 - m_int) * math.exp(t_used) * v / norm, d + t_used)
        for k, v, d in gt.f.entries
    ]
    fhat = CuspDensity(shat, tuple(e1 + e2))

    new_cusps = []
    new_U = set()
    for c in shat.cusps:
        if c.key == (neck, 0):
            new_cusps.append(c)
        elif c.key[0] < n_p:
            new_cusps.append(c)
            new_U.add(c.key)
        else:
            new_cusps.append(cusp_shorten(c, t_used))
            new_U.add(c.key)
    new_panted = PantedSurface(shat, p_index=neck, d0=0, d1=1, d2=2)
    new_gt = GoodTuple(new_panted, tuple(new_cusps), frozenset(new_U), fhat)

    strata2, _ = certification_strata(new_gt)
    sampled2 = sample_strata(shat, strata2, params.sample_count, rng)
    pts2 = [p for p, _ in sampled2]
    sup2, blown_after = certify_sup(
        shat,
        fhat,
        pts2,
        params.rho,
        params.r_max,
        params.grid_step,
        max_translates=params.max_translates,
    )
    v_after = float(np.mean(sup2 >= 1.0))

    l1_after = l1_norm(fhat)
    l1_bound = l1_before * (1.0 - l1_before / 6.0) / norm
    v_doubling = v_after * shat.area - (
        2.0 * v_before * surf.area - 3.0 * params.epsilon
    )
    mc = 1.96 * (
        _se(v_after, len(pts2)) * shat.area
        + 2.0 * _se(v_before, len(pts)) * surf.area
    )
    report = StepReport(
        alpha_used=alpha,
        t_used=t_used,
        l1_before=l1_before,
        l1_after=l1_after,
        l1_bound=l1_bound,
        area_before_pi=surf.area_pi,
        area_after_pi=shat.area_pi,
        v_fraction_before=v_before,
        v_fraction_after=v_after,
        v_se_before=_se(v_before, len(pts)),
        v_se_after=_se(v_after, len(pts2)),
        sample_count=params.sample_count,
        retained_count=retained_count,
        degraded=reuse is not None,
        margins={
            "l1": l1_bound - l1_after,
            "v_doubling": v_doubling,
            "v_doubling_mc": mc,
            "budget_failures_before": float(blown_before),
            "budget_failures_after": float(blown_after),
        },
    )
    return new_gt, report


def run_tower(
    n: int,
    params: StepParams,
    *,
    v_floor: float = 0.005,
    base_alpha: float = 1.0,
) -> list:
    """Iterate the doubling step n times from the base tuple.

    The first level runs the full searches; later levels reuse its alpha and
    t on smaller samples and carry the degraded flag. A level aborts the
    tower when its mass breaks the x (1 - x / 6) recursion or fails to
    decrease, or when its window estimate sinks below the floor beyond its
    Monte Carlo allowance; the raised error carries the completed reports.
    """
    if n < 1:
        raise ValueError(f"need at least one level, got {n}")
    gt = base_tuple(params.rho, base_alpha)
    reports: list = []
    bound = Fraction(1)
    alpha = t_used = None
    for level in range(1, n + 1):
        if level == 1:
            p_lvl = params
        else:
            p_lvl = replace(
                params,
                sample_count=max(params.sample_count // 2 ** (level - 1), 120),
                seed=params.seed + level,
            )
        try:
            if level == 1:
                gt, rep = inductive_step(gt, p_lvl)
                alpha, t_used = rep.alpha_used, rep.t_used
            else:
                gt, rep = inductive_step(gt, p_lvl, reuse=(alpha, t_used))
        except (SearchError, ValueError, ArithmeticError) as exc:
            raise TowerError(f"level {level} failed: {exc}", reports) from exc
        bound = bound * (1 - bound / 6)
        if rep.l1_after > float(bound) + 1e-6:
            raise TowerError(
                f"level {level} mass {rep.l1_after:.6f} exceeds the recursion "
                f"bound {float(bound):.6f}",
                reports + [rep],
            )
        if rep.l1_after >= rep.l1_before:
            raise TowerError(f"level {level} mass failed to decrease", reports + [rep])
        if rep.v_fraction_after + 2.0 * rep.v_se_after < v_floor:
            raise TowerError(
                f"level {level} window estimate {rep.v_fraction_after:.4f} fell "
                f"below the floor {v_floor}",
                reports + [rep],
            )
        reports.append(rep)
    return reports
