"""Command-line runner: configures a tower, persists reports and curve data.

Outputs are deterministic for a fixed seed: the metric CSVs are written with
fixed decimal formatting and no timestamps, so identical configurations give
byte-identical files. Wall-clock timings live only in the JSON manifest.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .averaging import (
    BudgetExceeded,
    CuspDensity,
    beta_from_set,
    cusp_flow,
    enumerate_translates,
    grid_radii,
    l1_norm,
)
from .surfaces import surface_to_text, sample_strata
from .tower import (
    StepParams,
    TowerError,
    base_tuple,
    certification_strata,
    run_tower,
)

_FMT = "{:.12f}"


@dataclass(frozen=True)
class RunConfig:
    """One tower run; mirrors the CLI flags one to one."""

    seed: int
    rho: float = 10.0
    epsilon: float = 0.01
    steps: int = 1
    r_max: float = 12.0
    grid_step: float = 0.5
    sample_count: int = 2000
    alpha_schedule: tuple = (0.5, 0.25, 0.125, 0.0625)
    t_schedule: tuple = tuple(2.0 + 0.5 * k for k in range(21))
    out_dir: str = "runs"
    max_translates: int = 1_000_000
    max_word_len: int | None = None
    curve_points: int = 5

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.curve_points < 0:
            raise ValueError("curve_points must be >= 0")
        # ranges shared with the step machinery, checked even when no step runs
        StepParams(
            rho=self.rho,
            epsilon=self.epsilon,
            r_max=self.r_max,
            grid_step=self.grid_step,
            alpha_schedule=self.alpha_schedule,
            t_schedule=self.t_schedule,
            sample_count=self.sample_count,
            seed=self.seed,
            max_translates=self.max_translates,
        )

    def step_params(self) -> StepParams:
        return StepParams(
            rho=self.rho,
            epsilon=self.epsilon,
            r_max=self.r_max,
            grid_step=self.grid_step,
            alpha_schedule=self.alpha_schedule,
            t_schedule=self.t_schedule,
            sample_count=self.sample_count,
            seed=self.seed,
            max_translates=self.max_translates,
        )


@dataclass
class RunManifest:
    """What a run produced and where; written as manifest.json."""

    config: dict
    version: str
    complete: bool
    files: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    error: str | None = None

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def emit_curves(
    surface,
    f: CuspDensity,
    points,
    radii,
    path: Path,
    *,
    max_translates: int = 1_000_000,
    max_word_len: int | None = None,
) -> Path:
    """Write (point id, r, beta, status) rows, sorted, fixed decimals.

    A point whose enumeration blows the budget gets one row per radius with
    an empty value and status ``budget`` instead of a number.
    """
    radii = [float(r) for r in radii]
    rows = ["point,r,beta,status"]
    for i, sp in enumerate(points):
        try:
            ts = enumerate_translates(
                surface,
                sp.lift(surface),
                max(radii),
                f,
                max_translates=max_translates,
                max_word_len=max_word_len,
            )
            vals = beta_from_set(ts, f, radii)
            for r, v in zip(radii, vals):
                rows.append(f"{i},{_FMT.format(r)},{_FMT.format(v)},ok")
        except BudgetExceeded:
            for r in radii:
                rows.append(f"{i},{_FMT.format(r)},,budget")
    path.write_text("\n".join(rows) + "\n")
    return path


def emit_flow_margins(
    surface,
    f: CuspDensity,
    points,
    r_list,
    t_list,
    path: Path,
    *,
    max_translates: int = 1_000_000,
) -> Path:
    """Paired before/after-flow averages with their inequality margin.

    For each point, radius r and push-in t the rows hold beta_r(f), the
    flowed beta_{r+t}(flow_t f), and the slack of the lower bound
    e^{-t} (1 - 2 e^{-r}) beta_r(f).
    """
    r_list = [float(r) for r in r_list]
    t_list = [float(t) for t in t_list]
    rows = ["point,r,t,beta,beta_flow,margin"]
    for i, sp in enumerate(points):
        z = sp.lift(surface)
        ts = enumerate_translates(
            surface, z, max(r_list), f, max_translates=max_translates
        )
        before = beta_from_set(ts, f, r_list)
        for t in t_list:
            ft = cusp_flow(f, t, 1.0)
            tsf = enumerate_translates(
                surface,
                z,
                max(r_list) + t,
                ft,
                max_translates=max_translates,
            )
            after = beta_from_set(tsf, ft, [r + t for r in r_list])
            for r, b0, b1 in zip(r_list, before, after):
                margin = b1 - math.exp(-t) * (1.0 - 2.0 * math.exp(-r)) * b0
                rows.append(
                    f"{i},{_FMT.format(r)},{_FMT.format(t)},"
                    f"{_FMT.format(b0)},{_FMT.format(b1)},{_FMT.format(margin)}"
                )
    path.write_text("\n".join(rows) + "\n")
    return path


def _steps_csv(reports) -> str:
    head = (
        "level,alpha,t,l1_before,l1_after,l1_bound,area_before_pi,"
        "area_after_pi,v_before,v_after,v_se_before,v_se_after,"
        "sample_count,retained,degraded"
    )
    rows = [head]
    for k, r in enumerate(reports, 1):
        rows.append(
            ",".join(
                [
                    str(k),
                    _FMT.format(r.alpha_used),
                    _FMT.format(r.t_used),
                    _FMT.format(r.l1_before),
                    _FMT.format(r.l1_after),
                    _FMT.format(r.l1_bound),
                    str(r.area_before_pi),
                    str(r.area_after_pi),
                    _FMT.format(r.v_fraction_before),
                    _FMT.format(r.v_fraction_after),
                    _FMT.format(r.v_se_before),
                    _FMT.format(r.v_se_after),
                    str(r.sample_count),
                    str(r.retained_count),
                    str(int(r.degraded)),
                ]
            )
        )
    return "\n".join(rows) + "\n"


def run(config: RunConfig) -> RunManifest:
    """Execute the configured tower and persist every artifact.

    Raises nothing on tower failure: the manifest comes back flagged
    incomplete with the error recorded, and whatever completed is on disk.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        config={
            **asdict(config),
            "alpha_schedule": list(config.alpha_schedule),
            "t_schedule": list(config.t_schedule),
        },
        version=__version__,
        complete=False,
    )
    t0 = time.perf_counter()

    gt = base_tuple(config.rho)
    base_path = out / "surface_level0.txt"
    base_path.write_text(surface_to_text(gt.surface))
    manifest.files["surface_level0"] = str(base_path)

    metrics = {
        "l1_level0": l1_norm(gt.f),
        "area_level0_pi": str(gt.surface.area_pi),
    }
    reports = []
    error = None
    if config.steps > 0:
        try:
            reports = run_tower(config.steps, config.step_params())
        except TowerError as exc:
            reports = exc.reports
            error = str(exc)
    manifest.timings["tower_s"] = round(time.perf_counter() - t0, 3)

    steps_path = out / "steps.csv"
    steps_path.write_text(_steps_csv(reports))
    manifest.files["steps"] = str(steps_path)
    for k, rep in enumerate(reports, 1):
        metrics[f"l1_level{k}"] = rep.l1_after
        metrics[f"area_level{k}_pi"] = str(rep.area_after_pi)

    # curves on the base tuple: deterministic stratified points
    t1 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    strata, _ = certification_strata(gt)
    pts = [
        p
        for p, _ in sample_strata(
            gt.surface, strata, max(config.curve_points, 1), rng
        )
    ][: config.curve_points]
    radii = grid_radii(config.rho, config.r_max, config.grid_step)
    curves_path = out / "curves.csv"
    emit_curves(
        gt.surface,
        gt.f,
        pts,
        radii,
        curves_path,
        max_translates=config.max_translates,
        max_word_len=config.max_word_len,
    )
    manifest.files["curves"] = str(curves_path)
    manifest.timings["curves_s"] = round(time.perf_counter() - t1, 3)

    metrics_path = out / "metrics.csv"
    lines = ["key,value"]
    for k in sorted(metrics):
        v = metrics[k]
        lines.append(f"{k},{_FMT.format(v) if isinstance(v, float) else v}")
    metrics_path.write_text("\n".join(lines) + "\n")
    manifest.files["metrics"] = str(metrics_path)

    manifest.error = error
    manifest.complete = error is None and len(reports) == config.steps
    manifest.timings["total_s"] = round(time.perf_counter() - t0, 3)
    manifest.write(out / "manifest.json")
    manifest.files["manifest"] = str(out / "manifest.json")
    return manifest


def _parse_schedule(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="cuspflow",
        description="Run the surface-doubling tower and export its metrics.",
    )
    ap.add_argument("--rho", type=float, default=10.0)
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--steps", type=int, default=1)
    ap.add_argument("--rmax", type=float, default=12.0)
    ap.add_argument("--grid-step", type=float, default=0.5)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--out", type=str, default="runs")
    ap.add_argument("--max-translates", type=int, default=1_000_000)
    ap.add_argument("--max-word-len", type=int, default=None)
    ap.add_argument("--alpha-schedule", type=_parse_schedule,
                    default=(0.5, 0.25, 0.125, 0.0625))
    ap.add_argument("--t-schedule", type=_parse_schedule,
                    default=tuple(2.0 + 0.5 * k for k in range(21)))
    ap.add_argument("--curve-points", type=int, default=5)
    ns = ap.parse_args(argv)

    try:
        config = RunConfig(
            seed=ns.seed,
            rho=ns.rho,
            epsilon=ns.epsilon,
            steps=ns.steps,
            r_max=ns.rmax,
            grid_step=ns.grid_step,
            sample_count=ns.samples,
            alpha_schedule=ns.alpha_schedule,
            t_schedule=ns.t_schedule,
            out_dir=ns.out,
            max_translates=ns.max_translates,
            max_word_len=ns.max_word_len,
            curve_points=ns.curve_points,
        )
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2

    manifest = run(config)
    out = Path(config.out_dir)
    if manifest.complete:
        print(f"run complete: {out / 'manifest.json'}")
        return 0
    print(f"run INCOMPLETE: {manifest.error}", file=sys.stderr)
    print(f"partial manifest: {out / 'manifest.json'}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
