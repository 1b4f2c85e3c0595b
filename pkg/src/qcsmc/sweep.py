"""Seeded Monte Carlo sweeps over initial states and disturbance realisations.

Scenario generation is sequential and seeded; runs are independent and may be
spread over worker processes. Results are always returned in scenario order,
so the output does not depend on scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

import numpy as np

from . import analytic
from .controller import LAWS, MODIFIED
from .core import (
    ConfigError,
    SimConfig,
    State,
    Zero,
    config_from_dict,
    config_to_dict,
    disturbance_from_dict,
    validate_config,
)
from .errors import NoCPhase
from .lyapunov import LyapunovParams, gamma_min_old, vdot_along
from .simulator import max_abs_u_in_u, overshoot_check, simulate, u_exit_time

REGIONS = ("U", "Ca", "C", "Any")
MAX_REJECTIONS = 100_000


@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig
    samples: int
    x0_region: str = "Any"
    x0_box: tuple[tuple[float, float], tuple[float, float]] = ((-1.0, 1.0), (-1.0, 1.0))
    disturbance_family: tuple[Mapping[str, Any], ...] = ({"type": "zero"},)
    seed: int = 0
    law: str = MODIFIED

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")
        if self.x0_region not in REGIONS:
            raise ConfigError(f"x0_region must be one of {REGIONS}, got {self.x0_region!r}")
        for lo, hi in self.x0_box:
            if not hi > lo:
                raise ConfigError(f"x0_box interval [{lo}, {hi}] is degenerate")
        if not self.disturbance_family:
            raise ConfigError("disturbance_family must not be empty")
        if self.law not in LAWS:
            raise ConfigError(f"law must be one of {LAWS}")


def sweep_from_dict(d: Mapping[str, Any]) -> SweepSpec:
    known = {"base", "samples", "x0_region", "x0_box", "disturbance_family", "seed", "law"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown sweep key '{sorted(unknown)[0]}'")
    base = dict(d.get("base", {}))
    base.setdefault("x0", [0.0, 0.0])
    family = d.get("disturbance_family", {"type": "zero"})
    if isinstance(family, Mapping):
        family = [family]
    box = d.get("x0_box", [[-1.0, 1.0], [-1.0, 1.0]])
    try:
        box = tuple((float(lo), float(hi)) for lo, hi in box)
    except (TypeError, ValueError):
        raise ConfigError(f"'x0_box' must be [[x1lo, x1hi], [x2lo, x2hi]], got {box!r}") from None
    if len(box) != 2:
        raise ConfigError("'x0_box' needs exactly two intervals")
    samples = d.get("samples")
    if isinstance(samples, bool) or not isinstance(samples, int):
        raise ConfigError(f"'samples' must be an integer, got {samples!r}")
    return SweepSpec(
        base=config_from_dict(base),
        samples=samples,
        x0_region=d.get("x0_region", "Any"),
        x0_box=box,
        disturbance_family=tuple(family),
        seed=int(d.get("seed", 0)),
        law=d.get("law", MODIFIED),
    )


def _region_ok(x: State, region: str, gamma: float) -> bool:
    if region == "U":
        return analytic.in_u(x) and (x.x1, x.x2) != (0.0, 0.0)
    if region == "Ca":
        return analytic.in_ca(x, gamma)
    if region == "C":
        return x.x1 * x.x2 < 0
    return True


def _draw(value: Any, rng: np.random.Generator) -> Any:
    if isinstance(value, Sequence) and not isinstance(value, str) and len(value) == 2:
        return float(rng.uniform(value[0], value[1]))
    return value


def _realise(template: Mapping[str, Any], rng: np.random.Generator) -> Any:
    kind = template.get("type")
    spec = {"type": kind}
    for key, value in template.items():
        if key in ("type", "times", "values"):
            if key != "type":
                spec[key] = value
            continue
        spec[key] = _draw(value, rng)
    if kind == "uniform_random":
        spec["seed"] = int(rng.integers(0, 2**31 - 1))
    return disturbance_from_dict(spec)


def scenarios(spec: SweepSpec) -> list[SimConfig]:
    """Deterministically expand ``spec`` into validated scenario configs."""
    rng = np.random.default_rng(spec.seed)
    base = validate_config(spec.base)
    (a1, b1), (a2, b2) = spec.x0_box
    gamma = base.params.gamma
    out = []
    for i in range(spec.samples):
        for _ in range(MAX_REJECTIONS):
            x0 = State(float(rng.uniform(a1, b1)), float(rng.uniform(a2, b2)))
            if _region_ok(x0, spec.x0_region, gamma):
                break
        else:
            raise ConfigError(f"x0_box has no usable points in region {spec.x0_region}")
        template = spec.disturbance_family[i % len(spec.disturbance_family)]
        dist = _realise(template, rng)
        out.append(validate_config(replace(base, x0=x0, disturbance=dist)))
    return out


def _finite_or_none(v: float | None) -> float | None:
    return None if v is None or not math.isfinite(v) else v


def run_scenario(cfg: SimConfig, law: str = MODIFIED) -> dict:
    """Simulate one scenario and evaluate every per-run property."""
    traj = simulate(cfg, law)
    p = cfg.params
    out: dict[str, Any] = {
        "x0": [cfg.x0.x1, cfg.x0.x2],
        "disturbance": cfg.disturbance.to_dict(),
        "captured_at": traj.captured_at,
        "diverged": traj.diverged,
        "gamma_ge_gamma_min_old": p.gamma >= gamma_min_old(p.D),
    }
    if analytic.in_u(cfg.x0) and (cfg.x0.x1, cfg.x0.x2) != (0.0, 0.0):
        lo, hi = analytic.reach_time_U_bounds(cfg.x0, p.gamma, p.D)
        t_exit = u_exit_time(traj)
        out["u_exit_time"] = t_exit
        out["u_exit_bracket"] = [lo, hi]
        out["u_exit_in_bracket"] = (
            t_exit is not None and lo - cfg.dt <= t_exit <= hi + cfg.dt
        )
    try:
        report = overshoot_check(traj)
        out["overshoot"] = report.overshoot
        out["overshoot_t"] = report.first_violation_t
    except NoCPhase:
        out["overshoot"] = None
    out["max_abs_u_in_U"] = max_abs_u_in_u(traj)
    vd = vdot_along(traj, LyapunovParams.from_control(p))
    out["v_monotone"] = vd.monotone
    out["v_violations"] = vd.violations
    out["v_u_region_excess"] = _finite_or_none(vd.u_region_excess)
    if isinstance(cfg.disturbance, Zero) and analytic.in_ca(cfg.x0, p.gamma):
        t_reach = analytic.reach_time_Ca(cfg.x0, p.gamma)
        out["reach_time_Ca"] = t_reach
        out["reach_time_ok"] = traj.captured_at is not None and abs(
            traj.captured_at - t_reach
        ) <= max(0.01 * t_reach, 5 * cfg.dt)
    return out


def _run_indexed(args: tuple[int, SimConfig, str]) -> dict:
    i, cfg, law = args
    return {"index": i, **run_scenario(cfg, law)}


def _count(rows: list[dict], key: str, good: Any = True) -> dict:
    checked = [r[key] for r in rows if r.get(key) is not None]
    return {"checked": len(checked), "pass": sum(1 for v in checked if v == good)}


def run_sweep(spec: SweepSpec, workers: int | None = None) -> dict:
    """Run every scenario of ``spec``; returns per-scenario rows and aggregates."""
    cfgs = scenarios(spec)
    jobs = [(i, c, spec.law) for i, c in enumerate(cfgs)]
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(jobs) == 1:
        rows = [_run_indexed(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_indexed, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    rows.sort(key=lambda r: r["index"])
    aggregate = {
        "samples": len(rows),
        "captured": sum(1 for r in rows if r["captured_at"] is not None),
        "diverged": sum(1 for r in rows if r["diverged"]),
        "u_exit_in_bracket": _count(rows, "u_exit_in_bracket"),
        "no_overshoot": _count(rows, "overshoot", False),
        "v_monotone": _count(rows, "v_monotone"),
        "reach_time_ok": _count(rows, "reach_time_ok"),
    }
    base = validate_config(spec.base)
    return {
        "sweep": {
            "samples": spec.samples,
            "x0_region": spec.x0_region,
            "x0_box": [list(b) for b in spec.x0_box],
            "disturbance_family": [dict(t) for t in spec.disturbance_family],
            "seed": spec.seed,
            "law": spec.law,
            "base": config_to_dict(base),
            "base_defaulted": sorted(base.defaulted),
        },
        "aggregate": aggregate,
        "scenarios": rows,
    }
