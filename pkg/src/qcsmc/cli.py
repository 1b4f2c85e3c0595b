"""Command-line entry point: scenario runs, closed forms, gains, maps and sweeps.

Every command writes plot-ready data (CSV or JSON) and never renders figures.
Exit status: 0 on success, 2 on invalid input, 3 when a run diverges.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import __version__, analytic
from .controller import LAWS, MODIFIED
from .core import (
    DOMAIN_CODES,
    ConfigError,
    SimConfig,
    State,
    UniformRandom,
    config_from_dict,
    config_to_dict,
    validate_config,
)
from .errors import NonFiniteState, QcsmcError
from .lyapunov import (
    LyapunovParams,
    default_epsilon,
    epsilon_interval,
    gamma_min_new,
    gamma_min_old,
    grid_map,
)
from .simulator import compare_with_analytic, compare_with_reference, simulate
from .sweep import run_sweep, sweep_from_dict

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3

TRAJECTORY_COLUMNS = ("t", "x1", "x2", "u", "u_filt", "d", "region", "in_ca", "v_new", "energy")
AXIS_REFERENCE_DT = 1e-6

# config field -> key in the JSON layout, for provenance reporting
_PROVENANCE_KEYS = {
    "dt": "dt",
    "capture_eps1": "capture.eps1",
    "capture_eps2": "capture.eps2",
    "delta_cap": "delta_cap",
    "filter_cutoff": "filter_cutoff_hz",
    "eta": "eta",
    "epsilon": "epsilon",
}
_STATIC_DEFAULTS = ("D", "t_end", "disturbance", "post_capture", "integrator")


class _Divergence(Exception):
    pass


# ---------------------------------------------------------------------------
# formatting


def fmt(v: float) -> str:
    """Fixed 17-significant-digit text form; round-trips every double."""
    return format(float(v), ".17g")


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps output byte-identical across platforms
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        _write(Path(out), text)


def trajectory_csv(traj) -> str:
    region = [DOMAIN_CODES[c].value for c in traj.domain]
    cols = (traj.t, traj.x1, traj.x2, traj.u, traj.u_filt, traj.d)
    tail = (traj.v_new, traj.energy)
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for i in range(len(traj)):
        row = [fmt(c[i]) for c in cols]
        row += [region[i], "1" if traj.in_ca[i] else "0"]
        row += [fmt(c[i]) for c in tail]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def grid_csv(grid) -> str:
    lines = ["x1,x2,v_new"]
    lines += [f"{fmt(a)},{fmt(b)},{fmt(v)}" for a, b, v in grid.rows()]
    return "\n".join(lines) + "\n"


def sidecar_path(out: Path) -> Path:
    return out.with_suffix(".json") if out.suffix != ".json" else out.with_suffix(".meta.json")


def _events(traj) -> list[dict]:
    return [{"t": e.t, "kind": e.kind.value, "index": e.index} for e in traj.events]


def provenance(raw: Mapping[str, Any], cfg: SimConfig, cli_fields: Iterable[str] = ()) -> dict:
    """Source of every effective parameter: ``config``, ``cli`` or ``default``."""
    out = {key: "config" for key in raw}
    for name in _STATIC_DEFAULTS:
        out.setdefault(name, "default")
    if "capture" in out:
        del out["capture"]
        for sub in ("eps1", "eps2"):
            out[f"capture.{sub}"] = "config" if sub in raw.get("capture", {}) else "default"
    for name in cfg.defaulted:
        out[_PROVENANCE_KEYS[name]] = "default"
    for key in cli_fields:
        out[key] = "cli"
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# config loading


def _read_json(path: str) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _scenario(args) -> tuple[SimConfig, dict, list[str]]:
    if not args.config:
        raise ConfigError("--config is required")
    raw = _read_json(args.config)
    cfg = config_from_dict(raw)
    cli_fields = []
    if args.dt is not None:
        # tolerances tied to dt are re-derived unless the file sets them
        cfg = replace(cfg, dt=args.dt)
        cli_fields.append("dt")
    if args.seed is not None:
        if not isinstance(cfg.disturbance, UniformRandom):
            raise ConfigError("--seed applies only to a uniform_random disturbance")
        cfg = replace(cfg, disturbance=replace(cfg.disturbance, seed=args.seed))
        cli_fields.append("disturbance.seed")
    return validate_config(cfg), raw, cli_fields


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    cfg, raw, cli_fields = _scenario(args)
    if not args.out:
        raise ConfigError("--out is required")
    traj = simulate(cfg, args.law)
    meta = {
        "command": "simulate",
        "law": args.law,
        "config": config_to_dict(cfg),
        "provenance": provenance(raw, cfg, cli_fields),
        "captured_at": traj.captured_at,
        "diverged": traj.diverged,
        "events": _events(traj),
        "n_samples": len(traj),
        "columns": list(TRAJECTORY_COLUMNS),
    }
    out = Path(args.out)
    if args.format == "json":
        meta["data"] = {
            "t": traj.t.tolist(), "x1": traj.x1.tolist(), "x2": traj.x2.tolist(),
            "u": traj.u.tolist(), "u_filt": traj.u_filt.tolist(), "d": traj.d.tolist(),
            "region": [DOMAIN_CODES[c].value for c in traj.domain],
            "in_ca": [bool(v) for v in traj.in_ca],
            "v_new": traj.v_new.tolist(), "energy": traj.energy.tolist(),
        }
        _write(out, dump_json(meta))
    else:
        meta["csv"] = out.name
        _write(out, trajectory_csv(traj))
        _write(sidecar_path(out), dump_json(meta))
    if traj.diverged:
        raise _Divergence(f"run diverged at t={traj.events[-1].t}")
    if traj.captured_at is None:
        print(f"no capture before t_end={cfg.t_end}", file=sys.stderr)
    else:
        print(f"captured at t={traj.captured_at}", file=sys.stderr)
    return EXIT_OK


def _arc_dict(arc) -> dict:
    if isinstance(arc, analytic.ParabolicArc):
        return {
            "kind": "parabolic",
            "x0": list(arc.x0),
            "sign_branch": arc.sign_branch,
            "t_exit": arc.t_exit,
            "end": list(arc.end),
        }
    return {
        "kind": "harmonic",
        "x0": list(arc.x0),
        "B": arc.B,
        "omega": arc.omega,
        "phi": arc.phi,
        "t_reach": arc.t_reach,
        "mirrored": arc.mirrored,
    }


def cmd_analytic(args) -> int:
    x0 = State(args.x1, args.x2)
    if not args.gamma > 0:
        raise ConfigError("--gamma must be positive")
    arcs = analytic.compose_arcs(x0, args.gamma)
    meta: dict[str, Any] = {
        "command": "analytic",
        "x0": list(x0),
        "gamma": args.gamma,
        "sample_dt": args.sample_dt,
        "arcs": [_arc_dict(a) for a in arcs],
        "total_time": analytic.total_time(arcs),
    }
    if analytic.in_ca(x0, args.gamma):
        # the alternative denominator sqrt(gamma*|x1| - x2^2), reported for comparison
        meta["t_reach_alt_denominator"] = analytic.reach_time_Ca_printed(x0, args.gamma)
    if args.format == "json" or not args.out:
        _emit(dump_json(meta), args.out)
        return EXIT_OK
    traj = analytic.compose_trajectory(x0, args.gamma, args.sample_dt)
    out = Path(args.out)
    meta["csv"] = out.name
    _write(out, trajectory_csv(traj))
    _write(sidecar_path(out), dump_json(meta))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg, raw, cli_fields = _scenario(args)
    ref_dt = args.reference_dt
    on_axis = cfg.x0.x1 == 0 and cfg.x0.x2 != 0
    if ref_dt is None and on_axis:
        ref_dt = AXIS_REFERENCE_DT
    if ref_dt is None:
        report = compare_with_analytic(cfg, args.law)
        against = "analytic"
    else:
        report = compare_with_reference(cfg, ref_dt, args.law)
        against = f"simulation at dt={ref_dt!r}"
    result = {
        "command": "compare",
        "against": against,
        "config": config_to_dict(cfg),
        "provenance": provenance(raw, cfg, cli_fields),
        "max_x1_err": report.max_x1_err,
        "max_x2_err": report.max_x2_err,
        "max_u_err": report.max_u_err,
        "at_t": report.at_t,
        "n_compared": report.n_compared,
    }
    _emit(dump_json(result), args.out)
    return EXIT_OK


def gain_report(D: float, eta: float | None = None) -> dict:
    if not (math.isfinite(D) and D >= 0):
        raise ConfigError(f"D must be finite and >= 0, got {D}")
    g_new = gamma_min_new(D)
    g = 1.001 * g_new
    eta_src = "cli"
    if eta is None:
        eta = 1e-3 * max(1.0, D)
        eta_src = "default"
    interval = epsilon_interval(g, D, eta)
    return {
        "D": D,
        "gamma_min_old": gamma_min_old(D),
        "gamma_min_new": g_new,
        "epsilon_interval_at": {
            "gamma": g,
            "eta": eta,
            "interval": None if interval is None else list(interval),
        },
        "provenance": {"eta": eta_src},
    }


def cmd_gain(args) -> int:
    _emit(dump_json(gain_report(args.D, args.eta)), args.out)
    return EXIT_OK


def cmd_lyapunov_map(args) -> int:
    if args.resolution < 2:
        raise ConfigError(f"--resolution must be >= 2, got {args.resolution}")
    if not args.out:
        raise ConfigError("--out is required")
    prov = {"eta": "cli", "epsilon": "cli", "x1_range": "cli", "x2_range": "cli"}
    eta = args.eta
    if eta is None:
        eta = min(1e-3 * max(1.0, args.D), 0.5 * (args.gamma - args.D))
        prov["eta"] = "default"
    epsilon = args.epsilon
    if epsilon is None:
        epsilon = default_epsilon(args.gamma, args.D, eta)
        prov["epsilon"] = "default"
    try:
        p = LyapunovParams(args.gamma, args.D, eta, epsilon)
    except QcsmcError as exc:
        raise ConfigError(str(exc)) from None
    x1r = tuple(args.x1_range) if args.x1_range else (-2.0, 2.0)
    x2r = tuple(args.x2_range) if args.x2_range else (-20.0, 20.0)
    if not args.x1_range:
        prov["x1_range"] = "default"
    if not args.x2_range:
        prov["x2_range"] = "default"
    grid = grid_map(p, x1r, x2r, args.resolution)
    meta = {
        "command": "lyapunov-map",
        "gamma": p.gamma,
        "D": p.D,
        "eta": p.eta,
        "epsilon": p.epsilon,
        "x1_range": list(x1r),
        "x2_range": list(x2r),
        "resolution": args.resolution,
        "provenance": prov,
        "columns": ["x1", "x2", "v_new"],
    }
    out = Path(args.out)
    if args.format == "json":
        meta["values"] = grid.values.tolist()
        meta["x1"] = grid.x1.tolist()
        meta["x2"] = grid.x2.tolist()
        _write(out, dump_json(meta))
    else:
        meta["csv"] = out.name
        _write(out, grid_csv(grid))
        _write(sidecar_path(out), dump_json(meta))
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigError("--config is required")
    raw = dict(_read_json(args.config))
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.law != MODIFIED:
        raw["law"] = args.law
    if args.dt is not None:
        raw["base"] = {**raw.get("base", {}), "dt": args.dt}
    spec = sweep_from_dict(raw)
    result = run_sweep(spec, workers=args.workers)
    _emit(dump_json(result), args.out)
    agg = result["aggregate"]
    print(
        f"{agg['samples']} runs, {agg['captured']} captured, {agg['diverged']} diverged",
        file=sys.stderr,
    )
    if agg["diverged"]:
        raise _Divergence(f"{agg['diverged']} run(s) diverged")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="scenario (or sweep) JSON file")
    p.add_argument("--out", metavar="PATH", help="output file; JSON-only commands print to stdout if omitted")
    p.add_argument("--law", choices=LAWS, default=MODIFIED)
    p.add_argument("--seed", type=int, help="override the random-disturbance seed")
    p.add_argument("--dt", type=float, help="override the step size")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcsmc",
        description="Quasi-continuous sliding-mode control of a perturbed double integrator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a scenario file")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analytic", help="closed-form unperturbed trajectory")
    _common(p)
    p.add_argument("--x1", type=float, required=True)
    p.add_argument("--x2", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--sample-dt", type=float, default=1e-4)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("compare", help="simulated run vs closed form (or fine-step reference)")
    _common(p)
    p.add_argument("--reference-dt", type=float, help="compare against a simulation at this step")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gain", help="gain thresholds and admissible epsilon range")
    _common(p)
    p.add_argument("--D", type=float, required=True)
    p.add_argument("--eta", type=float)
    p.set_defaults(func=cmd_gain)

    p = sub.add_parser("lyapunov-map", help="grid of V_new values")
    _common(p)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--D", type=float, default=0.0)
    p.add_argument("--eta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--x1-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--x2-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--resolution", type=int, default=201)
    p.set_defaults(func=cmd_lyapunov_map)

    p = sub.add_parser("sweep", help="seeded Monte Carlo sweep")
    _common(p)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except _Divergence as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except NonFiniteState as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (QcsmcError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
