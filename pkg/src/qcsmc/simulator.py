"""Fixed-step closed-loop simulation of the perturbed double integrator.

The control is evaluated at the left end of each step and held, together with
the step's disturbance value (sampled-data implementation). Three integrators:

``zoh`` (default)
    exact plant response to the held input:
    ``x1 += dt*x2 + dt**2/2*(u + d)``, ``x2 += dt*(u + d)``.
``euler``
    explicit first-order update ``x1 += dt*x2``, ``x2 += dt*(u + d)``.
``rk4``
    re-evaluates the law at the Runge-Kutta stages with ``d`` held; for
    refinement studies only.

All three are first order in the closed loop because the control is held;
``zoh`` has a much smaller error constant than ``euler``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from . import analytic
from .controller import MODIFIED, control_scalar
from .core import (
    DisturbanceSpec,
    Event,
    EventKind,
    PostCapture,
    SimConfig,
    State,
    Trajectory,
    UniformRandom,
    validate_config,
)
from .errors import NoCPhase, NonFiniteState, NotCovered
from .lyapunov import LyapunovParams
from .trajectory import assemble


@dataclass(frozen=True)
class StepOutcome:
    next: State
    u: float
    d: float
    clamped: bool


@dataclass(frozen=True)
class ErrorReport:
    max_x1_err: float
    max_x2_err: float
    max_u_err: float
    at_t: float
    n_compared: int = 0

    @property
    def max_state_err(self) -> float:
        return max(self.max_x1_err, self.max_x2_err)


@dataclass(frozen=True)
class OvershootReport:
    overshoot: bool
    first_violation_t: float | None = None


def eval_disturbance(
    spec: DisturbanceSpec,
    t: float,
    step_index: int = 0,
    rng_state: np.ndarray | None = None,
) -> float:
    """Value of ``spec`` applied over step ``step_index`` starting at time ``t``.

    ``rng_state`` may carry a precomputed random stream for ``UniformRandom``.
    """
    if isinstance(spec, UniformRandom):
        stream = rng_state if rng_state is not None else spec.stream(step_index + 1)
        return float(stream[step_index])
    return float(spec.evaluate(np.array([t]))[0])


def _rhs_rk4(x1, x2, d, dt, gamma, cap, law):
    u1, c1 = control_scalar(x1, x2, gamma, cap, law)
    k1 = (x2, u1 + d)
    a1, a2 = x1 + 0.5 * dt * k1[0], x2 + 0.5 * dt * k1[1]
    k2 = (a2, control_scalar(a1, a2, gamma, cap, law)[0] + d)
    a1, a2 = x1 + 0.5 * dt * k2[0], x2 + 0.5 * dt * k2[1]
    k3 = (a2, control_scalar(a1, a2, gamma, cap, law)[0] + d)
    a1, a2 = x1 + dt * k3[0], x2 + dt * k3[1]
    k4 = (a2, control_scalar(a1, a2, gamma, cap, law)[0] + d)
    n1 = x1 + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    n2 = x2 + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return n1, n2, u1, c1


def step(
    x: State,
    t: float,
    cfg: SimConfig,
    law: str = MODIFIED,
    rng_state: np.ndarray | None = None,
    step_index: int | None = None,
) -> StepOutcome:
    """Advance one step of length ``cfg.dt`` from ``(t, x)``."""
    if step_index is None:
        step_index = int(round(t / cfg.dt))
    d = eval_disturbance(cfg.disturbance, t, step_index, rng_state)
    gamma, cap, dt = cfg.params.gamma, cfg.delta_cap, cfg.dt
    if cfg.integrator == "rk4":
        n1, n2, u, clamped = _rhs_rk4(x.x1, x.x2, d, dt, gamma, cap, law)
    else:
        u, clamped = control_scalar(x.x1, x.x2, gamma, cap, law)
        a = u + d
        if cfg.integrator == "zoh":
            n1 = x.x1 + dt * x.x2 + 0.5 * dt * dt * a
        else:
            n1 = x.x1 + dt * x.x2
        n2 = x.x2 + dt * a
    if not (math.isfinite(n1) and math.isfinite(n2)):
        raise NonFiniteState(f"state diverged at t={t + dt}")
    return StepOutcome(State(n1, n2), u, d, clamped)


def filter_control(u_series, cutoff_hz: float, dt: float) -> np.ndarray:
    """First-order low-pass ``y[k] = y[k-1] + alpha*(u[k] - y[k-1])``, ``y[0] = u[0]``.

    A cutoff of 0 disables filtering and returns a copy of the input.
    """
    u = np.asarray(u_series, dtype=float)
    if cutoff_hz < 0:
        raise ValueError("cutoff_hz must be >= 0")
    if cutoff_hz == 0 or len(u) == 0:
        return u.copy()
    alpha = -math.expm1(-2.0 * math.pi * cutoff_hz * dt)
    y, _ = lfilter([alpha], [1.0, alpha - 1.0], u, zi=[(1.0 - alpha) * u[0]])
    return y


def _in_band(x1: float, x2: float, e1: float, e2: float) -> bool:
    return abs(x1) <= e1 and abs(x2) <= e2


def simulate(cfg: SimConfig, law: str = MODIFIED) -> Trajectory:
    """Run the closed loop from ``cfg.x0`` over ``[0, t_end]``.

    Sample ``k`` holds the state at ``t = k*dt`` and the control applied over
    the following step. On non-finite states the run stops and a Diverged
    event closes the trajectory.
    """
    if cfg.dt is None or cfg.capture_eps1 is None:
        cfg = validate_config(cfg)
    dt, n = cfg.dt, cfg.n_steps
    gamma, cap = cfg.params.gamma, cfg.delta_cap
    e1, e2 = cfg.capture_eps1, cfg.capture_eps2
    rk4 = cfg.integrator == "rk4"
    h2 = 0.5 * dt * dt if cfg.integrator == "zoh" else 0.0
    hold = PostCapture(cfg.post_capture) is PostCapture.HOLD

    t = np.arange(n + 1) * dt
    d = cfg.disturbance.evaluate(t)
    dl = d.tolist()

    x1, x2 = float(cfg.x0.x1), float(cfg.x0.x2)
    xs1, xs2, us, cl = [x1], [x2], [], []
    capture = 0 if _in_band(x1, x2, e1, e2) else None
    diverged = None
    k = 0
    while k < n:
        if capture is not None and hold:
            break
        dk = dl[k]
        if rk4:
            x1, x2, u, c = _rhs_rk4(x1, x2, dk, dt, gamma, cap, law)
        else:
            u, c = control_scalar(x1, x2, gamma, cap, law)
            a = u + dk
            x1, x2 = x1 + dt * x2 + h2 * a, x2 + dt * a
        us.append(u)
        cl.append(c)
        k += 1
        if not (math.isfinite(x1) and math.isfinite(x2)):
            diverged = k
            break
        xs1.append(x1)
        xs2.append(x2)
        if capture is None and abs(x1) <= e1 and abs(x2) <= e2:
            capture = k

    events = []
    if diverged is not None:
        t, d = t[:diverged], d[:diverged]
        events.append(Event(float(diverged * dt), EventKind.DIVERGED, diverged - 1))
    elif capture is not None and hold:
        # pinned at the origin from the sample after capture, control recorded as 0
        pad = n - capture
        us += [0.0] * (pad + 1)
        cl += [False] * (pad + 1)
        xs1 += [0.0] * pad
        xs2 += [0.0] * pad
    else:
        # control that would be applied from the last sample
        u_last, c_last = control_scalar(x1, x2, gamma, cap, law)
        us.append(u_last)
        cl.append(c_last)
    x1a, x2a = np.array(xs1), np.array(xs2)
    u_arr = np.array(us, dtype=float)
    cl_arr = np.array(cl, dtype=bool)

    if capture is not None:
        events.append(Event(float(t[capture]), EventKind.CAPTURE, capture))
    rising = np.flatnonzero(np.diff(np.concatenate(([False], cl_arr)).astype(np.int8)) == 1)
    events.extend(Event(float(t[i]), EventKind.DELTA_CLAMPED, int(i)) for i in rising)

    return assemble(
        t, x1a, x2a, u_arr, d,
        gamma=gamma,
        lyap=LyapunovParams.from_control(cfg.params),
        dt=dt,
        u_filt=filter_control(u_arr, cfg.filter_cutoff, dt),
        clamped=cl_arr,
        events=events,
        capture_index=capture,
        capture_eps=(e1, e2),
        domain_limit=capture,
    )


# ---------------------------------------------------------------------------
# checks on simulated runs


def _band_mask(x1, x2, scale: float, e1: float, e2: float) -> np.ndarray:
    return (np.abs(x1) <= scale * e1) & (np.abs(x2) <= scale * e2)


def compare_with_analytic(
    cfg: SimConfig,
    law: str = MODIFIED,
    band_scale: float = 100.0,
) -> ErrorReport:
    """Max deviation between the simulated run and the closed-form arcs.

    Both are sampled on the grid ``k*dt`` up to the earlier of the analytic
    arrival time and the simulated capture. Control errors are taken only
    outside an enlarged capture band (``band_scale`` times the capture
    tolerances), where the discrete loop starts to chatter.
    """
    cfg = validate_config(cfg)
    if cfg.disturbance.sup_norm() != 0:
        raise ValueError("analytic comparison needs a zero disturbance")
    if not (analytic.in_u(cfg.x0) or analytic.in_ca(cfg.x0, cfg.params.gamma)):
        raise NotCovered(f"{cfg.x0} is not in C_a (C outside C_a has no closed form)")
    ref = analytic.compose_trajectory(cfg.x0, cfg.params.gamma, cfg.dt)
    t_end = max(cfg.t_end, ref.captured_at + 10 * cfg.dt)
    sim = simulate(replace(cfg, t_end=t_end), law)
    return _compare(sim, ref, cfg, band_scale)


def compare_with_reference(
    cfg: SimConfig,
    ref_dt: float,
    law: str = MODIFIED,
    band_scale: float = 100.0,
) -> ErrorReport:
    """Like :func:`compare_with_analytic` but against a fine-step simulation.

    Used where the closed form does not match the sampled law exactly, such as
    starts on the x2-axis where ``sgn(0) = 0`` holds the control at zero for
    the first step. ``cfg.dt`` must be an integer multiple of ``ref_dt``.
    """
    cfg = validate_config(cfg)
    ratio = cfg.dt / ref_dt
    stride = int(round(ratio))
    if abs(ratio - stride) > 1e-9 * ratio:
        raise ValueError("dt must be an integer multiple of ref_dt")
    ref_cfg = replace(
        cfg, dt=ref_dt, capture_eps1=None, capture_eps2=None,
        defaulted=frozenset(),
    )
    ref_cfg = validate_config(ref_cfg)
    ref = simulate(ref_cfg, law)
    ref = _decimate(ref, stride)
    sim = simulate(cfg, law)
    return _compare(sim, ref, cfg, band_scale)


def _decimate(traj: Trajectory, stride: int) -> Trajectory:
    sl = slice(None, None, stride)
    cap = traj.capture_index
    return replace(
        traj,
        t=traj.t[sl], x1=traj.x1[sl], x2=traj.x2[sl], u=traj.u[sl],
        u_filt=traj.u_filt[sl], d=traj.d[sl], domain=traj.domain[sl],
        quadrant=traj.quadrant[sl], in_ca=traj.in_ca[sl], v_new=traj.v_new[sl],
        energy=traj.energy[sl], clamped=traj.clamped[sl],
        dt=traj.dt * stride,
        capture_index=None if cap is None else cap // stride,
    )


def _compare(sim: Trajectory, ref: Trajectory, cfg: SimConfig, band_scale: float) -> ErrorReport:
    stop_ref = ref.capture_index if ref.capture_index is not None else len(ref) - 1
    stop_sim = sim.capture_index if sim.capture_index is not None else len(sim) - 1
    m = min(stop_ref, stop_sim) + 1
    dx1 = np.abs(sim.x1[:m] - ref.x1[:m])
    dx2 = np.abs(sim.x2[:m] - ref.x2[:m])
    e1, e2 = cfg.capture_eps1, cfg.capture_eps2
    away = ~(
        _band_mask(sim.x1[:m], sim.x2[:m], band_scale, e1, e2)
        | _band_mask(ref.x1[:m], ref.x2[:m], band_scale, e1, e2)
    )
    du = np.where(away, np.abs(sim.u[:m] - ref.u[:m]), 0.0)
    worst = int(np.argmax(np.maximum(dx1, dx2)))
    return ErrorReport(
        max_x1_err=float(dx1.max()),
        max_x2_err=float(dx2.max()),
        max_u_err=float(du.max()),
        at_t=float(sim.t[worst]),
        n_compared=m,
    )


def overshoot_check(traj: Trajectory) -> OvershootReport:
    """Detect a sign change of x1 (beyond the capture tolerance) after entering C."""
    enter_c = traj.events_of(EventKind.ENTER_C)
    if not enter_c:
        raise NoCPhase("trajectory never enters C")
    start = enter_c[0].index
    stop = traj.capture_index if traj.capture_index is not None else len(traj)
    tol = traj.capture_eps[0] if traj.capture_eps is not None else 0.0
    side = np.sign(traj.x1[start])
    seg = side * traj.x1[start:stop]
    bad = np.flatnonzero(seg < -tol)
    if bad.size == 0:
        return OvershootReport(False, None)
    return OvershootReport(True, float(traj.t[start + bad[0]]))


def u_exit_time(traj: Trajectory) -> float | None:
    """Time from the first EnterU event to the next EnterC event, if both occur."""
    enter_u = traj.events_of(EventKind.ENTER_U)
    if not enter_u:
        return None
    t0 = enter_u[0].t
    for e in traj.events_of(EventKind.ENTER_C):
        if e.t > t0:
            return e.t - t0
    return None


def max_abs_u_in_u(traj: Trajectory) -> float:
    """Largest recorded |u| at samples in U before capture (0 if none)."""
    stop = traj.capture_index if traj.capture_index is not None else len(traj)
    sel = traj.domain[:stop] == 0
    return float(np.abs(traj.u[:stop][sel]).max()) if sel.any() else 0.0
