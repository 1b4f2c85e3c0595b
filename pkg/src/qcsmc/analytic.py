"""Closed-form unperturbed solutions and reaching times.

In U (x1*x2 >= 0) the law is the constant ``-gamma*sgn(x1)`` and the state
follows a parabola until x2 hits zero. In C_a the damped closed loop has a
harmonic solution that reaches the origin in finite time with ``|u| <= gamma``.
Quadrants II/III are handled through the point symmetry ``x -> -x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .controller import sgn
from .core import Event, EventKind, State, Trajectory
from .errors import (
    DegenerateOrigin,
    GammaTooSmall,
    NotCovered,
    NotInCa,
    NotInU,
    OutOfWindow,
)
from .lyapunov import LyapunovParams, default_epsilon
from .trajectory import assemble

ARCCOS_TOL = 1e-12


def in_u(x: State) -> bool:
    return x.x1 * x.x2 >= 0


def in_ca(x: State, gamma: float) -> bool:
    return x.x1 * x.x2 < 0 and x.x2 * x.x2 < 2.0 * gamma * abs(x.x1)


def _clamp_unit(a: float) -> float:
    if a > 1.0 + ARCCOS_TOL or a < -1.0 - ARCCOS_TOL:
        raise ValueError(f"arccos argument {a} outside [-1, 1]")
    return min(1.0, max(-1.0, a))


# ---------------------------------------------------------------------------
# U: parabolic arcs


@dataclass(frozen=True)
class ParabolicArc:
    x0: State
    gamma: float
    sign_branch: int
    t_exit: float

    @property
    def duration(self) -> float:
        return self.t_exit

    def evaluate(self, t):
        """Return ``(x1, x2, u)`` arrays for times ``t`` measured from the arc start."""
        t = np.asarray(t, dtype=float)
        s, g = self.sign_branch, self.gamma
        x1 = self.x0.x1 + self.x0.x2 * t - s * g * t * t / 2.0
        x2 = self.x0.x2 - s * g * t
        return x1, x2, np.full(t.shape, -s * g)

    def at(self, t: float) -> State:
        x1, x2, _ = self.evaluate(t)
        return State(float(x1), float(x2))

    @property
    def end(self) -> State:
        # closed form of the exit point; x2 is exactly zero there
        s, g, x1, x2 = self.sign_branch, self.gamma, self.x0.x1, self.x0.x2
        return State(x1 + s * x2 * x2 / (2.0 * g), 0.0)


def parabolic_arc(x0: State, gamma: float) -> ParabolicArc:
    if not in_u(x0):
        raise NotInU(f"{x0} is not in U (x1*x2 < 0)")
    if x0.x1 == 0 and x0.x2 == 0:
        raise DegenerateOrigin("the origin has no parabolic arc")
    branch = sgn(x0.x1) if x0.x1 != 0 else sgn(x0.x2)
    return ParabolicArc(x0, gamma, branch, abs(x0.x2) / gamma)


def reach_time_U(x0: State, gamma: float) -> float:
    if not in_u(x0):
        raise NotInU(f"{x0} is not in U (x1*x2 < 0)")
    return abs(x0.x2) / gamma


def reach_time_U_bounds(x0: State, gamma: float, D: float) -> tuple[float, float]:
    """Bracket on the U-exit time under any disturbance with ``|d| <= D``."""
    if not in_u(x0):
        raise NotInU(f"{x0} is not in U (x1*x2 < 0)")
    if gamma <= D:
        raise GammaTooSmall(f"gamma={gamma} must exceed D={D}")
    a = abs(x0.x2)
    return a / (gamma + D), a / (gamma - D)


# ---------------------------------------------------------------------------
# C_a: harmonic arcs


@dataclass(frozen=True)
class HarmonicArc:
    B: float
    omega: float
    phi: float
    gamma: float
    x0: State
    t_reach: float
    mirrored: bool = False

    @property
    def duration(self) -> float:
        return self.t_reach

    def evaluate(self, t):
        """Return ``(x1, x2, u)`` arrays; ``t`` must lie in ``[0, t_reach]``.

        Evaluated through the remaining angle ``omega*(t_reach - t)`` so the
        endpoint lands exactly on the origin.
        """
        t = np.asarray(t, dtype=float)
        psi = self.omega * (self.t_reach - t)
        half = np.sin(0.5 * psi)
        x1 = 2.0 * self.B * half * half
        x2 = -math.sqrt(self.gamma * self.B) * np.sin(psi)
        u = self.gamma * np.cos(psi)
        if self.mirrored:
            return -x1, -x2, -u
        return x1, x2, u

    def evaluate_derivative(self, t):
        """Closed-form time derivative ``(dx1/dt, dx2/dt)``."""
        t = np.asarray(t, dtype=float)
        psi = self.omega * (self.t_reach - t)
        dx1 = -math.sqrt(self.gamma * self.B) * np.sin(psi)
        dx2 = self.gamma * np.cos(psi)
        if self.mirrored:
            return -dx1, -dx2
        return dx1, dx2


def _harmonic_core(x1: float, x2: float, gamma: float) -> tuple[float, float, float, float]:
    """Quadrant-IV constants ``(B, omega, phi, t_reach)`` for ``x1 > 0 >= x2``."""
    slack = 2.0 * gamma * x1 - x2 * x2
    B = gamma * x1 * x1 / slack
    omega = math.sqrt(gamma / B)
    phi = math.pi + math.acos(_clamp_unit(1.0 - x2 * x2 / (gamma * x1)))
    # pi - arccos(a) = 2*asin(sqrt((1 + a)/2)), with 1 + a = slack/(gamma*x1);
    # this form stays accurate as x0 approaches the C_a boundary
    remaining = 2.0 * math.asin(min(1.0, math.sqrt(slack / (2.0 * gamma * x1))))
    return B, omega, phi, remaining / omega


def harmonic_params(x0: State, gamma: float) -> HarmonicArc:
    """Harmonic-arc constants for a start in C_a.

    A start on the x1-axis (x2 = 0, x1 != 0) is accepted as the closure point
    through which U-arcs hand over to C_a.
    """
    x1, x2 = x0.x1, x0.x2
    on_boundary = x2 == 0 and x1 != 0
    if not (on_boundary or in_ca(x0, gamma)):
        raise NotInCa(f"{x0} is not in C_a for gamma={gamma}")
    mirrored = x1 < 0
    if mirrored:
        x1, x2 = -x1, -x2
    B, omega, phi, t_reach = _harmonic_core(x1, x2, gamma)
    return HarmonicArc(B, omega, phi, gamma, x0, t_reach, mirrored)


def harmonic_eval(arc: HarmonicArc, t: float) -> tuple[State, float]:
    if not 0.0 <= t <= arc.t_reach:
        raise OutOfWindow(f"t={t} outside [0, {arc.t_reach}]")
    x1, x2, u = arc.evaluate(t)
    return State(float(x1), float(x2)), float(u)


def reach_time_Ca(x0: State, gamma: float) -> float:
    """Finite time to reach the origin from ``x0`` in C_a (unperturbed)."""
    return harmonic_params(x0, gamma).t_reach


def reach_time_Ca_printed(x0: State, gamma: float) -> float | None:
    """Reaching time with the denominator ``sqrt(gamma*|x1| - x2^2)``.

    Kept only to compare against the simulated capture time. Returns ``None``
    where that denominator is not a positive real.
    """
    if not in_ca(x0, gamma):
        raise NotInCa(f"{x0} is not in C_a for gamma={gamma}")
    a1, x2 = abs(x0.x1), x0.x2
    denom = gamma * a1 - x2 * x2
    if denom <= 0:
        return None
    return a1 * (math.pi - math.acos(_clamp_unit(1.0 - x2 * x2 / (gamma * a1)))) / math.sqrt(denom)


# ---------------------------------------------------------------------------
# composition

Arc = Union[ParabolicArc, HarmonicArc]


def compose_arcs(x0: State, gamma: float) -> list[Arc]:
    """Chain of closed-form arcs from ``x0`` to the origin (empty at the origin)."""
    if x0.x1 == 0 and x0.x2 == 0:
        return []
    if in_u(x0):
        para = parabolic_arc(x0, gamma)
        return [para, harmonic_params(para.end, gamma)]
    if in_ca(x0, gamma):
        return [harmonic_params(x0, gamma)]
    raise NotCovered(f"{x0} is not in C_a (C outside C_a has no closed form)")


def total_time(arcs: list[Arc]) -> float:
    return math.fsum(a.duration for a in arcs)


def _default_lyap(gamma: float) -> LyapunovParams:
    eta = min(1e-3, 0.5 * gamma)
    return LyapunovParams(gamma, 0.0, eta, default_epsilon(gamma, 0.0, eta))


def compose_trajectory(
    x0: State,
    gamma: float,
    sample_dt: float,
    lyap: LyapunovParams | None = None,
) -> Trajectory:
    """Sample the arc chain on the grid ``k*sample_dt`` up to the total time.

    The returned record carries a Capture event at the exact arrival time.
    """
    arcs = compose_arcs(x0, gamma)
    T = total_time(arcs)
    n = int(math.floor(T / sample_dt * (1 + 1e-12)))
    t = np.arange(n + 1) * sample_dt
    x1 = np.empty(n + 1)
    x2 = np.empty(n + 1)
    u = np.empty(n + 1)
    start = 0.0
    for i, arc in enumerate(arcs):
        # later arcs overwrite the clipped tail of earlier ones
        sel = t >= start if i == 0 else t > start
        local = np.clip(t[sel] - start, 0.0, arc.duration)
        x1[sel], x2[sel], u[sel] = arc.evaluate(local)
        start += arc.duration
    if not arcs:
        x1[:], x2[:], u[:] = 0.0, 0.0, 0.0
    events = [Event(T, EventKind.CAPTURE, n)]
    return assemble(
        t, x1, x2, u, np.zeros(n + 1),
        gamma=gamma,
        lyap=lyap or _default_lyap(gamma),
        dt=sample_dt,
        events=events,
        capture_index=n,
        captured_at=T,
    )
