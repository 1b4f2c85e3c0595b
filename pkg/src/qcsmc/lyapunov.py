"""Lyapunov and energy functions, gain thresholds and numeric decrease checks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import State, Trajectory
from .errors import EpsilonOutOfRange, PreconditionViolated

log = logging.getLogger(__name__)

FALLBACK_EPSILON = 0.6


@dataclass(frozen=True)
class LyapunovParams:
    gamma: float
    D: float
    eta: float
    epsilon: float

    def __post_init__(self):
        if not self.gamma > self.D + self.eta:
            raise PreconditionViolated(
                f"need gamma > D + eta, got gamma={self.gamma}, D={self.D}, eta={self.eta}"
            )
        hi = epsilon_posdef_bound(self.gamma, self.D, self.eta)
        if not 0 < self.epsilon < hi:
            raise EpsilonOutOfRange(f"epsilon={self.epsilon} outside (0, {hi})")

    @classmethod
    def from_control(cls, params) -> LyapunovParams:
        return cls(params.gamma, params.D, params.eta, params.epsilon)


def xi(x: State) -> tuple[float, float]:
    x1 = x.x1
    return math.copysign(math.sqrt(abs(x1)), x1) if x1 != 0 else 0.0, x.x2


def _signed_sqrt(x1):
    return np.sign(x1) * np.sqrt(np.abs(x1))


def v_new_arrays(x1, x2, p: LyapunovParams):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    k = p.gamma - p.D - p.eta
    # huge states (diverging runs) may overflow to inf; that is the honest value
    with np.errstate(over="ignore", invalid="ignore"):
        coupling = np.where(x1 * x2 < 0, p.epsilon, 0.0)
        return 0.5 * (2.0 * k * np.abs(x1) + 2.0 * coupling * _signed_sqrt(x1) * x2 + x2 * x2)


def v_new(x: State, p: LyapunovParams) -> float:
    """Switched-coupling Lyapunov function; the coupling is on only where x1*x2 < 0."""
    return float(v_new_arrays(x.x1, x.x2, p))


def v_old(x: State, gamma: float, epsilon: float) -> float:
    """Lyapunov candidate for the original law (coupling active everywhere)."""
    if not 0 < epsilon < 2.0 / 3.0:
        raise EpsilonOutOfRange(f"epsilon={epsilon} outside (0, 2/3)")
    a, b = xi(x)
    return 0.5 * (2.0 * gamma * abs(x.x1) + 2.0 * epsilon * a * b + b * b)


def energy_arrays(x1, x2, gamma: float):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return gamma * np.abs(x1) + 0.5 * x2 * x2


def energy(x: State, gamma: float) -> float:
    return gamma * abs(x.x1) + 0.5 * x.x2 * x.x2


def gamma_min_old(D: float) -> float:
    return D**1.5 + D + 0.5


def gamma_min_new(D: float) -> float:
    return 2.0 * math.sqrt(2.0) * D**1.5 + D + 0.5


def epsilon_posdef_bound(gamma: float, D: float, eta: float) -> float:
    """Upper end of the epsilon range keeping V_new positive definite."""
    return math.sqrt(2.0 * max(gamma - D - eta, 0.0))


def epsilon_interval(gamma: float, D: float, eta: float) -> tuple[float, float] | None:
    """Open interval of coupling values for which V_new strictly decreases.

    Returns ``None`` when the interval is empty.
    """
    if not (gamma > D + eta and gamma > 0.5 + D):
        raise PreconditionViolated(
            f"need gamma > D + eta and gamma > D + 1/2 (gamma={gamma}, D={D}, eta={eta})"
        )
    lo = (2.0 / 3.0) * (2.0 * D + eta) ** 1.5 / (gamma - 0.5 - D)
    hi = min(2.0 / 3.0, epsilon_posdef_bound(gamma, D, eta))
    return (lo, hi) if lo < hi else None


def default_epsilon(gamma: float, D: float, eta: float) -> float:
    try:
        interval = epsilon_interval(gamma, D, eta)
    except PreconditionViolated:
        interval = None
    if interval is not None:
        return 0.5 * (interval[0] + interval[1])
    eps = min(FALLBACK_EPSILON, 0.5 * epsilon_posdef_bound(gamma, D, eta))
    log.warning(
        "empty epsilon interval for gamma=%g, D=%g, eta=%g; using epsilon=%g",
        gamma, D, eta, eps,
    )
    return eps


@dataclass
class VdotReport:
    series: np.ndarray
    monotone: bool
    max_positive_jump: float
    checked_steps: int
    violations: int
    # max over open-U steps of (finite-difference Vdot + eta*|x2|); -inf if none
    u_region_excess: float


def _step_mask(traj: Trajectory) -> np.ndarray:
    """Steps k -> k+1 eligible for the decrease verdict."""
    x1, x2 = traj.x1, traj.x2
    off_axes = (x1 != 0) & (x2 != 0)
    ok = off_axes[:-1] & off_axes[1:]
    ok &= np.sign(x1[:-1]) == np.sign(x1[1:])
    ok &= np.sign(x2[:-1]) == np.sign(x2[1:])
    if traj.capture_eps is not None:
        e1, e2 = traj.capture_eps
        band = (np.abs(x1) <= e1) & (np.abs(x2) <= e2)
        ok &= ~band[:-1] & ~band[1:]
    if traj.capture_index is not None:
        ok[traj.capture_index:] = False
    return ok


def vdot_along(traj: Trajectory, p: LyapunovParams) -> VdotReport:
    """Finite-difference decrease check of V_new along a sampled trajectory.

    Steps touching or crossing an axis and steps inside the capture band are
    exempt from the verdict but still appear in ``series``.
    """
    v = v_new_arrays(traj.x1, traj.x2, p)
    dv = np.diff(v)
    series = dv / traj.dt
    mask = _step_mask(traj)
    tol = 1e-9 * np.maximum(1.0, v[:-1])
    bad = mask & (dv > tol)
    jumps = dv[mask]
    in_u = mask & (traj.x1[:-1] * traj.x2[:-1] > 0)
    excess = series[in_u] + p.eta * np.abs(traj.x2[:-1][in_u])
    return VdotReport(
        series=series,
        monotone=not bool(bad.any()),
        max_positive_jump=float(max(jumps.max(), 0.0)) if jumps.size else 0.0,
        checked_steps=int(mask.sum()),
        violations=int(bad.sum()),
        u_region_excess=float(excess.max()) if excess.size else -math.inf,
    )


@dataclass(eq=False)
class GridMap:
    x1: np.ndarray
    x2: np.ndarray
    values: np.ndarray  # values[i, j] = V(x1[i], x2[j])
    params: LyapunovParams

    @property
    def resolution(self) -> int:
        return len(self.x1)

    def rows(self):
        for i, a in enumerate(self.x1):
            for j, b in enumerate(self.x2):
                yield float(a), float(b), float(self.values[i, j])


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    # integer numerators keep symmetric ranges exactly odd about their midpoint
    t = np.arange(-(n - 1), n, 2) / (n - 1)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * t


def grid_map(
    p: LyapunovParams,
    x1_range: tuple[float, float],
    x2_range: tuple[float, float],
    resolution: int,
) -> GridMap:
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    x1 = _axis(*x1_range, resolution)
    x2 = _axis(*x2_range, resolution)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    return GridMap(x1, x2, v_new_arrays(X1, X2, p), p)
