"""Shared domain records: states, parameters, disturbances, scenarios, trajectories.

Everything here is an immutable value once validated. Numeric behaviour
(control law, stepping, Lyapunov functions) lives in the sibling modules.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import (
    BadTable,
    ConfigError,
    DisturbanceExceedsBound,
    EpsilonOutOfRange,
    GammaTooSmall,
    NonFinite,
)

log = logging.getLogger(__name__)

DEFAULT_DT = 1e-4


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise NonFinite(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class State:
    x1: float
    x2: float

    def __post_init__(self):
        _require_finite("state", self.x1, self.x2)

    def __neg__(self) -> State:
        return State(-self.x1, -self.x2)

    def __iter__(self) -> Iterator[float]:
        return iter((self.x1, self.x2))

    @property
    def norm(self) -> float:
        return math.hypot(self.x1, self.x2)


@dataclass(frozen=True)
class ControlParams:
    """Gain ``gamma``, disturbance bound ``D`` and the Lyapunov constants.

    ``eta`` and ``epsilon`` may be left as ``None``; :func:`validate_config`
    fills them in.
    """

    gamma: float
    D: float = 0.0
    eta: float | None = None
    epsilon: float | None = None


class Domain(str, enum.Enum):
    U = "U"
    C = "C"


class Quadrant(str, enum.Enum):
    ORIGIN = "origin"
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    AXIS_X1 = "axis_x1"
    AXIS_X2 = "axis_x2"


# integer codes used in columnar trajectory storage
QUADRANT_CODES: tuple[Quadrant, ...] = (
    Quadrant.ORIGIN,
    Quadrant.I,
    Quadrant.II,
    Quadrant.III,
    Quadrant.IV,
    Quadrant.AXIS_X1,
    Quadrant.AXIS_X2,
)
DOMAIN_CODES: tuple[Domain, ...] = (Domain.U, Domain.C)


@dataclass(frozen=True)
class Region:
    domain: Domain
    quadrant: Quadrant
    in_ca: bool = False


# ---------------------------------------------------------------------------
# disturbances


@dataclass(frozen=True)
class Zero:
    def sup_norm(self) -> float:
        return 0.0

    def negated(self) -> Zero:
        return self

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        return np.zeros(len(times))

    def to_dict(self) -> dict:
        return {"type": "zero"}


@dataclass(frozen=True)
class Constant:
    value: float

    def sup_norm(self) -> float:
        return abs(self.value)

    def negated(self) -> Constant:
        return Constant(-self.value)

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        return np.full(len(times), float(self.value))

    def to_dict(self) -> dict:
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class Sinusoid:
    """``amplitude * sin(2*pi*frequency*t + phase)``, frequency in Hz."""

    amplitude: float
    frequency: float
    phase: float = 0.0

    def sup_norm(self) -> float:
        return abs(self.amplitude)

    def negated(self) -> Sinusoid:
        return Sinusoid(-self.amplitude, self.frequency, self.phase)

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return self.amplitude * np.sin(2.0 * np.pi * self.frequency * times + self.phase)

    def to_dict(self) -> dict:
        return {
            "type": "sinusoid",
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
        }


@dataclass(frozen=True)
class UniformRandom:
    """Seeded uniform noise in ``[-bound, bound]``, held constant over each step.

    Sample ``k`` of the stream belongs to step ``k`` regardless of ``dt``.
    ``gain`` is +1 or -1; -1 yields the exact negation of the +1 stream.
    """

    bound: float
    seed: int
    gain: float = 1.0

    def sup_norm(self) -> float:
        return abs(self.bound * self.gain)

    def negated(self) -> UniformRandom:
        return UniformRandom(self.bound, self.seed, -self.gain)

    def stream(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return self.gain * rng.uniform(-self.bound, self.bound, size=n)

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        return self.stream(len(times))

    def to_dict(self) -> dict:
        out = {"type": "uniform_random", "bound": self.bound, "seed": self.seed}
        if self.gain != 1.0:
            out["gain"] = self.gain
        return out


@dataclass(frozen=True)
class Table:
    """Zero-order hold through ``(times, values)``; zero before ``times[0]``."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def sup_norm(self) -> float:
        return max((abs(v) for v in self.values), default=0.0)

    def negated(self) -> Table:
        return Table(self.times, tuple(-v for v in self.values))

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        idx = np.searchsorted(np.asarray(self.times), times, side="right") - 1
        vals = np.asarray(self.values, dtype=float)
        out = np.where(idx >= 0, vals[np.clip(idx, 0, None)], 0.0)
        return out

    def to_dict(self) -> dict:
        return {"type": "table", "times": list(self.times), "values": list(self.values)}


DisturbanceSpec = Union[Zero, Constant, Sinusoid, UniformRandom, Table]


def _get(d: Mapping[str, Any], key: str, where: str, default: Any = ...) -> Any:
    if key not in d:
        if default is ...:
            raise ConfigError(f"{where}: missing key '{key}'")
        return default
    return d[key]


def _num(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    return float(value)


def disturbance_from_dict(d: Mapping[str, Any]) -> DisturbanceSpec:
    if not isinstance(d, Mapping):
        raise ConfigError(f"'disturbance' must be an object, got {d!r}")
    kind = _get(d, "type", "disturbance")
    allowed = {
        "zero": set(),
        "constant": {"value"},
        "sinusoid": {"amplitude", "frequency", "phase"},
        "uniform_random": {"bound", "seed", "gain"},
        "table": {"times", "values"},
    }
    if kind not in allowed:
        raise ConfigError(f"disturbance.type: unknown disturbance type {kind!r}")
    extra = set(d) - allowed[kind] - {"type"}
    if extra:
        raise ConfigError(f"disturbance: unexpected key '{sorted(extra)[0]}' for type {kind}")
    if kind == "zero":
        return Zero()
    if kind == "constant":
        return Constant(_num(_get(d, "value", "disturbance"), "disturbance.value"))
    if kind == "sinusoid":
        return Sinusoid(
            _num(_get(d, "amplitude", "disturbance"), "disturbance.amplitude"),
            _num(_get(d, "frequency", "disturbance"), "disturbance.frequency"),
            _num(d.get("phase", 0.0), "disturbance.phase"),
        )
    if kind == "uniform_random":
        seed = _get(d, "seed", "disturbance")
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError(f"'disturbance.seed' must be an integer, got {seed!r}")
        return UniformRandom(
            _num(_get(d, "bound", "disturbance"), "disturbance.bound"),
            seed,
            _num(d.get("gain", 1.0), "disturbance.gain"),
        )
    times = _get(d, "times", "disturbance")
    values = _get(d, "values", "disturbance")
    if not isinstance(times, Sequence) or not isinstance(values, Sequence):
        raise ConfigError("disturbance.times/values must be arrays")
    return Table(
        tuple(_num(v, "disturbance.times") for v in times),
        tuple(_num(v, "disturbance.values") for v in values),
    )


# ---------------------------------------------------------------------------
# scenario configuration


class PostCapture(str, enum.Enum):
    HOLD = "hold"
    CHATTER = "chatter"


INTEGRATORS = ("zoh", "euler", "rk4")


@dataclass(frozen=True)
class SimConfig:
    x0: State
    params: ControlParams
    disturbance: DisturbanceSpec = field(default_factory=Zero)
    dt: float | None = None
    t_end: float = 1.0
    capture_eps1: float | None = None
    capture_eps2: float | None = None
    delta_cap: float | None = None
    post_capture: PostCapture = PostCapture.HOLD
    filter_cutoff: float | None = None
    integrator: str = "zoh"
    # names of fields whose values came from defaults rather than the user
    defaulted: frozenset = frozenset()

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def validate_config(cfg: SimConfig) -> SimConfig:
    """Check every invariant of ``cfg`` and fill in defaulted fields.

    Idempotent: validating the result again returns an equal record.
    """
    from .lyapunov import default_epsilon, epsilon_posdef_bound

    p = cfg.params
    _require_finite("gamma", p.gamma)
    _require_finite("D", p.D)
    for name in ("eta", "epsilon"):
        v = getattr(p, name)
        if v is not None:
            _require_finite(name, v)
    for name in ("dt", "t_end", "capture_eps1", "capture_eps2", "delta_cap", "filter_cutoff"):
        v = getattr(cfg, name)
        if v is not None:
            _require_finite(name, v)
    _require_finite("x0", cfg.x0.x1, cfg.x0.x2)

    if p.D < 0:
        raise ConfigError(f"D must be >= 0, got {p.D}")
    if p.gamma <= p.D:
        raise GammaTooSmall(f"gamma={p.gamma} must exceed D={p.D}")

    dist = cfg.disturbance
    if isinstance(dist, Table):
        if len(dist.times) != len(dist.values):
            raise BadTable("disturbance table times and values differ in length")
        if any(b <= a for a, b in zip(dist.times, dist.times[1:])):
            raise BadTable("disturbance table times must be strictly increasing")
    if isinstance(dist, UniformRandom) and abs(dist.gain) != 1.0:
        raise ConfigError("uniform_random gain must be +1 or -1")
    if isinstance(dist, Sinusoid) and dist.frequency < 0:
        raise ConfigError("sinusoid frequency must be >= 0")
    for v in dist.to_dict().values():
        if isinstance(v, float):
            _require_finite("disturbance", v)
    if dist.sup_norm() > p.D:
        raise DisturbanceExceedsBound(
            f"disturbance sup-norm {dist.sup_norm()} exceeds D={p.D}"
        )

    defaulted = set(cfg.defaulted)
    dt = cfg.dt
    if dt is None:
        dt = DEFAULT_DT
        defaulted.add("dt")
    if dt <= 0 or cfg.t_end <= 0:
        raise ConfigError("dt and t_end must be positive")
    if dt > cfg.t_end:
        raise ConfigError(f"dt={dt} exceeds t_end={cfg.t_end}")

    eps2 = cfg.capture_eps2
    if eps2 is None:
        eps2 = p.gamma * dt
        defaulted.add("capture_eps2")
    eps1 = cfg.capture_eps1
    if eps1 is None:
        eps1 = p.gamma * dt * dt
        defaulted.add("capture_eps1")
    cap = cfg.delta_cap
    if cap is None:
        cap = 1e3 * p.gamma
        defaulted.add("delta_cap")
    if eps1 <= 0 or eps2 <= 0 or cap <= 0:
        raise ConfigError("capture tolerances and delta_cap must be positive")
    cutoff = cfg.filter_cutoff
    if cutoff is None:
        cutoff = 0.0
        defaulted.add("filter_cutoff")
    if cutoff < 0:
        raise ConfigError("filter_cutoff_hz must be >= 0")
    if cfg.integrator not in INTEGRATORS:
        raise ConfigError(f"integrator must be one of {INTEGRATORS}, got {cfg.integrator!r}")

    eta = p.eta
    if eta is None:
        eta = min(1e-3 * max(1.0, p.D), 0.5 * (p.gamma - p.D))
        defaulted.add("eta")
    if not 0 < eta < p.gamma - p.D:
        raise ConfigError(f"eta={eta} must lie in (0, gamma - D)")
    epsilon = p.epsilon
    if epsilon is None:
        epsilon = default_epsilon(p.gamma, p.D, eta)
        defaulted.add("epsilon")
    if not 0 < epsilon < epsilon_posdef_bound(p.gamma, p.D, eta):
        raise EpsilonOutOfRange(
            f"epsilon={epsilon} outside (0, sqrt(2(gamma-D-eta)))"
        )

    return replace(
        cfg,
        params=ControlParams(float(p.gamma), float(p.D), float(eta), float(epsilon)),
        dt=float(dt),
        t_end=float(cfg.t_end),
        capture_eps1=float(eps1),
        capture_eps2=float(eps2),
        delta_cap=float(cap),
        post_capture=PostCapture(cfg.post_capture),
        filter_cutoff=float(cutoff),
        defaulted=frozenset(defaulted),
    )


CONFIG_KEYS = {
    "x0", "gamma", "D", "eta", "epsilon", "dt", "t_end", "disturbance", "capture",
    "delta_cap", "post_capture", "filter_cutoff_hz", "integrator",
}


def config_from_dict(d: Mapping[str, Any]) -> SimConfig:
    """Build an unvalidated :class:`SimConfig` from the JSON scenario layout."""
    if not isinstance(d, Mapping):
        raise ConfigError("scenario config must be a JSON object")
    unknown = set(d) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config key '{sorted(unknown)[0]}'")
    x0 = _get(d, "x0", "config")
    if not isinstance(x0, Sequence) or isinstance(x0, str) or len(x0) != 2:
        raise ConfigError(f"'x0' must be a pair [x1, x2], got {x0!r}")
    capture = d.get("capture", {})
    if not isinstance(capture, Mapping) or set(capture) - {"eps1", "eps2"}:
        raise ConfigError(f"'capture' must be an object with eps1/eps2, got {capture!r}")

    def opt(key: str, src: Mapping[str, Any] = d, label: str | None = None) -> float | None:
        v = src.get(key)
        return None if v is None else _num(v, label or key)

    post = d.get("post_capture", "hold")
    try:
        post = PostCapture(post)
    except ValueError:
        raise ConfigError(f"'post_capture' must be 'hold' or 'chatter', got {post!r}") from None
    integrator = d.get("integrator", "zoh")
    if integrator not in INTEGRATORS:
        raise ConfigError(f"'integrator' must be one of {INTEGRATORS}, got {integrator!r}")
    try:
        state = State(_num(x0[0], "x0"), _num(x0[1], "x0"))
    except NonFinite as exc:
        raise NonFinite(f"'x0': {exc}") from None
    return SimConfig(
        x0=state,
        params=ControlParams(
            gamma=_num(_get(d, "gamma", "config"), "gamma"),
            D=_num(d.get("D", 0.0), "D"),
            eta=opt("eta"),
            epsilon=opt("epsilon"),
        ),
        disturbance=disturbance_from_dict(d.get("disturbance", {"type": "zero"})),
        dt=opt("dt"),
        t_end=_num(d.get("t_end", 1.0), "t_end"),
        capture_eps1=opt("eps1", capture, "capture.eps1"),
        capture_eps2=opt("eps2", capture, "capture.eps2"),
        delta_cap=opt("delta_cap"),
        post_capture=post,
        filter_cutoff=opt("filter_cutoff_hz"),
        integrator=integrator,
    )


def config_to_dict(cfg: SimConfig) -> dict:
    p = cfg.params
    return {
        "x0": [cfg.x0.x1, cfg.x0.x2],
        "gamma": p.gamma,
        "D": p.D,
        "eta": p.eta,
        "epsilon": p.epsilon,
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "disturbance": cfg.disturbance.to_dict(),
        "capture": {"eps1": cfg.capture_eps1, "eps2": cfg.capture_eps2},
        "delta_cap": cfg.delta_cap,
        "post_capture": PostCapture(cfg.post_capture).value,
        "filter_cutoff_hz": cfg.filter_cutoff,
        "integrator": cfg.integrator,
    }


def load_config(path: str | Path) -> SimConfig:
    """Read and validate a JSON scenario file."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return validate_config(config_from_dict(raw))


# ---------------------------------------------------------------------------
# trajectories


class EventKind(str, enum.Enum):
    ENTER_U = "EnterU"
    ENTER_C = "EnterC"
    CAPTURE = "Capture"
    DELTA_CLAMPED = "DeltaClamped"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class Event:
    t: float
    kind: EventKind
    index: int


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    state: State
    u: float
    u_filt: float
    d: float
    region: Region
    v_new: float
    energy: float


@dataclass(eq=False)
class Trajectory:
    """Columnar record of a run; every array has one entry per sample."""

    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    u: np.ndarray
    u_filt: np.ndarray
    d: np.ndarray
    domain: np.ndarray  # index into DOMAIN_CODES
    quadrant: np.ndarray  # index into QUADRANT_CODES
    in_ca: np.ndarray
    v_new: np.ndarray
    energy: np.ndarray
    clamped: np.ndarray
    events: tuple[Event, ...] = ()
    captured_at: float | None = None
    dt: float = DEFAULT_DT
    capture_index: int | None = None
    capture_eps: tuple[float, float] | None = None

    def __len__(self) -> int:
        return len(self.t)

    def region(self, i: int) -> Region:
        return Region(
            DOMAIN_CODES[self.domain[i]],
            QUADRANT_CODES[self.quadrant[i]],
            bool(self.in_ca[i]),
        )

    def sample(self, i: int) -> TrajectorySample:
        return TrajectorySample(
            t=float(self.t[i]),
            state=State(float(self.x1[i]), float(self.x2[i])),
            u=float(self.u[i]),
            u_filt=float(self.u_filt[i]),
            d=float(self.d[i]),
            region=self.region(i),
            v_new=float(self.v_new[i]),
            energy=float(self.energy[i]),
        )

    @property
    def samples(self) -> list[TrajectorySample]:
        return [self.sample(i) for i in range(len(self))]

    def events_of(self, kind: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    @property
    def diverged(self) -> bool:
        return any(e.kind == EventKind.DIVERGED for e in self.events)

    def column_names(self) -> list[str]:
        return [f.name for f in fields(self) if isinstance(getattr(self, f.name), np.ndarray)]
