"""Assembly of columnar :class:`~qcsmc.core.Trajectory` records from raw arrays."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .controller import classify_arrays
from .core import Event, EventKind, Trajectory
from .lyapunov import LyapunovParams, energy_arrays, v_new_arrays

_EVENT_ORDER = {
    EventKind.ENTER_U: 0,
    EventKind.ENTER_C: 0,
    EventKind.DELTA_CLAMPED: 1,
    EventKind.CAPTURE: 2,
    EventKind.DIVERGED: 3,
}


def domain_events(t: np.ndarray, domain: np.ndarray) -> list[Event]:
    """EnterU/EnterC at the first sample and at every domain change."""
    if len(t) == 0:
        return []
    idx = np.flatnonzero(np.diff(domain) != 0) + 1
    idx = np.concatenate(([0], idx))
    kinds = (EventKind.ENTER_U, EventKind.ENTER_C)
    return [Event(float(t[i]), kinds[domain[i]], int(i)) for i in idx]


def assemble(
    t: np.ndarray,
    x1: np.ndarray,
    x2: np.ndarray,
    u: np.ndarray,
    d: np.ndarray,
    *,
    gamma: float,
    lyap: LyapunovParams,
    dt: float,
    u_filt: np.ndarray | None = None,
    clamped: np.ndarray | None = None,
    events: Iterable[Event] = (),
    capture_index: int | None = None,
    capture_eps: tuple[float, float] | None = None,
    domain_limit: int | None = None,
    captured_at: float | None = None,
) -> Trajectory:
    """Derive regions, V_new, energy and domain events, then build the record.

    ``domain_limit`` stops domain-change events at that sample index (the
    capture point), so post-capture chatter does not flood the event list.
    """
    # products of huge but finite states may overflow to inf; signs stay right
    with np.errstate(over="ignore", invalid="ignore"):
        domain, quadrant, in_ca = classify_arrays(x1, x2, gamma)
        v_new = v_new_arrays(x1, x2, lyap)
        energy = energy_arrays(x1, x2, gamma)
    stop = len(t) if domain_limit is None else domain_limit + 1
    all_events = domain_events(t[:stop], domain[:stop]) + list(events)
    all_events.sort(key=lambda e: (e.index, _EVENT_ORDER[e.kind]))
    if captured_at is None and capture_index is not None:
        captured_at = float(t[capture_index])
    return Trajectory(
        t=t,
        x1=x1,
        x2=x2,
        u=u,
        u_filt=u.copy() if u_filt is None else u_filt,
        d=d,
        domain=domain,
        quadrant=quadrant,
        in_ca=in_ca,
        v_new=v_new,
        energy=energy,
        clamped=np.zeros(len(t), dtype=bool) if clamped is None else clamped,
        events=tuple(all_events),
        captured_at=captured_at,
        dt=dt,
        capture_index=capture_index,
        capture_eps=capture_eps,
    )
