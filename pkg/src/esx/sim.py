"""Fixed-step RK4 integration, trajectory storage and trace metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from esx.errors import ArgumentDomainError, EvaluationDomainError

log = logging.getLogger(__name__)

# Default step: 1/200 of the dither period.
DEFAULT_STEP = 1.0 / 200.0
MAX_DITHERED_STEP = 1.0 / 50.0


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    labels: tuple
    meta: dict = field(default_factory=dict)
    diverged: bool = False

    def __len__(self):
        return self.t.size

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.states[:, self.labels.index(name)]
        except ValueError:
            raise KeyError(f"no channel {name!r}; have {self.labels}") from None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        """Write ``t,<labels...>`` rows with 17 significant digits."""
        data = np.column_stack([self.t, self.states])
        np.savetxt(path, data, fmt="%.17g", delimiter=",",
                   header=",".join(("t",) + tuple(self.labels)), comments="")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:], tuple(header[1:]))


def integrate(system, y0, t_end: float, step: float = DEFAULT_STEP, record_every: int = 1) -> Trajectory:
    """Classical RK4 from ``t = 0`` to ``t_end`` with a fixed step.

    Sample times are ``k * step`` (never accumulated).  When the state or a
    derivative stops being finite, the trajectory is truncated at the last
    finite sample and flagged as diverged.
    """
    if not step > 0:
        raise ArgumentDomainError(f"step must be positive, got {step}")
    if not t_end >= step:
        raise ArgumentDomainError(f"t_end ({t_end}) must be at least one step ({step})")
    if getattr(system, "dithered", False) and step > MAX_DITHERED_STEP * (1 + 1e-12):
        raise ArgumentDomainError(
            f"step {step} exceeds 1/50 of the dither period for dithered system {system.name!r}"
        )
    record_every = max(1, int(record_every))
    n = int(round(t_end / step))
    if abs(n * step - t_end) > 1e-9 * max(1.0, t_end):
        n = int(math.ceil(t_end / step))

    hook = getattr(system, "begin_step", None)
    y = np.array(y0, dtype=float).reshape(-1)
    h, h2, h6 = step, 0.5 * step, step / 6.0
    scalar = getattr(system, "scalar_rhs", None)
    if scalar is not None and y.size == 1:
        return _integrate_scalar(system, scalar, float(y[0]), n, step, record_every, hook, t_end)
    f = system.rhs

    n_rec = n // record_every + 1
    ts = np.empty(n_rec)
    ys = np.empty((n_rec, y.size))
    ts[0], ys[0] = 0.0, y
    j = 1
    diverged = False
    for k in range(n):
        t = k * h
        try:
            if hook is not None:
                hook(k, t)
            k1 = f(t, y)
            k2 = f(t + h2, y + h2 * k1)
            k3 = f(t + h2, y + h2 * k2)
            k4 = f(t + h, y + h * k3)
            y = y + h6 * (k1 + 2.0 * (k2 + k3) + k4)
        except (OverflowError, FloatingPointError, EvaluationDomainError) as exc:
            log.warning("integration of %s stopped at t=%g: %s", getattr(system, "name", "?"), t, exc)
            diverged = True
            break
        if not np.isfinite(y).all():
            log.warning("integration of %s diverged at t=%g", getattr(system, "name", "?"), t)
            diverged = True
            break
        if (k + 1) % record_every == 0:
            ts[j] = (k + 1) * h
            ys[j] = y
            j += 1

    return _finish(system, ts[:j], ys[:j], step, t_end, record_every, diverged)


def _finish(system, ts, ys, step, t_end, record_every, diverged):
    meta = dict(getattr(system, "meta", {}))
    meta.update(system=getattr(system, "name", "custom"), step=step, t_end=t_end, record_every=record_every)
    return Trajectory(ts.copy(), ys.copy(), tuple(system.labels), meta, diverged)


def _integrate_scalar(system, f, y, n, h, record_every, hook, t_end):
    # Same RK4 scheme on plain floats; avoids numpy overhead for 1-D systems.
    h2, h6 = 0.5 * h, h / 6.0
    n_rec = n // record_every + 1
    ts = np.empty(n_rec)
    ys = np.empty((n_rec, 1))
    ts[0], ys[0, 0] = 0.0, y
    j = 1
    diverged = False
    isfinite = math.isfinite
    for k in range(n):
        t = k * h
        try:
            if hook is not None:
                hook(k, t)
            k1 = f(t, y)
            k2 = f(t + h2, y + h2 * k1)
            k3 = f(t + h2, y + h2 * k2)
            k4 = f(t + h, y + h * k3)
            y = y + h6 * (k1 + 2.0 * (k2 + k3) + k4)
        except (OverflowError, FloatingPointError, EvaluationDomainError) as exc:
            log.warning("integration of %s stopped at t=%g: %s", system.name, t, exc)
            diverged = True
            break
        if not isfinite(y):
            log.warning("integration of %s diverged at t=%g", system.name, t)
            diverged = True
            break
        if (k + 1) % record_every == 0:
            ts[j] = (k + 1) * h
            ys[j, 0] = y
            j += 1
    return _finish(system, ts[:j], ys[:j], h, t_end, record_every, diverged)


def time_to_enter(traj: Trajectory, channel: str, center: float, radius: float,
                  dwell: float = 0.0) -> Optional[float]:
    """First time from which ``channel`` stays in ``[center - radius, center + radius]`` for ``dwell``.

    A stay that reaches the end of the record is timed up to one sample past
    the last sample.  Returns ``None`` if no stay is long enough.
    """
    x = traj.channel(channel)
    t = traj.t
    inside = np.abs(x - center) <= radius
    if not inside.any():
        return None
    dt = t[1] - t[0] if t.size > 1 else 0.0
    edges = np.diff(inside.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    stops = np.flatnonzero(edges == -1) + 1
    if inside[0]:
        starts = np.r_[0, starts]
    for s in starts:
        later = stops[stops > s]
        t_exit = t[later[0]] if later.size else t[-1] + dt
        if t_exit - t[s] >= dwell - 1e-12:
            return float(t[s])
    return None


@dataclass(frozen=True)
class TailMetrics:
    sup_dist: float
    peak_to_peak: float
    mean: float
    center: float


def tail_metrics(traj: Trajectory, channel: str, tail_fraction: float = 0.2,
                 center: Optional[float] = None) -> TailMetrics:
    """Sup distance to ``center`` (default: tail mean), peak-to-peak and mean of the tail."""
    if not 0 < tail_fraction <= 1:
        raise ArgumentDomainError(f"tail_fraction must be in (0, 1], got {tail_fraction}")
    x = traj.channel(channel)
    n = max(1, int(math.ceil(tail_fraction * x.size)))
    tail = x[-n:]
    mean = float(np.mean(tail))
    c = mean if center is None else float(center)
    return TailMetrics(
        sup_dist=float(np.max(np.abs(tail - c))),
        peak_to_peak=float(np.ptp(tail)),
        mean=mean,
        center=c,
    )
