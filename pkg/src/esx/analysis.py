"""Measured counterparts of the averaging, containment, escape and uniformity claims.

Every study runs plain simulations through :func:`esx.sim.integrate` and
reduces them to small report objects.  Reports keep the trajectories they
were computed from (``trajectories``) so callers can serialise them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from esx import dynamics as dyn
from esx.cost import EnvelopeSpec, paper_cost
from esx.dynamics import EsParams
from esx.errors import ArgumentDomainError
from esx.fourier import DEFAULT_NQUAD, a0_half, b1_half, delta_star
from esx.sim import DEFAULT_STEP, Trajectory, integrate, tail_metrics, time_to_enter

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
DEFAULT_AVG_STEP = 0.05
DEFAULT_DWELL = 5.0


def default_horizon(gamma: float) -> float:
    return 60.0 / gamma


def _common(ref: Trajectory, other: Trajectory):
    """Indices of ``ref`` samples that coincide with ``other`` samples (other on a coarser grid)."""
    ratio = int(round(other.meta["step"] * other.meta.get("record_every", 1)
                      / (ref.meta["step"] * ref.meta.get("record_every", 1))))
    n = min((ref.t.size - 1) // ratio, other.t.size - 1) + 1
    return np.arange(n) * ratio, np.arange(n)


# -- consistency identities ---------------------------------------------------


def period_average_classic(cost, params: EsParams, x: float, n_t: int = 2000) -> float:
    """Frozen-x average of the classic ES field over one dither period (trapezoid in t)."""
    return sum(dyn.classic_es_rhs(cost, params, x, j / n_t) for j in range(n_t)) / n_t


def period_average_hpf(cost, params: EsParams, x: float, ybar: float, n_t: int = 2000):
    """Frozen-state averages of ``(y - ybar)*u`` and ``y`` for the HPF scheme."""
    corr = mean = 0.0
    for j in range(n_t):
        t = j / n_t
        u = dyn.dither(t)
        y = float(cost(x + params.delta * u))
        corr += (y - ybar) * u
        mean += y
    return corr / n_t, mean / n_t


@dataclass(frozen=True)
class SignBoundReport:
    delta: float
    delta_star: float
    A: float
    slack: float
    min_right: float
    max_left: float
    holds: bool


def outer_sign_bound(cost, env: EnvelopeSpec, delta: float, n: int = 200, span: float = 5.0,
                      tol: float = 1e-8, n_quad: int = DEFAULT_NQUAD) -> SignBoundReport:
    """Check ``b1_half >= delta_star(delta) - A`` right of ``x* + delta`` and the mirror on the left.

    ``slack`` is the measured ``delta_star(delta) - A``; the condition of the
    attractor statement asks for it to be positive.
    """
    ds = delta_star(env.alpha, delta)
    bound = ds - env.A
    right = np.linspace(env.x_star + delta, env.x_star + span * delta, n)
    left = np.linspace(env.x_star - span * delta, env.x_star - delta, n)
    br = np.array([b1_half(cost, x, delta, n_quad) for x in right])
    bl = np.array([b1_half(cost, x, delta, n_quad) for x in left])
    holds = bool(br.min() >= bound - tol and bl.max() <= -bound + tol)
    return SignBoundReport(delta, ds, env.A, bound, float(br.min()), float(bl.max()), holds)


# -- closeness ----------------------------------------------------------------


@dataclass
class ClosenessReport:
    gamma: float
    horizon: float
    t_bar: float
    sup_error: Optional[float]
    per_window: list
    diverged: bool = False
    trajectories: dict = field(default_factory=dict, repr=False)


def closeness(cost, params: EsParams, x0: float, t_bar: float, step: float = DEFAULT_STEP,
              n_windows: int = 10, n_quad: int = DEFAULT_NQUAD) -> ClosenessReport:
    """Sup gap between the classic ES and its Fourier average over ``[0, t_bar/gamma]``.

    Both systems start from ``x0`` and use the same step.
    """
    horizon = t_bar / params.gamma
    es = integrate(dyn.classic_system(cost, params), [x0], horizon, step)
    av = integrate(dyn.avg_fourier_system(cost, params, n_quad), [x0], horizon, step)
    trajs = {"classic": es, "avg_fourier": av}
    if es.diverged or av.diverged:
        return ClosenessReport(params.gamma, horizon, t_bar, None, [], True, trajs)
    n = min(es.t.size, av.t.size)
    gap = np.abs(es.states[:n, 0] - av.states[:n, 0])
    windows = [float(w.max()) for w in np.array_split(gap, n_windows) if w.size]
    return ClosenessReport(params.gamma, horizon, t_bar, float(gap.max()), windows, False, trajs)


@dataclass
class ClosenessScaling:
    K: float
    reports: list
    ratios: list  # sup_error / (K * gamma)


def closeness_scaling(cost, delta: float, x0: float, t_bar: float, gammas: Sequence[float],
                      step: float = DEFAULT_STEP) -> ClosenessScaling:
    """Fit ``K`` at ``gammas[0]`` so that ``sup_error = K*gamma``; report the ratio for every gamma."""
    reports = [closeness(cost, EsParams(g, delta), x0, t_bar, step) for g in gammas]
    if reports[0].sup_error is None:
        raise ArgumentDomainError(f"closeness run diverged at gamma={gammas[0]}")
    K = reports[0].sup_error / gammas[0]
    ratios = [math.inf if r.sup_error is None else r.sup_error / (K * r.gamma) for r in reports]
    return ClosenessScaling(K, reports, ratios)


# -- containment --------------------------------------------------------------


@dataclass
class ContainmentReport:
    scheme: str
    delta: float
    center: float
    radius: float
    entered: bool
    entry_time: Optional[float]
    tail_sup_dist: float
    contained: bool
    trajectory: Trajectory = field(repr=False, default=None)


def containment(cost, params: EsParams, x0: float, x_star: float, t_end: Optional[float] = None,
                scheme: str = "classic", band: float = 2.0, tail_fraction: float = 0.2,
                dwell: float = DEFAULT_DWELL, step: float = DEFAULT_STEP,
                avg_step: float = DEFAULT_AVG_STEP) -> ContainmentReport:
    """Does ``scheme`` enter and stay in ``[x* - band*delta, x* + band*delta]``?

    ``entered`` comes from :func:`esx.sim.time_to_enter`; ``contained`` means
    the last ``tail_fraction`` of the record lies inside the band.
    """
    if t_end is None:
        t_end = default_horizon(params.gamma)
    system = dyn.make_system(scheme, cost, params)
    h = step if system.dithered else avg_step
    tr = integrate(system, [x0], t_end, h)
    ch = tr.labels[0]
    radius = band * params.delta
    entry = time_to_enter(tr, ch, x_star, radius, dwell)
    sup = tail_metrics(tr, ch, tail_fraction, center=x_star).sup_dist
    return ContainmentReport(scheme, params.delta, x_star, radius, entry is not None, entry, sup,
                             bool(sup <= radius and not tr.diverged), tr)


# -- escape -------------------------------------------------------------------


@dataclass
class EscapeVerdict:
    scheme: str
    delta: float
    escaped: bool
    final_position: float
    entry_time: Optional[float]
    stall_location: Optional[float]
    stall_time: Optional[float]
    band: tuple
    trajectory: Trajectory = field(repr=False, default=None)


def detect_stall(traj: Trajectory, speed, threshold: float = 1e-8, sustain: float = 10.0):
    """First sustained run of ``|speed| < threshold`` lasting ``sustain`` time units.

    Returns ``(start_time, position at the end of the run)`` or ``(None, None)``.
    """
    slow = np.abs(np.asarray(speed)) < threshold
    x = traj.states[:, 0]
    t = traj.t
    i = 0
    n = slow.size
    while i < n:
        if not slow[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and slow[j + 1]:
            j += 1
        if t[j] - t[i] >= sustain - 1e-12:
            return float(t[i]), float(x[j])
        i = j + 1
    return None, None


def escape_study(cost, delta_list: Sequence[float], gamma: float, x0: float, x_star: float,
                 band_factor: float = 1.0, t_end: Optional[float] = None,
                 avg_t_end: Optional[float] = None,
                 schemes: Sequence[str] = ("classic", "avg_fourier", "avg_taylor1"),
                 dwell: float = DEFAULT_DWELL, step: float = DEFAULT_STEP,
                 avg_step: float = DEFAULT_AVG_STEP, stall_speed: float = 1e-8,
                 stall_sustain: float = 10.0, n_quad: int = DEFAULT_NQUAD) -> list:
    """Run each scheme for each dither amplitude and judge escape into the target band.

    The band is ``[x* - band_factor*delta, x* + band_factor*delta]``.  A scheme
    has escaped when it entered the band (with ``dwell``) and its final
    position lies inside.  Average schemes are also checked for a stall:
    field magnitude below ``stall_speed`` for ``stall_sustain`` time units.
    ``avg_t_end`` (default ``t_end``) sets the average-system horizon.
    """
    if t_end is None:
        t_end = default_horizon(gamma)
    if avg_t_end is None:
        avg_t_end = t_end
    verdicts = []
    for delta in delta_list:
        params = EsParams(gamma, delta)
        half = band_factor * delta
        for scheme in schemes:
            system = dyn.make_system(scheme, cost, params, n_quad=n_quad)
            if system.dithered:
                tr = integrate(system, [x0], t_end, step)
            else:
                tr = integrate(system, [x0], avg_t_end, avg_step)
            x = tr.states[:, 0]
            entry = time_to_enter(tr, tr.labels[0], x_star, half, dwell)
            final = float(x[-1])
            escaped = entry is not None and abs(final - x_star) <= half and not tr.diverged
            stall_t = stall_x = None
            if not system.dithered:
                speed = [system.scalar_rhs(0.0, float(v)) for v in x]
                stall_t, stall_x = detect_stall(tr, speed, stall_speed, stall_sustain)
            verdicts.append(EscapeVerdict(scheme, delta, bool(escaped), final, entry, stall_x, stall_t,
                                          (x_star - half, x_star + half), tr))
            log.info("escape %s delta=%g escaped=%s final=%.6g stall=%s", scheme, delta, escaped,
                     final, stall_x)
    return verdicts


# -- uniformity in the cost magnitude ----------------------------------------


@dataclass
class UniformityRow:
    h0: float
    scheme: str
    tail_p2p: float
    time_to_enter: Optional[float]


@dataclass
class UniformityTable:
    rows: list
    p2p_ratio: dict  # scheme -> tail p2p at last h0 / at first h0
    tte_ratio: dict  # scheme -> time_to_enter at last h0 / at first h0
    trajectories: dict = field(default_factory=dict, repr=False)


def _ratio(a, b):
    if a is None or b is None:
        return None
    if a == 0:
        return math.inf if b != 0 else 1.0
    return b / a


def uniformity_sweep(h0_list: Sequence[float], params: EsParams, x0: float, amp: float = 0.0,
                     x_star: float = TWO_PI, schemes: Sequence[str] = ("classic", "hpf"),
                     t_end: Optional[float] = None, band: float = 2.0, tail_fraction: float = 0.2,
                     dwell: float = DEFAULT_DWELL, step: float = DEFAULT_STEP) -> UniformityTable:
    """Classic vs HPF ES on ``paper_cost(h0, amp)`` for each offset ``h0``.

    The HPF filter starts at ``a0_half(x0)``, which satisfies the filter
    initialisation precondition exactly.
    """
    if t_end is None:
        t_end = default_horizon(params.gamma)
    rows, trajs = [], {}
    for h0 in h0_list:
        cost = paper_cost(h0, amp)
        for scheme in schemes:
            system = dyn.make_system(scheme, cost, params)
            y0 = [x0] if scheme != "hpf" else [x0, a0_half(cost, x0, params.delta)]
            tr = integrate(system, y0, t_end, step)
            trajs[(h0, scheme)] = tr
            p2p = tail_metrics(tr, "x", tail_fraction).peak_to_peak
            tte = time_to_enter(tr, "x", x_star, band * params.delta, dwell)
            rows.append(UniformityRow(float(h0), scheme, p2p, tte))
    p2p_ratio, tte_ratio = {}, {}
    for scheme in schemes:
        sel = [r for r in rows if r.scheme == scheme]
        p2p_ratio[scheme] = _ratio(sel[0].tail_p2p, sel[-1].tail_p2p)
        tte_ratio[scheme] = _ratio(sel[0].time_to_enter, sel[-1].time_to_enter)
    return UniformityTable(rows, p2p_ratio, tte_ratio, trajs)


# -- HPF filter tracking -----------------------------------------------------


@dataclass
class HpfTrackingReport:
    ybar0: float
    init_gap: float
    tail_residual: float  # sup |ybar - ybar_a| over the tail
    tail_filter_residual: float  # sup |ybar - a0_half(x)| over the tail
    trajectories: dict = field(default_factory=dict, repr=False)


def hpf_tracking(cost, params: EsParams, x0: float, ybar0: Optional[float] = None,
                 t_end: Optional[float] = None, tail_fraction: float = 0.2,
                 step: float = DEFAULT_STEP, avg_step: float = DEFAULT_AVG_STEP,
                 n_quad: int = DEFAULT_NQUAD) -> HpfTrackingReport:
    """Run HPF-ES next to its average cascade from the same ``(x0, ybar0)``.

    ``ybar0`` defaults to ``a0_half(x0)``.  A supplied value must satisfy
    ``|ybar0 - a0_half(x0)| <= gamma``; otherwise ``ArgumentDomainError``.
    """
    if t_end is None:
        t_end = default_horizon(params.gamma)
    mean0 = a0_half(cost, x0, params.delta, n_quad)
    if ybar0 is None:
        ybar0 = mean0
    gap = abs(ybar0 - mean0)
    if gap > params.gamma:
        raise ArgumentDomainError(
            f"|ybar0 - a0_half(x0)| = {gap:.6g} exceeds gamma = {params.gamma}"
        )
    log.info("hpf filter init ybar0=%.17g, |ybar0 - a0/2| = %.3g <= gamma = %g", ybar0, gap, params.gamma)
    ex = integrate(dyn.hpf_system(cost, params), [x0, ybar0], t_end, step)
    av = integrate(dyn.avg_hpf_system(cost, params, n_quad), [x0, ybar0], t_end, avg_step)
    i_ex, i_av = _common(ex, av)
    n_tail = max(1, int(math.ceil(tail_fraction * i_ex.size)))
    i_ex, i_av = i_ex[-n_tail:], i_av[-n_tail:]
    yb = ex.states[i_ex, 1]
    resid = float(np.max(np.abs(yb - av.states[i_av, 1])))
    means = np.array([a0_half(cost, float(x), params.delta, n_quad) for x in ex.states[i_ex, 0]])
    filt = float(np.max(np.abs(yb - means)))
    return HpfTrackingReport(float(ybar0), gap, resid, filt, {"hpf": ex, "avg_hpf": av})


# -- photovoltaic comparison ------------------------------------------------


@dataclass
class PvReport:
    scheme: str
    max_power: float
    tail_mean_power: float
    final_power: float
    fraction: float
    trajectory: Trajectory = field(repr=False, default=None)


def pv_study(plant: dyn.PvPlant, params: EsParams, z0: float, t_end: float = 400.0,
             schemes: Sequence[str] = ("classic", "hpf"), tail_fraction: float = 0.1,
             step: float = DEFAULT_STEP, record_every: int = 10) -> list:
    """Compare attained (noise-free) panel power for the PV schemes under one seed."""
    _, pmax = plant.max_power()
    out = []
    for scheme in schemes:
        system = dyn.pv_system(plant, params, scheme)
        y0 = dyn.pv_initial_state(plant, params, scheme, z0)
        tr = integrate(system, y0, t_end, step, record_every)
        v = tr.states[:, tr.labels.index("zeta1")] * plant.C_vec[0] + \
            tr.states[:, tr.labels.index("zeta2")] * plant.C_vec[1]
        power = plant.power(v)
        n = max(1, int(math.ceil(tail_fraction * power.size)))
        tail_mean = float(np.mean(power[-n:]))
        out.append(PvReport(scheme, pmax, tail_mean, float(power[-1]), tail_mean / pmax, tr))
    return out
