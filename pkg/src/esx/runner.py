"""Execute the studies of an :class:`~esx.config.ExperimentSpec` and write artifacts.

Layout under the output directory::

    spec.json                 echo of the parsed spec
    summary.csv               one pass/fail row per checked threshold
    <study>/<study>_report.csv
    <study>/<study>.gp        gnuplot script for the figure panels
    <study>/<study>_<run>.csv trajectories (decimated by output.record_every)
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from esx import analysis as an
from esx import dynamics as dyn
from esx.config import ExperimentSpec, number
from esx.errors import BracketError, ConfigError
from esx.fourier import find_equilibrium
from esx.sim import Trajectory, integrate

log = logging.getLogger(__name__)


@dataclass
class Check:
    study: str
    check: str
    value: object
    threshold: str
    passed: bool


# -- formatting ---------------------------------------------------------------


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest string that round-trips
    return str(v)


def write_table(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_trajectory(path: Path, traj: Trajectory, every: int) -> None:
    idx = np.arange(0, traj.t.size, max(1, every))
    if idx[-1] != traj.t.size - 1:
        idx = np.r_[idx, traj.t.size - 1]
    Trajectory(traj.t[idx], traj.states[idx], traj.labels, traj.meta, traj.diverged).to_csv(path)


def write_gnuplot(path: Path, title: str, panels, layout=None) -> None:
    """``panels``: list of ``(panel_title, [(csv, column, legend), ...], [hline, ...])``."""
    rows, cols = layout or (int(math.ceil(len(panels) / 2)) if len(panels) > 1 else 1,
                            2 if len(panels) > 1 else 1)
    out = [
        f"# {title}",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set terminal pngcairo size {640 * cols},{420 * rows}",
        f"set output '{path.stem}.png'",
        f"set multiplot layout {rows},{cols} title '{title}'",
        "set xlabel 't'",
    ]
    for ptitle, series, hlines in panels:
        out.append(f"set title '{ptitle}'")
        plots = [f"'{csv}' using 1:{col} with lines title '{legend}'" for csv, col, legend in series]
        plots += [f"{fmt(h)} with lines dashtype 2 lc rgb 'gray' notitle" for h in hlines]
        out.append("plot " + ", \\\n     ".join(plots))
    out.append("unset multiplot")
    path.write_text("\n".join(out) + "\n")


# -- helpers ------------------------------------------------------------------


def _num(st: dict, key: str, default=None):
    v = st.get(key, default)
    return None if v is None else number(v, f"{st.get('name', '?')}.{key}")


def _x_star(spec: ExperimentSpec, st: dict) -> float:
    if "x_star" in st:
        return _num(st, "x_star")
    label = spec.cost.get("label")
    if label == "paper_cost":
        return 2.0 * math.pi
    if label == "quadratic":
        return number(spec.cost.get("center", 0.0))
    raise ConfigError("x_star is required for this cost", field=f"{st['name']}.x_star")


def _le(study, check, value, limit) -> Check:
    ok = value is not None and value <= limit
    return Check(study, check, value, f"<= {fmt(limit)}", bool(ok))


def _ge(study, check, value, limit) -> Check:
    ok = value is not None and value >= limit
    return Check(study, check, value, f">= {fmt(limit)}", bool(ok))


# -- study handlers ------------------------------------------------------------


def run_containment(spec, st, out: Path):
    name = st["name"]
    cost = spec.build_cost(st.get("cost"))
    delta = _num(st, "delta", spec.delta)
    gamma = _num(st, "gamma", spec.gamma)
    params = dyn.EsParams(gamma, delta)
    x0 = _num(st, "x0", spec.x0)
    xs = _x_star(spec, st)
    t_end = _num(st, "horizon", spec.horizon_for(gamma))
    band = _num(st, "band", 2.0)
    frac = _num(st, "tail_fraction", 0.2)
    schemes = st.get("schemes", ["classic"])
    checked = st.get("check_schemes", schemes)
    checks, rows, panels_series = [], [], []
    for scheme in schemes:
        rep = an.containment(cost, params, x0, xs, t_end, scheme, band, frac,
                             step=spec.step, avg_step=spec.avg_step)
        rows.append([scheme, delta, xs, rep.radius, rep.entered, rep.entry_time, rep.tail_sup_dist,
                     rep.contained])
        fn = f"{name}_{scheme}.csv"
        write_trajectory(out / fn, rep.trajectory, spec.record_every)
        panels_series.append((fn, 2, scheme))
        if scheme in checked:
            checks.append(Check(name, f"{scheme}.entered", rep.entry_time, "enters band", rep.entered))
            checks.append(_le(name, f"{scheme}.tail_sup_dist", rep.tail_sup_dist, rep.radius))
    if st.get("equilibrium", False):
        try:
            eq = find_equilibrium(cost, delta, (xs - delta, xs + delta))
        except BracketError:
            eq = None
        inside = eq is not None and xs - delta < eq < xs + delta
        checks.append(Check(name, "avg_fourier.equilibrium_in_open_band", eq,
                            f"in ({fmt(xs - delta)}, {fmt(xs + delta)})", inside))
        if "min_asymmetry" in st:
            off = None if eq is None else abs(eq - xs)
            lim = _num(st, "min_asymmetry")
            checks.append(Check(name, "avg_fourier.equilibrium_offset", off, f"> {fmt(lim)}",
                                off is not None and off > lim))
        rows.append(["avg_fourier.equilibrium", delta, xs, delta, None, None, eq, inside])
    write_table(out / f"{name}_report.csv",
                ["scheme", "delta", "center", "radius", "entered", "entry_time", "tail_sup_dist",
                 "contained"], rows)
    r = band * delta
    write_gnuplot(out / f"{name}.gp", f"{name}: x(t), delta={fmt(delta)}",
                  [(f"delta = {fmt(delta)}", panels_series, [xs - r, xs, xs + r])])
    return checks


def run_closeness(spec, st, out: Path):
    name = st["name"]
    cost = spec.build_cost(st.get("cost"))
    delta = _num(st, "delta", spec.delta)
    gammas = [number(g) for g in st.get("gammas", [0.2, 0.1, 0.05])]
    t_bar = _num(st, "t_bar", 6.0)
    factor = _num(st, "scaling_factor", 1.5)
    x0 = _num(st, "x0", spec.x0)
    sc = an.closeness_scaling(cost, delta, x0, t_bar, gammas, spec.step)
    rows, checks, panels = [], [], []
    for rep, ratio in zip(sc.reports, sc.ratios):
        rows.append([rep.gamma, rep.horizon, rep.sup_error, sc.K * rep.gamma, ratio])
        tag = fmt(rep.gamma)
        series = []
        for scheme, tr in rep.trajectories.items():
            fn = f"{name}_g{tag}_{scheme}.csv"
            write_trajectory(out / fn, tr, spec.record_every)
            series.append((fn, 2, scheme))
        panels.append((f"gamma = {tag}", series, []))
    for rep in sc.reports[1:]:
        checks.append(_le(name, f"sup_error(gamma={fmt(rep.gamma)})", rep.sup_error,
                          factor * sc.K * rep.gamma))
    write_table(out / f"{name}_report.csv", ["gamma", "horizon", "sup_error", "K_gamma", "ratio"], rows)
    write_gnuplot(out / f"{name}.gp", f"{name}: classic ES vs Fourier average", panels)
    return checks


def run_escape(spec, st, out: Path):
    name = st["name"]
    cost = spec.build_cost(st.get("cost"))
    deltas = [number(d) for d in st.get("deltas", [spec.delta])]
    gamma = _num(st, "gamma", spec.gamma)
    x0 = _num(st, "x0", spec.x0)
    xs = _x_star(spec, st)
    t_end = _num(st, "horizon", spec.horizon_for(gamma))
    avg_t_end = _num(st, "avg_horizon", t_end)
    band_factor = _num(st, "band_factor", 1.0)
    schemes = st.get("schemes", ["classic", "avg_fourier", "avg_taylor1"])
    verdicts = an.escape_study(cost, deltas, gamma, x0, xs, band_factor, t_end, avg_t_end, schemes,
                               step=spec.step, avg_step=_num(st, "avg_step", spec.avg_step))
    checks, rows = [], []
    expect = st.get("expect", {})
    enter_within = _num(st, "enter_within")
    not_within = _num(st, "not_within")
    panels = {}
    for v in verdicts:
        rows.append([v.scheme, v.delta, v.escaped, v.final_position, v.entry_time, v.stall_location,
                     v.stall_time, v.band[0], v.band[1]])
        fn = f"{name}_d{fmt(v.delta)}_{v.scheme}.csv"
        write_trajectory(out / fn, v.trajectory, spec.record_every)
        panels.setdefault(v.delta, []).append((fn, 2, v.scheme))
        i = deltas.index(v.delta)
        tag = f"{v.scheme}(delta={fmt(v.delta)})"
        if v.scheme in expect:
            want = bool(expect[v.scheme][i])
            if want and enter_within is not None:
                checks.append(_le(name, f"{tag}.entry_time", v.entry_time, enter_within))
            elif want:
                checks.append(Check(name, f"{tag}.escaped", v.escaped, "true", v.escaped))
            elif not_within is not None:
                d = abs(v.final_position - xs)
                checks.append(Check(name, f"{tag}.final_distance", d, f"> {fmt(not_within)}",
                                    d > not_within))
            else:
                checks.append(Check(name, f"{tag}.escaped", v.escaped, "false", not v.escaped))
        if v.scheme == "avg_taylor1" and "stall_target" in st:
            target, tol = _num(st, "stall_target"), _num(st, "stall_tol", 0.05)
            ok = v.stall_location is not None and abs(v.stall_location - target) <= tol
            checks.append(Check(name, f"{tag}.stall_location", v.stall_location,
                                f"{fmt(target)} +- {fmt(tol)}", ok))
            if "stall_grad_tol" in st:
                g = None if v.stall_location is None else abs(float(cost.derivative(v.stall_location)))
                checks.append(_le(name, f"{tag}.stall_grad", g, _num(st, "stall_grad_tol")))
        if v.scheme == "avg_taylor1" and "barrier" in st:
            lim = _num(st, "barrier")
            top = float(np.max(v.trajectory.states[:, 0]))
            checks.append(Check(name, f"{tag}.max_position", top, f"< {fmt(lim)}", top < lim))
    write_table(out / f"{name}_report.csv",
                ["scheme", "delta", "escaped", "final_position", "entry_time", "stall_location",
                 "stall_time", "band_lo", "band_hi"], rows)
    write_gnuplot(out / f"{name}.gp", f"{name}: escape study",
                  [(f"delta = {fmt(d)}", s, [xs - band_factor * d, xs + band_factor * d])
                   for d, s in panels.items()])
    return checks


def run_uniformity(spec, st, out: Path):
    name = st["name"]
    h0s = [number(h) for h in st.get("h0", [10.0, 1000.0])]
    gamma = _num(st, "gamma", spec.gamma)
    delta = _num(st, "delta", spec.delta)
    params = dyn.EsParams(gamma, delta)
    x0 = _num(st, "x0", spec.x0)
    amp = _num(st, "amp", number(spec.cost.get("amp", 0.0)))
    xs = _x_star(spec, st)
    table = an.uniformity_sweep(h0s, params, x0, amp, xs, st.get("schemes", ["classic", "hpf"]),
                                _num(st, "horizon", spec.horizon_for(gamma)), _num(st, "band", 2.0),
                                _num(st, "tail_fraction", 0.2), step=spec.step)
    rows = [[r.h0, r.scheme, r.tail_p2p, r.time_to_enter] for r in table.rows]
    panels = {}
    for (h0, scheme), tr in table.trajectories.items():
        fn = f"{name}_h{fmt(h0)}_{scheme}.csv"
        write_trajectory(out / fn, tr, spec.record_every)
        panels.setdefault(scheme, []).append((fn, 2, f"h0 = {fmt(h0)}"))
    checks = []
    if "p2p_min_ratio" in st:
        checks.append(_ge(name, "classic.tail_p2p_ratio", table.p2p_ratio.get("classic"),
                          _num(st, "p2p_min_ratio")))
    if "tte_ratio_min" in st or "tte_ratio_max" in st:
        lo, hi = _num(st, "tte_ratio_min", 0.0), _num(st, "tte_ratio_max", math.inf)
        r = table.tte_ratio.get("hpf")
        checks.append(Check(name, "hpf.time_to_enter_ratio", r, f"in [{fmt(lo)}, {fmt(hi)}]",
                            r is not None and lo <= r <= hi))
    write_table(out / f"{name}_report.csv", ["h0", "scheme", "tail_p2p", "time_to_enter"], rows)
    write_gnuplot(out / f"{name}.gp", f"{name}: uniformity in the cost magnitude",
                  [(s, series, [xs]) for s, series in panels.items()])
    return checks


def run_hpf_tracking(spec, st, out: Path):
    name = st["name"]
    h0s = [number(h) for h in st.get("h0", [10.0, 1000.0])]
    params = dyn.EsParams(_num(st, "gamma", spec.gamma), _num(st, "delta", spec.delta))
    x0 = _num(st, "x0", spec.x0)
    reps, rows, series = [], [], []
    for h0 in h0s:
        cost = spec.build_cost({"h0": h0})
        rep = an.hpf_tracking(cost, params, x0, None, _num(st, "horizon", spec.horizon_for(params.gamma)),
                              _num(st, "tail_fraction", 0.2), spec.step, spec.avg_step)
        reps.append(rep)
        rows.append([h0, rep.ybar0, rep.init_gap, rep.tail_residual, rep.tail_filter_residual])
        for scheme, tr in rep.trajectories.items():
            fn = f"{name}_h{fmt(h0)}_{scheme}.csv"
            write_trajectory(out / fn, tr, spec.record_every)
            series.append((fn, 3, f"{scheme} h0={fmt(h0)}"))
    checks = [_le(name, f"init_gap(h0={fmt(r0)})", rep.init_gap, params.gamma) for r0, rep in zip(h0s, reps)]
    res = [r.tail_residual for r in reps]
    ratio = max(res) / min(res) if min(res) > 0 else (1.0 if max(res) == 0 else math.inf)
    lim = _num(st, "max_ratio", 2.0)
    checks.append(Check(name, "tail_residual_ratio", ratio, f"< {fmt(lim)}", ratio < lim))
    write_table(out / f"{name}_report.csv",
                ["h0", "ybar0", "init_gap", "tail_residual", "tail_filter_residual"], rows)
    write_gnuplot(out / f"{name}.gp", f"{name}: filter state vs its average",
                  [(f"h0 = {fmt(h0)}", [s for s in series if f"h0={fmt(h0)}" in s[2]], []) for h0 in h0s])
    return checks


def build_plant(spec: ExperimentSpec) -> dyn.PvPlant:
    pv = {k: number(v, f"pv.{k}") for k, v in spec.pv.items() if k != "z0"}
    try:
        return dyn.default_pv_plant(rng_seed=spec.seed, **pv)
    except TypeError as exc:
        raise ConfigError(str(exc), field="pv") from None


def run_pv(spec, st, out: Path):
    name = st["name"]
    plant = build_plant(spec)
    params = dyn.EsParams(_num(st, "gamma", spec.gamma), _num(st, "delta", spec.delta))
    z0 = _num(st, "z0", spec.x0)
    reps = an.pv_study(plant, params, z0, _num(st, "horizon", spec.horizon or 400.0),
                       tail_fraction=_num(st, "tail_fraction", 0.1), step=spec.step)
    rows, series = [], []
    for r in reps:
        rows.append([r.scheme, r.max_power, r.tail_mean_power, r.final_power, r.fraction])
        fn = f"{name}_{r.scheme}.csv"
        write_trajectory(out / fn, r.trajectory, max(1, spec.record_every // 10))
        series.append((fn, 2, r.scheme))
    by = {r.scheme: r for r in reps}
    checks = []
    if "hpf" in by:
        checks.append(_ge(name, "hpf.power_fraction", by["hpf"].fraction, _num(st, "min_fraction", 0.95)))
    if "hpf" in by and "classic" in by:
        checks.append(Check(name, "hpf_beats_classic", by["hpf"].tail_mean_power - by["classic"].tail_mean_power,
                            "> 0", by["hpf"].tail_mean_power > by["classic"].tail_mean_power))
    write_table(out / f"{name}_report.csv",
                ["scheme", "max_power", "tail_mean_power", "final_power", "fraction"], rows)
    write_gnuplot(out / f"{name}.gp", f"{name}: PV set point z(t)", [("z(t)", series, [])])
    return checks


def run_simulate(spec, st, out: Path):
    name = st["name"]
    cost = spec.build_cost(st.get("cost"))
    params = dyn.EsParams(_num(st, "gamma", spec.gamma), _num(st, "delta", spec.delta))
    series = []
    for scheme in st.get("schemes", spec.schemes):
        tr = simulate_one(spec, scheme, cost, params)
        fn = f"{name}_{scheme}.csv"
        write_trajectory(out / fn, tr, spec.record_every)
        series.append((fn, 2, scheme))
    write_table(out / f"{name}_report.csv", ["scheme"], [[s[2]] for s in series])
    write_gnuplot(out / f"{name}.gp", name, [("x(t)", series, [])])
    return []


def initial_state(scheme, cost, params, x0, ybar0=None, plant=None):
    if scheme in ("hpf", "avg_hpf"):
        from esx.fourier import a0_half

        return [x0, a0_half(cost, x0, params.delta) if ybar0 is None else ybar0]
    if scheme.startswith("pv_"):
        return dyn.pv_initial_state(plant, params, scheme[3:], x0, ybar0)
    return [x0]


def simulate_one(spec: ExperimentSpec, scheme: str, cost, params) -> Trajectory:
    plant = build_plant(spec) if scheme.startswith("pv_") else None
    system = dyn.make_system(scheme, cost, params, plant)
    y0 = initial_state(scheme, cost, params, spec.x0, spec.ybar0, plant)
    step = spec.step if system.dithered else spec.avg_step
    return integrate(system, y0, spec.horizon_for(params.gamma), step)


HANDLERS = {
    "closeness": run_closeness,
    "containment": run_containment,
    "escape": run_escape,
    "hpf_tracking": run_hpf_tracking,
    "pv": run_pv,
    "simulate": run_simulate,
    "uniformity": run_uniformity,
}


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    return o


def run_spec(spec: ExperimentSpec, output_dir: Optional[str] = None) -> tuple:
    """Run every study; returns ``(checks, output_path)``.

    ``output_dir`` (or the ``ESX_OUT`` environment variable) overrides the
    spec's ``output_dir``.
    """
    out = Path(output_dir or os.environ.get("ESX_OUT") or spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "spec.json").write_text(json.dumps(_jsonable(spec.raw), indent=2, sort_keys=True) + "\n")
    checks = []
    for st in spec.studies:
        sub = out / st["name"]
        sub.mkdir(exist_ok=True)
        log.info("running study %s (%s)", st["name"], st["kind"])
        checks.extend(HANDLERS[st["kind"]](spec, st, sub))
    if spec.studies:
        write_table(out / "summary.csv", ["study", "check", "value", "threshold", "pass"],
                    [[c.study, c.check, c.value, c.threshold, c.passed] for c in checks])
    return checks, out
