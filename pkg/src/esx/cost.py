"""Cost models, the benchmark cost family and grid-based assumption checks.

A :class:`CostModel` wraps the unknown map ``h`` seen by the extremum seeking
loop.  Every cost here accepts either a float or a numpy array; the float path
uses :mod:`math` because the dithered schemes evaluate the cost one point at a
time inside the integrator loop.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from esx.errors import ArgumentDomainError, EvaluationDomainError

PI = math.pi
TWO_PI = 2.0 * math.pi

ScalarMap = Callable[[float], float]


def finite_difference_grad(fn: ScalarMap) -> ScalarMap:
    """Central-difference derivative with step ``1e-6 * max(1, |x|)``."""

    def grad(x):
        x = np.asarray(x, dtype=float)
        step = 1e-6 * np.maximum(1.0, np.abs(x))
        out = (np.asarray(fn(x + step)) - np.asarray(fn(x - step))) / (2.0 * step)
        return float(out) if out.ndim == 0 else out

    return grad


@dataclass(frozen=True)
class CostModel:
    """Cost ``h`` with an optional analytic derivative.

    Call the model directly (``cost(x)``) to evaluate ``h``.
    """

    fn: ScalarMap
    grad: Optional[ScalarMap] = None
    label: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.fn(x)

    def derivative(self, x):
        """Analytic gradient if present, else the central-difference fallback."""
        if self.grad is not None:
            return self.grad(x)
        return finite_difference_grad(self.fn)(x)


@dataclass(frozen=True)
class EnvelopeSpec:
    """Envelope ``m``, class-K-infinity ``alpha``, half-width ``A`` and minimiser.

    ``m`` and ``alpha`` must accept numpy arrays.
    """

    m: ScalarMap
    alpha: ScalarMap
    A: float
    x_star: float


@dataclass(frozen=True)
class LocalConstants:
    r: float
    L_r: float
    M_r: float


@dataclass(frozen=True)
class Assumption2Report:
    passed: bool
    worst_gap: float
    worst_gap_x: float
    worst_monotonicity_violation: float
    worst_pair: tuple
    alpha_ok: bool


# -- built-in costs ---------------------------------------------------------


def _paper_piece(x: float) -> float:
    if x < PI:
        return (x - PI) ** 2 - 1.0
    if x < TWO_PI:
        return math.cos(x - PI) - 2.0
    return (x - TWO_PI) ** 2 - 3.0


def _paper_piece_grad(x: float) -> float:
    if x < PI:
        return 2.0 * (x - PI)
    if x < TWO_PI:
        return -math.sin(x - PI)
    return 2.0 * (x - TWO_PI)


def paper_cost(h0: float = 10.0, amp: float = 0.0) -> CostModel:
    """Benchmark cost with a saddle at ``pi`` and its minimiser at ``2*pi``.

    ``h(x) = h0 + amp*sin(10x) + piece(x)`` where ``piece`` is
    ``(x-pi)^2 - 1`` left of ``pi``, ``cos(x-pi) - 2`` on ``[pi, 2pi)`` and
    ``(x-2pi)^2 - 3`` from ``2pi`` on.  Values and first derivatives match at
    both junctions; the second derivative jumps.
    """
    h0 = float(h0)
    amp = float(amp)

    def fn(x):
        if isinstance(x, float) or np.ndim(x) == 0:
            x = float(x)
            val = h0 + _paper_piece(x)
            if amp:
                val += amp * math.sin(10.0 * x)
            return val
        x = np.asarray(x, dtype=float)
        val = np.where(
            x < PI,
            (x - PI) ** 2 - 1.0,
            np.where(x < TWO_PI, np.cos(x - PI) - 2.0, (x - TWO_PI) ** 2 - 3.0),
        )
        val = val + h0
        if amp:
            val = val + amp * np.sin(10.0 * x)
        return val

    def grad(x):
        if np.ndim(x) == 0:
            x = float(x)
            val = _paper_piece_grad(x)
            if amp:
                val += 10.0 * amp * math.cos(10.0 * x)
            return val
        x = np.asarray(x, dtype=float)
        val = np.where(
            x < PI,
            2.0 * (x - PI),
            np.where(x < TWO_PI, -np.sin(x - PI), 2.0 * (x - TWO_PI)),
        )
        if amp:
            val = val + 10.0 * amp * np.cos(10.0 * x)
        return val

    return CostModel(fn, grad, "paper_cost", {"h0": h0, "amp": amp})


def quadratic_cost(center: float = 0.0, scale: float = 1.0, offset: float = 0.0) -> CostModel:
    """``scale * (x - center)**2 + offset``."""
    c, s, o = float(center), float(scale), float(offset)

    def fn(x):
        if np.ndim(x) == 0:
            return s * (float(x) - c) ** 2 + o
        return s * (np.asarray(x, dtype=float) - c) ** 2 + o

    def grad(x):
        if np.ndim(x) == 0:
            return 2.0 * s * (float(x) - c)
        return 2.0 * s * (np.asarray(x, dtype=float) - c)

    return CostModel(fn, grad, "quadratic", {"center": c, "scale": s, "offset": o})


def linear_cost(slope: float = 1.0, offset: float = 0.0) -> CostModel:
    s, o = float(slope), float(offset)

    def fn(x):
        if np.ndim(x) == 0:
            return s * float(x) + o
        return s * np.asarray(x, dtype=float) + o

    def grad(x):
        if np.ndim(x) == 0:
            return s
        return np.full(np.shape(x), s)

    return CostModel(fn, grad, "linear", {"slope": s, "offset": o})


def constant_cost(c: float = 1.0) -> CostModel:
    c = float(c)

    def fn(x):
        if np.ndim(x) == 0:
            return c
        return np.full(np.shape(x), c)

    def grad(x):
        if np.ndim(x) == 0:
            return 0.0
        return np.zeros(np.shape(x))

    return CostModel(fn, grad, "constant", {"c": c})


def tabulated_cost(x, h, label: str = "tabulated") -> CostModel:
    """Monotone cubic (PCHIP) interpolant through tabulated ``(x, h)`` pairs."""
    from scipy.interpolate import PchipInterpolator

    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if x.ndim != 1 or x.shape != h.shape or x.size < 2:
        raise ArgumentDomainError("tabulated cost needs two equal-length 1-D columns")
    order = np.argsort(x)
    interp = PchipInterpolator(x[order], h[order], extrapolate=True)
    dinterp = interp.derivative()

    def fn(v):
        out = interp(v)
        return float(out) if np.ndim(v) == 0 else out

    def grad(v):
        out = dinterp(v)
        return float(out) if np.ndim(v) == 0 else out

    return CostModel(fn, grad, label, {"n_points": int(x.size)})


def load_tabulated_cost(path) -> CostModel:
    """Read a two-column CSV (``x,h``; header optional) into a PCHIP cost."""
    xs, hs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                xs.append(float(row[0]))
                hs.append(float(row[1]))
            except ValueError:
                if xs:
                    raise
                continue  # header line
    return tabulated_cost(xs, hs, label=f"csv:{Path(path).name}")


# -- local constants and assumption checks ----------------------------------


def _eval_finite(cost, x: np.ndarray) -> np.ndarray:
    vals = np.asarray(cost(x), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)][0]
        raise EvaluationDomainError(f"cost is not finite at x={bad!r}")
    return vals


def estimate_constants(cost: CostModel, x_star: float, r: float, n: int = 2000) -> LocalConstants:
    """Grid lower estimates of the local Lipschitz constant and sup bound.

    The interval ``[x_star - r, x_star + r]`` is split into ``n`` equal
    subintervals.  Grids for ``n`` and ``2n`` are nested, so both estimates
    are non-decreasing under doubling.
    """
    if not r > 0:
        raise ArgumentDomainError(f"r must be positive, got {r}")
    if n < 16:
        raise ArgumentDomainError(f"n must be at least 16, got {n}")
    x = np.linspace(x_star - r, x_star + r, int(n) + 1)
    h = _eval_finite(cost, x)
    slopes = np.abs(np.diff(h) / np.diff(x))
    return LocalConstants(r=float(r), L_r=float(slopes.max()), M_r=float(np.abs(h).max()))


def _same_side_pairs(x: np.ndarray, m: np.ndarray, alpha, chunk: int = 512):
    """Largest ``alpha(|dx|) - |dm|`` over ordered pairs ``i < j`` of one side."""
    worst = -np.inf
    worst_pair = (math.nan, math.nan)
    n = x.size
    for start in range(0, n - 1, chunk):
        i = np.arange(start, min(start + chunk, n - 1))
        dx = np.abs(x[None, :] - x[i, None])
        dm = np.abs(m[None, :] - m[i, None])
        viol = np.asarray(alpha(dx), dtype=float) - dm
        mask = np.arange(n)[None, :] > i[:, None]
        viol = np.where(mask, viol, -np.inf)
        k = np.unravel_index(np.argmax(viol), viol.shape)
        if viol[k] > worst:
            worst = float(viol[k])
            worst_pair = (float(x[i[k[0]]]), float(x[k[1]]))
    return worst, worst_pair


def _split_sides(x: np.ndarray, x_star: float):
    return x[x <= x_star], x[x >= x_star]


def check_assumption2(
    cost: CostModel,
    env: EnvelopeSpec,
    lo: float,
    hi: float,
    n: int = 2001,
    tol: float = 1e-9,
) -> Assumption2Report:
    """Check the envelope gap and same-side growth condition on a uniform grid.

    Violations are reported as data.  ``worst_monotonicity_violation`` is the
    largest ``alpha(|x2 - x1|) - |m(x2) - m(x1)|`` over same-side pairs, so a
    negative value is slack.
    """
    if not lo <= env.x_star <= hi:
        raise ArgumentDomainError("grid must cover x_star")
    x = np.linspace(lo, hi, int(n))
    h = _eval_finite(cost, x)
    m = np.asarray(env.m(x), dtype=float)
    gap = np.abs(h - m)
    ig = int(np.argmax(gap))

    a_grid = np.asarray(env.alpha(np.abs(x - env.x_star)), dtype=float)
    order = np.argsort(np.abs(x - env.x_star))
    a_sorted = a_grid[order]
    alpha_ok = bool(abs(float(env.alpha(0.0))) <= tol and np.all(np.diff(a_sorted) >= -tol))

    worst, pair = -np.inf, (math.nan, math.nan)
    for side in _split_sides(x, env.x_star):
        if side.size < 2:
            continue
        w, p = _same_side_pairs(side, np.asarray(env.m(side), dtype=float), env.alpha)
        if w > worst:
            worst, pair = w, p

    passed = bool(gap[ig] <= env.A + tol and worst <= tol and alpha_ok)
    return Assumption2Report(
        passed=passed,
        worst_gap=float(gap[ig]),
        worst_gap_x=float(x[ig]),
        worst_monotonicity_violation=float(worst),
        worst_pair=pair,
        alpha_ok=alpha_ok,
    )


def fit_linear_minorant(m: ScalarMap, x_star: float, lo: float, hi: float, n: int = 2001) -> float:
    """Largest ``c`` with ``|m(x2) - m(x1)| >= c*|x2 - x1|`` on same-side grid pairs."""
    x = np.linspace(lo, hi, int(n))
    best = np.inf
    for side in _split_sides(x, x_star):
        if side.size < 2:
            continue
        ms = np.asarray(m(side), dtype=float)
        dx = np.abs(side[None, :] - side[:, None])
        dm = np.abs(ms[None, :] - ms[:, None])
        iu = np.triu_indices(side.size, k=1)
        best = min(best, float(np.min(dm[iu] / dx[iu])))
    return best


def builtin_costs() -> dict:
    """Factories for costs selectable by label."""
    return {
        "constant": constant_cost,
        "linear": linear_cost,
        "paper_cost": paper_cost,
        "quadratic": quadratic_cost,
    }
