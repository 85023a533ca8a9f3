"""Right-hand sides of the extremum seeking schemes and their average systems.

Time is normalised so that the dither is ``u(t) = sin(2*pi*t)`` with period 1.
Point functions (``*_rhs``) evaluate one vector field at one state; the
``*_system`` factories wrap them into :class:`System` objects that
:func:`esx.sim.integrate` can step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from esx.errors import ArgumentDomainError, ConfigError, EvaluationDomainError
from esx.fourier import DEFAULT_NQUAD, a0_b1_half, a0_half, b1_half

TWO_PI = 2.0 * math.pi

# Coefficient of the first-order Taylor average; matches b_1/2 = (delta/2) h' + O(delta^3).
TAYLOR_C1 = 0.5

SCHEMES = (
    "avg_fourier",
    "avg_hpf",
    "avg_taylor1",
    "classic",
    "hpf",
    "pv_classic",
    "pv_hpf",
    "support_osc",
)


def dither(t: float) -> float:
    return math.sin(TWO_PI * t)


@dataclass(frozen=True)
class EsParams:
    """Adaptation gain ``gamma`` and dither amplitude ``delta``."""

    gamma: float
    delta: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ArgumentDomainError(f"gamma must be positive, got {self.gamma}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ArgumentDomainError(f"delta must be positive, got {self.delta}")


def _finite(v: float, what: str) -> float:
    if not math.isfinite(v):
        raise EvaluationDomainError(f"{what} is not finite")
    return v


# -- point vector fields ------------------------------------------------------


def classic_es_rhs(cost, params: EsParams, x: float, t: float) -> float:
    u = dither(t)
    y = _finite(float(cost(x + params.delta * u)), "cost")
    return -params.gamma * y * u


def hpf_es_rhs(cost, params: EsParams, state, t: float):
    x, ybar = state
    u = dither(t)
    e = _finite(float(cost(x + params.delta * u)), "cost") - ybar
    return -params.gamma * e * u, params.gamma * e


def avg_fourier_rhs(cost, params: EsParams, x_a: float, n_quad: int = DEFAULT_NQUAD) -> float:
    return -params.gamma * b1_half(cost, x_a, params.delta, n_quad)


def avg_hpf_rhs(cost, params: EsParams, state, n_quad: int = DEFAULT_NQUAD):
    x_a, ybar_a = state
    g = params.gamma
    mean, b1h = a0_b1_half(cost, x_a, params.delta, n_quad)
    return -g * b1h, -g * ybar_a + g * mean


def avg_taylor1_rhs(cost, params: EsParams, x_a: float) -> float:
    g = _finite(float(cost.derivative(x_a)), "gradient")
    return -params.gamma * TAYLOR_C1 * params.delta * g


def support_oscillator_rhs(cost, params: EsParams, x1: float, t: float) -> float:
    return -params.gamma * _finite(float(cost(x1)), "cost") * dither(t)


def support_oscillator_solution(x10: float, gamma: float, c: float, t):
    """Closed form for a constant cost ``c``: ``x10 + gamma*c/(2*pi)*(cos(2*pi*t) - 1)``."""
    return x10 + gamma * c / TWO_PI * (np.cos(TWO_PI * np.asarray(t)) - 1.0)


# -- photovoltaic plant -------------------------------------------------------


def pv_current(v, i_sc: float = 5.0, v_oc: float = 20.0, v_t: float = 2.0):
    """Panel current ``i_sc*(1 - exp((v - v_oc)/v_t))`` clipped at zero."""
    if np.ndim(v) == 0:
        return max(i_sc * (1.0 - math.exp(min((float(v) - v_oc) / v_t, 700.0))), 0.0)
    v = np.asarray(v, dtype=float)
    return np.maximum(i_sc * (1.0 - np.exp(np.minimum((v - v_oc) / v_t, 700.0))), 0.0)


@dataclass
class PvPlant:
    """Stable second-order voltage dynamics feeding a static panel current map.

    Matrices are in physical seconds; ``omega`` (rad/s) is the dither
    frequency used to convert them to normalised time.  The plant input is
    the dithered set point ``z + delta*u``.
    """

    A_mat: np.ndarray
    B_vec: np.ndarray
    C_vec: np.ndarray
    q: Callable = pv_current
    noise_bound: float = 1.0
    rng_seed: int = 0
    omega: float = 115.2
    v_range: tuple = (0.0, 20.0)

    def __post_init__(self):
        self.A_mat = np.asarray(self.A_mat, dtype=float).reshape(2, 2)
        self.B_vec = np.asarray(self.B_vec, dtype=float).reshape(2)
        self.C_vec = np.asarray(self.C_vec, dtype=float).reshape(2)
        eig = np.linalg.eigvals(self.A_mat)
        if not np.all(eig.real < 0):
            raise ConfigError(f"plant matrix is not Hurwitz (eigenvalues {eig})", field="pv.A")
        if self.noise_bound < 0:
            raise ConfigError("noise bound must be >= 0", field="pv.noise_bound")
        if not self.omega > 0:
            raise ConfigError("omega must be positive", field="pv.omega")

    @property
    def time_scale(self) -> float:
        """Physical seconds per normalised time unit."""
        return TWO_PI / self.omega

    @property
    def dc_gain(self) -> float:
        return float(-self.C_vec @ np.linalg.solve(self.A_mat, self.B_vec))

    def steady_state(self, z: float) -> np.ndarray:
        return -np.linalg.solve(self.A_mat, self.B_vec) * z

    def power(self, v):
        return v * self.q(v)

    def static_map(self, z):
        v = self.dc_gain * np.asarray(z, dtype=float)
        out = self.power(v)
        return float(out) if np.ndim(z) == 0 else out

    def max_power(self, n: int = 20001):
        """Maximiser and maximum of the static map on ``v_range`` (grid + bracketed refine)."""
        from scipy.optimize import minimize_scalar

        lo, hi = self.v_range
        z = np.linspace(lo, hi, n)
        p = self.static_map(z)
        i = int(np.argmax(p))
        a, b = z[max(i - 1, 0)], z[min(i + 1, n - 1)]
        res = minimize_scalar(lambda s: -self.static_map(s), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12})
        return float(res.x), float(-res.fun)

    def has_unique_interior_max(self, n: int = 2001) -> bool:
        z = np.linspace(*self.v_range, n)
        p = self.static_map(z)
        d = np.sign(np.diff(p))
        d = d[d != 0]
        changes = np.count_nonzero(np.diff(d) != 0)
        return changes == 1 and d[0] > 0 and d[-1] < 0


def default_pv_plant(
    noise_bound: float = 1.0,
    rng_seed: int = 0,
    omega: float = 115.2,
    pole: float = 1000.0,
    i_sc: float = 5.0,
    v_oc: float = 20.0,
    v_t: float = 2.0,
) -> PvPlant:
    """Critically damped plant (double pole at ``-pole`` rad/s) with unit DC gain."""
    A = np.array([[0.0, 1.0], [-pole * pole, -2.0 * pole]])
    B = np.array([0.0, pole * pole])
    C = np.array([1.0, 0.0])

    def q(v):
        return pv_current(v, i_sc, v_oc, v_t)

    return PvPlant(A, B, C, q, noise_bound, rng_seed, omega, (0.0, v_oc))


def pv_es_rhs(plant: PvPlant, params: EsParams, scheme: str, state, t: float, nu: float = 0.0):
    """Joint ES + plant derivative in normalised time.

    State is ``(z, zeta1, zeta2)`` for ``classic`` and ``(z, ybar, zeta1,
    zeta2)`` for ``hpf``.  Power is maximised, so the update climbs the
    correlation of the measured power with the dither.
    """
    u = dither(t)
    ts = plant.time_scale
    A, B, C = plant.A_mat, plant.B_vec, plant.C_vec
    if scheme == "classic":
        z, z1, z2 = state
        ybar = None
    elif scheme == "hpf":
        z, ybar, z1, z2 = state
    else:
        raise ArgumentDomainError(f"unknown PV scheme {scheme!r}")
    x = C[0] * z1 + C[1] * z2
    y = _finite(float(plant.power(x)), "panel power") + nu
    w = z + params.delta * u
    dz1 = ts * (A[0, 0] * z1 + A[0, 1] * z2 + B[0] * w)
    dz2 = ts * (A[1, 0] * z1 + A[1, 1] * z2 + B[1] * w)
    g = params.gamma
    if ybar is None:
        return (g * y * u, dz1, dz2)
    e = y - ybar
    return (g * e * u, g * e, dz1, dz2)


class HeldNoise:
    """Uniform noise on ``[-bound, bound]``, one draw per integrator step."""

    def __init__(self, bound: float, seed: int):
        self.bound = float(bound)
        self.seed = seed
        self.value = 0.0
        self._rng = np.random.default_rng(seed)

    def begin_step(self, k: int, t: float) -> None:
        if k == 0:
            self._rng = np.random.default_rng(self.seed)
        self.value = self.bound * (2.0 * self._rng.random() - 1.0) if self.bound else 0.0


# -- systems ------------------------------------------------------------------


@dataclass
class System:
    """An ODE ``y' = rhs(t, y)`` with channel labels.

    ``dithered`` systems carry the period-1 dither and are subject to the
    integrator's step limit.  ``begin_step(k, t)`` is called before every
    integrator step (used for sample-and-hold noise).  One-channel systems
    may also supply ``scalar_rhs(t, x) -> float``, which the integrator
    prefers.
    """

    name: str
    labels: tuple
    rhs: Callable
    dithered: bool = True
    begin_step: Optional[Callable] = None
    meta: dict = field(default_factory=dict)
    scalar_rhs: Optional[Callable] = None


def classic_system(cost, params: EsParams) -> System:
    g, d = params.gamma, params.delta
    h = cost.fn

    def scalar(t, x):
        u = math.sin(TWO_PI * t)
        return -g * h(x + d * u) * u

    def rhs(t, y):
        return np.array([scalar(t, float(y[0]))])

    return System("classic", ("x",), rhs, True, meta={"gamma": g, "delta": d}, scalar_rhs=scalar)


def hpf_system(cost, params: EsParams) -> System:
    g, d = params.gamma, params.delta

    def rhs(t, y):
        u = math.sin(TWO_PI * t)
        e = cost(y[0] + d * u) - y[1]
        return np.array([-g * e * u, g * e])

    return System("hpf", ("x", "ybar"), rhs, True, meta={"gamma": g, "delta": d})


def avg_fourier_system(cost, params: EsParams, n_quad: int = DEFAULT_NQUAD) -> System:
    def scalar(t, x):
        return avg_fourier_rhs(cost, params, x, n_quad)

    def rhs(t, y):
        return np.array([scalar(t, float(y[0]))])

    return System("avg_fourier", ("x_a",), rhs, False,
                  meta={"gamma": params.gamma, "delta": params.delta, "n_quad": n_quad},
                  scalar_rhs=scalar)


def avg_hpf_system(cost, params: EsParams, n_quad: int = DEFAULT_NQUAD) -> System:
    def rhs(t, y):
        return np.array(avg_hpf_rhs(cost, params, (y[0], y[1]), n_quad))

    return System("avg_hpf", ("x_a", "ybar_a"), rhs, False,
                  meta={"gamma": params.gamma, "delta": params.delta, "n_quad": n_quad})


def avg_taylor1_system(cost, params: EsParams) -> System:
    k = params.gamma * TAYLOR_C1 * params.delta

    def scalar(t, x):
        return -k * float(cost.derivative(x))

    def rhs(t, y):
        return np.array([scalar(t, float(y[0]))])

    return System("avg_taylor1", ("x_a",), rhs, False,
                  meta={"gamma": params.gamma, "delta": params.delta}, scalar_rhs=scalar)


def support_oscillator_system(cost, params: EsParams) -> System:
    g = params.gamma
    h = cost.fn

    def scalar(t, x):
        return -g * h(x) * math.sin(TWO_PI * t)

    def rhs(t, y):
        return np.array([scalar(t, float(y[0]))])

    return System("support_osc", ("x1",), rhs, True, meta={"gamma": g}, scalar_rhs=scalar)


def pv_system(plant: PvPlant, params: EsParams, scheme: str) -> System:
    noise = HeldNoise(plant.noise_bound, plant.rng_seed)

    def rhs(t, y):
        return np.array(pv_es_rhs(plant, params, scheme, y, t, noise.value))

    labels = ("z", "zeta1", "zeta2") if scheme == "classic" else ("z", "ybar", "zeta1", "zeta2")
    return System(f"pv_{scheme}", labels, rhs, True, noise.begin_step,
                  meta={"gamma": params.gamma, "delta": params.delta,
                        "omega": plant.omega, "noise_bound": plant.noise_bound,
                        "seed": plant.rng_seed})


def pv_initial_state(plant: PvPlant, params: EsParams, scheme: str, z0: float, ybar0=None):
    """Plant at steady state for ``z0``; the filter state defaults to the dither-averaged power."""
    zeta = plant.steady_state(z0)
    if scheme == "classic":
        return np.array([z0, zeta[0], zeta[1]])
    if ybar0 is None:
        ybar0 = a0_half(plant.static_map, z0, params.delta)
    return np.array([z0, ybar0, zeta[0], zeta[1]])


def make_system(name: str, cost=None, params: Optional[EsParams] = None, plant: Optional[PvPlant] = None,
                n_quad: int = DEFAULT_NQUAD) -> System:
    """Build a system by scheme name (see :data:`SCHEMES`)."""
    if name not in SCHEMES:
        raise ConfigError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}",
                          field="schemes")
    if name.startswith("pv_"):
        if plant is None:
            raise ConfigError("PV schemes need a plant", field="pv")
        return pv_system(plant, params, name[3:])
    factories = {
        "classic": lambda: classic_system(cost, params),
        "hpf": lambda: hpf_system(cost, params),
        "avg_fourier": lambda: avg_fourier_system(cost, params, n_quad),
        "avg_hpf": lambda: avg_hpf_system(cost, params, n_quad),
        "avg_taylor1": lambda: avg_taylor1_system(cost, params),
        "support_osc": lambda: support_oscillator_system(cost, params),
    }
    return factories[name]()
