"""Fourier coefficients of the dithered cost and the derived average field.

For a query point ``x`` the dithered output ``h(x + delta*sin(2*pi*t))`` is
1-periodic in ``t``; its coefficients are computed with the uniform trapezoid
rule, which converges geometrically for smooth periodic integrands and is
exact for trigonometric polynomials of degree below the node count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect

from esx.errors import ArgumentDomainError, BracketError, EvaluationDomainError

DEFAULT_NQUAD = 1024


@dataclass(frozen=True)
class FourierCoeffs:
    k: int
    a_k: float
    b_k: float
    x: float
    delta: float
    n_quad: int


@lru_cache(maxsize=32)
def _nodes(n_quad: int):
    t = np.arange(n_quad) / n_quad
    s = np.sin(2.0 * np.pi * t)
    s.setflags(write=False)
    return t, s


def _check(delta, n_quad):
    if not delta > 0:
        raise ArgumentDomainError(f"delta must be positive, got {delta}")
    if n_quad < 64:
        raise ArgumentDomainError(f"n_quad must be at least 64, got {n_quad}")


def _dithered(cost, x, delta, n_quad):
    _, s = _nodes(n_quad)
    y = np.asarray(cost(x + delta * s), dtype=float)
    if not np.all(np.isfinite(y)):
        raise EvaluationDomainError(f"cost is not finite near x={x!r} (delta={delta})")
    return y, s


def fourier_coeff(cost, x: float, delta: float, k: int = 1, n_quad: int = DEFAULT_NQUAD) -> FourierCoeffs:
    """k-th cosine/sine coefficients of ``t -> h(x + delta*sin(2*pi*t))``."""
    _check(delta, n_quad)
    if k < 0:
        raise ArgumentDomainError(f"harmonic index must be >= 0, got {k}")
    y, _ = _dithered(cost, x, delta, n_quad)
    t, _ = _nodes(n_quad)
    a = 2.0 * float(np.dot(y, np.cos(2.0 * np.pi * k * t))) / n_quad
    b = 0.0 if k == 0 else 2.0 * float(np.dot(y, np.sin(2.0 * np.pi * k * t))) / n_quad
    return FourierCoeffs(k=k, a_k=a, b_k=b, x=float(x), delta=float(delta), n_quad=n_quad)


def b1_half(cost, x: float, delta: float, n_quad: int = DEFAULT_NQUAD) -> float:
    """Half the first sine coefficient; the average field is ``-gamma`` times this."""
    _check(delta, n_quad)
    y, s = _dithered(cost, x, delta, n_quad)
    return float(np.dot(y, s)) / n_quad


def a0_half(cost, x: float, delta: float, n_quad: int = DEFAULT_NQUAD) -> float:
    """Mean of the dithered cost over one period."""
    _check(delta, n_quad)
    y, _ = _dithered(cost, x, delta, n_quad)
    return float(np.sum(y)) / n_quad


def a0_b1_half(cost, x: float, delta: float, n_quad: int = DEFAULT_NQUAD):
    """``(a0_half, b1_half)`` from a single pass over the quadrature nodes."""
    _check(delta, n_quad)
    y, s = _dithered(cost, x, delta, n_quad)
    return float(np.sum(y)) / n_quad, float(np.dot(y, s)) / n_quad


@lru_cache(maxsize=8)
def _gauss_half(n: int):
    u, w = np.polynomial.legendre.leggauss(n)
    # map [-1, 1] onto [0, 1/2]
    return 0.25 * (u + 1.0), 0.25 * w


def delta_star(alpha, s: float, n_quad: int = 64) -> float:
    """Threshold ``2 * int_0^{1/2} alpha(s*sin(2*pi*t)) dt``.

    The half-period integrand is not periodic, so Gauss-Legendre nodes are
    used instead of the trapezoid rule; ``alpha`` must accept arrays.
    """
    if s < 0:
        raise ArgumentDomainError(f"delta_star needs s >= 0, got {s}")
    if s == 0:
        return 0.0
    t, w = _gauss_half(int(n_quad))
    vals = np.asarray(alpha(s * np.sin(2.0 * np.pi * t)), dtype=float)
    return max(0.0, 2.0 * float(np.dot(w, vals)))


def b1_derivative(cost, x: float, delta: float, n_quad: int = DEFAULT_NQUAD) -> float:
    """``d b_1 / dx`` as the quadrature of ``2 * h'(x + delta*sin) * sin``.

    Uses the analytic gradient when the cost carries one, otherwise central
    differences.
    """
    _check(delta, n_quad)
    _, s = _nodes(n_quad)
    g = np.asarray(cost.derivative(x + delta * s), dtype=float)
    if not np.all(np.isfinite(g)):
        raise EvaluationDomainError(f"gradient is not finite near x={x!r}")
    return 2.0 * float(np.dot(g, s)) / n_quad


def sign_pattern(cost, delta: float, lo: float, hi: float, n: int = 201, n_quad: int = DEFAULT_NQUAD):
    """Signs of ``b1_half`` on a uniform grid over ``[lo, hi]``."""
    grid = np.linspace(lo, hi, n)
    signs = np.sign([b1_half(cost, float(x), delta, n_quad) for x in grid]).astype(int)
    return grid, signs


def find_equilibrium(
    cost,
    delta: float,
    bracket,
    tol: float = 1e-10,
    n_quad: int = DEFAULT_NQUAD,
) -> float:
    """Root of the Fourier average field inside ``bracket`` by bisection.

    Raises :class:`BracketError` carrying the sampled sign pattern when the
    field does not change sign across the bracket.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    f = lambda x: b1_half(cost, x, delta, n_quad)  # noqa: E731
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        grid, signs = sign_pattern(cost, delta, lo, hi, n_quad=n_quad)
        raise BracketError(
            f"b1_half has the same sign at both ends of [{lo}, {hi}]", grid=grid, signs=signs
        )
    return float(bisect(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200))
