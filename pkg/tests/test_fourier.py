import math

import numpy as np
import pytest
from scipy.integrate import quad

from esx.cost import constant_cost, linear_cost, paper_cost, quadratic_cost
from esx.errors import ArgumentDomainError, BracketError, EvaluationDomainError
from esx.cost import CostModel
from esx.fourier import (
    a0_b1_half,
    a0_half,
    b1_derivative,
    b1_half,
    delta_star,
    find_equilibrium,
    fourier_coeff,
    sign_pattern,
)

PI = math.pi


def test_constant_has_no_harmonics():
    c = fourier_coeff(constant_cost(7.0), 1.3, 0.4, k=1)
    assert abs(c.a_k) < 1e-13 and abs(c.b_k) < 1e-13
    assert fourier_coeff(constant_cost(7.0), 1.3, 0.4, k=0).a_k == pytest.approx(14.0, abs=1e-12)


def test_square_first_sine_coefficient():
    c = fourier_coeff(quadratic_cost(), 1.0, 0.1, k=1)
    assert c.b_k == pytest.approx(0.2, abs=1e-12)
    assert (c.x, c.delta, c.k, c.n_quad) == (1.0, 0.1, 1, 1024)


def test_square_mean():
    assert a0_half(quadratic_cost(), 1.0, 0.1) == pytest.approx(1.005, abs=1e-12)
    assert fourier_coeff(quadratic_cost(), 1.0, 0.1, k=0).a_k / 2 == pytest.approx(1.005, abs=1e-12)


def test_square_second_harmonic():
    # (x + d sin)^2 = x^2 + d^2/2 - (d^2/2) cos(4 pi t) + 2 x d sin
    c = fourier_coeff(quadratic_cost(), 1.0, 0.1, k=2)
    assert c.a_k == pytest.approx(-0.005, abs=1e-12)
    assert abs(c.b_k) < 1e-13


@pytest.mark.parametrize("slope, x, delta", [(1.0, 0.0, 0.1), (-3.0, 2.5, 0.7), (0.5, -4.0, 2.0)])
def test_linear_b1_half(slope, x, delta):
    assert b1_half(linear_cost(slope), x, delta) == pytest.approx(slope * delta / 2, abs=1e-12)


def test_constant_mean():
    assert a0_half(constant_cost(3.25), 0.0, 0.3) == pytest.approx(3.25, abs=1e-12)


def test_single_pass_agrees():
    h = paper_cost(10, 0.25)
    a, b = a0_b1_half(h, 2.0, 0.5)
    assert a == a0_half(h, 2.0, 0.5) and b == b1_half(h, 2.0, 0.5)


def test_b1_half_against_adaptive_quadrature():
    # independent oracle: scipy adaptive quadrature of the defining integral
    h = paper_cost(10, 0.25)
    for x, d in [(2.0, 0.5), (PI, 0.1), (6.0, 1.0)]:
        ref, _ = quad(lambda t: h(x + d * math.sin(2 * PI * t)) * math.sin(2 * PI * t), 0, 1,
                      limit=400, epsabs=1e-13)
        assert b1_half(h, x, d) == pytest.approx(ref, abs=1e-9)


def test_benchmark_sign_change_brackets_the_minimiser():
    h = paper_cost(10, 0)
    d = 0.1
    assert b1_half(h, 2 * PI - d, d) < 0 < b1_half(h, 2 * PI + d, d)
    assert abs(b1_half(h, 2 * PI, d)) < d


def test_delta_star_linear():
    assert delta_star(lambda r: r, 1.0) == pytest.approx(2 / PI, abs=1e-10)
    assert delta_star(lambda r: r, 2.5) == pytest.approx(5 / PI, abs=1e-10)


def test_delta_star_square():
    assert delta_star(lambda r: r**2, 1.0) == pytest.approx(0.5, abs=1e-10)


def test_delta_star_zero_amplitude():
    assert delta_star(np.tanh, 0.0) == 0.0
    with pytest.raises(ArgumentDomainError):
        delta_star(np.tanh, -1.0)


def test_b1_derivative_of_square():
    assert b1_derivative(quadratic_cost(), 0.7, 0.1) == pytest.approx(0.2, abs=1e-12)
    assert b1_derivative(quadratic_cost(), 0.7, 0.05) == pytest.approx(0.1, abs=1e-12)
    assert b1_derivative(constant_cost(4.0), 0.7, 0.1) == 0.0


def test_b1_derivative_matches_difference_of_b1():
    h = paper_cost(10, 0.25)
    x, d, e = 2.0, 0.5, 1e-5
    fd = (fourier_coeff(h, x + e, d).b_k - fourier_coeff(h, x - e, d).b_k) / (2 * e)
    assert b1_derivative(h, x, d) == pytest.approx(fd, abs=1e-6)


def test_equilibrium_of_even_cost():
    assert abs(find_equilibrium(quadratic_cost(), 0.1, (-0.1, 0.1))) <= 1e-10


def test_equilibrium_of_shifted_square():
    x = find_equilibrium(quadratic_cost(1.0), 0.05, (0.95, 1.05))
    assert x == pytest.approx(1.0, abs=1e-10)


def test_equilibrium_of_benchmark_is_asymmetric():
    d = 0.1
    x = find_equilibrium(paper_cost(10, 0), d, (2 * PI - d, 2 * PI + d))
    assert 2 * PI - d < x < 2 * PI + d
    assert abs(x - 2 * PI) > 1e-6
    assert abs(b1_half(paper_cost(10, 0), x, d)) < 1e-9


def test_bracket_error_carries_sign_pattern():
    with pytest.raises(BracketError) as err:
        find_equilibrium(quadratic_cost(), 0.1, (1.0, 2.0))
    assert np.all(err.value.signs == 1)
    assert err.value.grid[0] == 1.0 and err.value.grid[-1] == 2.0


def test_sign_pattern_on_benchmark():
    grid, signs = sign_pattern(paper_cost(10, 0), 0.1, 5.0, 7.0, n=41)
    assert signs[0] == -1 and signs[-1] == 1
    assert np.count_nonzero(np.diff(signs)) == 1


def test_argument_errors():
    with pytest.raises(ArgumentDomainError):
        b1_half(quadratic_cost(), 0.0, 0.0)
    with pytest.raises(ArgumentDomainError):
        a0_half(quadratic_cost(), 0.0, 0.1, n_quad=32)
    with pytest.raises(ArgumentDomainError):
        fourier_coeff(quadratic_cost(), 0.0, 0.1, k=-1)


def test_non_finite_cost_is_reported():
    bad = CostModel(lambda x: np.log(np.asarray(x, dtype=float)))
    with np.errstate(all="ignore"):
        with pytest.raises(EvaluationDomainError):
            b1_half(bad, 0.0, 0.5)
