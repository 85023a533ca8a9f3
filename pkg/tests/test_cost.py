import math

import numpy as np
import pytest

from esx.cost import (
    CostModel,
    EnvelopeSpec,
    check_assumption2,
    constant_cost,
    estimate_constants,
    finite_difference_grad,
    fit_linear_minorant,
    linear_cost,
    load_tabulated_cost,
    paper_cost,
    quadratic_cost,
    tabulated_cost,
)
from esx.errors import ArgumentDomainError

PI = math.pi


@pytest.mark.parametrize(
    "h0, x, expected",
    [(10.0, 2 * PI, 7.0), (10.0, PI, 9.0), (0.0, 0.0, PI**2 - 1.0)],
)
def test_paper_cost_values(h0, x, expected):
    assert paper_cost(h0, 0.0)(x) == pytest.approx(expected, abs=1e-12)


def test_paper_cost_matches_oracle_on_grid(oracle):
    x = np.linspace(-PI, 3 * PI, 4001)
    for amp in (0.0, 0.25):
        h = paper_cost(10.0, amp)
        np.testing.assert_allclose(h(x), oracle(x, 10.0, amp), atol=1e-13)
        # scalar fast path agrees with the vector path
        np.testing.assert_allclose([h(float(v)) for v in x[::97]], h(x[::97]), atol=0)


def test_paper_cost_is_c1_at_junctions():
    h = paper_cost(10.0, 0.0)
    for xj in (PI, 2 * PI):
        eps = 1e-7
        assert abs(h(xj - eps) - h(xj + eps)) < 1e-6
        assert abs(h.derivative(xj - eps) - h.derivative(xj + eps)) < 1e-6
    assert h.derivative(PI) == 0.0 and h.derivative(2 * PI) == 0.0


def test_analytic_gradient_matches_finite_difference():
    h = paper_cost(10.0, 0.25)
    fd = finite_difference_grad(h.fn)
    for x in np.linspace(-3.0, 9.0, 37):
        assert h.derivative(float(x)) == pytest.approx(fd(float(x)), abs=1e-6)


def test_costmodel_without_grad_falls_back_to_differences():
    c = CostModel(lambda x: np.asarray(x) ** 3)
    assert c.derivative(2.0) == pytest.approx(12.0, rel=1e-7)


def test_simple_costs():
    assert quadratic_cost(1.0, 2.0, 3.0)(2.0) == 5.0
    assert quadratic_cost(1.0, 2.0, 3.0).derivative(2.0) == 4.0
    assert linear_cost(3.0, 1.0)(2.0) == 7.0
    np.testing.assert_array_equal(constant_cost(5.0)(np.zeros(3)), 5.0)
    assert constant_cost(5.0).derivative(1.0) == 0.0


def test_tabulated_cost_roundtrip(tmp_path):
    x = np.linspace(-2, 2, 41)
    path = tmp_path / "h.csv"
    np.savetxt(path, np.column_stack([x, x**2]), delimiter=",", header="x,h", comments="")
    h = load_tabulated_cost(path)
    assert h(1.0) == pytest.approx(1.0, abs=1e-12)
    assert h(0.55) == pytest.approx(0.3025, abs=2e-3)
    # total on finite intervals: extrapolates past the table
    assert math.isfinite(h(3.0))


def test_tabulated_cost_sorts_input_and_rejects_bad_shapes():
    h = tabulated_cost([0.0, 2.0, 1.0], [0.0, 2.0, 1.0])
    assert h(1.5) == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(ArgumentDomainError):
        tabulated_cost([0.0, 1.0], [0.0])


def test_constants_of_square():
    lc = estimate_constants(quadratic_cost(), 0.0, 1.0)
    assert lc.M_r == 1.0
    assert lc.L_r == pytest.approx(2.0, abs=2e-3)


def test_constants_of_constant():
    lc = estimate_constants(constant_cost(5.0), 0.0, 3.0)
    assert (lc.L_r, lc.M_r) == (0.0, 5.0)


def test_constants_of_benchmark_against_grid_oracle(oracle):
    # dense independent grid on [pi, 3pi]; the sup sits at the right endpoint
    xs = np.linspace(PI, 3 * PI, 100001)
    m_oracle = float(np.max(np.abs(oracle(xs))))
    assert m_oracle == pytest.approx(7.0 + PI**2, abs=1e-12)
    lc = estimate_constants(paper_cost(10, 0), 2 * PI, PI)
    assert lc.M_r == pytest.approx(m_oracle, abs=1e-12)
    assert lc.L_r == pytest.approx(2 * PI, abs=1e-2)


def test_constants_domain_errors():
    with pytest.raises(ArgumentDomainError):
        estimate_constants(quadratic_cost(), 0.0, 0.0)
    with pytest.raises(ArgumentDomainError):
        estimate_constants(quadratic_cost(), 0.0, 1.0, n=8)


def test_constants_monotone_under_doubling():
    h = paper_cost(10, 0.25)
    a = estimate_constants(h, 2 * PI, 2.0, n=500)
    b = estimate_constants(h, 2 * PI, 2.0, n=1000)
    assert b.L_r >= a.L_r and b.M_r >= a.M_r


def test_assumption2_square_passes():
    env = EnvelopeSpec(lambda x: np.asarray(x) ** 2, lambda s: np.asarray(s) ** 2 / 2, 0.0, 0.0)
    rep = check_assumption2(quadratic_cost(), env, -2.0, 2.0, n=401)
    assert rep.passed and rep.worst_gap == 0.0 and rep.alpha_ok


def test_assumption2_benchmark_with_ripples_passes():
    m = paper_cost(10, 0.0)
    c = fit_linear_minorant(m.fn, 2 * PI, -PI, 3 * PI, n=801)
    assert c > 0
    env = EnvelopeSpec(m.fn, lambda s: 0.5 * c * np.asarray(s), 0.25, 2 * PI)
    rep = check_assumption2(paper_cost(10, 0.25), env, -PI, 3 * PI, n=801)
    assert rep.passed
    assert rep.worst_gap == pytest.approx(0.25, abs=1e-5)


def test_assumption2_sine_fails():
    env = EnvelopeSpec(np.sin, lambda s: 0.1 * np.asarray(s), 0.0, -PI / 2)
    rep = check_assumption2(CostModel(np.sin, np.cos), env, -PI, PI, n=401)
    assert not rep.passed
    assert rep.worst_monotonicity_violation > 0


def test_assumption2_needs_xstar_in_grid():
    env = EnvelopeSpec(np.abs, np.abs, 0.0, 5.0)
    with pytest.raises(ArgumentDomainError):
        check_assumption2(quadratic_cost(), env, -1.0, 1.0)
