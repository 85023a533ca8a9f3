import math

import numpy as np
import pytest

from esx import analysis as an
from esx import dynamics as dyn
from esx.cost import EnvelopeSpec, constant_cost, fit_linear_minorant, paper_cost, quadratic_cost
from esx.dynamics import EsParams
from esx.errors import ArgumentDomainError
from esx.fourier import a0_half, b1_half
from esx.sim import Trajectory, integrate, tail_metrics

PI = math.pi


def test_period_average_identities():
    p = EsParams(0.3, 0.4)
    h = paper_cost(10, 0.25)
    for x in (-1.0, 2.0, 6.5):
        assert an.period_average_classic(h, p, x) == pytest.approx(-p.gamma * b1_half(h, x, p.delta), abs=1e-10)
        corr, mean = an.period_average_hpf(h, p, x, 3.0)
        assert corr == pytest.approx(b1_half(h, x, p.delta), abs=1e-10)
        assert mean == pytest.approx(a0_half(h, x, p.delta), abs=1e-10)


def test_sign_bound_report_fields():
    m = paper_cost(10, 0)
    c = fit_linear_minorant(m.fn, 2 * PI, -PI, 3 * PI, n=801)
    env = EnvelopeSpec(m.fn, lambda s: c * np.asarray(s), 0.25, 2 * PI)
    rep = an.outer_sign_bound(paper_cost(10, 0.25), env, 1.0, n=50)
    assert rep.slack == pytest.approx(rep.delta_star - 0.25)
    assert rep.holds
    assert rep.min_right >= rep.slack - 1e-8 and rep.max_left <= -rep.slack + 1e-8


def test_closeness_constant_cost():
    c, p = 1.0, EsParams(0.1, 0.1)
    rep = an.closeness(constant_cost(c), p, 0.0, t_bar=1.0)
    # x(t) = (g c / 2 pi)(cos 2 pi t - 1) against a frozen average
    assert rep.sup_error == pytest.approx(p.gamma * c / PI, abs=1e-9)
    assert len(rep.per_window) == 10


def test_closeness_benchmark_anchors():
    sc = an.closeness_scaling(paper_cost(10, 0), 0.1, 6.0, 6.0, [0.2, 0.1, 0.05])
    errs = [r.sup_error for r in sc.reports]
    assert errs[0] > errs[1] > errs[2]
    # regression anchors from the first full run
    assert errs[1] == pytest.approx(0.22516712846724918, rel=1e-9)
    assert errs[2] == pytest.approx(0.11230619845151057, rel=1e-9)
    assert sc.ratios[0] == 1.0


def test_containment_point_attractor():
    rep = an.containment(quadratic_cost(), EsParams(1.0, 0.1), 3.0, 0.0, t_end=200.0, scheme="avg_fourier")
    assert rep.entered and rep.contained
    assert rep.tail_sup_dist <= 1e-6


def test_containment_classic_small_dither_enters():
    # stated example for the small-dither containment setup; see the acceptance suite
    rep = an.containment(paper_cost(10, 0), EsParams(0.1, 0.01), 6.0, 2 * PI)
    assert rep.entered


def test_containment_starting_at_minimiser():
    rep = an.containment(quadratic_cost(), EsParams(0.1, 0.1), 0.0, 0.0, t_end=100.0)
    assert rep.entered and rep.entry_time == 0.0


def test_detect_stall_synthetic():
    t = np.arange(0, 100.0, 0.1)
    x = np.minimum(t, 50.0)
    tr = Trajectory(t, x[:, None], ("x_a",))
    speed = np.where(t < 50.0, 1.0, 0.0)
    ts, xs = an.detect_stall(tr, speed, 1e-8, 10.0)
    assert ts == pytest.approx(50.0) and xs == 50.0
    assert an.detect_stall(tr, np.ones_like(t)) == (None, None)


def test_escape_study_on_square():
    vs = an.escape_study(quadratic_cost(), [0.5], 1.0, 3.0, 0.0, t_end=60.0, avg_t_end=60.0)
    by = {v.scheme: v for v in vs}
    assert by["avg_fourier"].escaped and by["avg_taylor1"].escaped
    assert by["avg_taylor1"].band == (-0.5, 0.5)


def test_constant_cost_oscillation_scales_with_offset():
    p = EsParams(0.1, 0.1)
    ptp = []
    for c in (10.0, 100.0):
        tr = integrate(dyn.classic_system(constant_cost(c), p), [0.0], 20.0)
        ptp.append(tail_metrics(tr, "x", 0.5).peak_to_peak)
    assert ptp[1] / ptp[0] == pytest.approx(10.0, rel=1e-9)
    assert ptp[0] == pytest.approx(p.gamma * 10.0 / PI, rel=1e-9)


def test_uniformity_sweep_shape():
    tab = an.uniformity_sweep([10.0, 20.0], EsParams(0.1, 0.1), 6.3, t_end=20.0)
    assert [(r.h0, r.scheme) for r in tab.rows] == [(10.0, "classic"), (10.0, "hpf"), (20.0, "classic"), (20.0, "hpf")]
    assert tab.p2p_ratio["classic"] > 1.5


def test_hpf_tracking_constant_cost_is_exact():
    rep = an.hpf_tracking(constant_cost(5.0), EsParams(0.1, 0.1), 1.0, 5.0, t_end=20.0)
    assert rep.tail_residual == 0.0 and rep.init_gap == 0.0


def test_hpf_tracking_square_anchor():
    rep = an.hpf_tracking(quadratic_cost(), EsParams(0.1, 0.1), 3.0)
    assert rep.tail_residual == pytest.approx(1.0171451165177058e-4, rel=1e-6)
    assert rep.tail_residual <= 5 * 0.1 * 0.1 * 6.0


def test_hpf_tracking_enforces_filter_initialisation(caplog):
    h, p = quadratic_cost(), EsParams(0.1, 0.1)
    with pytest.raises(ArgumentDomainError):
        an.hpf_tracking(h, p, 3.0, ybar0=a0_half(h, 3.0, 0.1) + 0.5, t_end=20.0)
    with caplog.at_level("INFO", logger="esx.analysis"):
        rep = an.hpf_tracking(h, p, 3.0, ybar0=a0_half(h, 3.0, 0.1) + 0.05, t_end=20.0)
    assert rep.init_gap == pytest.approx(0.05)
    assert "hpf filter init" in caplog.text


def test_pv_study_short_run():
    plant = dyn.default_pv_plant()
    reps = an.pv_study(plant, EsParams(0.5, 0.05), 5.0, t_end=20.0)
    assert [r.scheme for r in reps] == ["classic", "hpf"]
    assert all(0 < r.fraction <= 1.0 + 1e-9 for r in reps)
