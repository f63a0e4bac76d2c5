import math

import numpy as np
import pytest

from kieferweiss.evaluate import asn, oc, quantile, reject_probability
from kieferweiss.expfam import binomial, geometric, poisson
from kieferweiss.solve import NonConvergence, SimplexConfig
from kieferweiss.sprt import SprtDesign, fit_sprt, sprt_errors, sprt_plan, sprt_plan_auto, wald_start

LN10 = math.log(10.0)


def raw_llr(model, theta0, theta1, n, s):
    t0, t1 = model.natural(theta0), model.natural(theta1)
    return model.log_suff_pmf(t1, n, s) - model.log_suff_pmf(t0, n, s)


@pytest.mark.parametrize("model,t0,t1,la,lb", [
    (poisson(), 0.5, 0.7, -2.109, 1.9986),
    (binomial(3), 0.05, 0.08, -2.1517, 2.0034),
    (geometric(), 1.0, 2.0, -0.9, 0.4),
])
def test_band_matches_raw_likelihood_ratio(model, t0, t1, la, lb):
    plan = sprt_plan(SprtDesign(la, lb), model, t0, t1, 300)
    for n in range(1, 300):
        s = np.arange(0, min(4 * n + 30, n * model.support_max) + 1)
        llr = raw_llr(model, t0, t1, n, s)
        inside = (llr > la + 1e-12) & (llr < lb - 1e-12)
        near = (np.abs(llr - la) < 1e-12) | (np.abs(llr - lb) < 1e-12)
        assert np.array_equal(plan.continues(n, s)[~near], inside[~near])
        stopped = ~plan.continues(n, s)
        assert np.array_equal(plan.accepts_h0(n, s)[stopped & ~near], (llr <= la)[stopped & ~near])


def test_boundary_ties_stop():
    # the log LR after n Bernoulli trials is step * S_n - n * db
    model = binomial(1)
    t0, t1 = model.natural(0.25), model.natural(0.75)
    step = t1 - t0
    db = model.b(t1) - model.b(t0)
    # choose log_b so that S_2 = 2 sits exactly on it and log_a so that S_2 = 0 does
    lb = 2 * step - 2 * db
    la = -2 * db
    plan = sprt_plan(SprtDesign(la, lb), model, 0.25, 0.75, 10)
    assert not plan.continues(2, 2) and not plan.accepts_h0(2, 2)
    assert not plan.continues(2, 0) and plan.accepts_h0(2, 0)
    assert plan.continues(2, 1)


def test_cap_rule_uses_sign_of_llr():
    model = poisson()
    plan = sprt_plan(SprtDesign(-5.0, 5.0), model, 0.5, 0.7, 7)
    n = 7
    s = np.arange(0, 20)
    assert np.array_equal(plan.accepts_h0(n, s), raw_llr(model, 0.5, 0.7, n, s) <= 0)


def test_empty_band_stops_at_once():
    model = poisson()
    plan = sprt_plan(SprtDesign(-1e-9, 1e-9), model, 0.5, 0.7, 50)
    assert asn(plan, model, 0.6) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("model,t0,t1,la,lb", [
    (poisson(), 0.5, 0.7, -0.916 * LN10, 0.868 * LN10),
    (binomial(3), 0.05, 0.08, -7.4481, 2.1115),
])
def test_cap_insensitivity(model, t0, t1, la, lb):
    d = SprtDesign(la, lb)
    thetas = (t0, 0.5 * (t0 + t1), t1)
    plan = sprt_plan_auto(d, model, t0, t1, thetas=thetas)
    longer = sprt_plan(d, model, t0, t1, 2 * plan.horizon)
    for t in thetas:
        assert abs(oc(plan, model, t) - oc(longer, model, t)) < 1e-9
        assert abs(asn(plan, model, t) - asn(longer, model, t)) < 1e-9


def test_widening_upper_bound_does_not_raise_alpha():
    model = poisson()
    la = -0.916 * LN10
    alphas = [sprt_errors(SprtDesign(la, lb), model, 0.5, 0.7)[0] for lb in np.linspace(1.5, 2.5, 11)]
    assert all(b <= a + 1e-12 for a, b in zip(alphas, alphas[1:]))


def test_table1_bounds_reproduce_characteristics():
    # the Poisson table prints decimal logarithms
    model = poisson()
    plan = sprt_plan_auto(SprtDesign(-0.916 * LN10, 0.868 * LN10), model, 0.5, 0.7, thetas=(0.5, 0.58464, 0.7))
    assert asn(plan, model, 0.58464) == pytest.approx(72.28, abs=0.05)
    assert asn(plan, model, 0.5) == pytest.approx(55.55, abs=0.05)
    assert asn(plan, model, 0.7) == pytest.approx(50.06, abs=0.05)
    assert abs(quantile(plan, model, 0.58464, 0.99) - 281) <= 1
    a, b = reject_probability(plan, model, 0.5), oc(plan, model, 0.7)
    assert a == pytest.approx(0.1, rel=0.01) and b == pytest.approx(0.1, rel=0.01)


def test_table2_bounds_reproduce_characteristics():
    model = geometric()
    plan = sprt_plan_auto(SprtDesign(-0.8920 * LN10, 0.7318 * LN10), model, 1.0, 2.0, thetas=(1.0, 1.27794, 2.0))
    assert asn(plan, model, 1.0) == pytest.approx(15.30, abs=0.05)
    assert asn(plan, model, 2.0) == pytest.approx(11.42, abs=0.05)
    assert asn(plan, model, 1.27794) == pytest.approx(18.24, abs=0.05)


def test_table3_bounds_are_natural_logs():
    model = binomial(3)
    plan = sprt_plan_auto(SprtDesign(-2.1517, 2.0034), model, 0.05, 0.08, thetas=(0.05, 0.06193, 0.08))
    assert asn(plan, model, 0.06193) == pytest.approx(107.24, abs=0.05)
    assert asn(plan, model, 0.05) == pytest.approx(83.91, abs=0.05)
    assert abs(quantile(plan, model, 0.06193, 0.99) - 414) <= 1


def test_wald_start():
    la, lb = wald_start(0.1, 0.2)
    assert la == pytest.approx(math.log(0.2 / 0.9))
    assert lb == pytest.approx(math.log(0.8 / 0.1))


def test_fit_poisson_symmetric():
    d = fit_sprt(poisson(), 0.5, 0.7, 0.1, 0.1)
    assert d.log_a / LN10 == pytest.approx(-0.916, abs=0.01)
    assert d.log_b / LN10 == pytest.approx(0.868, abs=0.01)
    assert d.rel_deviation <= 0.005
    a, b = sprt_errors(d, poisson(), 0.5, 0.7)
    assert (a, b) == pytest.approx((d.achieved_alpha, d.achieved_beta), abs=1e-12)


def test_fit_binomial_asymmetric():
    d = fit_sprt(binomial(3), 0.05, 0.08, 0.1, 0.0005)
    assert d.log_a == pytest.approx(-7.4481, abs=0.02)
    assert d.log_b == pytest.approx(2.1115, abs=0.02)
    assert d.rel_deviation <= 0.002


def test_fit_budget_exhaustion_carries_best():
    cfg = SimplexConfig(step=0.05, absolute_step=True, max_iter=2, ftol_abs=1e-300, ftol_rel=1e-300, xtol=1e-300)
    with pytest.raises(NonConvergence) as info:
        fit_sprt(binomial(3), 0.05, 0.08, 0.1, 0.0005, config=cfg)
    assert isinstance(info.value.best, SprtDesign)


def test_design_validation_and_json():
    with pytest.raises(ValueError):
        SprtDesign(1.0, -1.0)
    with pytest.raises(ValueError):
        fit_sprt(poisson(), 0.5, 0.7, 0.0, 0.1)
    d = SprtDesign(-2.0, 2.0, 0.1, 0.1, 0.0)
    assert '"log_a": -2.0' in d.to_json()
