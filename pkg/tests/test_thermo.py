import math
from fractions import Fraction

import numpy as np
import pytest

from anosovlab.suspension import make_suspension, time_reversed, unit_roof
from anosovlab.thermo import (
    Potential,
    bowen_average,
    build_ensemble,
    coboundary_obstruction,
    ensemble_to_csv,
    pressure_curve,
    pressure_estimate,
    proportion,
    window_log_sum,
)
from anosovlab.torus_maps import TrigTerm, make_perturbed_map


@pytest.fixture(scope="module")
def cat_ens(unit_model):
    return build_ensemble(unit_model, 10)


@pytest.fixture(scope="module")
def strong_model():
    base = make_perturbed_map([[2, 1], [1, 1]], [TrigTerm((1, 0), (1, 0), "sin")], Fraction(3, 20))
    return make_suspension(base, unit_roof(), 64)


@pytest.fixture(scope="module")
def strong_ens(strong_model):
    return build_ensemble(strong_model, 10)


def test_ensemble_counts_audited(cat_ens):
    # build_ensemble raises on incompleteness; spot-check the totals
    per = {}
    for n in cat_ens.period_n:
        per[int(n)] = per.get(int(n), 0) + 1
    assert per[1] == 1 and per[2] == 2 and per[3] == 5


def test_ensemble_rejects_reversed_base(diss_model):
    rev = time_reversed(diss_model)
    with pytest.raises(ValueError, match="BaseMap"):
        build_ensemble(rev, 3)


def test_window_additivity(strong_ens):
    pot = Potential.psi_u()
    s1, c1 = window_log_sum(strong_ens, pot, 7.5, 1.0)
    s2, c2 = window_log_sum(strong_ens, pot, 8.5, 1.0)
    s12, c12 = window_log_sum(strong_ens, pot, 7.5, 2.0)
    assert c12 == c1 + c2
    total = math.exp(s1) + math.exp(s2)
    assert abs(math.exp(s12) - total) < 5e-13 * total


def test_shift_covariance(strong_ens):
    t, delta = 8.5, 1.0
    base = Potential.psi_u()
    c = 0.35
    shifted = Potential(kind="custom", custom=base.weights(strong_ens) + c * strong_ens.periods)
    s0, _ = window_log_sum(strong_ens, base, t, delta)
    s1, _ = window_log_sum(strong_ens, shifted, t, delta)
    assert c * t - 1e-9 <= s1 - s0 <= c * (t + delta) + 1e-9


def test_pressure_counting(cat_ens):
    zero = Potential(kind="custom", custom=np.zeros(cat_ens.size))
    est = pressure_estimate(cat_ens, zero, 8.5, 1.0)
    log_lam = math.log((3 + math.sqrt(5)) / 2)
    assert abs(est.value - log_lam) < 0.1


def test_pressure_geometric_conservative(cat_ens):
    est_u = pressure_estimate(cat_ens, Potential.psi_u(), 8.5, 1.0)
    est_s = pressure_estimate(cat_ens, Potential.psi_s(), 8.5, 1.0)
    assert abs(est_u.value) < 0.05
    assert abs(est_s.value) < 0.05
    # the raw estimator carries the documented -log(T)/T window bias
    assert est_u.raw < -0.15


def test_bowen_normalized_period(strong_ens):
    zero = Potential(kind="custom", custom=np.zeros(strong_ens.size))
    avg = bowen_average(strong_ens, zero, strong_ens.periods, 8.5, 1.0)
    assert abs(avg - 1.0) < 1e-12


def test_bowen_negative_logjac_dissipative(strong_ens):
    avg = bowen_average(strong_ens, Potential.psi_u(), Potential.log_jacobian(), 8.5, 1.0)
    assert avg < 0


def test_bowen_vanishes_at_minimizer(strong_ens):
    curve = pressure_curve(strong_ens, [i / 10 for i in range(11)], 9.5, 1.0)
    avg = bowen_average(
        strong_ens, Potential.family_t(curve.t0), Potential.log_jacobian(), 9.5, 1.0
    )
    assert abs(avg) < 0.02


def test_proportion_preserving_conservative(cat_ens):
    for pot in (Potential.psi_u(), Potential.psi_s()):
        assert proportion(cat_ens, pot, "preserving", 8.5, 1.0) == 1.0


def test_zero_proportion_preserving_dissipative(strong_ens):
    assert proportion(strong_ens, Potential.psi_u(), "preserving", 9.5, 1.0) < 0.01


def test_curve_endpoint_bit_identical(strong_ens):
    curve = pressure_curve(strong_ens, [0.0, 0.5, 1.0], 9.5, 1.0)
    direct = pressure_estimate(strong_ens, Potential.family_t(0.0), 9.5, 1.0)
    assert curve.values[0] == direct.value


def test_family_weights_affine_identity(strong_ens):
    t = 0.37
    w = Potential.family_t(t).weights(strong_ens)
    interp = t * Potential.psi_s().weights(strong_ens) + (1 - t) * Potential.psi_u().weights(strong_ens)
    assert np.array_equal(w, interp)


def test_curve_convex_dissipative(strong_ens):
    curve = pressure_curve(strong_ens, [i / 10 for i in range(11)], 9.5, 1.0)
    assert curve.convex_ok
    assert 0.0 < curve.t0 < 1.0


def test_curve_conservative_flat_bottom(cat_ens):
    """The exactly area-preserving cat has log Jac identically zero, so the
    interpolating weights are t-independent: the curve is literally flat
    (the strict-convexity hypothesis - a non-coboundary Jacobian - fails by
    design) with both roots at the same small value."""
    curve = pressure_curve(cat_ens, [i / 10 for i in range(11)], 8.5, 1.0)
    assert abs(curve.values[0]) < 0.05 and abs(curve.values[-1]) < 0.05
    assert max(curve.values) - min(curve.values) < 1e-12
    assert abs(curve.min_margin) < 1e-12
    assert 0.0 <= curve.t0 <= 1.0


def test_grid_range_gate(strong_ens):
    with pytest.raises(ValueError, match="t grid"):
        pressure_curve(strong_ens, [-1.0, 0.0], 9.5, 1.0)


def test_empty_window_error(cat_ens):
    with pytest.raises(ValueError, match="empty period window"):
        pressure_estimate(cat_ens, Potential.psi_u(), 200.0, 1.0)


def test_coboundary_conservative_vanishes(cat_ens):
    rep = coboundary_obstruction(cat_ens, Potential.log_jacobian())
    assert rep.vanishing_at_scale
    assert rep.max_abs_weight == 0.0


def test_coboundary_dissipative_witness(strong_ens, strong_model):
    rep = coboundary_obstruction(strong_ens, Potential.log_jacobian())
    assert not rep.vanishing_at_scale
    # the fixed point contributes log det Df(0) = log(1 + 2 pi eps) exactly
    k = strong_ens.ids.index("n1:0/1:0/1")
    fp_weight = strong_ens.log_jac[k]
    assert abs(fp_weight - math.log(1 + 2 * math.pi * 0.15)) < 1e-12
    assert rep.max_abs_weight >= abs(fp_weight)


def test_coboundary_difference_identically_zero(strong_ens):
    w = Potential.psi_u().weights(strong_ens)
    diff = Potential(kind="custom", custom=w - w)
    rep = coboundary_obstruction(strong_ens, diff)
    assert rep.vanishing_at_scale and rep.max_abs_weight == 0.0


def test_ensemble_csv(cat_ens):
    text = ensemble_to_csv(cat_ens)
    assert text.splitlines()[0] == "symbolic_id,N,T,mu,lambda,jacobian,class"
    assert len(text.splitlines()) == cat_ens.size + 1
