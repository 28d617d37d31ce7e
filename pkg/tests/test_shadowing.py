from fractions import Fraction

import mpmath as mp
import pytest

from anosovlab.mparith import bits
from anosovlab.shadowing import (
    excursion_time,
    find_homoclinic,
    shadow_series,
    shadowing_base_orbit,
    shadowing_n0,
    series_to_csv,
)
from anosovlab.suspension import Roof, RoofTerm, make_suspension, unit_roof
from anosovlab.torus_maps import enumerate_periodic_orbits, make_linear_map


def test_homoclinic_cat_closed_form(unit_model, unit_anchor):
    hom = find_homoclinic(unit_model, unit_anchor, (1, 1))
    with bits(192):
        lam = (3 + mp.sqrt(5)) / 2
        assert abs(hom.eta_inf - lam / mp.sqrt(5)) < mp.mpf(2) ** -170
        assert abs(hom.xi_inf - (lam / mp.sqrt(5) - 1)) < mp.mpf(2) ** -170


def test_homoclinic_zero_class_rejected(unit_model, unit_anchor):
    with pytest.raises(ValueError, match="anchor itself"):
        find_homoclinic(unit_model, unit_anchor, (0, 0))


def test_homoclinic_antisymmetry(unit_model, unit_anchor):
    a = find_homoclinic(unit_model, unit_anchor, (1, 1))
    b = find_homoclinic(unit_model, unit_anchor, (-1, -1))
    with bits(192):
        assert abs(a.eta_inf + b.eta_inf) < mp.mpf(2) ** -170
        assert abs(a.xi_inf + b.xi_inf) < mp.mpf(2) ** -170


def test_shadowing_uniqueness(diss_model, diss_hom):
    a = shadowing_base_orbit(diss_model, diss_hom, 12)
    b = shadowing_base_orbit(diss_model, diss_hom, 12)
    assert a.representative[0] == b.representative[0]
    assert a.representative[1] == b.representative[1]


def test_below_n0_rejected(diss_model, diss_hom):
    n0 = shadowing_n0(diss_model, diss_hom)
    assert n0 >= 2
    with pytest.raises(ValueError, match="below the measured shadowing threshold"):
        shadowing_base_orbit(diss_model, diss_hom, n0 - 1)


def test_audit_distance_contraction(diss_series, diss_anchor):
    """The orbit-to-pseudo-orbit distance decays like mu^{n/2}: four extra
    turns shrink it by a factor close to mu^2."""
    dist = dict(zip(diss_series.n_values, diss_series.audit_distances))
    with bits(128):
        mu = mp.e ** diss_anchor.multipliers.log_mu
        ratio = float(dist[14] / dist[10])
        assert 0.4 * float(mu ** 2) < ratio < 2.5 * float(mu ** 2)


def test_unit_roof_series_exactly_integer(unit_model, unit_anchor):
    hom = find_homoclinic(unit_model, unit_anchor, (1, 1))
    ser = shadow_series(unit_model, hom, (8, 16))
    tp = excursion_time(unit_model, hom)
    assert tp == 0
    for n, t in zip(ser.n_values, ser.periods):
        assert t == n


def test_cauchy_increments(diss_series, diss_anchor):
    """T_{n+1} - T_n converges to T at rate mu^n."""
    with bits(256):
        t = diss_anchor.period_T
        mu = mp.e ** diss_anchor.multipliers.log_mu
        d = [
            diss_series.periods[i + 1] - diss_series.periods[i] - t
            for i in range(len(diss_series.periods) - 1)
        ]
        for i in (5, 10, 20):
            assert abs(d[i + 1] / d[i]) < float(mu) * 1.2


def test_excursion_dual_path(diss_model, diss_hom, diss_tprime):
    # the fixture value was computed with the built-in Cauchy cross-check;
    # recompute the series side independently
    again = excursion_time(diss_model, diss_hom, check=False)
    assert again == diss_tprime


def test_excursion_roof_scaling(pert_map_small, pert_fixed_point):
    roof1 = Roof(c0=1, terms=(RoofTerm((1, 0), Fraction(559, 1000), "sin"),), logdet_coeff=1)
    roof2 = Roof(c0=2, terms=(RoofTerm((1, 0), Fraction(1118, 1000), "sin"),), logdet_coeff=2)
    m1 = make_suspension(pert_map_small, roof1, 192)
    m2 = make_suspension(pert_map_small, roof2, 192)
    a1 = m1.flow_orbit(pert_fixed_point)
    a2 = m2.flow_orbit(pert_fixed_point)
    h1 = find_homoclinic(m1, a1, (1, 1))
    h2 = find_homoclinic(m2, a2, (1, 1))
    t1 = excursion_time(m1, h1, check=False)
    t2 = excursion_time(m2, h2, check=False)
    with bits(192):
        assert abs(t2 - 2 * t1) < mp.mpf(2) ** -160


def test_precision_budget_gate(unit_model, unit_anchor):
    hom = find_homoclinic(unit_model, unit_anchor, (1, 1))
    with pytest.raises(ValueError, match="precision budget"):
        shadow_series(unit_model, hom, (10, 400))


def test_residual_sign_eventually_constant(diss_series, diss_anchor, diss_tprime):
    with bits(256):
        t = diss_anchor.period_T
        resid = [
            tn - n * t - diss_tprime
            for n, tn in zip(diss_series.n_values, diss_series.periods)
        ]
        top = resid[len(resid) // 2 :]
        signs = {mp.sign(r) for r in top}
        assert len(signs) == 1


def test_series_csv(diss_series, diss_tprime):
    text = series_to_csv(diss_series, t_prime=diss_tprime)
    lines = text.splitlines()
    assert lines[0] == "n,T_n,residual,ratio"
    assert len(lines) == len(diss_series.n_values) + 1


def test_reversed_pipeline_recovers_unstable(diss_model, pert_fixed_point):
    """A volume-contracting anchor analyzed under time reversal recovers
    -log lambda, i.e. the reversed model recovers its own stable rate."""
    from anosovlab.asymptotics import gamma_recovery
    from anosovlab.suspension import time_reversed

    rev = time_reversed(diss_model)
    anchor = rev.flow_orbit(pert_fixed_point)
    assert anchor.dissipation_class == "contracting"
    # reversal swaps roles: the reversed model's expanding anchor is the
    # original contracting one; recovery runs on the double reversal
    fwd = time_reversed(rev)
    anchor_fwd = fwd.flow_orbit(pert_fixed_point)
    assert anchor_fwd.dissipation_class == "expanding"
    hom = find_homoclinic(fwd, anchor_fwd, (1, 1))
    ser = shadow_series(fwd, hom, (10, 32))
    rec = gamma_recovery(fwd, ser, anchor_fwd)
    assert rec.recovered
    with bits(128):
        # the recovered stable rate of the reversed-reversed flow equals
        # -log lambda of the reversed model at this orbit
        assert abs(
            rec.reference_log_mu - float(-anchor.multipliers.log_lambda)
        ) < 1e-30
