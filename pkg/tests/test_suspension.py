import json
from fractions import Fraction

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosovlab.mparith import agree_bits, bits
from anosovlab.suspension import (
    Roof,
    RoofTerm,
    hitting_time_jets,
    make_suspension,
    model_from_json,
    model_to_json,
    section_at,
    strong_manifold_height,
    time_reversed,
    unit_roof,
)
from anosovlab.torus_maps import enumerate_periodic_orbits, make_linear_map, orbit_multipliers


def test_constant_roof_periods_integer(unit_model, cat_map):
    orbits = enumerate_periodic_orbits(cat_map, 3)
    for o in orbits:
        t = unit_model.flow_period(o)
        assert t == o.period_N


def test_fixed_point_period_cos_roof(cos_model, cat_fixed_point):
    t = cos_model.flow_period(cat_fixed_point)
    assert t == mp.mpf("1.25")


def test_precision_ladder(cos_model, cat_map):
    per2 = [o for o in enumerate_periodic_orbits(cat_map, 2) if o.period_N == 2][0]
    t1 = cos_model.flow_period(per2, 256)
    t2 = cos_model.flow_period(per2, 320)
    assert agree_bits(t1, t2) >= 240


def test_birkhoff_doubling_exact(cos_model, cat_map):
    per3 = [o for o in enumerate_periodic_orbits(cat_map, 3) if o.period_N == 3][0]
    from anosovlab.torus_maps import orbit_cycle

    cyc = orbit_cycle(cat_map, per3)
    with bits(192):
        single = cos_model.birkhoff(cyc)
        double = cos_model.birkhoff(cyc + cyc)
        assert double == 2 * single


def test_multipliers_roof_independent(cat_map, cat_fixed_point, unit_model, cos_model):
    a = unit_model.flow_orbit(cat_fixed_point).multipliers
    b = cos_model.flow_orbit(cat_fixed_point).multipliers
    assert a.log_mu == b.log_mu
    assert a.log_lambda == b.log_lambda


def test_dissipation_classes(unit_anchor, cos_anchor, diss_anchor):
    assert unit_anchor.dissipation_class == "preserving"
    assert cos_anchor.dissipation_class == "preserving"
    assert diss_anchor.dissipation_class == "expanding"


def test_mild_certificate(diss_anchor):
    cert = diss_anchor.mild_dissipation
    assert cert is not None and cert.rho == Fraction(5, 4)
    with bits(128):
        mu = mp.e ** diss_anchor.multipliers.log_mu
        lam = mp.e ** diss_anchor.multipliers.log_lambda
        assert mu ** mp.mpf(1.25) * lam < 1
        assert mu * lam ** mp.mpf(1.25) > 1
        # spec figure: mu^{5/4} lambda ~ 0.845
        assert abs(mu ** mp.mpf(1.25) * lam - mp.mpf("0.845")) < 0.002


def test_time_reversal_swaps_multipliers(diss_model, pert_fixed_point):
    fwd = diss_model.flow_orbit(pert_fixed_point)
    rev_model = time_reversed(diss_model)
    rev = rev_model.flow_orbit(pert_fixed_point)
    with bits(diss_model.precision_bits):
        assert abs(rev.multipliers.log_mu + fwd.multipliers.log_lambda) < mp.mpf(2) ** -200
        assert abs(rev.multipliers.log_lambda + fwd.multipliers.log_mu) < mp.mpf(2) ** -200
        assert abs(rev.period_T - fwd.period_T) < mp.mpf(2) ** -200
    assert rev.dissipation_class == "contracting"


def test_time_reversal_linear_closed_form(cos_model, cat_fixed_point):
    rev = time_reversed(cos_model)
    assert rev.base.linear == ((1, -1), (-1, 2))
    fwd_t = cos_model.flow_period(cat_fixed_point)
    rev_t = rev.flow_period(cat_fixed_point)
    assert fwd_t == rev_t


def test_height_zero_for_unit_roof(unit_model, cat_fixed_point):
    val, jets, tail = strong_manifold_height(unit_model, cat_fixed_point, "s", "0.2", 2)
    assert val == 0
    assert all(j == 0 for j in jets)


def test_height_zero_offset(cos_model, cat_fixed_point):
    val, _, _ = strong_manifold_height(cos_model, cat_fixed_point, "s", 0, 0)
    assert val == 0
    val_u, _, _ = strong_manifold_height(cos_model, cat_fixed_point, "u", 0, 0)
    assert val_u == 0


def test_height_matches_direct_series(cos_model, cat_fixed_point):
    """Reported h_s(xi) = -sum_k [r(f^k(x + xi e_s)) - r(f^k x)] for the
    linear base, against a direct 80-term evaluation."""
    with bits(192):
        xi = mp.mpf("0.15")
        val, _, tail = strong_manifold_height(cos_model, cat_fixed_point, "s", xi, 0)
        _, _, _, e_s = cos_model.base.eig_linear()
        pt = [xi * e_s[0], xi * e_s[1]]
        ref = [mp.mpf(0), mp.mpf(0)]
        acc = mp.mpf(0)
        for _ in range(80):
            acc += cos_model.roof_value(pt) - cos_model.roof_value(ref)
            pt = list(cos_model.base.apply_lift(pt))
            ref = list(cos_model.base.apply_lift(ref))
        assert abs(val - (-acc)) < mp.mpf(2) ** -120


def test_height_derivative_series(cos_model, cat_map):
    """dh_s/dxi(0) = -sum mu^k d_{e_s}(roof o f^k) at a period-2 point."""
    per2 = [o for o in enumerate_periodic_orbits(cat_map, 2) if o.period_N == 2][0]
    with bits(192):
        _, jets, _ = strong_manifold_height(cos_model, per2, "s", 0, 1)
        ll, lm, _, e_s = cos_model.base.eig_linear()
        mu = mp.e ** lm
        from anosovlab.torus_maps import orbit_cycle

        cyc = orbit_cycle(cos_model.base, per2, 192)
        acc = mp.mpf(0)
        pt = [mp.mpf(cyc[0][0].numerator) / cyc[0][0].denominator,
              mp.mpf(cyc[0][1].numerator) / cyc[0][1].denominator]
        for k in range(140):
            acc += mu ** k * cos_model.roof_dir_deriv(pt, e_s)
            pt = list(cos_model.base.apply_lift(pt))
        assert abs(jets[1] - (-acc)) < mp.mpf(2) ** -100


def test_height_tail_bound_doubling(cos_model, cat_fixed_point):
    sec = section_at(cos_model, cat_fixed_point)
    with bits(192):
        xi = mp.mpf("0.1")
        h1 = sec.height_s(xi)
        sec.m_terms = sec.m_terms * 2
        h2 = sec.height_s(xi)
        assert abs(h1 - h2) <= sec.tail_bound_s


def test_section_return_time_flat_on_axes(cos_model, cat_fixed_point):
    sec = section_at(cos_model, cat_fixed_point)
    with bits(192):
        t = mp.mpf("1.25")
        for xi in ("0.05", "-0.12"):
            assert abs(sec.return_time(mp.mpf(xi), 0) - t) < mp.mpf(2) ** -150
        for eta in ("0.21", "-0.3"):
            assert abs(sec.return_time(0, mp.mpf(eta)) - t) < mp.mpf(2) ** -150


def test_section_axis_contraction(cos_model, cat_fixed_point):
    sec = section_at(cos_model, cat_fixed_point)
    with bits(192):
        audit = sec.verify_axis_contraction(mp.mpf("0.1"), steps=20)
        mu = abs(sec.w_s.rho)
        for k in (4, 9, 14, 19):
            assert audit[k][0] < mu ** (k - 1)
            assert audit[k][1] < mu ** (k - 1)


def test_hitting_jets_unit_roof(unit_model, cat_fixed_point):
    sec = section_at(unit_model, cat_fixed_point)
    jets = hitting_time_jets(unit_model, sec, 3)
    assert all(m == 0 for m in jets.mixed)
    assert jets.d1_at_origin == 0 and jets.d2_at_origin == 0


def test_hitting_jets_closed_form(cos_model, cat_fixed_point):
    sec = section_at(cos_model, cat_fixed_point)
    jets = hitting_time_jets(cos_model, sec, 2)
    with bits(192):
        # separated heights leave only the roof's mixed directional derivative
        assert abs(jets.mixed[0] + mp.pi ** 2) < mp.mpf(2) ** -150
        assert jets.d1_at_origin == 0
        assert jets.d2_at_origin == 0
    assert jets.fd_discrepancy < 1e-20


def test_hitting_jets_flat_along_unstable_axis(cos_model, cat_fixed_point):
    sec = section_at(cos_model, cat_fixed_point)
    with bits(192):
        for eta in ("0.1", "0.37"):
            j = sec.return_time_jet(0, mp.mpf(eta), 0, 1)
            assert abs(j.partial(0, 1)) < mp.mpf(2) ** -150


def test_hitting_jets_gate():
    model = make_suspension(make_linear_map([[2, 1], [1, 1]]), unit_roof(), 64)
    fp = enumerate_periodic_orbits(model.base, 1)[0]
    sec = section_at(model, fp)
    with pytest.raises(ValueError, match="j_max"):
        hitting_time_jets(model, sec, 5)


def test_d1_series_matches_jets(cos_model, cat_fixed_point):
    sec = section_at(cos_model, cat_fixed_point)
    with bits(192):
        for eta in ("0.17", "-0.26"):
            a = sec.d1_return_time_on_unstable_axis(mp.mpf(eta))
            b = sec.return_time_jet(0, mp.mpf(eta), 1, 0).partial(1, 0)
            assert abs(a - b) < mp.mpf(2) ** -140


def test_model_json_roundtrip(diss_model):
    obj = json.loads(json.dumps(model_to_json(diss_model)))
    again = model_from_json(obj)
    assert again.base.linear == diss_model.base.linear
    assert again.roof == diss_model.roof
    assert again.precision_bits == diss_model.precision_bits


def test_reversed_model_json_roundtrip(diss_model, pert_fixed_point):
    rev = time_reversed(diss_model)
    again = model_from_json(json.loads(json.dumps(model_to_json(rev))))
    t1 = rev.flow_period(pert_fixed_point, 128)
    t2 = again.flow_period(pert_fixed_point, 128)
    with bits(128):
        assert abs(t1 - t2) < mp.mpf(2) ** -100


def test_roof_positivity_gate(cat_map):
    with pytest.raises(ValueError, match="roof not certified positive"):
        make_suspension(cat_map, Roof(c0=1, terms=(RoofTerm((1, 0), Fraction(11, 10), "cos"),)), 64)


@settings(max_examples=12, deadline=None)
@given(
    a=st.fractions(min_value=Fraction(-1, 4), max_value=Fraction(1, 4)),
    b=st.fractions(min_value=Fraction(-1, 4), max_value=Fraction(1, 4)),
)
def test_birkhoff_additivity_property(a, b):
    """Traversing a cycle twice doubles its Birkhoff sum exactly, for any
    admissible two-term roof."""
    cat = make_linear_map([[2, 1], [1, 1]])
    roof = Roof(c0=1, terms=(RoofTerm((1, 0), a, "cos"), RoofTerm((0, 1), b, "sin")))
    model = make_suspension(cat, roof, 128)
    per2 = [o for o in enumerate_periodic_orbits(cat, 2) if o.period_N == 2][0]
    from anosovlab.torus_maps import orbit_cycle

    cyc = orbit_cycle(cat, per2)
    with bits(128):
        assert model.birkhoff(cyc + cyc) == 2 * model.birkhoff(cyc)
