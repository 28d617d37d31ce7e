from fractions import Fraction

import mpmath as mp
import pytest

from anosovlab.compare import (
    OrbitCorrespondence,
    PairedOrbit,
    compare_eigendata,
    correspondence_to_csv,
    jacobian_match_test,
    match_orbits,
    period_match_test,
)
from anosovlab.mparith import bits
from anosovlab.suspension import Roof, RoofTerm, make_suspension, time_reversed


def test_self_comparison_exact_match(cos_model):
    corr = match_orbits(cos_model, cos_model, "same_base", n_max=3)
    rep = compare_eigendata(corr)
    assert rep.aggregate == "eigendata_match"
    assert rep.worst_match_deviation == 0.0
    assert rep.period_match and rep.jacobian_match
    assert rep.worst_period_deviation == 0.0


def test_reversal_swap_exact(diss_model):
    rev = time_reversed(diss_model)
    corr = match_orbits(diss_model, rev, "time_reversal", n_max=4)
    rep = compare_eigendata(corr)
    assert rep.aggregate == "eigendata_swap"
    assert rep.worst_swap_deviation == 0.0
    assert rep.srb_swap_signature
    ok, worst, witness = jacobian_match_test(corr)
    assert not ok and worst > 0.0 and witness is not None
    ok_p, worst_p, _ = period_match_test(corr)
    assert ok_p and worst_p == 0.0


def test_reversal_structural_matches_direct(cos_model, cat_map):
    """The exact reversal transform agrees with multipliers computed on the
    genuinely reversed (integer-inverse) model."""
    rev = time_reversed(cos_model)
    corr = match_orbits(cos_model, rev, "time_reversal", n_max=3)
    direct = {}
    from anosovlab.torus_maps import enumerate_periodic_orbits, orbit_multipliers

    for o in enumerate_periodic_orbits(rev.base, 3):
        m = orbit_multipliers(rev.base, o, 192)
        direct[frozenset((p[0], p[1]) for p in _cycle(rev.base, o))] = m
    fwd_orbits = {o.symbolic_id: o for o in enumerate_periodic_orbits(cos_model.base, 3)}
    with bits(192):
        for p in corr.pairs:
            o = fwd_orbits[p.orbit_id]
            key = frozenset((q[0], q[1]) for q in _cycle(cos_model.base, o))
            m = direct[key]
            assert abs(p.log_mu_y - m.log_mu) < mp.mpf(2) ** -180
            assert abs(p.log_lambda_y - m.log_lambda) < mp.mpf(2) ** -180


def _cycle(base, o):
    from anosovlab.torus_maps import orbit_cycle

    return orbit_cycle(base, o)


def test_reversal_involution(cos_model):
    """Classifying (X, reversed X) and (reversed X, X) gives the same swap
    verdict with identical worst deviation."""
    rev = time_reversed(cos_model)
    a = compare_eigendata(match_orbits(cos_model, rev, "time_reversal", n_max=3))
    b = compare_eigendata(match_orbits(rev, cos_model, "time_reversal", n_max=3))
    assert a.worst_swap_deviation == b.worst_swap_deviation == 0.0
    # the conservative model matches and swaps simultaneously
    assert {f for _, f in a.per_orbit} == {"both"}
    assert {f for _, f in b.per_orbit} == {"both"}


def test_same_base_different_roofs(cat_map, cos_model, unit_model):
    corr = match_orbits(cos_model, unit_model, "same_base", n_max=3)
    rep = compare_eigendata(corr)
    assert rep.aggregate == "eigendata_match"
    assert not rep.period_match
    ok, worst, witness = period_match_test(corr)
    assert not ok
    # the fixed point already witnesses: 1.25 vs 1
    assert worst >= 0.25 - 1e-30


def test_jacobian_flip_sign(diss_model, pert_fixed_point):
    rev = time_reversed(diss_model)
    corr = match_orbits(diss_model, rev, "time_reversal", n_max=1)
    p = corr.pairs[0]
    with bits(256):
        assert abs(p.log_jac_x + p.log_jac_y) == 0  # exact sign flip
        assert float(p.log_jac_x) > 0


def test_swap_plus_jacobian_match_forces_conservativity(cos_model):
    """On data: when both the swap classification and the Jacobian match hold
    at tolerance, every orbit Jacobian is within 2 tol of one."""
    rev = time_reversed(cos_model)
    corr = match_orbits(cos_model, rev, "time_reversal", n_max=3)
    rep = compare_eigendata(corr)
    ok, worst, _ = jacobian_match_test(corr)
    assert ok and rep.worst_swap_deviation < rep.tolerance
    with bits(192):
        for p in corr.pairs:
            assert abs(float(p.log_jac_x)) < 2 * rep.tolerance


def test_mixed_report_flags_breakage(diss_model):
    """A deliberately inconsistent correspondence reports mixed with a note."""
    rev = time_reversed(diss_model)
    corr = match_orbits(diss_model, rev, "time_reversal", n_max=2)
    pairs = list(corr.pairs)
    good = pairs[0]
    broken = PairedOrbit(
        orbit_id="broken",
        t_x=good.t_x,
        t_y=good.t_y,
        log_mu_x=good.log_mu_x,
        log_mu_y=good.log_mu_x,  # match instead of swap
        log_lambda_x=good.log_lambda_x,
        log_lambda_y=good.log_lambda_x,
    )
    bad = OrbitCorrespondence(
        model_x=corr.model_x, model_y=corr.model_y, method=corr.method,
        pairs=tuple(pairs + [broken]), n_max=corr.n_max,
    )
    rep = compare_eigendata(bad)
    assert rep.aggregate == "mixed"
    assert "mixed" in rep.note


def test_unknown_method_rejected(cos_model):
    with pytest.raises(ValueError, match="unknown pairing method"):
        match_orbits(cos_model, cos_model, "conjugacy_search")


def test_correspondence_csv(cos_model):
    corr = match_orbits(cos_model, cos_model, "same_base", n_max=2)
    text = correspondence_to_csv(corr)
    assert text.splitlines()[0] == "id,T_X,T_Y,mu_X,mu_Y,lambda_X,lambda_Y"
    assert len(text.splitlines()) == len(corr.pairs) + 1
