import mpmath as mp
import pytest

from anosovlab.mparith import bits
from anosovlab.shadowing import find_homoclinic
from anosovlab.suspension import section_at, time_reversed
from anosovlab.templates import (
    c1_obstruction_scan,
    stable_template,
    unstable_template,
    zeta_hat,
)


@pytest.fixture(scope="module")
def cos_section(cos_model, cat_fixed_point):
    return section_at(cos_model, cat_fixed_point)


@pytest.fixture(scope="module")
def diss_model_128(diss_model):
    """Lower-precision clone for verdict-level scans (4x faster)."""
    import dataclasses

    return dataclasses.replace(diss_model, precision_bits=128)


@pytest.fixture(scope="module")
def diss_anchor_128(diss_model_128, pert_fixed_point):
    return diss_model_128.flow_orbit(pert_fixed_point)


@pytest.fixture(scope="module")
def diss_hom_128(diss_model_128, diss_anchor_128):
    return find_homoclinic(diss_model_128, diss_anchor_128, (1, 1))


def test_templates_vanish_for_unit_roof(unit_model, cat_fixed_point):
    sec = section_at(unit_model, cat_fixed_point)
    with bits(192):
        for eta in ("0.2", "-0.4"):
            assert stable_template(unit_model, sec, mp.mpf(eta)).value == 0
        for xi in ("0.1", "-0.15"):
            assert unstable_template(unit_model, sec, mp.mpf(xi)).value == 0


def test_templates_vanish_at_anchor(cos_model, cos_section):
    with bits(192):
        assert abs(stable_template(cos_model, cos_section, mp.mpf(0)).value) < mp.mpf(2) ** -150
        assert abs(unstable_template(cos_model, cos_section, mp.mpf(0)).value) < mp.mpf(2) ** -150


@pytest.mark.parametrize("eta", ["0.11", "-0.3", "0.25", "0.07", "-0.18"])
def test_template_invariance_identity(cos_model, cos_section, eta):
    """-d1 tau(0, eta) = mu T_s(lambda eta) - T_s(eta): the hitting-time
    first jet is the twisted template increment."""
    with bits(192):
        sec = cos_section
        mu = abs(sec.w_s.rho)
        lam = abs(sec.w_u.rho)
        eta = mp.mpf(eta)
        lhs = -sec.d1_return_time_on_unstable_axis(eta)
        rhs = mu * stable_template(cos_model, sec, lam * eta).value - stable_template(
            cos_model, sec, eta
        ).value
        assert abs(lhs - rhs) < mp.mpf(2) ** -140


def test_template_two_step_cocycle(cos_model, cos_section):
    """The two-step version of the same identity: the measured first-jet
    coefficients satisfy the twisted cocycle relation along the anchor."""
    with bits(192):
        sec = cos_section
        mu = abs(sec.w_s.rho)
        lam = abs(sec.w_u.rho)
        eta = mp.mpf("0.09")
        lhs = -(
            sec.d1_return_time_on_unstable_axis(eta)
            + mu * sec.d1_return_time_on_unstable_axis(lam * eta)
        )
        rhs = mu ** 2 * stable_template(cos_model, sec, lam ** 2 * eta).value - stable_template(
            cos_model, sec, eta
        ).value
        assert abs(lhs - rhs) < mp.mpf(2) ** -138


def test_template_reversal_consistency(cos_model, cat_fixed_point, cos_section):
    """The unstable template equals the reversed model's stable template up
    to the time-reversal sign."""
    rev = time_reversed(cos_model)
    rev_sec = section_at(rev, cat_fixed_point)
    with bits(192):
        for xi in ("0.12", "-0.2", "0.3"):
            xi = mp.mpf(xi)
            a = unstable_template(cos_model, cos_section, xi).value
            b = stable_template(rev, rev_sec, xi).value
            assert abs(a + b) < mp.mpf(2) ** -130


def test_zeta_hat_unit_roof_exact_zero(unit_model, unit_anchor):
    hom = find_homoclinic(unit_model, unit_anchor, (1, 1))
    ob = zeta_hat(unit_model, hom, truncation=24)
    assert ob.zeta_hat == 0
    assert ob.tail_bound is None


def test_zeta_hat_requires_expanding_anchor(cos_model, cos_anchor):
    hom = find_homoclinic(cos_model, cos_anchor, (1, 1))
    with pytest.raises(ValueError, match="not volume expanding"):
        zeta_hat(cos_model, hom)


def test_zeta_hat_nonzero_dissipative(diss_model, diss_hom):
    ob = zeta_hat(diss_model, diss_hom)
    assert ob.tail_bound is not None
    assert abs(ob.zeta_hat) > 1e6 * float(ob.tail_bound)


def test_zeta_hat_truncation_consistency(diss_model, diss_hom, diss_anchor):
    """The three-zone value agrees with long plain truncations within the
    stored tail bound plus the truncation's own geometric tail. Needs the
    full 256-bit model: the noise floor of the plain truncation amplifies
    like mu^{-l} and 120 terms only stay clean above ~200 bits."""
    full = zeta_hat(diss_model, diss_hom)
    with bits(256):
        jac = mp.e ** diss_anchor.multipliers.log_jacobian
        for trunc in (60, 120):
            t = zeta_hat(diss_model, diss_hom, truncation=trunc)
            # remaining tail of the truncated sum, ratio 1/jac per term
            term_scale = abs(mp.mpf(t.term_audit[-1])) if t.term_audit else mp.mpf(1)
            geo = abs(full.zeta_hat - t.zeta_hat)
            bound = (
                abs(mp.mpf(full.series_part)) * jac ** (-trunc) / (1 - 1 / jac) * 4
                + mp.mpf(full.tail_bound) * 10
            )
            assert geo < bound


def test_zeta_hat_geometric_domination(diss_model_128, diss_hom_128, diss_anchor_128):
    """|terms| are dominated by a geometric series with ratio 1/(mu lambda)."""
    diss_anchor = diss_anchor_128
    ob = zeta_hat(diss_model_128, diss_hom_128)
    with bits(128):
        jac = float(mp.e ** diss_anchor.multipliers.log_jacobian)
        terms = [abs(t) for t in ob.term_audit]
        c = max(terms[i] * jac ** (i + 1) for i in range(len(terms)))
        for i, t in enumerate(terms):
            assert t <= c * (1 / jac) ** (i + 1) * 1.0000001


def test_zeta_hat_cross_section_sign_invariance(diss_model_128, diss_anchor_128):
    diss_model, diss_anchor = diss_model_128, diss_anchor_128
    """Adding a cross term delta*xi*eta to the section height changes the
    chart, not the sign or zero-set of the obstruction."""
    from fractions import Fraction

    base_sec = section_at(diss_model, diss_anchor.base_orbit)
    twisted = section_at(diss_model, diss_anchor.base_orbit, cross_coeff=mp.mpf("0.02"))
    a = zeta_hat(diss_model, find_homoclinic(diss_model, diss_anchor, (1, 1), section=base_sec))
    b = zeta_hat(diss_model, find_homoclinic(diss_model, diss_anchor, (1, 1), section=twisted))
    assert mp.sign(a.zeta_hat) == mp.sign(b.zeta_hat)
    assert abs(b.zeta_hat) > 1e6 * float(b.tail_bound)


def test_obstruction_scan_verdicts(diss_model_128, diss_anchor_128, unit_model, unit_anchor):
    scan = c1_obstruction_scan(diss_model_128, diss_anchor_128, eta_max=2.0, class_range=1)
    assert scan.verdict == "obstructed"
    assert len(scan.entries) >= 3
    zero_scan = c1_obstruction_scan(unit_model, unit_anchor, eta_max=2.0, class_range=1, truncation=24)
    assert zero_scan.verdict == "unobstructed at scale"


def test_obstruction_scan_refinement_stable(diss_model_128, diss_anchor_128):
    a = c1_obstruction_scan(diss_model_128, diss_anchor_128, eta_max=1.5, class_range=1)
    b = c1_obstruction_scan(diss_model_128, diss_anchor_128, eta_max=3.0, class_range=1)
    assert a.verdict == b.verdict == "obstructed"
