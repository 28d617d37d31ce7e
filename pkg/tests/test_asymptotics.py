import math
from fractions import Fraction

import mpmath as mp
import pytest

from anosovlab.asymptotics import (
    fit_expansion,
    gamma_recovery,
    recovery_dichotomy_scan,
    theta_ceiling,
)
from anosovlab.mparith import bits
from anosovlab.shadowing import ShadowSeries, excursion_time, find_homoclinic, shadow_series
from anosovlab.suspension import Roof, RoofTerm, make_suspension


def _synthetic_series(hom, anchor, coeff_fn, n1=10, n2=40, pb=256):
    """ShadowSeries with fabricated periods T_n = n T + T' + coeff_fn(n)."""
    with bits(pb):
        t = anchor.period_T
        tp = mp.mpf("0.125")
        n_values = list(range(n1, n2 + 1))
        periods = [n * t + tp + coeff_fn(n) for n in n_values]
    return (
        ShadowSeries(hom=hom, n_values=n_values, periods=periods, orbits=[], audit_distances=[]),
        tp,
    )


def test_fit_pure_exponential_synthetic(diss_hom, diss_anchor):
    with bits(256):
        mu = mp.e ** diss_anchor.multipliers.log_mu
        zeta = mp.mpf("-3.25")
        ser, tp = _synthetic_series(diss_hom, diss_anchor, lambda n: zeta * mu ** n)
    fit = fit_expansion(ser, diss_anchor, t_prime=tp)
    assert fit.model_kind == "pure_exponential"
    assert abs(fit.rate - float(diss_anchor.multipliers.log_mu)) < 1e-9
    with bits(256):
        assert abs(fit.zeta_fit - zeta) < mp.mpf("1e-20")


def test_fit_n_times_exponential_synthetic(diss_hom, diss_anchor):
    with bits(256):
        mu = mp.e ** diss_anchor.multipliers.log_mu
        ser, tp = _synthetic_series(
            diss_hom, diss_anchor, lambda n: (mp.mpf(2) * n + mp.mpf("0.3")) * mu ** n
        )
    fit = fit_expansion(ser, diss_anchor, t_prime=tp)
    assert fit.model_kind == "n_times_exponential"
    assert abs(fit.logn_coeff - 1.0) <= 0.25
    assert fit.rms_pure >= 10 * fit.rms_selected


def test_fit_zero_synthetic(diss_hom, diss_anchor):
    ser, tp = _synthetic_series(diss_hom, diss_anchor, lambda n: mp.mpf(0))
    fit = fit_expansion(ser, diss_anchor, t_prime=tp)
    assert fit.model_kind == "zero"
    assert fit.zeta_fit == 0


def test_fit_two_exponential_peeling(diss_hom, diss_anchor):
    with bits(256):
        mu = mp.e ** diss_anchor.multipliers.log_mu
        lam = mp.e ** diss_anchor.multipliers.log_lambda
        zeta, c2 = mp.mpf("-3.25"), mp.mpf("2.5")
        ser, tp = _synthetic_series(
            diss_hom, diss_anchor, lambda n: zeta * mu ** n + c2 * lam ** (-n), n2=44
        )
    fit = fit_expansion(ser, diss_anchor, t_prime=tp, allow_two_exponential=True)
    assert fit.model_kind == "two_exponential"
    with bits(256):
        assert abs(fit.zeta_fit - zeta) < mp.mpf("1e-4")
        assert abs(fit.second_coeff - c2) < mp.mpf("1e-2")
    assert abs(fit.second_rate - float(-diss_anchor.multipliers.log_lambda)) < 0.05


def test_tprime_back_substitution(diss_model, diss_hom, diss_anchor, diss_series, diss_tprime):
    """Back-substituted T' agrees with the excursion series value up to the
    fit-window remainder |zeta| mu^{n_med} (theta/mu)^{n_top}; when T' is
    supplied (the default pipeline), the agreement is exact by construction
    and the 2^{-pb/2} dual-path guarantee lives in excursion_time itself."""
    fit = fit_expansion(diss_series, diss_anchor)
    with bits(256):
        assert abs(fit.t_prime - diss_tprime) < mp.mpf("1e-15")
    fit2 = fit_expansion(diss_series, diss_anchor, t_prime=diss_tprime)
    assert fit2.t_prime == diss_tprime


def test_rate_invariant_under_roof_scaling(diss_hom, diss_anchor):
    """Scaling the roof by c scales residuals by c and leaves the rate
    unchanged (multipliers are roof-independent)."""
    with bits(256):
        mu = mp.e ** diss_anchor.multipliers.log_mu
        base = lambda n: mp.mpf("-3.25") * mu ** n
        ser1, tp1 = _synthetic_series(diss_hom, diss_anchor, base)
        ser2 = ShadowSeries(
            hom=diss_hom,
            n_values=ser1.n_values,
            periods=[2 * t for t in ser1.periods],
            orbits=[],
            audit_distances=[],
        )
    f1 = fit_expansion(ser1, diss_anchor, t_prime=tp1)
    # the doubled series is the series of the doubled roof: T, T' both double
    import dataclasses

    with bits(256):
        anchor2 = dataclasses.replace(diss_anchor, period_T=2 * diss_anchor.period_T)
        tp2 = 2 * tp1
    f2 = fit_expansion(ser2, anchor2, t_prime=tp2)
    assert abs(f1.rate - f2.rate) < 1e-12
    with bits(256):
        assert abs(f2.zeta_fit - 2 * f1.zeta_fit) < mp.mpf("1e-18")


def test_gamma_recovery_true(diss_model, diss_series, diss_anchor, diss_tprime):
    rec = gamma_recovery(diss_model, diss_series, diss_anchor, t_prime=diss_tprime)
    assert rec.recovered
    assert abs(rec.gamma_estimate - rec.reference_log_mu) <= rec.tolerance
    assert rec.theta_ceiling < rec.reference_log_mu


def test_gamma_recovery_zero_case(unit_model, unit_anchor):
    hom = find_homoclinic(unit_model, unit_anchor, (1, 1))
    ser = shadow_series(unit_model, hom, (10, 24))
    rec = gamma_recovery(unit_model, ser, unit_anchor)
    assert not rec.recovered
    assert rec.gamma_estimate == float("-inf")


def test_theta_ceiling_formula(diss_anchor):
    lm = float(diss_anchor.multipliers.log_mu)
    ll = float(diss_anchor.multipliers.log_lambda)
    assert theta_ceiling(diss_anchor) == max(1.5 * lm, 2 * ll * lm / (ll - lm))


def test_fit_requires_enough_points(diss_hom, diss_anchor):
    ser, tp = _synthetic_series(diss_hom, diss_anchor, lambda n: mp.mpf(0), n1=10, n2=14)
    with pytest.raises(ValueError, match="at least 8"):
        fit_expansion(ser, diss_anchor, t_prime=tp)


def test_dichotomy_scan_not_recoverable(unit_model, unit_anchor):
    rep = recovery_dichotomy_scan(
        unit_model, unit_anchor, [(1, 1), (1, 0), (0, 1)], n_range=(10, 20)
    )
    assert not rep.recoverable
    assert rep.zeta_scan is not None
    assert all(v == 0 for v in rep.zeta_scan.values())


def test_dichotomy_scan_needs_three_branches(unit_model, unit_anchor):
    with pytest.raises(ValueError, match="3 homoclinic branches"):
        recovery_dichotomy_scan(unit_model, unit_anchor, [(1, 1)])
