"""Fitting the asymptotic expansions of shadowing periods.

The period of the n-th shadowing orbit behaves like

    T_n = n T + T' + zeta * mu^n + O(theta^n)          (generic dissipative)
    T_n = n T + T' + A n mu^n + B mu^n + o(mu^n)       (volume preserving)
    T_n = n T + T' + zeta mu^n - zeta' lambda^-n + ...  (mildly dissipative)

First differences D_n = T_{n+1} - T_n - T eliminate T' exactly; the fitter
then classifies the remainder by log-linear regression with an optional
log n regressor, and recovers T' by back-substitution, cross-checked against
the independent excursion-time series. The recovery functional evaluates
(1/n) log |T_n - nT - T'| at the top of the window and compares it against
log mu of the anchor; below-floor residuals report -inf and a gap to the
remainder-rate ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp

from .mparith import bits, to_mpf
from .shadowing import HomoclinicDatum, ShadowSeries, excursion_time, shadow_series
from .suspension import FlowModel, FlowPeriodicOrbit

ZERO_FLOOR_SHIFT = 48  # residual floor is 2^(-precision_bits + this)
LOGN_COEFF_TOL = 0.25
RMS_IMPROVEMENT = 10.0


@dataclass(frozen=True)
class AsymptoticFit:
    model_kind: str  # zero | pure_exponential | n_times_exponential | two_exponential
    t_prime: object
    zeta_fit: object
    rate: float | None
    rate_reference: float
    logn_coeff: float | None
    remainder_rate_bound: float
    rms_selected: float
    rms_pure: float
    second_rate: float | None = None
    second_coeff: object | None = None
    diagnostics: dict | None = None


@dataclass(frozen=True)
class RecoveryVerdict:
    gamma_estimate: float
    recovered: bool
    reference_log_mu: float
    theta_ceiling: float
    gap_to_ceiling: float
    tolerance: float


def _ols(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    b = sxy / sxx
    a = my - b * mx
    resid = [y - (a + b * x) for x, y in zip(xs, ys)]
    rms = math.sqrt(sum(r * r for r in resid) / n)
    return a, b, rms


def _ols2(xs, zs, ys):
    """Least squares for y ~ a + b x + c z (tiny normal equations)."""
    n = len(xs)
    import numpy as np

    a_mat = np.column_stack([np.ones(n), np.array(xs), np.array(zs)])
    coef, *_ = np.linalg.lstsq(a_mat, np.array(ys), rcond=None)
    resid = np.array(ys) - a_mat @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    return coef[0], coef[1], coef[2], rms


def theta_ceiling(anchor: FlowPeriodicOrbit) -> float:
    """Upper bound for the remainder rate: max(mu^{3/2}, mu^{2 log lambda /
    (log lambda - log mu)}), reported as a log."""
    lm = float(anchor.multipliers.log_mu)
    ll = float(anchor.multipliers.log_lambda)
    return max(1.5 * lm, 2.0 * ll * lm / (ll - lm))


def fit_expansion(series: ShadowSeries, anchor: FlowPeriodicOrbit, t_prime=None, allow_two_exponential: bool = False) -> AsymptoticFit:
    """Classify and fit the period expansion of a shadow series."""
    if len(series.n_values) < 8:
        raise ValueError("need at least 8 usable n values")
    pb = series.hom.precision_bits
    with bits(pb):
        t = anchor.period_T
        d = [
            series.periods[i + 1] - series.periods[i] - t
            for i in range(len(series.periods) - 1)
        ]
        ns = series.n_values[:-1]
        floor = mp.mpf(2) ** (-pb + ZERO_FLOOR_SHIFT)
        log_mu_ref = float(anchor.multipliers.log_mu)
        if all(abs(x) < floor for x in d):
            tp = t_prime if t_prime is not None else _tprime_back(series, anchor, None)
            return AsymptoticFit(
                model_kind="zero",
                t_prime=tp,
                zeta_fit=mp.mpf(0),
                rate=None,
                rate_reference=log_mu_ref,
                logn_coeff=None,
                remainder_rate_bound=theta_ceiling(anchor),
                rms_selected=0.0,
                rms_pure=0.0,
                diagnostics={"floor": float(floor)},
            )
        usable = [(n, x) for n, x in zip(ns, d) if abs(x) > floor]
        if len(usable) < 8:
            raise ValueError("too few residuals above the zero floor; extend n_range")
        xs = [float(n) for n, _ in usable]
        ys = [float(mp.log(abs(x))) for _, x in usable]
        zs = [math.log(x) for x in xs]
        a1, b1, rms1 = _ols(xs, ys)
        a2, b2, c2, rms2 = _ols2(xs, zs, ys)
        remainder_floor = float(mp.log(floor)) / max(xs)
        select_ntimes = abs(c2 - 1.0) <= LOGN_COEFF_TOL and rms1 >= RMS_IMPROVEMENT * max(rms2, 1e-300)
        if select_ntimes:
            kind = "n_times_exponential"
            rate = b2
            rms_sel = rms2
            logn_coeff = c2
        else:
            kind = "pure_exponential"
            rate = b1
            rms_sel = rms1
            logn_coeff = c2
        if not (remainder_floor < rate < 0):
            raise ValueError(
                f"fitted rate {rate:.4f} indistinguishable from the remainder "
                "floor; extend n_range or raise precision"
            )
        mu_ref = mp.e ** anchor.multipliers.log_mu
        shape = (
            (lambda n: n * mu_ref ** n)
            if kind == "n_times_exponential"
            else (lambda n: mu_ref ** n)
        )
        # signed coefficient from differences (no T' needed)
        zeta_vals = []
        for n, x in usable[len(usable) // 2 :]:
            denom = shape(n + 1) - shape(n)
            zeta_vals.append(x / denom)
        zeta_fit = _median(zeta_vals)
        second_rate = None
        second_coeff = None
        if allow_two_exponential and anchor.mild_dissipation is not None and kind == "pure_exponential":
            kind, second_rate, second_coeff, zeta_fit, rate, rms_sel = _peel_two_exp(
                usable, anchor, zeta_fit
            )
        tp = t_prime if t_prime is not None else _tprime_back(series, anchor, (zeta_fit, shape))
        return AsymptoticFit(
            model_kind=kind,
            t_prime=tp,
            zeta_fit=zeta_fit,
            rate=rate,
            rate_reference=log_mu_ref,
            logn_coeff=logn_coeff,
            remainder_rate_bound=theta_ceiling(anchor),
            rms_selected=rms_sel,
            rms_pure=rms1,
            second_rate=second_rate,
            second_coeff=second_coeff,
            diagnostics={
                "n_window": (series.n_values[0], series.n_values[-1]),
                "floor": float(floor),
                "rms_with_logn": rms2,
                "logn_coeff": c2,
            },
        )


def _median(vals):
    vs = sorted(vals)
    k = len(vs) // 2
    if len(vs) % 2:
        return vs[k]
    return (vs[k - 1] + vs[k]) / 2


def _tprime_back(series: ShadowSeries, anchor: FlowPeriodicOrbit, fit):
    """T' by back-substitution over the top half of the window."""
    t = anchor.period_T
    vals = []
    half = len(series.n_values) // 2
    for n, tn in list(zip(series.n_values, series.periods))[half:]:
        if fit is None:
            vals.append(tn - n * t)
        else:
            zeta, shape = fit
            vals.append(tn - n * t - zeta * shape(n))
    return _median(vals)


def _peel_two_exp(usable, anchor: FlowPeriodicOrbit, zeta_seed):
    """Sequential peeling: fit the mu^n term on large n, subtract, fit the
    remaining lambda^{-n} term; alternate until the two coefficients settle.
    Refuses when the two rates are too close to separate."""
    log_mu = float(anchor.multipliers.log_mu)
    log_lam = float(anchor.multipliers.log_lambda)
    if abs(log_mu) / log_lam < 1.05 and log_lam / abs(log_mu) < 1.05:
        raise ValueError("mu and 1/lambda rates too close for stable peeling")
    mu = mp.e ** anchor.multipliers.log_mu
    lam = mp.e ** anchor.multipliers.log_lambda
    top = usable[len(usable) * 2 // 3 :]
    low = usable[: max(len(usable) // 3, 4)]
    zeta1 = mp.mpf(0)
    second = mp.mpf(0)
    for _ in range(60):
        zeta_vals = [
            (x - second * (lam ** (-(n + 1)) - lam ** (-n))) / (mu ** (n + 1) - mu ** n)
            for n, x in top
        ]
        zeta_new = _median(zeta_vals)
        coeff_vals = [
            (x - zeta_new * (mu ** (n + 1) - mu ** n)) / (lam ** (-(n + 1)) - lam ** (-n))
            for n, x in low
        ]
        second_new = _median(coeff_vals)
        done = abs(zeta_new - zeta1) <= abs(zeta_new) * mp.mpf("1e-30") and abs(
            second_new - second
        ) <= (abs(second_new) + mp.mpf("1e-40")) * mp.mpf("1e-30")
        zeta1, second = zeta_new, second_new
        if done:
            break
    peeled = [(n, x - zeta1 * (mu ** (n + 1) - mu ** n)) for n, x in usable]
    ok = [(n, r) for n, r in peeled if abs(r) > 0]
    xs = [float(n) for n, _ in ok]
    ys = [float(mp.log(abs(r))) for _, r in ok]
    _, b, rms = _ols(xs, ys)
    return "two_exponential", b, second, zeta1, float(mp.log(mu)), rms


def gamma_recovery(model: FlowModel, series: ShadowSeries, anchor: FlowPeriodicOrbit, t_prime=None, tolerance: float | None = None) -> RecoveryVerdict:
    """limsup (1/n) log |T_n - nT - T'| at the top of the window, judged
    against log mu of the anchor."""
    pb = series.hom.precision_bits
    with bits(pb):
        tp = t_prime if t_prime is not None else excursion_time(model, series.hom)
        t = anchor.period_T
        n2 = series.n_values[-1]
        r = series.periods[-1] - n2 * t - tp
        floor = mp.mpf(2) ** (-pb + ZERO_FLOOR_SHIFT)
        log_mu = float(anchor.multipliers.log_mu)
        ceiling = theta_ceiling(anchor)
        tol = tolerance if tolerance is not None else 0.1 * abs(log_mu) + 2.0 / n2
        if abs(r) < floor:
            gamma = float("-inf")
            return RecoveryVerdict(
                gamma_estimate=gamma,
                recovered=False,
                reference_log_mu=log_mu,
                theta_ceiling=ceiling,
                gap_to_ceiling=float("inf"),
                tolerance=tol,
            )
        gamma = float(mp.log(abs(r)) / n2)
        recovered = abs(gamma - log_mu) <= tol
        return RecoveryVerdict(
            gamma_estimate=gamma,
            recovered=recovered,
            reference_log_mu=log_mu,
            theta_ceiling=ceiling,
            gap_to_ceiling=ceiling - gamma,
            tolerance=tol,
        )


@dataclass(frozen=True)
class DichotomyReport:
    verdicts: dict  # lattice class -> RecoveryVerdict
    recoverable: bool
    zeta_scan: dict | None  # lattice class -> float |zeta_hat| (cross-reference)


def recovery_dichotomy_scan(model: FlowModel, anchor: FlowPeriodicOrbit, lattice_classes, n_range=(10, 40)) -> DichotomyReport:
    """Per-branch recovery verdicts; when no branch recovers, cross-reference
    the obstruction scan (expected at floor in that horn of the dichotomy)."""
    from .shadowing import find_homoclinic
    from .suspension import section_at

    if len(lattice_classes) < 3:
        raise ValueError("need at least 3 homoclinic branches")
    sec = section_at(model, anchor.base_orbit)
    verdicts = {}
    for m in lattice_classes:
        hom = find_homoclinic(model, anchor, m, section=sec)
        ser = shadow_series(model, hom, n_range)
        verdicts[tuple(m)] = gamma_recovery(model, ser, anchor)
    recoverable = any(v.recovered for v in verdicts.values())
    zeta_scan = None
    if not recoverable:
        from .templates import zeta_hat

        expanding = float(anchor.multipliers.log_jacobian) > 0
        zeta_scan = {}
        for m in lattice_classes:
            hom = find_homoclinic(model, anchor, m, section=sec)
            ob = zeta_hat(model, hom, truncation=None if expanding else 24)
            zeta_scan[tuple(m)] = abs(float(ob.zeta_hat))
    return DichotomyReport(verdicts=verdicts, recoverable=recoverable, zeta_scan=zeta_scan)


def fit_report_json(fit: AsymptoticFit) -> dict:
    return {
        "model_kind": fit.model_kind,
        "T_prime": mp.nstr(to_mpf(fit.t_prime), 40) if fit.t_prime is not None else None,
        "zeta_fit": mp.nstr(to_mpf(fit.zeta_fit), 30),
        "rate": fit.rate,
        "rate_reference": fit.rate_reference,
        "logn_coeff": fit.logn_coeff,
        "remainder_rate_bound": fit.remainder_rate_bound,
        "rms_selected": fit.rms_selected,
        "rms_pure": fit.rms_pure,
        "second_rate": fit.second_rate,
        "diagnostics": fit.diagnostics,
    }
