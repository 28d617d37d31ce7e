"""Eigendata and period comparison between conjugate flow models.

A correspondence pairs every orbit of one model with an orbit of the other:
structurally (same base map, Newton continuation sharing seed lineage, or
time reversal). Comparisons then evaluate exactly the periodic-orbit
functionals that decide rigidity questions: multiplier match, the
SRB-swap signature (stable of one against inverse unstable of the other),
Jacobian match, and period match. The four-way classification per orbit is
aggregated, and a disagreeing mixture is reported as such — a mixed verdict
signals a broken correspondence or mis-set tolerance, not mathematics.

Time-reversal pairs are filled by the exact algebra (periods reused,
log-multipliers negated and swapped), so reversal comparisons carry exactly
zero floating-point deviation; the structural transform itself is covered by
tests against directly computed reversed models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp

from .mparith import bits, to_mpf
from .suspension import FlowModel
from .torus_maps import enumerate_periodic_orbits, orbit_multipliers


@dataclass(frozen=True)
class PairedOrbit:
    orbit_id: str
    t_x: object
    t_y: object
    log_mu_x: object
    log_mu_y: object
    log_lambda_x: object
    log_lambda_y: object

    @property
    def log_jac_x(self):
        return self.log_mu_x + self.log_lambda_x

    @property
    def log_jac_y(self):
        return self.log_mu_y + self.log_lambda_y


@dataclass(frozen=True)
class OrbitCorrespondence:
    model_x: FlowModel
    model_y: FlowModel
    method: str  # same_base | continuation | time_reversal
    pairs: tuple
    n_max: int


@dataclass(frozen=True)
class ComparisonReport:
    aggregate: str  # eigendata_match | eigendata_swap | mixed | none
    per_orbit: tuple  # (id, flag) with flag in match/swap/both/neither
    jacobian_match: bool
    period_match: bool
    worst_match_deviation: float
    worst_swap_deviation: float
    worst_jacobian_deviation: float
    worst_period_deviation: float
    srb_swap_signature: bool
    tolerance: float
    note: str = ""


def _orbit_data(model: FlowModel, n_max: int):
    orbits = enumerate_periodic_orbits(model.base, n_max)
    data = {}
    pb = model.precision_bits
    for o in orbits:
        mults = orbit_multipliers(model.base, o, pb)
        data[o.symbolic_id] = (
            model.flow_period(o),
            mults.log_mu,
            mults.log_lambda,
        )
    return data


def match_orbits(model_x: FlowModel, model_y: FlowModel, method: str, n_max: int = 5) -> OrbitCorrespondence:
    """Complete orbit pairing keyed by symbolic id.

    same_base: both models share the base map (roofs may differ).
    continuation: bases share the linear part and seed lineage (the ids are
    the continuation keys).
    time_reversal: Y data is derived from X by the exact reversal transform
    (same periods; log-multipliers negated and swapped).
    """
    if method not in ("same_base", "continuation", "time_reversal"):
        raise ValueError(f"unknown pairing method {method}")
    data_x = _orbit_data(model_x, n_max)
    pairs = []
    if method == "time_reversal":
        # negation must happen at (or above) the stored precision: mpmath
        # rounds on negation, which would break the exact-zero swap algebra
        with bits(model_x.precision_bits + 16):
            for oid, (t, lm, ll) in sorted(data_x.items()):
                pairs.append(
                    PairedOrbit(
                        orbit_id=oid,
                        t_x=t,
                        t_y=t,
                        log_mu_x=lm,
                        log_mu_y=-ll,
                        log_lambda_x=ll,
                        log_lambda_y=-lm,
                    )
                )
        return OrbitCorrespondence(model_x, model_y, method, tuple(pairs), n_max)
    if method == "continuation" and model_x.base.linear != model_y.base.linear:
        raise ValueError("continuation pairing requires a shared linear part")
    if method == "same_base" and model_x.base is not model_y.base and model_x.base != model_y.base:
        raise ValueError("same_base pairing requires the identical base map")
    data_y = _orbit_data(model_y, n_max)
    for oid, (t, lm, ll) in sorted(data_x.items()):
        if oid not in data_y:
            raise ValueError(f"orbit {oid} has no partner in the second model")
        ty, lmy, lly = data_y[oid]
        pairs.append(
            PairedOrbit(
                orbit_id=oid, t_x=t, t_y=ty,
                log_mu_x=lm, log_mu_y=lmy,
                log_lambda_x=ll, log_lambda_y=lly,
            )
        )
    return OrbitCorrespondence(model_x, model_y, method, tuple(pairs), n_max)


def _default_tolerance(corr: OrbitCorrespondence) -> float:
    return 1e-8 if corr.method == "continuation" else 1e-20


def compare_eigendata(corr: OrbitCorrespondence, tol: float | None = None) -> ComparisonReport:
    """Per-orbit match/swap classification and the aggregate verdict."""
    tol_v = tol if tol is not None else _default_tolerance(corr)
    flags = []
    worst_match = 0.0
    worst_swap = 0.0
    worst_jac = 0.0
    worst_per = 0.0
    with bits(corr.model_x.precision_bits + 16):
        for p in corr.pairs:
            dm = max(abs(float(p.log_mu_x - p.log_mu_y)), abs(float(p.log_lambda_x - p.log_lambda_y)))
            ds = max(abs(float(p.log_mu_x + p.log_lambda_y)), abs(float(p.log_lambda_x + p.log_mu_y)))
            worst_match = max(worst_match, dm)
            worst_swap = max(worst_swap, ds)
            worst_jac = max(worst_jac, abs(float(p.log_jac_x - p.log_jac_y)))
            worst_per = max(worst_per, abs(float(p.t_x - p.t_y)))
            is_m = dm < tol_v
            is_s = ds < tol_v
            flags.append((p.orbit_id, "both" if (is_m and is_s) else "match" if is_m else "swap" if is_s else "neither"))
    kinds = [f for _, f in flags]
    if all(f in ("match", "both") for f in kinds):
        aggregate = "eigendata_match"
    elif all(f in ("swap", "both") for f in kinds):
        aggregate = "eigendata_swap"
    elif any(f != "neither" for f in kinds):
        aggregate = "mixed"
    else:
        aggregate = "none"
    note = ""
    if aggregate == "mixed":
        note = (
            "mixed per-orbit verdicts: genuinely dissipative conjugate pairs "
            "cannot mix match and swap; check the tolerance or the pairing"
        )
    return ComparisonReport(
        aggregate=aggregate,
        per_orbit=tuple(flags),
        jacobian_match=worst_jac < tol_v,
        period_match=worst_per < tol_v,
        worst_match_deviation=worst_match,
        worst_swap_deviation=worst_swap,
        worst_jacobian_deviation=worst_jac,
        worst_period_deviation=worst_per,
        srb_swap_signature=aggregate == "eigendata_swap",
        tolerance=tol_v,
        note=note,
    )


def jacobian_match_test(corr: OrbitCorrespondence, tol: float | None = None):
    """(matched, worst deviation, witness id)."""
    tol_v = tol if tol is not None else _default_tolerance(corr)
    worst = -1.0
    witness = None
    with bits(corr.model_x.precision_bits + 16):
        for p in corr.pairs:
            d = abs(float(p.log_jac_x - p.log_jac_y))
            if d > worst:
                worst = d
                witness = p.orbit_id
    return worst < tol_v, worst, witness


def period_match_test(corr: OrbitCorrespondence, tol: float | None = None):
    """(matched, worst deviation, witness id)."""
    tol_v = tol if tol is not None else _default_tolerance(corr)
    worst = -1.0
    witness = None
    with bits(corr.model_x.precision_bits + 16):
        for p in corr.pairs:
            d = abs(float(p.t_x - p.t_y))
            if d > worst:
                worst = d
                witness = p.orbit_id
    return worst < tol_v, worst, witness


def report_to_json(report: ComparisonReport) -> dict:
    return {
        "aggregate": report.aggregate,
        "jacobian_match": report.jacobian_match,
        "period_match": report.period_match,
        "worst_match_deviation": report.worst_match_deviation,
        "worst_swap_deviation": report.worst_swap_deviation,
        "worst_jacobian_deviation": report.worst_jacobian_deviation,
        "worst_period_deviation": report.worst_period_deviation,
        "srb_swap_signature": report.srb_swap_signature,
        "tolerance": report.tolerance,
        "note": report.note,
    }


def correspondence_to_csv(corr: OrbitCorrespondence, path=None) -> str:
    lines = ["id,T_X,T_Y,mu_X,mu_Y,lambda_X,lambda_Y"]
    with bits(64):
        for p in corr.pairs:
            lines.append(
                f"{p.orbit_id},{mp.nstr(to_mpf(p.t_x), 25)},{mp.nstr(to_mpf(p.t_y), 25)},"
                f"{mp.nstr(mp.e ** to_mpf(p.log_mu_x), 20)},{mp.nstr(mp.e ** to_mpf(p.log_mu_y), 20)},"
                f"{mp.nstr(mp.e ** to_mpf(p.log_lambda_x), 20)},{mp.nstr(mp.e ** to_mpf(p.log_lambda_y), 20)}"
            )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text


_ = math
