"""Batch experiment runner: validated configs, named presets, deterministic
reports.

A config is a plain JSON-able dict with a "kind" key naming the experiment
(orbits | shadow | fit | zeta | pressure | proportions | curve | compare |
perturb), a "model" spec, and kind-specific parameters. Unknown keys are
rejected before any computation. Reports separate a deterministic payload
(bit-identical across reruns of the same config) from wall-clock metadata,
and carry pass/fail flags for the assertions embedded in the config.

Every acceptance criterion has exactly one named preset; the acceptance
suite is the union of those presets.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

from . import compare as cmp_mod
from . import thermo
from .asymptotics import fit_expansion, fit_report_json, gamma_recovery
from .mparith import mpf_str, to_mpf
from .shadowing import excursion_time, find_homoclinic, shadow_series, series_to_csv
from .suspension import (
    FlowModel,
    model_from_json,
    model_to_json,
    time_reversed,
)
from .templates import c1_obstruction_scan, scan_to_csv, zeta_hat
from .torus_maps import enumerate_periodic_orbits, lattice_point_count, orbits_to_csv


KINDS = (
    "orbits", "shadow", "fit", "zeta", "pressure", "proportions",
    "curve", "compare", "perturb",
)

_ALLOWED_KEYS = {
    "orbits": {"kind", "model", "n_max", "out"},
    "shadow": {"kind", "model", "lattice_class", "n_range", "expect_zero_residuals", "out"},
    "fit": {"kind", "model", "lattice_class", "n_range", "expect_model", "rate_tolerance", "ratio_window", "ratio_tolerance", "expect_recovered", "out"},
    "zeta": {"kind", "model", "lattice_classes", "n_range", "tail_bound_max", "expect_sign_consistency", "truncation", "out"},
    "pressure": {"kind", "model", "n_max", "t_values", "window", "abs_bound", "out"},
    "proportions": {"kind", "model", "n_max", "potential", "orbit_class", "windows", "rho", "min_final", "require_nondecreasing", "tail_windows", "out"},
    "curve": {"kind", "model", "n_max", "grid", "window", "root_bound", "t0_range", "out"},
    "compare": {"kind", "model", "model_y", "method", "n_max", "tolerance", "expect_aggregate", "expect_jacobian_match", "expect_period_match", "out"},
    "perturb": {"kind", "model", "c0_values", "n_max_orbits", "period_tolerance", "unstable_tolerance", "out"},
}


@dataclass(frozen=True)
class RunReport:
    config: dict
    payload: dict
    assertions: tuple  # (name, passed, detail)
    wall_seconds: float
    precision_bits: int

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.assertions)

    def payload_bytes(self) -> bytes:
        return json.dumps(self.payload, sort_keys=True).encode()

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "payload": self.payload,
            "assertions": [list(a) for a in self.assertions],
            "passed": self.passed,
            "metadata": {
                "wall_seconds": self.wall_seconds,
                "precision_bits": self.precision_bits,
            },
        }


def validate_config(config: dict) -> None:
    kind = config.get("kind")
    if kind not in KINDS:
        raise ValueError(f"unknown experiment kind {kind!r}")
    allowed = _ALLOWED_KEYS[kind]
    unknown = set(config) - allowed
    if unknown:
        raise ValueError(f"unknown config keys for {kind}: {sorted(unknown)}")
    if "model" not in config:
        raise ValueError("config requires a model spec")


def _load_model(config, key="model") -> FlowModel:
    return model_from_json(config[key])


def _num(x, digits=50):
    return mpf_str(x, digits)


def run(config: dict, out_dir: str | None = None) -> RunReport:
    """Execute one experiment config; write artifacts when out is set."""
    validate_config(config)
    t_start = time.time()
    kind = config["kind"]
    out = config.get("out") or out_dir
    handler = _HANDLERS[kind]
    payload, assertions, artifacts = handler(config)
    if out:
        os.makedirs(out, exist_ok=True)
        for name, text in artifacts.items():
            path = os.path.join(out, name)
            tmp = path + ".tmp"
            with open(tmp, "w") as f:
                f.write(text)
            os.replace(tmp, path)
        report_path = os.path.join(out, f"{kind}_report.json")
        model = _load_model(config)
        rep = RunReport(
            config=config, payload=payload, assertions=tuple(assertions),
            wall_seconds=time.time() - t_start, precision_bits=model.precision_bits,
        )
        with open(report_path + ".tmp", "w") as f:
            json.dump(rep.to_json(), f, sort_keys=True, indent=1)
        os.replace(report_path + ".tmp", report_path)
        return rep
    model = _load_model(config)
    return RunReport(
        config=config, payload=payload, assertions=tuple(assertions),
        wall_seconds=time.time() - t_start, precision_bits=model.precision_bits,
    )


# ---------------------------------------------------------------------------
# handlers


def _anchor_fixed_point(model: FlowModel):
    fp = enumerate_periodic_orbits(model.base, 1)[0]
    return model.flow_orbit(fp)


def _run_orbits(config):
    model = _load_model(config)
    n_max = int(config["n_max"])
    orbits = enumerate_periodic_orbits(model.base, n_max)
    per_period: dict[int, int] = {}
    for o in orbits:
        per_period[o.period_N] = per_period.get(o.period_N, 0) + 1
    counts_ok = True
    expected = {}
    for n in range(1, n_max + 1):
        total = sum(d * per_period.get(d, 0) for d in range(1, n + 1) if n % d == 0)
        exp = lattice_point_count(model.base.linear, n)
        expected[str(n)] = [total, exp]
        counts_ok = counts_ok and total == exp
    payload = {"cycles_per_period": {str(k): v for k, v in sorted(per_period.items())}, "point_counts": expected}
    assertions = [("lattice_count_audit", counts_ok, json.dumps(expected))]
    artifacts = {"orbits.csv": orbits_to_csv(model.base, orbits)}
    return payload, assertions, artifacts


def _run_shadow(config):
    from .mparith import bits

    model = _load_model(config)
    anchor = _anchor_fixed_point(model)
    hom = find_homoclinic(model, anchor, tuple(config["lattice_class"]))
    tp = excursion_time(model, hom)
    ser = shadow_series(model, hom, tuple(config["n_range"]))
    digits = model.precision_bits // 3
    with bits(model.precision_bits):
        resid = [tn - n * anchor.period_T - tp for n, tn in zip(ser.n_values, ser.periods)]
    payload = {
        "T": _num(anchor.period_T, digits),
        "T_prime": _num(tp, digits),
        "n_values": ser.n_values,
        "periods": [_num(t, digits) for t in ser.periods],
        "residuals": [_num(r, 30) for r in resid],
    }
    assertions = []
    if config.get("expect_zero_residuals"):
        floor = mp.mpf(2) ** (-model.precision_bits + 48)
        ok = all(abs(r) < floor for r in resid)
        assertions.append(("residuals_exactly_zero", ok, _num(max(abs(r) for r in resid), 8)))
    artifacts = {"shadow_series.csv": series_to_csv(ser, t_prime=tp)}
    return payload, assertions, artifacts


def _run_fit(config):
    model = _load_model(config)
    anchor = _anchor_fixed_point(model)
    hom = find_homoclinic(model, anchor, tuple(config["lattice_class"]))
    tp = excursion_time(model, hom)
    ser = shadow_series(model, hom, tuple(config["n_range"]))
    fit = fit_expansion(ser, anchor, t_prime=tp)
    rec = gamma_recovery(model, ser, anchor, t_prime=tp)
    payload = {
        "fit": fit_report_json(fit),
        "gamma": rec.gamma_estimate,
        "recovered": rec.recovered,
    }
    assertions = []
    if "expect_model" in config:
        assertions.append(
            ("model_kind", fit.model_kind == config["expect_model"], fit.model_kind)
        )
    if "rate_tolerance" in config and fit.rate is not None:
        dev = abs(fit.rate - fit.rate_reference)
        assertions.append(("rate_tolerance", dev <= config["rate_tolerance"], f"{dev:.3e}"))
    if "ratio_window" in config:
        from .mparith import bits

        lo, hi = config["ratio_window"]
        tol = config.get("ratio_tolerance", 0.05)
        with bits(model.precision_bits):
            mu = mp.e ** anchor.multipliers.log_mu
            resid = [tn - n * anchor.period_T - tp for n, tn in zip(ser.n_values, ser.periods)]
            devs = []
            for i in range(len(ser.n_values) - 1):
                if lo <= ser.n_values[i] and ser.n_values[i + 1] <= hi and resid[i] != 0:
                    devs.append(abs(float(resid[i + 1] / resid[i] - mu)) / float(mu))
        ok = bool(devs) and max(devs) <= tol
        assertions.append(("residual_ratio", ok, f"max dev {max(devs) if devs else 'n/a'}"))
    if "expect_recovered" in config:
        assertions.append(("recovered", rec.recovered == config["expect_recovered"], str(rec.recovered)))
    artifacts = {"fit_report.json": json.dumps(payload, sort_keys=True, indent=1)}
    return payload, assertions, artifacts


def _run_zeta(config):
    model = _load_model(config)
    anchor = _anchor_fixed_point(model)
    branches = [tuple(m) for m in config["lattice_classes"]]
    trunc = config.get("truncation")
    entries = []
    sign_ok = True
    from .suspension import section_at

    sec = section_at(model, anchor.base_orbit)
    for mcls in branches:
        hom = find_homoclinic(model, anchor, mcls, section=sec)
        ob = zeta_hat(model, hom, truncation=trunc)
        entry = {
            "branch": list(mcls),
            "eta_inf": _num(ob.eta_inf, 30),
            "xi_inf": _num(ob.xi_inf, 30),
            "zeta_hat": _num(ob.zeta_hat, 30),
            "tail_bound": _num(ob.tail_bound, 8) if ob.tail_bound is not None else None,
        }
        if config.get("expect_sign_consistency"):
            tp = excursion_time(model, hom, check=False)
            ser = shadow_series(model, hom, tuple(config.get("n_range", (10, 40))))
            fit = fit_expansion(ser, anchor, t_prime=tp)
            pred = mp.sign(ob.zeta_hat * ob.xi_inf)
            got = mp.sign(to_mpf(fit.zeta_fit))
            entry["zeta_fit"] = _num(fit.zeta_fit, 20)
            entry["sign_consistent"] = bool(pred == got)
            sign_ok = sign_ok and pred == got
        entries.append(entry)
    payload = {"branches": entries}
    assertions = []
    if config.get("expect_sign_consistency"):
        assertions.append(("sign_consistency", sign_ok, f"{len(entries)} branches"))
    if "tail_bound_max" in config:
        bound = float(config["tail_bound_max"])
        tails = [float(to_mpf(e["tail_bound"])) for e in entries if e["tail_bound"] is not None]
        ok = len(tails) == len(entries) and all(t < bound for t in tails)
        assertions.append(("tail_bounds", ok, f"max {max(tails) if tails else 'n/a'}"))
    artifacts = {"zeta_report.json": json.dumps(payload, sort_keys=True, indent=1)}
    return payload, assertions, artifacts


def _run_pressure(config):
    model = _load_model(config)
    ens = thermo.build_ensemble(model, int(config["n_max"]))
    t_win, delta = config["window"]
    vals = {}
    for t in config["t_values"]:
        est = thermo.pressure_estimate(ens, thermo.Potential.family_t(float(t)), float(t_win), float(delta))
        vals[str(t)] = {"value": est.value, "raw": est.raw, "count": est.count}
    payload = {"pressure": vals, "window": [t_win, delta]}
    assertions = []
    if "abs_bound" in config:
        bound = float(config["abs_bound"])
        worst = max(abs(v["value"]) for v in vals.values())
        assertions.append(("pressure_roots", worst <= bound, f"max |P| = {worst:.4f}"))
    artifacts = {"pressure.csv": "t,delta,value\n" + "\n".join(
        f"{t},{delta},{v['value']:.12g}" for t, v in vals.items()) + "\n"}
    return payload, assertions, artifacts


def _run_proportions(config):
    model = _load_model(config)
    ens = thermo.build_ensemble(model, int(config["n_max"]))
    pot = _potential_from_spec(config["potential"], ens)
    rho = float(config.get("rho", 1.25))
    series = []
    for t, delta in config["windows"]:
        series.append(
            thermo.proportion(ens, pot, config["orbit_class"], float(t), float(delta), rho=rho)
        )
    payload = {
        "windows": [list(map(float, w)) for w in config["windows"]],
        "proportions": series,
        "orbit_class": config["orbit_class"],
    }
    assertions = []
    if "min_final" in config:
        assertions.append(
            ("final_proportion", series[-1] >= float(config["min_final"]), f"{series[-1]:.4f}")
        )
    if config.get("require_nondecreasing"):
        k = int(config.get("tail_windows", 3))
        tail = series[-k:]
        ok = all(tail[i + 1] >= tail[i] - 1e-12 for i in range(len(tail) - 1))
        assertions.append(("nondecreasing_tail", ok, str([f"{p:.4f}" for p in tail])))
    artifacts = {"proportions.csv": "T,delta,value\n" + "\n".join(
        f"{w[0]},{w[1]},{p:.12g}" for w, p in zip(config["windows"], series)) + "\n"}
    return payload, assertions, artifacts


def _potential_from_spec(spec, ens):
    if isinstance(spec, str):
        if spec == "psi_u":
            return thermo.Potential.psi_u()
        if spec == "psi_s":
            return thermo.Potential.psi_s()
        if spec == "log_jacobian":
            return thermo.Potential.log_jacobian()
        raise ValueError(f"unknown potential {spec}")
    if isinstance(spec, dict) and spec.get("family_t") is not None:
        t = spec["family_t"]
        if t == "t0":
            curve = thermo.pressure_curve(ens, [i / 10 for i in range(11)], *spec["t0_window"])
            return thermo.Potential.family_t(curve.t0)
        return thermo.Potential.family_t(float(t))
    raise ValueError(f"bad potential spec {spec}")


def _run_curve(config):
    model = _load_model(config)
    ens = thermo.build_ensemble(model, int(config["n_max"]))
    t_win, delta = config["window"]
    curve = thermo.pressure_curve(ens, config["grid"], float(t_win), float(delta))
    payload = thermo.curve_to_json(curve)
    assertions = [("convexity", curve.convex_ok, f"min margin {curve.min_margin:.3e}")]
    if "root_bound" in config:
        bound = float(config["root_bound"])
        p0 = curve.values[curve.t_grid.index(0.0)] if 0.0 in curve.t_grid else None
        p1 = curve.values[curve.t_grid.index(1.0)] if 1.0 in curve.t_grid else None
        worst = max(abs(p0), abs(p1))
        assertions.append(("pressure_roots", worst <= bound, f"|P(0)|,|P(1)| max {worst:.4f}"))
    if "t0_range" in config:
        lo, hi = config["t0_range"]
        assertions.append(("t0_interior", lo < curve.t0 < hi, f"t0 = {curve.t0:.4f}"))
    artifacts = {"curve.json": json.dumps(payload, sort_keys=True, indent=1)}
    return payload, assertions, artifacts


def _run_compare(config):
    model_x = _load_model(config)
    method = config["method"]
    if method == "time_reversal":
        model_y = time_reversed(model_x)
    else:
        model_y = _load_model(config, "model_y")
    corr = cmp_mod.match_orbits(model_x, model_y, method, n_max=int(config.get("n_max", 4)))
    tol = config.get("tolerance")
    report = cmp_mod.compare_eigendata(corr, tol=tol)
    jac_ok, jac_worst, jac_witness = cmp_mod.jacobian_match_test(corr, tol=tol)
    per_ok, per_worst, per_witness = cmp_mod.period_match_test(corr, tol=tol)
    payload = {
        "eigendata": cmp_mod.report_to_json(report),
        "jacobian_match": [jac_ok, jac_worst, jac_witness],
        "period_match": [per_ok, per_worst, per_witness],
    }
    assertions = []
    if "expect_aggregate" in config:
        assertions.append(
            ("aggregate", report.aggregate == config["expect_aggregate"], report.aggregate)
        )
    if "expect_jacobian_match" in config:
        assertions.append(
            ("jacobian_match", jac_ok == config["expect_jacobian_match"], f"worst {jac_worst:.3e} at {jac_witness}")
        )
    if "expect_period_match" in config:
        assertions.append(
            ("period_match", per_ok == config["expect_period_match"], f"worst {per_worst:.3e}")
        )
    artifacts = {
        "correspondence.csv": cmp_mod.correspondence_to_csv(corr),
        "comparison.json": json.dumps(payload, sort_keys=True, indent=1),
    }
    return payload, assertions, artifacts


def _run_perturb(config):
    from .perturbation import anchor_stable_factor_oracle, continue_periodic_orbit, perturb_along_stable

    model = _load_model(config)
    anchor = _anchor_fixed_point(model)
    n_max = int(config.get("n_max_orbits", 4))
    orbits = enumerate_periodic_orbits(model.base, n_max)
    flow_orbits = [model.flow_orbit(o) for o in orbits]
    period_tol = float(config.get("period_tolerance", 1e-8))
    unstable_tol = float(config.get("unstable_tolerance", 1e-6))
    results = []
    anchor_factors = []
    all_period_ok = True
    all_unstable_ok = True
    for c0 in config["c0_values"]:
        pflow = perturb_along_stable(model, anchor, float(c0))
        worst_period = 0.0
        worst_unstable = 0.0
        anchor_mu_factor = None
        for fo in flow_orbits:
            cont = continue_periodic_orbit(pflow, fo)
            worst_period = max(worst_period, abs(cont.period - float(fo.period_T)))
            worst_unstable = max(
                worst_unstable,
                abs(math.exp(cont.log_lambda) - float(fo.multipliers.lam)),
            )
            if fo.base_orbit.symbolic_id == anchor.base_orbit.symbolic_id:
                anchor_mu_factor = math.exp(cont.log_mu) / float(anchor.multipliers.mu)
        anchor_factors.append(anchor_mu_factor)
        results.append(
            {
                "c0": float(c0),
                "worst_period_drift": worst_period,
                "worst_unstable_drift": worst_unstable,
                "anchor_mu_factor": anchor_mu_factor,
                "oracle_factor": anchor_stable_factor_oracle(pflow),
            }
        )
        all_period_ok = all_period_ok and worst_period <= period_tol
        all_unstable_ok = all_unstable_ok and worst_unstable <= unstable_tol
    increasing = all(
        anchor_factors[i + 1] > anchor_factors[i] for i in range(len(anchor_factors) - 1)
    ) and all(f > 1.0 for f in anchor_factors)
    payload = {"experiments": results}
    assertions = [
        ("periods_invariant", all_period_ok, f"tol {period_tol}"),
        ("unstable_invariant", all_unstable_ok, f"tol {unstable_tol}"),
        ("anchor_stable_increasing", increasing, str(anchor_factors)),
    ]
    artifacts = {"perturb.json": json.dumps(payload, sort_keys=True, indent=1)}
    return payload, assertions, artifacts


_HANDLERS = {
    "orbits": _run_orbits,
    "shadow": _run_shadow,
    "fit": _run_fit,
    "zeta": _run_zeta,
    "pressure": _run_pressure,
    "proportions": _run_proportions,
    "curve": _run_curve,
    "compare": _run_compare,
    "perturb": _run_perturb,
}


# ---------------------------------------------------------------------------
# presets (one per acceptance criterion)


def _cat_map_json():
    return {"linear": [[2, 1], [1, 1]], "terms": [], "epsilon": "0"}


def _pert_map_json(eps: str):
    return {
        "linear": [[2, 1], [1, 1]],
        "terms": [{"wave": [1, 0], "amp": ["1", "0"], "kind": "sin"}],
        "epsilon": eps,
    }


def _diss_roof_json():
    return {
        "c0": "1",
        "terms": [{"wave": [1, 0], "coeff": "559/1000", "kind": "sin", "phase": "0"}],
        "logdet_coeff": "1",
    }


def _unit_roof_json():
    return {"c0": "1", "terms": [], "logdet_coeff": "0"}


def _cos_roof_json():
    return {
        "c0": "1",
        "terms": [{"wave": [1, 0], "coeff": "1/4", "kind": "cos", "phase": "0"}],
        "logdet_coeff": "0",
    }


PRESETS = {
    # criterion 1: shadowing asymptotics on the dissipative model
    "acc-shadow-dissipative": {
        "kind": "fit",
        "model": {"base": _pert_map_json("1/100"), "roof": _diss_roof_json(), "precision_bits": 256},
        "lattice_class": [1, 1],
        "n_range": [10, 40],
        "expect_model": "pure_exponential",
        "rate_tolerance": 0.01,
        "ratio_window": [25, 40],
        "ratio_tolerance": 0.05,
        "expect_recovered": True,
    },
    # criterion 2: sign cross-validation of the obstruction functional
    "acc-zeta-sign": {
        "kind": "zeta",
        "model": {"base": _pert_map_json("1/100"), "roof": _diss_roof_json(), "precision_bits": 256},
        "lattice_classes": [[1, 1], [1, 0], [0, 1]],
        "n_range": [10, 40],
        "expect_sign_consistency": True,
        "tail_bound_max": 6.223e-61,  # 2^-200
    },
    # criterion 3: volume-preserving regime detection
    "acc-volume-preserving-fit": {
        "kind": "fit",
        "model": {"base": _cat_map_json(), "roof": _cos_roof_json(), "precision_bits": 256},
        "lattice_class": [1, 1],
        "n_range": [10, 40],
        "expect_model": "n_times_exponential",
    },
    # criterion 4: the zero case (roof identically one)
    "acc-zero-case": {
        "kind": "fit",
        "model": {"base": _cat_map_json(), "roof": _unit_roof_json(), "precision_bits": 256},
        "lattice_class": [1, 1],
        "n_range": [10, 40],
        "expect_model": "zero",
        "expect_recovered": False,
    },
    # criterion 5: pressure roots and convexity
    "acc-pressure-roots": {
        "kind": "curve",
        "model": {"base": _pert_map_json("3/20"), "roof": _unit_roof_json(), "precision_bits": 64},
        "n_max": 12,
        "grid": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
        "window": [11.5, 1.0],
        "root_bound": 0.05,
        "t0_range": [0.05, 0.95],
    },
    # criterion 6: full proportion of contracting orbits under psi_u
    "acc-full-proportion": {
        "kind": "proportions",
        "model": {"base": _pert_map_json("3/20"), "roof": _unit_roof_json(), "precision_bits": 64},
        "n_max": 12,
        "potential": "psi_u",
        "orbit_class": "contracting",
        "windows": [[8.5, 1.0], [9.5, 1.0], [10.5, 1.0], [11.5, 1.0]],
        "min_final": 0.9,
        "require_nondecreasing": True,
        "tail_windows": 3,
    },
    # criterion 6 (symmetric check): expanding orbits under psi_s
    "acc-full-proportion-expanding": {
        "kind": "proportions",
        "model": {"base": _pert_map_json("3/20"), "roof": _unit_roof_json(), "precision_bits": 64},
        "n_max": 12,
        "potential": "psi_s",
        "orbit_class": "expanding",
        "windows": [[8.5, 1.0], [9.5, 1.0], [10.5, 1.0], [11.5, 1.0]],
        "min_final": 0.9,
        "require_nondecreasing": True,
        "tail_windows": 3,
    },
    # criterion 7: mild-dissipation proportion under the minimizing potential
    "acc-mild-proportion": {
        "kind": "proportions",
        "model": {"base": _pert_map_json("1/20"), "roof": _unit_roof_json(), "precision_bits": 64},
        "n_max": 12,
        "potential": {"family_t": "t0", "t0_window": [11.5, 1.0]},
        "orbit_class": "mild",
        "rho": 1.25,
        "windows": [[11.5, 1.0]],
        "min_final": 0.9,
    },
    # criterion 8: perturbation along the strong stable field
    "acc-stable-perturbation": {
        "kind": "perturb",
        "model": {"base": _cat_map_json(), "roof": _unit_roof_json(), "precision_bits": 64},
        "c0_values": [0.01, 0.02, 0.05],
        "n_max_orbits": 4,
        "period_tolerance": 1e-8,
        "unstable_tolerance": 1e-6,
    },
    # criterion 9: swap signature under time reversal
    "acc-swap-reversal": {
        "kind": "compare",
        "model": {"base": _pert_map_json("1/100"), "roof": _diss_roof_json(), "precision_bits": 192},
        "method": "time_reversal",
        "n_max": 4,
        "expect_aggregate": "eigendata_swap",
        "expect_jacobian_match": False,
        "expect_period_match": True,
    },
    # criterion 10: exact lattice orbit counts
    "acc-orbit-counts": {
        "kind": "orbits",
        "model": {"base": _cat_map_json(), "roof": _unit_roof_json(), "precision_bits": 64},
        "n_max": 12,
    },
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return json.loads(json.dumps(PRESETS[name]))


def run_preset(name: str, out_dir: str | None = None) -> RunReport:
    return run(preset(name), out_dir=out_dir)
