"""Periodic-orbit thermodynamics at fixed window scale.

Equilibrium states are represented only by their Bowen approximants: orbit
ensembles complete up to a base-period cutoff, weighted by exp of the
potential integrated over the period. Pressure is estimated from window sums

    Sigma_{psi,T,Delta} = sum_{T(gamma) in (T, T+Delta]} exp(T_psi(gamma)),

whose leading window asymptotics carry the universal counting prefactor
Delta e^{PT}/(PT); the corrected estimator solves the window model for P and
is the default (the raw (1/T) log Sigma is also reported). Everything here
runs in float64 over exact orbit inventories; the count audit against the
integer lattice formula guards completeness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .suspension import FlowModel
from .torus_maps import (
    BaseMap,
    enumerate_periodic_orbits,
    lattice_point_count,
    multipliers_batch,
)


@dataclass(frozen=True)
class Potential:
    """Per-orbit weight exponent T_psi(gamma).

    kinds: psi_u -> -log lambda, psi_s -> +log mu, log_jacobian -> log(mu
    lambda), family_t(t) -> t log mu - (1-t) log lambda, custom -> explicit
    array aligned with the ensemble orbit order.
    """

    kind: str
    t: float | None = None
    custom: np.ndarray | None = None

    @classmethod
    def psi_u(cls):
        return cls(kind="psi_u")

    @classmethod
    def psi_s(cls):
        return cls(kind="psi_s")

    @classmethod
    def log_jacobian(cls):
        return cls(kind="log_jacobian")

    @classmethod
    def family_t(cls, t: float):
        return cls(kind="family_t", t=float(t))

    def weights(self, ens: "OrbitEnsemble") -> np.ndarray:
        if self.kind == "psi_u":
            return -ens.log_lambda
        if self.kind == "psi_s":
            return ens.log_mu.copy()
        if self.kind == "log_jacobian":
            return ens.log_mu + ens.log_lambda
        if self.kind == "family_t":
            return self.t * ens.log_mu - (1.0 - self.t) * ens.log_lambda
        if self.kind == "custom":
            if self.custom is None or len(self.custom) != ens.size:
                raise ValueError("custom potential must align with the ensemble")
            return np.asarray(self.custom, dtype=float)
        raise ValueError(f"unknown potential kind {self.kind}")


@dataclass
class OrbitEnsemble:
    model: FlowModel
    n_max: int
    ids: list
    period_n: np.ndarray
    periods: np.ndarray  # flow periods T(gamma)
    log_mu: np.ndarray
    log_lambda: np.ndarray
    classes: np.ndarray  # 0 contracting, 1 preserving, 2 expanding

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def log_jac(self) -> np.ndarray:
        return self.log_mu + self.log_lambda

    def window_mask(self, t: float, delta: float) -> np.ndarray:
        return (self.periods > t) & (self.periods <= t + delta)

    def class_mask(self, name: str, rho: float = 1.25) -> np.ndarray:
        if name == "contracting":
            return self.classes == 0
        if name == "preserving":
            return self.classes == 1
        if name == "expanding":
            return self.classes == 2
        if name == "mild":
            lj = self.log_jac
            return (rho * self.log_mu + self.log_lambda < 0) & (
                self.log_mu + rho * self.log_lambda > 0
            )
        raise ValueError(f"unknown orbit class {name}")


CLASS_NAMES = {0: "contracting", 1: "preserving", 2: "expanding"}


def build_ensemble(model: FlowModel, n_max: int) -> OrbitEnsemble:
    """Complete orbit inventory up to base period n_max, audited against the
    lattice point-count oracle."""
    base = model.base
    if not isinstance(base, BaseMap):
        raise ValueError("ensembles require a BaseMap base (not a reversed wrapper)")
    orbits = enumerate_periodic_orbits(base, n_max)
    per_period: dict[int, int] = {}
    for o in orbits:
        per_period[o.period_N] = per_period.get(o.period_N, 0) + 1
    for n in range(1, n_max + 1):
        total = sum(d * per_period.get(d, 0) for d in range(1, n + 1) if n % d == 0)
        expected = lattice_point_count(base.linear, n)
        if total != expected:
            raise RuntimeError(
                f"ensemble incomplete at period {n}: {total} points vs {expected}"
            )
    mults = multipliers_batch(base, orbits)
    log_mu = np.array([mults[o.symbolic_id][0] for o in orbits])
    log_lambda = np.array([mults[o.symbolic_id][1] for o in orbits])
    periods = _batch_periods(model, orbits)
    area_exact = base.area_preserving_exactly
    lj = log_mu + log_lambda
    classes = np.where(lj > 0, 2, 0)
    if area_exact:
        classes = np.where(np.abs(lj) <= 1e-20, 1, classes)
    return OrbitEnsemble(
        model=model,
        n_max=n_max,
        ids=[o.symbolic_id for o in orbits],
        period_n=np.array([o.period_N for o in orbits]),
        periods=periods,
        log_mu=log_mu,
        log_lambda=log_lambda,
        classes=classes,
    )


def _batch_periods(model: FlowModel, orbits) -> np.ndarray:
    """Float64 Birkhoff roof sums over all cycles, batched per period."""
    base = model.base
    roof = model.roof
    by_period: dict[int, list] = {}
    for idx, o in enumerate(orbits):
        by_period.setdefault(o.period_N, []).append(idx)
    out = np.zeros(len(orbits))
    for n, idxs in by_period.items():
        x = np.array(
            [[float(orbits[i].representative[0]), float(orbits[i].representative[1])] for i in idxs]
        )
        acc = np.zeros(len(idxs))
        cur = x
        for _ in range(n):
            acc += _roof_np(model, cur)
            cur = base.apply_lift_np(cur) % 1.0
        out[idxs] = acc
    return out


def _roof_np(model: FlowModel, x: np.ndarray) -> np.ndarray:
    roof = model.roof
    if roof.pulled_back:
        raise ValueError("float64 ensembles do not support pulled-back roofs")
    vals = np.full(x.shape[0], float(roof.c0))
    for t in roof.terms:
        phase = 2 * math.pi * (x @ np.array(t.wave, dtype=float) - float(t.phase))
        w = np.sin(phase) if t.kind == "sin" else np.cos(phase)
        vals += float(t.coeff) * w
    if roof.logdet_coeff != 0:
        d = model.base.derivative_np(x)
        det = d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]
        vals += float(roof.logdet_coeff) * np.log(det)
    return vals


# ---------------------------------------------------------------------------
# window sums and pressure


def window_log_sum(ens: OrbitEnsemble, potential: Potential, t: float, delta: float):
    """(log Sigma, count) over the window (t, t+delta] via log-sum-exp."""
    mask = ens.window_mask(t, delta)
    if not np.any(mask):
        raise ValueError(
            f"empty period window ({t}, {t + delta}]: enlarge delta or n_max"
        )
    w = potential.weights(ens)[mask]
    m = float(np.max(w))
    s = math.fsum(math.exp(v - m) for v in np.sort(w)[::-1])
    return m + math.log(s), int(mask.sum())


@dataclass(frozen=True)
class PressureEstimate:
    value: float  # window-corrected estimator (the default P-hat)
    raw: float  # (1/T) log Sigma
    log_sigma: float
    window: tuple[float, float]
    count: int


def pressure_estimate(ens: OrbitEnsemble, potential: Potential, t: float, delta: float) -> PressureEstimate:
    """Pressure from one period window.

    raw = (1/T) log Sigma carries the universal Delta e^{PT}/(P T) window
    prefactor (a -log(T)/T bias at desk scale); value solves the window model
    log Sigma = P T + log((e^{P Delta}-1)/P) - log T for P and is the
    estimator used by the curve and the acceptance checks.
    """
    log_sigma, count = window_log_sum(ens, potential, t, delta)
    raw = log_sigma / t

    def g(p: float) -> float:
        if abs(p) < 1e-9:
            corr = math.log(delta)
        else:
            corr = math.log((math.exp(p * delta) - 1.0) / p)
        return p * t + corr - math.log(t) - log_sigma

    lo, hi = -4.0, 4.0
    if g(lo) > 0 or g(hi) < 0:
        value = raw
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) <= 0:
                lo = mid
            else:
                hi = mid
        value = 0.5 * (lo + hi)
    return PressureEstimate(value=value, raw=raw, log_sigma=log_sigma, window=(t, delta), count=count)


def bowen_average(ens: OrbitEnsemble, potential: Potential, observable, t: float, delta: float) -> float:
    """Bowen-weighted average of a per-orbit observable.

    observable: Potential or array of per-orbit weights T_phi(gamma); the
    estimate is sum w_gamma T_phi(gamma)/T(gamma) with w the normalized
    exp-weights of the potential."""
    mask = ens.window_mask(t, delta)
    if not np.any(mask):
        raise ValueError("empty period window")
    w = potential.weights(ens)[mask]
    if isinstance(observable, Potential):
        phi = observable.weights(ens)[mask]
    else:
        phi = np.asarray(observable, dtype=float)[mask]
    m = float(np.max(w))
    weights = np.exp(w - m)
    weights /= math.fsum(np.sort(weights)[::-1])
    return float(math.fsum(np.sort(weights * phi / ens.periods[mask])[::-1]))


def proportion(ens: OrbitEnsemble, potential: Potential, orbit_class: str, t: float, delta: float, rho: float = 1.25) -> float:
    """Weighted proportion of an orbit class within one period window."""
    mask = ens.window_mask(t, delta)
    if not np.any(mask):
        raise ValueError("empty period window")
    w = potential.weights(ens)
    cmask = ens.class_mask(orbit_class, rho=rho)
    m = float(np.max(w[mask]))
    total = math.fsum(math.exp(v - m) for v in np.sort(w[mask])[::-1])
    sel = w[mask & cmask]
    if len(sel) == 0:
        return 0.0
    part = math.fsum(math.exp(v - m) for v in np.sort(sel)[::-1])
    return part / total


# ---------------------------------------------------------------------------
# pressure curve


@dataclass(frozen=True)
class PressureCurve:
    t_grid: tuple
    values: tuple
    raw_values: tuple
    t0: float
    p_t0: float
    convex_ok: bool
    min_margin: float
    window: tuple[float, float]


def pressure_curve(ens: OrbitEnsemble, t_grid, t: float, delta: float) -> PressureCurve:
    """Sampled pressure curve of the interpolating potentials, with a
    golden-section refinement of the minimizer and a midpoint-convexity
    certificate over the uniform grid."""
    grid = [float(x) for x in t_grid]
    if min(grid) < -0.5 or max(grid) > 1.5:
        raise ValueError("t grid must lie within [-0.5, 1.5]")
    vals = []
    raws = []
    for tt in grid:
        est = pressure_estimate(ens, Potential.family_t(tt), t, delta)
        vals.append(est.value)
        raws.append(est.raw)
    margins = []
    for i in range(1, len(grid) - 1):
        margins.append(0.5 * (vals[i - 1] + vals[i + 1]) - vals[i])
    min_margin = min(margins) if margins else 0.0
    convex_ok = min_margin >= -1e-12

    def objective(tt: float) -> float:
        return pressure_estimate(ens, Potential.family_t(tt), t, delta).value

    k_min = int(np.argmin(vals))
    lo = grid[max(0, k_min - 1)]
    hi = grid[min(len(grid) - 1, k_min + 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(60):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(d)
        if abs(b - a) < 1e-10:
            break
    t0 = 0.5 * (a + b)
    return PressureCurve(
        t_grid=tuple(grid),
        values=tuple(vals),
        raw_values=tuple(raws),
        t0=t0,
        p_t0=objective(t0),
        convex_ok=convex_ok,
        min_margin=min_margin,
        window=(t, delta),
    )


# ---------------------------------------------------------------------------
# Livshits-style obstruction


@dataclass(frozen=True)
class CoboundaryReport:
    max_abs_weight: float
    witness_id: str | None
    vanishing_at_scale: bool
    tolerance: float


def coboundary_obstruction(ens: OrbitEnsemble, potential: Potential, tolerance: float = 1e-12) -> CoboundaryReport:
    """Max |T_psi(gamma)| over the ensemble with its witness orbit; verdict
    "vanishing at scale" when every orbit weight sits below tolerance."""
    w = potential.weights(ens)
    if ens.size == 0:
        return CoboundaryReport(0.0, None, True, tolerance)
    k = int(np.argmax(np.abs(w)))
    mx = float(abs(w[k]))
    return CoboundaryReport(
        max_abs_weight=mx,
        witness_id=ens.ids[k],
        vanishing_at_scale=mx < tolerance,
        tolerance=tolerance,
    )


# ---------------------------------------------------------------------------
# reports


def ensemble_to_csv(ens: OrbitEnsemble, path=None) -> str:
    lines = ["symbolic_id,N,T,mu,lambda,jacobian,class"]
    for i in range(ens.size):
        lines.append(
            f"{ens.ids[i]},{int(ens.period_n[i])},{ens.periods[i]:.17g},"
            f"{math.exp(ens.log_mu[i]):.17g},{math.exp(ens.log_lambda[i]):.17g},"
            f"{math.exp(ens.log_mu[i] + ens.log_lambda[i]):.17g},{CLASS_NAMES[int(ens.classes[i])]}"
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text


def curve_to_json(curve: PressureCurve) -> dict:
    return {
        "grid": list(curve.t_grid),
        "values": list(curve.values),
        "raw_values": list(curve.raw_values),
        "t0": curve.t0,
        "p_t0": curve.p_t0,
        "convex_ok": curve.convex_ok,
        "min_margin": curve.min_margin,
        "window": list(curve.window),
    }
