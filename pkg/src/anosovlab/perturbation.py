"""Perturbations of suspension flows along the strong stable field.

Two constructions:

  * perturb_along_stable: the ODE flow generated by X + rho S, where S spans
    the strong stable distribution and rho = c0 * xi * (tapers) is a bump
    supported in a cylinder neighborhood of an anchor periodic orbit and
    vanishing on the orbit itself. Periods of periodic orbits survive the
    perturbation (the vector field gains no flow component), unstable
    multipliers survive, and the anchor's stable multiplier strictly
    increases - by the closed-form factor exp(c0 * integral of the fiber
    taper) at the anchor, which the tests use as an oracle. Implemented for
    constant-roof suspensions over linear bases, where S is exact and cheap
    enough for an ODE right-hand side.

  * roof_timechange_perturbation: a localized trigonometric bump added to
    the roof near the first preimage of a homoclinic point, offset so the
    stable-directional derivative at the crossing is nonzero. Downstream the
    anchor's obstruction value moves off zero and the perturbed stable-jet
    slope sequence follows l * mu^l, certifying Holder-only regularity of
    the stable distribution.

The integrator is an embedded Dormand-Prince 5(4) pair with roof-crossing
events; crossings apply the gluing derivative to the variational block, so
monodromy never composes across the seam implicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import mpmath as mp
import numpy as np

from .mparith import bits, to_mpf
from .suspension import FlowModel, FlowPeriodicOrbit, Roof, RoofTerm, section_at
from .templates import slope_series_forward, _k_terms
from .manifolds import stable_direction_at
from .torus_maps import BaseMap


# ---------------------------------------------------------------------------
# strong stable vector field of the suspension


@dataclass
class StableField:
    model: FlowModel

    def evaluate(self, x, s=None):
        """Unit strong-stable vector (base part, fiber slope) at precision."""
        pb = self.model.precision_bits
        with bits(pb):
            es = stable_direction_at(self.model.base, (to_mpf(x[0]), to_mpf(x[1])), pb)
            if self.model.roof.is_constant:
                g = mp.mpf(0)
            else:
                g = slope_series_forward(self.model, (to_mpf(x[0]), to_mpf(x[1])), es, _k_terms(self.model))
            nrm = mp.sqrt(es[0] ** 2 + es[1] ** 2 + g ** 2)
            return (es[0] / nrm, es[1] / nrm, g / nrm)

    def invariance_audit(self, x, steps: int = 3):
        """Push the field vector through `steps` base returns (the time the
        suspension takes to cross that many roofs) and compare, after
        renormalization, with the field at the image; returns worst angle
        defect."""
        pb = self.model.precision_bits
        base = self.model.base
        with bits(pb):
            v = self.evaluate(x)
            pt = [to_mpf(x[0]), to_mpf(x[1])]
            vec = [v[0], v[1]]
            fib = v[2]
            worst = mp.mpf(0)
            for _ in range(steps):
                if not self.model.roof.is_constant:
                    jx = _dir_jet(pt, vec)
                    fib = fib - self.model.roof_value(jx).coeff(1, 0)
                d = base.derivative(pt)
                vec = [d[0][0] * vec[0] + d[0][1] * vec[1], d[1][0] * vec[0] + d[1][1] * vec[1]]
                pt = list(base.apply_lift(pt))
                ref = self.evaluate(pt)
                nrm = mp.sqrt(vec[0] ** 2 + vec[1] ** 2 + fib ** 2)
                cand = (vec[0] / nrm, vec[1] / nrm, fib / nrm)
                dot = abs(cand[0] * ref[0] + cand[1] * ref[1] + cand[2] * ref[2])
                worst = max(worst, abs(1 - dot))
            return worst


def _dir_jet(pt, vec):
    from .jets import TJet

    jx = TJet.var_x(pt[0], 1, 0)
    jx.c[1][0] = vec[0]
    jy = TJet.var_x(pt[1], 1, 0)
    jy.c[1][0] = vec[1]
    return [jx, jy]


def stable_vector_field(model: FlowModel, region=None) -> StableField:
    return StableField(model=model)


# ---------------------------------------------------------------------------
# the bump flow X + rho S


@dataclass(frozen=True)
class PerturbedFlow:
    model: FlowModel
    anchor: FlowPeriodicOrbit
    c0: float
    radius_s: float = 0.28
    radius_u: float = 0.12
    rtol: float = 1e-12
    max_step: float = 0.1

    def __post_init__(self):
        if not self.model.roof.is_constant:
            raise ValueError("the ODE lab supports constant-roof suspensions")
        if not (isinstance(self.model.base, BaseMap) and self.model.base.is_linear):
            raise ValueError("the ODE lab supports linear bases")

    # cylinder chart: coordinates in the stable/unstable eigenbasis
    def _frame(self):
        a = np.array(self.model.base.linear, dtype=float)
        tr = self.model.base.trace
        det = self.model.base.det_linear
        lam = (tr + math.sqrt(tr * tr - 4 * det)) / 2
        e_u = np.array([1.0, (lam - a[0, 0]) / a[0, 1]])
        e_s = np.array([1.0, (det / lam - a[0, 0]) / a[0, 1]])
        e_u /= np.linalg.norm(e_u)
        e_s /= np.linalg.norm(e_s)
        frame = np.column_stack([e_s, e_u])
        return frame, np.linalg.inv(frame), e_s

    def rho(self, x, s):
        """Bump amplitude at base point x (mod 1) and fiber height s."""
        frame, inv, _ = self._frame()
        p = np.array([float(self.anchor.base_orbit.representative[0]), float(self.anchor.base_orbit.representative[1])])
        d = np.asarray(x, dtype=float) - p
        d -= np.rint(d)
        xi, eta = inv @ d
        if abs(xi) >= self.radius_s or abs(eta) >= self.radius_u:
            return 0.0
        roof_c = float(self.model.roof.c0)
        taper = (
            math.cos(math.pi * xi / (2 * self.radius_s)) ** 4
            * math.cos(math.pi * eta / (2 * self.radius_u)) ** 4
            * math.sin(math.pi * (s / roof_c)) ** 2
        )
        return self.c0 * xi * taper

    def _rho_grad(self, x, s):
        """(rho, grad_x rho, d rho/ds) by closed-form differentiation."""
        frame, inv, _ = self._frame()
        p = np.array([float(self.anchor.base_orbit.representative[0]), float(self.anchor.base_orbit.representative[1])])
        d = np.asarray(x, dtype=float) - p
        d -= np.rint(d)
        xi, eta = inv @ d
        if abs(xi) >= self.radius_s or abs(eta) >= self.radius_u:
            return 0.0, np.zeros(2), 0.0
        roof_c = float(self.model.roof.c0)
        cs = math.cos(math.pi * xi / (2 * self.radius_s))
        ss = math.sin(math.pi * xi / (2 * self.radius_s))
        cu = math.cos(math.pi * eta / (2 * self.radius_u))
        su = math.sin(math.pi * eta / (2 * self.radius_u))
        w = math.sin(math.pi * s / roof_c) ** 2
        dw = 2 * math.sin(math.pi * s / roof_c) * math.cos(math.pi * s / roof_c) * math.pi / roof_c
        val = self.c0 * xi * cs**4 * cu**4 * w
        d_xi = self.c0 * (cs**4 - xi * 4 * cs**3 * ss * math.pi / (2 * self.radius_s)) * cu**4 * w
        d_eta = self.c0 * xi * cs**4 * (-4 * cu**3 * su * math.pi / (2 * self.radius_u)) * w
        grad = inv.T @ np.array([d_xi, d_eta])
        d_s = self.c0 * xi * cs**4 * cu**4 * dw
        return val, grad, d_s

    def rhs(self, state):
        """(x1', x2', s') for the flow X + rho S (S = stable direction)."""
        _, _, e_s = self._frame()
        r = self.rho(state[:2], state[2])
        return np.array([r * e_s[0], r * e_s[1], 1.0])

    def rhs_var(self, state, m):
        """Variational right-hand side: dM/dt = J M."""
        _, _, e_s = self._frame()
        _, grad, d_s = self._rho_grad(state[:2], state[2])
        j = np.zeros((3, 3))
        j[0, 0:2] = e_s[0] * grad
        j[1, 0:2] = e_s[1] * grad
        j[0, 2] = e_s[0] * d_s
        j[1, 2] = e_s[1] * d_s
        return j @ m


def perturb_along_stable(model: FlowModel, anchor: FlowPeriodicOrbit, c0: float, **kw) -> PerturbedFlow:
    """The flow X + rho S with a cylinder bump at the anchor orbit."""
    pflow = PerturbedFlow(model=model, anchor=anchor, c0=float(c0), **kw)
    if abs(c0) > 0.2:
        raise ValueError("bump amplitude outside the admissibility budget")
    return pflow


# ---------------------------------------------------------------------------
# integration with roof-crossing events


_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0]
_DP_B4 = [5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
_DP_C = [0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1]


def _dp54_step(f, y, h):
    k = []
    for i in range(7):
        yi = y.copy()
        for j, a in enumerate(_DP_A[i]):
            yi = yi + h * a * k[j]
        k.append(f(yi))
    y5 = y.copy()
    y4 = y.copy()
    for i in range(7):
        y5 = y5 + h * _DP_B5[i] * k[i]
        y4 = y4 + h * _DP_B4[i] * k[i]
    return y5, float(np.max(np.abs(y5 - y4)))


def _integrate_segment(f, y0, t_end, rtol, max_step):
    """Adaptive DP54 from t=0 to t_end (no events inside)."""
    t = 0.0
    y = y0
    h = min(max_step, t_end if t_end > 0 else max_step)
    while t < t_end - 1e-15:
        h = min(h, t_end - t)
        y_new, err = _dp54_step(f, y, h)
        scale = rtol * max(1.0, float(np.max(np.abs(y))))
        if err <= scale or h <= 1e-13:
            t += h
            y = y_new
            if err > 0:
                h = min(max_step, h * min(4.0, 0.9 * (scale / err) ** 0.2))
        else:
            h = max(1e-13, h * max(0.1, 0.9 * (scale / err) ** 0.2))
    return y


def integrate_flow(pflow: PerturbedFlow, state0, t_total: float, variational: bool = False):
    """Flow the suspension state (x1, x2, s) for time t_total, handling roof
    crossings by the gluing map (and its derivative when variational)."""
    model = pflow.model
    roof_c = float(model.roof.c0)
    a = np.array(model.base.linear, dtype=float)

    state = np.asarray(state0, dtype=float).copy()
    m = np.eye(3)

    def f_plain(y):
        return pflow.rhs(y)

    def f_full(y):
        return np.concatenate([pflow.rhs(y[:3]), pflow.rhs_var(y[:3], y[3:].reshape(3, 3)).ravel()])

    if t_total >= 0:
        remaining = float(t_total)
        while remaining > 1e-14:
            # s' = 1 exactly: the next roof crossing happens after roof_c - s
            t_cross = roof_c - state[2]
            t_seg = min(remaining, t_cross)
            if variational:
                y = np.concatenate([state, m.ravel()])
                y = _integrate_segment(f_full, y, t_seg, pflow.rtol, pflow.max_step)
                state, m = y[:3], y[3:].reshape(3, 3)
            else:
                state = _integrate_segment(f_plain, state, t_seg, pflow.rtol, pflow.max_step)
            remaining -= t_seg
            if remaining > 1e-14 or abs(state[2] - roof_c) < 1e-13:
                if abs(state[2] - roof_c) < 1e-9:
                    # gluing: (x, roof) -> (f x, 0); derivative [[A, 0], [0, 1]]
                    state[:2] = (a @ state[:2]) % 1.0
                    state[2] = 0.0
                    g = np.eye(3)
                    g[:2, :2] = a
                    m = g @ m
        return (state, m) if variational else state

    # backward: integrate the reversed field, gluing down through s = 0
    a_inv = np.linalg.inv(a)

    def f_back(y):
        out = pflow.rhs(y[:3]) if variational else pflow.rhs(y)
        if variational:
            return -np.concatenate([out, pflow.rhs_var(y[:3], y[3:].reshape(3, 3)).ravel()])
        return -out

    remaining = float(-t_total)
    while remaining > 1e-14:
        t_cross = state[2]
        t_seg = min(remaining, t_cross) if t_cross > 1e-13 else 0.0
        if t_seg > 0:
            if variational:
                y = np.concatenate([state, m.ravel()])
                y = _integrate_segment(f_back, y, t_seg, pflow.rtol, pflow.max_step)
                state, m = y[:3], y[3:].reshape(3, 3)
            else:
                state = _integrate_segment(f_back, state, t_seg, pflow.rtol, pflow.max_step)
            remaining -= t_seg
        if remaining > 1e-14:
            # inverse gluing: (x, 0) -> (f^{-1} x, roof)
            state[:2] = (a_inv @ state[:2]) % 1.0
            state[2] = roof_c
            g = np.eye(3)
            g[:2, :2] = a_inv
            m = g @ m
    return (state, m) if variational else state


@dataclass(frozen=True)
class ContinuedOrbit:
    period: float
    log_mu: float
    log_lambda: float
    point: tuple


def continue_periodic_orbit(pflow: PerturbedFlow, seed: FlowPeriodicOrbit) -> ContinuedOrbit:
    """Newton on the Poincare return of the section {s = 0}, with monodromy
    from the variational equations; returns the period and both nontrivial
    Floquet exponents."""
    n = seed.base_orbit.period_N
    roof_c = float(pflow.model.roof.c0)
    x = np.array(
        [float(seed.base_orbit.representative[0]), float(seed.base_orbit.representative[1])]
    )
    period = n * roof_c  # s' = 1 and the perturbation has no fiber component
    for _ in range(60):
        state, m = integrate_flow(pflow, np.array([x[0], x[1], 0.0]), period, variational=True)
        g = (state[:2] - x + 0.5) % 1.0 - 0.5
        dp = m[:2, :2]
        jac = dp - np.eye(2)
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        dx = np.array(
            [
                (jac[1, 1] * g[0] - jac[0, 1] * g[1]) / det,
                (-jac[1, 0] * g[0] + jac[0, 0] * g[1]) / det,
            ]
        )
        x = (x - dx) % 1.0
        if np.max(np.abs(dx)) < 5e-13:
            break
    else:
        raise RuntimeError(f"Poincare Newton failed for {seed.base_orbit.symbolic_id}")
    state, m = integrate_flow(pflow, np.array([x[0], x[1], 0.0]), period, variational=True)
    dp = m[:2, :2]
    tr = dp[0, 0] + dp[1, 1]
    det = dp[0, 0] * dp[1, 1] - dp[0, 1] * dp[1, 0]
    disc = tr * tr - 4 * det
    if disc <= 0:
        raise RuntimeError("non-hyperbolic continued orbit")
    lam = (tr + math.sqrt(disc)) / 2
    mu = (tr - math.sqrt(disc)) / 2
    if not (0 < mu < 1 < lam):
        raise RuntimeError("continued orbit lost hyperbolic ordering")
    return ContinuedOrbit(
        period=period, log_mu=math.log(mu), log_lambda=math.log(lam), point=(x[0], x[1])
    )


def anchor_stable_factor_oracle(pflow: PerturbedFlow) -> float:
    """Closed form for the anchor's stable-multiplier increase: the bump is
    c0 * xi * tapers, so along the anchor (xi = 0) the variational flow
    multiplies the stable direction by exp(c0 * integral of the fiber
    taper) = exp(c0 * roof / 2) per lap."""
    roof_c = float(pflow.model.roof.c0)
    return math.exp(pflow.c0 * roof_c / 2)


# ---------------------------------------------------------------------------
# roof time-change near a homoclinic crossing


def roof_timechange_perturbation(model: FlowModel, anchor: FlowPeriodicOrbit, c0, center, width=Fraction(1, 8), power: int = 6, axis: int = 0) -> FlowModel:
    """A localized trigonometric strip bump added to the roof.

    The bump is c0 * cos^{2 power}(pi (x_axis - center) / (2*width))-style:
    concretely c0 * [ (1 + cos(2 pi (x - center) w_scale)) / 2 ]^power as a
    closed-form trig polynomial, effectively supported on a strip of half
    width `width` about the center line and placed by the caller near the
    first preimage of a homoclinic crossing (offset so the stable-directional
    derivative is nonzero there). Roof positivity is re-certified.
    """
    center = Fraction(center)
    c0 = Fraction(c0)
    if c0 == 0:
        return model
    # (1 + cos theta)^P / 2^P expanded in multiples of theta = 2 pi (x - c);
    # the effective strip half-width scales like 1/sqrt(power)
    coeffs = _cos_power_coeffs(power)
    terms = list(model.roof.terms)
    wave = (1, 0) if axis == 0 else (0, 1)
    for j, cj in enumerate(coeffs):
        if j == 0:
            # constant part folds into c0 of the roof
            continue
        terms.append(
            RoofTerm(
                wave=(wave[0] * j, wave[1] * j),
                coeff=c0 * cj,
                kind="cos",
                phase=center * j,
            )
        )
    new_roof = Roof(
        c0=model.roof.c0 + c0 * _cos_power_coeffs(power)[0],
        terms=tuple(terms),
        logdet_coeff=model.roof.logdet_coeff,
    )
    return FlowModel(base=model.base, roof=new_roof, precision_bits=model.precision_bits)


def _cos_power_coeffs(power: int):
    """[(1 + cos t)/2]^P = sum_j c_j cos(j t) with exact rational c_j."""
    from math import comb

    p2 = Fraction(1, 4 ** power)
    coeffs = [Fraction(comb(2 * power, power)) * p2]
    for j in range(1, power + 1):
        coeffs.append(2 * Fraction(comb(2 * power, power - j)) * p2)
    return coeffs


_ = replace
