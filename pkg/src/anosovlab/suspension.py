"""Suspension flows over hyperbolic torus maps.

The flow lives on (T^2 x R) / ((x, r(x)) ~ (f(x), 0)) and moves at unit
speed in the fiber. Periods of periodic orbits are Birkhoff sums of the roof
over base cycles, computed with exact accumulation at a configurable
significand width. On top of the flow model this module builds:

  * strong stable/unstable manifold height series: the fiber offset that
    places a base-leaf point on the flow's strong manifold through a given
    point, with a-priori geometric truncation bounds;
  * crude transverse sections at periodic orbits, h(xi, eta) =
    h_s(xi) + h_u(eta), whose axes lie exactly on the strong manifolds in
    the local Koenigs coordinates of the base return map;
  * return (hitting) times of the flow from a section to itself, as values
    and as truncated Taylor jets, with flatness along both axes serving as a
    built-in correctness check.

Sign convention: internally h_s, h_u are the genuine fiber heights of the
strong manifolds over the zero section (h_s(xi) = +sum_k [r(f^k y) - r(f^k p)],
h_u(eta) = -sum_{k>=1} [r(f^-k y) - r(f^-k p)]); the public
strong_manifold_height reports depth below the zero section (the negative),
matching the series stated in its contract. Return times do not depend on the
reporting convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

from .jets import TJet
from .manifolds import ManifoldParam, manifold_param
from .mparith import bits, exact_sum, to_mpf
from .torus_maps import (
    BaseMap,
    BasePeriodicOrbit,
    Multipliers,
    ReversedMap,
    orbit_cycle,
    orbit_multipliers,
    refine_orbit_mp,
)


# ---------------------------------------------------------------------------
# roofs


@dataclass(frozen=True)
class RoofTerm:
    """coeff * trig(2 pi (wave . x - phase))."""

    wave: tuple[int, int]
    coeff: Fraction
    kind: str = "cos"  # "sin" | "cos"
    phase: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in ("sin", "cos"):
            raise ValueError("roof term kind must be 'sin' or 'cos'")
        object.__setattr__(self, "wave", (int(self.wave[0]), int(self.wave[1])))
        object.__setattr__(self, "coeff", Fraction(self.coeff))
        object.__setattr__(self, "phase", Fraction(self.phase))


@dataclass(frozen=True)
class Roof:
    """r(x) = c0 + sum coeff * trig(2 pi wave . x) + logdet_coeff * log det Df(x).

    The log-det term realizes the dissipative-suspension recipe; it vanishes
    identically over area-preserving bases. pulled_back marks the reversed-
    model roof r o f^{-1}, evaluated at the preimage under the stored base.
    """

    c0: Fraction
    terms: tuple[RoofTerm, ...] = ()
    logdet_coeff: Fraction = Fraction(0)
    pulled_back: bool = False

    def __post_init__(self):
        object.__setattr__(self, "c0", Fraction(self.c0))
        object.__setattr__(self, "logdet_coeff", Fraction(self.logdet_coeff))
        object.__setattr__(
            self,
            "terms",
            tuple(t if isinstance(t, RoofTerm) else RoofTerm(*t) for t in self.terms),
        )

    @property
    def is_constant(self) -> bool:
        return not self.terms and self.logdet_coeff == 0


def unit_roof() -> Roof:
    return Roof(c0=Fraction(1))


def _det_interval(base) -> tuple[float, float]:
    """Closed-form interval for det Df over the torus.

    det(A + eps sum_t B_t trig_t) = det A + eps sum tr(adj A B_t) trig_t +
    eps^2 sum_{t<t'} mixed(B_t, B_t') trig_t trig_t' (each B_t is rank one,
    so the diagonal eps^2 terms vanish)."""
    if base.is_linear:
        d = float(base.det_linear)
        return d, d
    adj = ((base.linear[1][1], -base.linear[0][1]), (-base.linear[1][0], base.linear[0][0]))
    eps = abs(float(base.epsilon))
    b1 = 0.0
    mats = []
    for t in base.terms:
        w = (float(t.wave[0]), float(t.wave[1]))
        a = (float(t.amp[0]), float(t.amp[1]))
        contr = abs(
            w[0] * (adj[0][0] * a[0] + adj[0][1] * a[1])
            + w[1] * (adj[1][0] * a[0] + adj[1][1] * a[1])
        )
        b1 += 2 * math.pi * contr
        mats.append(
            (
                (2 * math.pi * a[0] * w[0], 2 * math.pi * a[0] * w[1]),
                (2 * math.pi * a[1] * w[0], 2 * math.pi * a[1] * w[1]),
            )
        )
    b2 = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            bi, bj = mats[i], mats[j]
            b2 += abs(
                bi[0][0] * bj[1][1] + bi[1][1] * bj[0][0]
                - bi[0][1] * bj[1][0] - bi[1][0] * bj[0][1]
            )
    d0 = float(base.det_linear)
    slack = eps * b1 + eps * eps * b2
    return d0 - slack, d0 + slack


def certify_roof_positive(roof: Roof, base) -> tuple[bool, float]:
    """Coefficient-sum lower bound for min r; returns (ok, bound)."""
    fwd = base.forward if isinstance(base, ReversedMap) else base
    lo = float(roof.c0) - sum(abs(float(t.coeff)) for t in roof.terms)
    if roof.logdet_coeff != 0:
        dlo, dhi = _det_interval(fwd)
        if dlo <= 0:
            return False, -math.inf
        k = abs(float(roof.logdet_coeff))
        lo -= k * max(abs(math.log(dlo)), abs(math.log(dhi)))
    return lo > 0, lo


def det_df(base, x):
    """det Df(x) for mpf pairs or TJet pairs, closed form."""
    if isinstance(base, ReversedMap):
        pre = base.apply_lift(x)
        det = det_df(base.forward, pre)
        return det.inv() if isinstance(det, TJet) else 1 / det
    a = base.linear
    jetlike = isinstance(x[0], TJet) or isinstance(x[1], TJet)
    if base.is_linear:
        return x[0] * 0 + base.det_linear if jetlike else mp.mpf(base.det_linear)
    d00 = x[0] * 0 + a[0][0] if jetlike else mp.mpf(a[0][0])
    d01 = x[0] * 0 + a[0][1] if jetlike else mp.mpf(a[0][1])
    d10 = x[0] * 0 + a[1][0] if jetlike else mp.mpf(a[1][0])
    d11 = x[0] * 0 + a[1][1] if jetlike else mp.mpf(a[1][1])
    eps = to_mpf(base.epsilon)
    two_pi = 2 * mp.pi
    for t in base.terms:
        phase = (x[0] * (2 * t.wave[0]) + x[1] * (2 * t.wave[1])) * mp.pi
        if isinstance(phase, TJet):
            dtrig = phase.cos() if t.kind == "sin" else -phase.sin()
        else:
            dtrig = mp.cos(phase) if t.kind == "sin" else -mp.sin(phase)
        f0 = dtrig * (eps * to_mpf(t.amp[0]) * two_pi)
        f1 = dtrig * (eps * to_mpf(t.amp[1]) * two_pi)
        d00 = d00 + f0 * t.wave[0]
        d01 = d01 + f0 * t.wave[1]
        d10 = d10 + f1 * t.wave[0]
        d11 = d11 + f1 * t.wave[1]
    return d00 * d11 - d01 * d10


# ---------------------------------------------------------------------------
# flow model


@dataclass(frozen=True)
class MildCertificate:
    rho: Fraction
    margin_contract: object  # rho*log mu + log lambda (< 0 required)
    margin_expand: object  # log mu + rho*log lambda (> 0 required)


@dataclass(frozen=True)
class FlowPeriodicOrbit:
    base_orbit: BasePeriodicOrbit
    period_T: object
    multipliers: Multipliers
    dissipation_class: str  # contracting | preserving | expanding
    mild_dissipation: MildCertificate | None


@dataclass(frozen=True)
class FlowModel:
    base: object  # BaseMap or ReversedMap
    roof: Roof
    precision_bits: int = 256

    def __post_init__(self):
        ok, bound = certify_roof_positive(self.roof, self.base)
        if not ok:
            raise ValueError(f"roof not certified positive (lower bound {bound:.4g})")

    # -- roof evaluation (mpf pairs or TJet pairs) ---------------------------

    def roof_value(self, x):
        roof = self.roof
        base = self.base
        if roof.pulled_back:
            x = base.apply_lift(x)
            base = base.forward
        jetlike = isinstance(x[0], TJet) or isinstance(x[1], TJet)
        acc = x[0] * 0 + to_mpf(roof.c0) if jetlike else to_mpf(roof.c0)
        for t in roof.terms:
            phase = (x[0] * (2 * t.wave[0]) + x[1] * (2 * t.wave[1]) - 2 * to_mpf(t.phase)) * mp.pi
            if isinstance(phase, TJet):
                w = phase.sin() if t.kind == "sin" else phase.cos()
            else:
                w = mp.sin(phase) if t.kind == "sin" else mp.cos(phase)
            acc = acc + w * to_mpf(t.coeff)
        if roof.logdet_coeff != 0:
            det = det_df(base, x)
            ld = det.log() if isinstance(det, TJet) else mp.log(det)
            acc = acc + ld * to_mpf(roof.logdet_coeff)
        return acc

    def roof_dir_deriv(self, x, v):
        """Directional derivative of the roof along v at an mpf point."""
        jx = TJet.var_x(to_mpf(x[0]), 1, 0)
        jx.c[1][0] = to_mpf(v[0])
        jy = TJet.var_x(to_mpf(x[1]), 1, 0)
        jy.c[1][0] = to_mpf(v[1])
        return self.roof_value([jx, jy]).coeff(1, 0)

    # -- periods -------------------------------------------------------------

    def flow_period(self, base_orbit: BasePeriodicOrbit, precision_bits: int | None = None):
        pb = precision_bits or self.precision_bits
        with bits(pb):
            cyc = orbit_cycle(self.base, base_orbit, pb)
            return exact_sum(self.roof_value((to_mpf(p[0]), to_mpf(p[1]))) for p in cyc)

    def birkhoff(self, points, precision_bits: int | None = None):
        pb = precision_bits or self.precision_bits
        with bits(pb):
            return exact_sum(self.roof_value((to_mpf(p[0]), to_mpf(p[1]))) for p in points)

    def flow_orbit(self, base_orbit: BasePeriodicOrbit, rho: Fraction = Fraction(5, 4)) -> FlowPeriodicOrbit:
        pb = self.precision_bits
        with bits(pb):
            period = self.flow_period(base_orbit, pb)
            mults = orbit_multipliers(self.base, base_orbit, pb)
            log_jac = mults.log_jacobian
            area_exact = self.base.area_preserving_exactly
            if area_exact and abs(log_jac) < mp.mpf("1e-20"):
                cls = "preserving"
            elif log_jac > 0:
                cls = "expanding"
            else:
                cls = "contracting"
            rho_m = to_mpf(rho)
            m_contract = rho_m * mults.log_mu + mults.log_lambda
            m_expand = mults.log_mu + rho_m * mults.log_lambda
            mild = (
                MildCertificate(rho=rho, margin_contract=m_contract, margin_expand=m_expand)
                if (m_contract < 0 and m_expand > 0)
                else None
            )
            return FlowPeriodicOrbit(
                base_orbit=base_orbit,
                period_T=period,
                multipliers=mults,
                dissipation_class=cls,
                mild_dissipation=mild,
            )


def make_suspension(base, roof: Roof, precision_bits: int = 256) -> FlowModel:
    return FlowModel(base=base, roof=roof, precision_bits=precision_bits)


def time_reversed(model: FlowModel) -> FlowModel:
    """The model with base f^{-1} and roof r o f^{-1}.

    Linear bases reverse in closed form (integer inverse matrix, wave vectors
    pushed through A^{-T}, log-det coefficient negated); perturbed bases get
    a Newton-backed ReversedMap with the roof marked pulled_back.
    """
    base = model.base
    if isinstance(base, ReversedMap):
        orig = Roof(
            c0=model.roof.c0,
            terms=model.roof.terms,
            logdet_coeff=model.roof.logdet_coeff,
            pulled_back=False,
        )
        return FlowModel(base=base.forward, roof=orig, precision_bits=model.precision_bits)
    if base.is_linear:
        a = base.linear
        det = base.det_linear
        inv = ((a[1][1] * det, -a[0][1] * det), (-a[1][0] * det, a[0][0] * det))
        rev_base = BaseMap(linear=inv)
        new_terms = tuple(
            RoofTerm(
                wave=(
                    inv[0][0] * t.wave[0] + inv[1][0] * t.wave[1],
                    inv[0][1] * t.wave[0] + inv[1][1] * t.wave[1],
                ),
                coeff=t.coeff,
                kind=t.kind,
            )
            for t in model.roof.terms
        )
        roof = Roof(c0=model.roof.c0, terms=new_terms, logdet_coeff=-model.roof.logdet_coeff)
        return FlowModel(base=rev_base, roof=roof, precision_bits=model.precision_bits)
    rev = ReversedMap(base, model.precision_bits)
    roof = Roof(
        c0=model.roof.c0,
        terms=model.roof.terms,
        logdet_coeff=model.roof.logdet_coeff,
        pulled_back=True,
    )
    return FlowModel(base=rev, roof=roof, precision_bits=model.precision_bits)


# ---------------------------------------------------------------------------
# crude sections


@dataclass
class SectionChart:
    model: FlowModel
    anchor_orbit: BasePeriodicOrbit
    anchor_cycle: list  # lift points (mpf pairs), one base period
    w_s: ManifoldParam
    w_u: ManifoldParam
    m_terms: int  # height-series truncation, in return-map steps
    tail_bound_s: object
    tail_bound_u: object
    domain_radius: object
    drift: tuple  # F(p) - p for the lifted return
    cross_coeff: object = 0  # optional extra delta * xi * eta in the height
    precision_bits: int = 256
    _h_s_prime_origin: object = None

    # -- geometry ------------------------------------------------------------

    @property
    def anchor(self):
        return self.anchor_cycle[0]

    @property
    def period_steps(self) -> int:
        return len(self.anchor_cycle)

    def embed(self, xi, eta):
        """Base lift point of chart coordinates (xi, eta)."""
        ws = self.w_s.eval(xi)
        wu = self.w_u.eval(eta)
        return [ws[0] + wu[0] - self.anchor[0], ws[1] + wu[1] - self.anchor[1]]

    def d_embed(self, xi, eta):
        ds = self.w_s.derivative(xi)
        du = self.w_u.derivative(eta)
        return [[ds[0], du[0]], [ds[1], du[1]]]

    def chart_coords(self, point, seed=(0, 0)):
        """Invert embed by Newton (scalar)."""
        x = [to_mpf(seed[0]), to_mpf(seed[1])]
        tol = mp.mpf(2) ** (-self.precision_bits - 4)
        for _ in range(160):
            e = self.embed(x[0], x[1])
            rx = e[0] - to_mpf(point[0])
            ry = e[1] - to_mpf(point[1])
            if abs(rx) + abs(ry) < tol:
                return (x[0], x[1])
            d = self.d_embed(x[0], x[1])
            det = d[0][0] * d[1][1] - d[0][1] * d[1][0]
            x[0] -= (d[1][1] * rx - d[0][1] * ry) / det
            x[1] -= (-d[1][0] * rx + d[0][0] * ry) / det
        raise RuntimeError("chart inversion did not converge")

    # -- heights (internal fiber-height sign) ---------------------------------

    def height_s(self, xi):
        return self._height_series(self.w_s, xi, stable=True)

    def height_u(self, eta):
        return self._height_series(self.w_u, eta, stable=False)

    def height(self, xi, eta):
        h = self.height_s(xi) + self.height_u(eta)
        if self.cross_coeff != 0:
            h = h + (xi * eta) * to_mpf(self.cross_coeff)
        return h

    def h_s_prime_origin(self):
        if self._h_s_prime_origin is None:
            j = TJet.var_x(mp.mpf(0), 1, 0)
            self._h_s_prime_origin = self.height_s(j).partial(1, 0)
        return self._h_s_prime_origin

    def _height_series(self, w: ManifoldParam, t, stable: bool):
        if isinstance(t, TJet) and (t.nx + t.ny) > 0 and not _is_plain_var(t):
            order = t.nx + t.ny
            derivs = self._height_derivs(w, t.value, order, stable)
            return t.apply_series(derivs)
        return self._height_direct(w, t, stable)

    def _height_derivs(self, w, t0, order, stable):
        j = TJet.var_x(to_mpf(t0), order, 0)
        val = self._height_direct(w, j, stable)
        return [val.partial(k, 0) for k in range(order + 1)]

    def _height_direct(self, w: ManifoldParam, t, stable: bool):
        """Sum the height series at a scalar or single-variable jet argument.

        Stable:   sum_{k>=0} [r(f^k W(t)) - r(f^k p)], k = m*N + i, via
                  f^k W(t) = f^i(W(mu^m t)).
        Unstable: -sum_{k>=1} [r(f^-k W(t)) - r(f^-k p)], k = m*N - i, via
                  f^-k W(t) = f^i(W(lambda^-m t)).
        """
        model = self.model
        n = self.period_steps
        rho = w.rho
        acc = t * 0 if isinstance(t, TJet) else mp.mpf(0)
        for m_idx in range(self.m_terms):
            if stable:
                arg = t * rho ** m_idx
            else:
                arg = t * rho ** (-(m_idx + 1))
            pt = w.eval(arg)
            for i in range(n):
                ref = self.anchor_cycle[i]
                term = model.roof_value(pt) - model.roof_value(ref)
                acc = acc + term if stable else acc - term
                if i < n - 1:
                    pt = model.base.apply_lift(pt)
        return acc

    def tail_bound(self, branch: str):
        return self.tail_bound_s if branch == "s" else self.tail_bound_u

    # -- return map and hitting times ----------------------------------------

    def return_chart(self, xi, eta):
        """Chart coordinates of the base return of (xi, eta) (scalar)."""
        z = self.embed(to_mpf(xi), to_mpf(eta))
        for _ in range(self.period_steps):
            z = list(self.model.base.apply_lift(z))
        target = (z[0] - self.drift[0], z[1] - self.drift[1])
        seed = (self.w_s.rho * to_mpf(xi), self.w_u.rho * to_mpf(eta))
        return self.chart_coords(target, seed=seed)

    def return_time(self, xi, eta):
        """Flow time from the section point over (xi, eta) back to the section."""
        model = self.model
        xi = to_mpf(xi)
        eta = to_mpf(eta)
        z = self.embed(xi, eta)
        rn = mp.mpf(0)
        for _ in range(self.period_steps):
            rn += model.roof_value((z[0], z[1]))
            z = list(model.base.apply_lift(z))
        target = (z[0] - self.drift[0], z[1] - self.drift[1])
        seed = (self.w_s.rho * xi, self.w_u.rho * eta)
        u = self.chart_coords(target, seed=seed)
        return rn + self.height(u[0], u[1]) - self.height(xi, eta)

    def return_time_jet(self, xi0, eta0, nx: int, ny: int) -> TJet:
        """Truncated Taylor expansion of the hitting time at (xi0, eta0),
        assembled with jet arithmetic throughout."""
        model = self.model
        xi_j = TJet.var_x(to_mpf(xi0), nx, ny)
        eta_j = TJet.var_y(to_mpf(eta0), nx, ny)
        z = self.embed(xi_j, eta_j)
        rn = z[0] * 0
        for _ in range(self.period_steps):
            rn = rn + model.roof_value(z)
            z = model.base.apply_lift(z)
        target = [z[0] - self.drift[0], z[1] - self.drift[1]]
        seed_vals = self.chart_coords(
            (target[0].value, target[1].value),
            seed=(self.w_s.rho * to_mpf(xi0), self.w_u.rho * to_mpf(eta0)),
        )
        u = self._chart_coords_jets(target, seed_vals, nx, ny)
        h_next = self.height_s(u[0]) + self.height_u(u[1])
        h_here = self.height_s(xi_j) + self.height_u(eta_j)
        if self.cross_coeff != 0:
            h_next = h_next + (u[0] * u[1]) * to_mpf(self.cross_coeff)
            h_here = h_here + (xi_j * eta_j) * to_mpf(self.cross_coeff)
        return rn + h_next - h_here

    def _chart_coords_jets(self, target, seed_vals, nx, ny):
        u = [TJet.const(seed_vals[0], nx, ny), TJet.const(seed_vals[1], nx, ny)]
        d = self.d_embed(seed_vals[0], seed_vals[1])
        det = d[0][0] * d[1][1] - d[0][1] * d[1][0]
        for _ in range(nx + ny + 3):
            e = self.embed(u[0], u[1])
            rx = e[0] - target[0]
            ry = e[1] - target[1]
            u[0] = u[0] - (rx * d[1][1] - ry * d[0][1]) * (1 / det)
            u[1] = u[1] - (ry * d[0][0] - rx * d[1][0]) * (1 / det)
        return u

    def d1_return_time_on_unstable_axis(self, eta):
        """partial_xi tau at (0, eta) via the differentiated series.

        tau = R_N(embed) + H(return) - H, so the xi-derivative on the axis is
        the Birkhoff gradient along the transported stable direction plus the
        height slopes contracted with the return differential.
        """
        model = self.model
        eta = to_mpf(eta)
        s0 = self.w_s.derivative(mp.mpf(0))
        y = self.embed(mp.mpf(0), eta)
        jx = TJet.var_x(y[0], 1, 0)
        jx.c[1][0] = s0[0]
        jy = TJet.var_x(y[1], 1, 0)
        jy.c[1][0] = s0[1]
        pt = [jx, jy]
        rn = pt[0] * 0
        for _ in range(self.period_steps):
            rn = rn + model.roof_value(pt)
            pt = model.base.apply_lift(pt)
        term1 = rn.coeff(1, 0)
        df_s0 = (pt[0].coeff(1, 0), pt[1].coeff(1, 0))
        eta_next = self.w_u.rho * eta
        d = self.d_embed(mp.mpf(0), eta_next)
        det = d[0][0] * d[1][1] - d[0][1] * d[1][0]
        pi1 = (d[1][1] * df_s0[0] - d[0][1] * df_s0[1]) / det
        pi2 = (-d[1][0] * df_s0[0] + d[0][0] * df_s0[1]) / det
        hs0 = self.h_s_prime_origin()
        ju = TJet.var_x(eta_next, 1, 0)
        hu_prime_next = self.height_u(ju).partial(1, 0)
        delta = to_mpf(self.cross_coeff)
        term2 = (hs0 + delta * eta_next) * pi1 + hu_prime_next * pi2
        term3 = hs0 + delta * eta
        return term1 + term2 - term3

    def verify_axis_contraction(self, xi, steps: int = 20):
        """Flowing the (xi, 0) section point forward keeps it on the strong
        stable manifold: base distance and fiber mismatch both contract.

        Returns the list of (base_distance, fiber_mismatch) per return step.
        """
        model = self.model
        xi = to_mpf(xi)
        pt = self.w_s.eval(xi)
        h = self.height_s(xi)
        out = []
        acc_pt = mp.mpf(0)
        acc_ref = mp.mpf(0)
        cur = list(pt)
        ref = list(self.anchor)
        for _ in range(steps):
            for _ in range(self.period_steps):
                acc_pt += model.roof_value(cur)
                acc_ref += model.roof_value(ref)
                cur = list(model.base.apply_lift(cur))
                ref = list(model.base.apply_lift(ref))
            base_dist = mp.sqrt((cur[0] - ref[0]) ** 2 + (cur[1] - ref[1]) ** 2)
            fiber_mismatch = abs(h - (acc_pt - acc_ref))
            out.append((base_dist, fiber_mismatch))
        return out


def _is_plain_var(t: TJet) -> bool:
    """True when the jet is just (const + one first-order variable): the
    direct series path handles it without recomposition."""
    nonzero = [
        (i, j)
        for i in range(t.nx + 1)
        for j in range(t.ny + 1)
        if (i, j) != (0, 0) and t.c[i][j] != 0
    ]
    return nonzero in ([(1, 0)], [(0, 1)], [])


def section_at(model: FlowModel, anchor: BasePeriodicOrbit, order: int = 20, cross_coeff=0) -> SectionChart:
    """Crude section chart at a periodic orbit of the base map.

    The manifold parametrizations are local polynomials of the given order
    with certified trust radii; evaluations beyond the radius go through the
    dynamics (exact extension), so the chart domain itself is an O(1)
    constant.
    """
    pb = model.precision_bits
    with bits(pb):
        rep = refine_orbit_mp(model.base, anchor, pb)
        cycle = [(to_mpf(rep[0]), to_mpf(rep[1]))]
        for _ in range(anchor.period_N - 1):
            nxt = model.base.apply_lift(cycle[-1])
            cycle.append((to_mpf(nxt[0]), to_mpf(nxt[1])))
        w_s = manifold_param(model.base, cycle, "s", pb, order=order)
        w_u = manifold_param(model.base, cycle, "u", pb, order=order)
        n = anchor.period_N
        mu_abs = abs(w_s.rho)
        lam_abs = abs(w_u.rho)
        lip = _roof_grad_bound(model)
        m_s = int(mp.ceil((pb + 24) * mp.log(2) / (-n * mp.log(mu_abs)))) + 2
        m_u = int(mp.ceil((pb + 24) * mp.log(2) / (n * mp.log(lam_abs)))) + 2
        m_terms = max(m_s, m_u)
        diam = mp.mpf(3)
        tail_s = lip * diam * mu_abs ** (n * m_terms) / (1 - mu_abs ** n) * n
        tail_u = lip * diam * lam_abs ** (-n * m_terms) / (1 - lam_abs ** (-n)) * n
        if w_s.trust_radius <= 0 or w_u.trust_radius <= 0:
            raise ValueError("section domain radius collapsed below threshold")
        radius = mp.mpf(4)
        cur = list(cycle[0])
        for _ in range(n):
            cur = list(model.base.apply_lift(cur))
        drift = (cur[0] - cycle[0][0], cur[1] - cycle[0][1])
        return SectionChart(
            model=model,
            anchor_orbit=anchor,
            anchor_cycle=cycle,
            w_s=w_s,
            w_u=w_u,
            m_terms=m_terms,
            tail_bound_s=tail_s,
            tail_bound_u=tail_u,
            domain_radius=radius,
            drift=drift,
            cross_coeff=cross_coeff,
            precision_bits=pb,
        )


def _roof_grad_bound(model: FlowModel) -> mp.mpf:
    roof = model.roof
    base = model.base.forward if isinstance(model.base, ReversedMap) else model.base
    b = mp.mpf(0)
    for t in roof.terms:
        b += abs(to_mpf(t.coeff)) * 2 * mp.pi * (abs(t.wave[0]) + abs(t.wave[1]))
    if roof.logdet_coeff != 0:
        dlo, _dhi = _det_interval(base)
        num = mp.mpf(0)
        eps = abs(to_mpf(base.epsilon))
        for t in base.terms:
            num += (
                eps
                * (2 * mp.pi) ** 2
                * max(abs(to_mpf(t.amp[0])), abs(to_mpf(t.amp[1])))
                * (abs(t.wave[0]) + abs(t.wave[1])) ** 2
                * 4
            )
        b += abs(to_mpf(roof.logdet_coeff)) * num / to_mpf(dlo)
    return b if b > 0 else mp.mpf(1)


# ---------------------------------------------------------------------------
# public height op (reported with the depth sign) and hitting-time jets


def strong_manifold_height(model: FlowModel, anchor, branch: str, offset, derivative_order: int = 0):
    """Height of the strong-manifold leaf point at a stable/unstable offset
    from a periodic anchor, with jets of the requested order.

    Returns (value, jets, tail_bound); jets[k] is the k-th derivative at the
    offset. Reported sign is depth below the zero section:
    h_s(xi) = -sum_{k>=0}[r(f^k y_xi) - r(f^k p)],
    h_u(eta) = +sum_{k>=1}[r(f^-k y_eta) - r(f^-k p)].

    Anchors must be periodic orbits (linear bases accept arbitrary points,
    where the leaf is the exact eigenline).
    """
    if branch not in ("s", "u"):
        raise ValueError("branch must be 's' or 'u'")
    pb = model.precision_bits
    if isinstance(anchor, BasePeriodicOrbit):
        sec = section_at(model, anchor)
        with bits(pb):
            off = to_mpf(offset)
            if abs(off) > to_mpf(sec.domain_radius):
                raise ValueError("offset outside section domain radius")
            if derivative_order == 0:
                internal = sec.height_s(off) if branch == "s" else sec.height_u(off)
                return -internal, [-internal], sec.tail_bound(branch)
            j = TJet.var_x(off, derivative_order, 0)
            internal = sec.height_s(j) if branch == "s" else sec.height_u(j)
            jets = [-internal.partial(k, 0) for k in range(derivative_order + 1)]
            return jets[0], jets, sec.tail_bound(branch)
    if not model.base.is_linear:
        raise ValueError("perturbed bases require a periodic anchor orbit")
    with bits(pb):
        return _height_linear_point(model, anchor, branch, offset, derivative_order)


def _height_linear_point(model: FlowModel, point, branch: str, offset, derivative_order: int):
    """Direct series at an arbitrary point of a linear base."""
    log_lam, log_mu, e_u, e_s = model.base.eig_linear()
    lam = mp.e ** log_lam
    mu = mp.e ** log_mu
    e = e_s if branch == "s" else e_u
    pb = model.precision_bits
    k_max = int(mp.ceil((pb + 24) * mp.log(2) / (-mp.log(mu)))) + 2
    t = (
        TJet.var_x(to_mpf(offset), derivative_order, 0)
        if derivative_order > 0
        else to_mpf(offset)
    )
    x = (to_mpf(point[0]), to_mpf(point[1]))
    acc = t * 0 if isinstance(t, TJet) else mp.mpf(0)
    for k in range(1 if branch == "u" else 0, k_max):
        if branch == "s":
            rate = mu ** k
            base_pt = _lin_iter(model.base, x, k)
        else:
            rate = lam ** (-k)
            base_pt = _lin_iter(model.base, x, -k)
        off0 = t * (rate * e[0])
        off1 = t * (rate * e[1])
        pt = [off0 + base_pt[0], off1 + base_pt[1]]
        term = model.roof_value(pt) - model.roof_value(base_pt)
        acc = acc + term if branch == "s" else acc - term
    internal = acc
    lip = _roof_grad_bound(model)
    tail = lip * 3 * mu ** k_max / (1 - mu)
    if derivative_order == 0:
        return -internal, [-internal], tail
    jets = [-internal.partial(k, 0) for k in range(derivative_order + 1)]
    return jets[0], jets, tail


def _lin_iter(base, x, k):
    from .torus_maps import mat_pow_int

    if k >= 0:
        ak = mat_pow_int(base.linear, k)
    else:
        a = base.linear
        det = base.det_linear
        inv = ((a[1][1] * det, -a[0][1] * det), (-a[1][0] * det, a[0][0] * det))
        ak = mat_pow_int(inv, -k)
    return (
        ak[0][0] * x[0] + ak[0][1] * x[1],
        ak[1][0] * x[0] + ak[1][1] * x[1],
    )


@dataclass(frozen=True)
class HittingTimeJets:
    j_max: int
    mixed: tuple  # partial_1 partial_2^j tau at (0,0), j = 1..j_max
    d1_at_origin: object
    d2_at_origin: object
    fd_discrepancy: float


def hitting_time_jets(model: FlowModel, section: SectionChart, j_max: int) -> HittingTimeJets:
    """Mixed partials of the section return time at the anchor.

    Analytic jet arithmetic, cross-checked against central finite differences
    at step 2^(-precision/3); disagreement raises (it signals a section
    construction bug, not a tolerance issue).
    """
    if j_max > 4:
        raise ValueError("j_max must be <= 4")
    pb = model.precision_bits
    with bits(pb):
        jet = section.return_time_jet(0, 0, 1, j_max)
        mixed = tuple(jet.partial(1, j) for j in range(1, j_max + 1))
        d1 = jet.partial(1, 0)
        d2 = jet.partial(0, 1)
        h = mp.mpf(2) ** (-pb // 3)
        tpp = section.return_time(h, h)
        tpm = section.return_time(h, -h)
        tmp = section.return_time(-h, h)
        tmm = section.return_time(-h, -h)
        fd_mixed = (tpp - tpm - tmp + tmm) / (4 * h * h)
        scale = max(abs(mixed[0]), mp.mpf(1))
        disc = abs(fd_mixed - mixed[0]) / scale
        if disc > mp.mpf(2) ** (-pb // 4):
            raise RuntimeError(
                f"hitting-time jet cross-check failed: analytic {mixed[0]}, "
                f"finite-difference {fd_mixed}"
            )
        return HittingTimeJets(
            j_max=j_max,
            mixed=mixed,
            d1_at_origin=d1,
            d2_at_origin=d2,
            fd_discrepancy=float(disc),
        )


# ---------------------------------------------------------------------------
# serialization


def roof_to_json(roof: Roof) -> dict:
    return {
        "c0": str(roof.c0),
        "terms": [
            {"wave": list(t.wave), "coeff": str(t.coeff), "kind": t.kind, "phase": str(t.phase)}
            for t in roof.terms
        ],
        "logdet_coeff": str(roof.logdet_coeff),
        "pulled_back": roof.pulled_back,
    }


def roof_from_json(obj: dict) -> Roof:
    return Roof(
        c0=Fraction(obj["c0"]),
        terms=tuple(
            RoofTerm(
                wave=tuple(t["wave"]),
                coeff=Fraction(t["coeff"]),
                kind=t.get("kind", "cos"),
                phase=Fraction(t.get("phase", "0")),
            )
            for t in obj.get("terms", [])
        ),
        logdet_coeff=Fraction(obj.get("logdet_coeff", "0")),
        pulled_back=bool(obj.get("pulled_back", False)),
    )


def model_to_json(model: FlowModel) -> dict:
    from .torus_maps import map_to_json

    base = model.base
    return {
        "base": map_to_json(base.forward if isinstance(base, ReversedMap) else base),
        "base_reversed": isinstance(base, ReversedMap),
        "roof": roof_to_json(model.roof),
        "precision_bits": model.precision_bits,
    }


def model_from_json(obj: dict) -> FlowModel:
    from .torus_maps import map_from_json

    base = map_from_json(obj["base"])
    roof = roof_from_json(obj["roof"])
    if obj.get("base_reversed"):
        base = ReversedMap(base, int(obj.get("precision_bits", 256)))
    return FlowModel(base=base, roof=roof, precision_bits=int(obj.get("precision_bits", 256)))
