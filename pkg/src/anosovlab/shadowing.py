"""Homoclinic data and shadowing periodic orbits.

A homoclinic datum at a periodic anchor p consists of a lattice class
m != 0 and the intersection point q of the local unstable manifold with the
m-translate of the stable manifold, found by solving

    W_u(eta_inf) - W_s(xi_inf) = m

in the lift (exactly over the eigenvalue field for linear bases, Newton from
the linear seed otherwise). The orbit of the lift equation

    lift(f^{nN})(x) - x = m

is the unique genuine periodic orbit tracking n turns around the anchor plus
one homoclinic excursion; its flow period T_n carries the exponentially
small corrections that the asymptotics module fits. The excursion steps are
absorbed into the lift-equation normalization (N' = 0), so T_n - n T
converges to the excursion time T'.

T' itself is computed two independent ways and cross-checked: as the
relative Birkhoff series over the bi-infinite homoclinic orbit (equal to
the difference of strong-manifold heights at the homoclinic coordinates)
and as the Cauchy limit of T_n - n T.

Anchors must be lift-fixed cycles (lattice drift zero), which the canonical
experiments (fixed points at the origin) satisfy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

from .mparith import bits, to_mpf
from .suspension import FlowModel, FlowPeriodicOrbit, SectionChart, section_at
from .torus_maps import BaseMap, BasePeriodicOrbit, mat_pow_int


@dataclass
class HomoclinicDatum:
    anchor_flow: FlowPeriodicOrbit
    section: SectionChart
    lattice_class: tuple[int, int]
    eta_inf: object  # unstable Koenigs coordinate of q
    xi_inf: object  # stable Koenigs coordinate of q' (the same lift point)
    q_lift: tuple  # W_u(eta_inf), in the lift
    n0: int | None = None

    @property
    def anchor_orbit(self) -> BasePeriodicOrbit:
        return self.anchor_flow.base_orbit

    @property
    def precision_bits(self) -> int:
        return self.section.precision_bits


@dataclass
class ShadowSeries:
    hom: HomoclinicDatum
    n_values: list
    periods: list  # T_n at working precision
    orbits: list  # BasePeriodicOrbit records, for audit
    audit_distances: list  # max distance to the homoclinic pseudo-orbit

    @property
    def anchor_T(self):
        return self.hom.anchor_flow.period_T


def find_homoclinic(model: FlowModel, anchor: FlowPeriodicOrbit, lattice_class, section: SectionChart | None = None) -> HomoclinicDatum:
    """Homoclinic point of the anchor in the given lattice class."""
    m = (int(lattice_class[0]), int(lattice_class[1]))
    if m == (0, 0):
        raise ValueError("lattice class (0,0) is the anchor itself, not a homoclinic branch")
    pb = model.precision_bits
    sec = section if section is not None else section_at(model, anchor.base_orbit)
    _require_lift_fixed(sec)
    with bits(pb):
        # linear seed: a e_u - b e_s = m in the eigenbasis of the linear part
        _, _, e_u, e_s = model.base.eig_linear()
        det = e_u[0] * (-e_s[1]) - (-e_s[0]) * e_u[1]
        a = (-e_s[1] * m[0] + e_s[0] * m[1]) / det
        b = (e_u[0] * m[1] - e_u[1] * m[0]) / det
        # Newton on W_u(a) - W_s(b) - m = 0
        tol = mp.mpf(2) ** (-pb - 4)
        a = to_mpf(a)
        b = to_mpf(b)
        for _ in range(120):
            wu = sec.w_u.eval(a)
            ws = sec.w_s.eval(b)
            rx = wu[0] - ws[0] - m[0]
            ry = wu[1] - ws[1] - m[1]
            if abs(rx) + abs(ry) < tol:
                break
            du = sec.w_u.derivative(a)
            ds = sec.w_s.derivative(b)
            jdet = du[0] * (-ds[1]) - (-ds[0]) * du[1]
            da = (-ds[1] * rx + ds[0] * ry) / jdet
            db = (-du[1] * rx + du[0] * ry) / jdet
            a -= da
            b -= db
        else:
            raise RuntimeError("homoclinic Newton did not converge")
        if abs(a) < tol ** mp.mpf("0.5") or abs(b) < tol ** mp.mpf("0.5"):
            raise ValueError(
                f"degenerate lattice class {m}: homoclinic coordinates vanish"
            )
        q = sec.w_u.eval(a)
        return HomoclinicDatum(
            anchor_flow=anchor,
            section=sec,
            lattice_class=m,
            eta_inf=a,
            xi_inf=b,
            q_lift=(q[0], q[1]),
        )


def _require_lift_fixed(section: SectionChart):
    d = section.drift
    if abs(to_mpf(d[0])) + abs(to_mpf(d[1])) > mp.mpf("1e-30"):
        raise ValueError(
            "shadowing pipelines require a lift-fixed anchor cycle "
            f"(lattice drift {d}); recentre the model"
        )


# ---------------------------------------------------------------------------
# shadowing orbits


def _shadow_orbit_points(model: FlowModel, hom: HomoclinicDatum, n: int):
    """The full shadowing cycle (n*N lift points in [0,1)^2-anchored charts).

    Linear bases: exact rational solve of (A^{nN} - I)x = m, orbit iterated
    exactly. Perturbed bases: sequence-space Newton on the cyclic system
    f(x_k) = x_{k+1} + m_k with per-step lattice offsets frozen from the
    linear pseudo-orbit. Corrections are swept in transported hyperbolic
    frames (stable components forward, unstable backward), which keeps the
    solve uniformly conditioned in n; this is the constructive shadowing
    argument run at working precision.
    """
    base = model.base
    n_steps = n * hom.anchor_orbit.period_N
    m = hom.lattice_class
    lin = BaseMap(linear=base.linear) if not isinstance(base, BaseMap) or not base.is_linear else base
    an = mat_pow_int(base.linear, n_steps)
    mm = ((an[0][0] - 1, an[0][1]), (an[1][0], an[1][1] - 1))
    d = mm[0][0] * mm[1][1] - mm[0][1] * mm[1][0]
    x0 = (
        Fraction(mm[1][1] * m[0] - mm[0][1] * m[1], d),
        Fraction(-mm[1][0] * m[0] + mm[0][0] * m[1], d),
    )
    # exact linear pseudo-orbit, reduced, with per-step lattice offsets
    pts_lin = []
    offs = []
    cur = (x0[0] - (x0[0].numerator // x0[0].denominator), x0[1] - (x0[1].numerator // x0[1].denominator))
    a = base.linear
    for _ in range(n_steps):
        pts_lin.append(cur)
        nxt = (a[0][0] * cur[0] + a[0][1] * cur[1], a[1][0] * cur[0] + a[1][1] * cur[1])
        red = (nxt[0] - (nxt[0].numerator // nxt[0].denominator), nxt[1] - (nxt[1].numerator // nxt[1].denominator))
        offs.append((int(nxt[0] - red[0]), int(nxt[1] - red[1])))
        cur = red
    if getattr(base, "is_linear", False) and isinstance(base, BaseMap):
        return pts_lin, offs
    pb = model.precision_bits
    with bits(pb):
        pts = [[to_mpf(p[0]), to_mpf(p[1])] for p in pts_lin]
        log_lam_lin, log_mu_lin, e_u0, e_s0 = base.eig_linear()
        # cyclic sweeps converge geometrically at rate lambda^{-n_steps} per
        # wrap, so the wrap count must scale with precision for short loops
        wraps = max(3, int((pb + 48) * math.log(2) / (n_steps * float(log_lam_lin))) + 2)
        tol = mp.mpf(2) ** (-pb)
        for _ in range(80):
            derivs = [base.derivative(p) for p in pts]
            resid = []
            for k in range(n_steps):
                fx = base.apply_lift(pts[k])
                nxt = pts[(k + 1) % n_steps]
                resid.append(
                    (fx[0] - nxt[0] - offs[k][0], fx[1] - nxt[1] - offs[k][1])
                )
            # transported frames: u forward, s backward
            u = [None] * n_steps
            nu_u = [None] * n_steps
            v = _normalize2((to_mpf(e_u0[0]), to_mpf(e_u0[1])))
            for wrap in range(wraps):
                for k in range(n_steps):
                    u[k] = v
                    dm = derivs[k]
                    w = (dm[0][0] * v[0] + dm[0][1] * v[1], dm[1][0] * v[0] + dm[1][1] * v[1])
                    nrm = mp.sqrt(w[0] ** 2 + w[1] ** 2)
                    nu_u[k] = nrm
                    v = (w[0] / nrm, w[1] / nrm)
            s = [None] * n_steps
            nu_s = [None] * n_steps
            w = _normalize2((to_mpf(e_s0[0]), to_mpf(e_s0[1])))
            for wrap in range(wraps):
                for k in range(n_steps - 1, -1, -1):
                    dm = derivs[k]
                    det_d = dm[0][0] * dm[1][1] - dm[0][1] * dm[1][0]
                    # s[k] = normalized D_k^{-1} s[k+1]; nu_s[k] = |D_k s_k|
                    prev = (
                        (dm[1][1] * w[0] - dm[0][1] * w[1]) / det_d,
                        (-dm[1][0] * w[0] + dm[0][0] * w[1]) / det_d,
                    )
                    nrm = mp.sqrt(prev[0] ** 2 + prev[1] ** 2)
                    s[k] = (prev[0] / nrm, prev[1] / nrm)
                    nu_s[k] = 1 / nrm
                    w = s[k]
            # residual components in the (u_{k+1}, s_{k+1}) frame
            rho_u = [None] * n_steps
            rho_s = [None] * n_steps
            for k in range(n_steps):
                uk1 = u[(k + 1) % n_steps]
                sk1 = s[(k + 1) % n_steps]
                det2 = uk1[0] * sk1[1] - sk1[0] * uk1[1]
                r = resid[k]
                rho_u[k] = (r[0] * sk1[1] - sk1[0] * r[1]) / det2
                rho_s[k] = (uk1[0] * r[1] - r[0] * uk1[1]) / det2
            # delta_k = a_k u_k + b_k s_k with
            #   a_{k+1} = nu_u_k a_k + rho_u_k  (solve backward, contracting)
            #   b_{k+1} = nu_s_k b_k + rho_s_k  (solve forward, contracting)
            a_c = [mp.mpf(0)] * n_steps
            acur = mp.mpf(0)
            for wrap in range(wraps):
                for k in range(n_steps - 1, -1, -1):
                    acur = (acur - rho_u[k]) / nu_u[k]
                    a_c[k] = acur
            b_c = [mp.mpf(0)] * n_steps
            bcur = mp.mpf(0)
            first = True
            for wrap in range(wraps):
                for k in range(n_steps):
                    if first:
                        first = False
                    else:
                        bcur = nu_s[k - 1] * bcur + rho_s[k - 1]
                    b_c[k] = bcur
            step = mp.mpf(0)
            for k in range(n_steps):
                dx = a_c[k] * u[k][0] + b_c[k] * s[k][0]
                dy = a_c[k] * u[k][1] + b_c[k] * s[k][1]
                pts[k][0] += dx
                pts[k][1] += dy
                step = max(step, abs(dx) + abs(dy))
            if step < tol:
                break
        else:
            raise RuntimeError(f"shadowing sequence Newton failed at n = {n}")
        return [(p[0], p[1]) for p in pts], offs


def _normalize2(v):
    n = mp.sqrt(v[0] ** 2 + v[1] ** 2)
    return (v[0] / n, v[1] / n)


def _shadow_point(model: FlowModel, hom: HomoclinicDatum, n: int):
    pts, _ = _shadow_orbit_points(model, hom, n)
    return pts[0]


def _audit_distance(model: FlowModel, hom: HomoclinicDatum, pts, samples: int = 24):
    """Max torus distance between the shadowing cycle points and the
    homoclinic pseudo-orbit at matched indices."""
    pb = model.precision_bits
    n_steps = len(pts)
    with bits(pb):
        sec = hom.section
        worst = mp.mpf(0)
        idxs = sorted(set(int(i * (n_steps - 1) / max(samples - 1, 1)) for i in range(samples)))
        period_n = hom.anchor_orbit.period_N
        for k in idxs:
            if k <= n_steps // 2:
                # forward side: f^k of the stable-branch point W_s(xi_inf),
                # via the Koenigs coordinate so long chains stay conditioned
                mfull, i = divmod(k, period_n)
                ref = sec.w_s.eval(hom.xi_inf * sec.w_s.rho ** mfull)
            else:
                # backward side: f^{-j} q = f^i(W_u(lambda^{-mfull} eta))
                j = n_steps - k
                mfull = _ceil_div(j, period_n)
                i = mfull * period_n - j
                ref = sec.w_u.eval(hom.eta_inf * sec.w_u.rho ** (-mfull))
            for _ in range(i):
                ref = model.base.apply_lift(ref)
            d = _dist_torus_mp((to_mpf(pts[k][0]), to_mpf(pts[k][1])), ref)
            worst = max(worst, d)
        return worst


def _ceil_div(a, b):
    return -(-a // b)


def _dist_torus_mp(a, b):
    dx = _dist_mod1(a[0] - b[0])
    dy = _dist_mod1(a[1] - b[1])
    return mp.sqrt(dx * dx + dy * dy)


def _dist_mod1(d):
    d = d - mp.floor(d)
    return min(d, 1 - d)


def shadowing_n0(model: FlowModel, hom: HomoclinicDatum, threshold=None, n_max: int = 64) -> int:
    """Smallest n whose orbit-to-pseudo-orbit audit clears the threshold
    (default 0.05, i.e. 10% of the torus injectivity scale)."""
    if hom.n0 is not None:
        return hom.n0
    thr = to_mpf(threshold) if threshold is not None else mp.mpf("0.05")
    for n in range(2, n_max + 1):
        pts, _ = _shadow_orbit_points(model, hom, n)
        if _audit_distance(model, hom, pts, samples=12) < thr:
            hom.n0 = n
            return n
    raise RuntimeError("no admissible shadowing index below n_max")


def _shadow_orbit_audited(model: FlowModel, hom: HomoclinicDatum, n: int):
    n0 = shadowing_n0(model, hom)
    if n < n0:
        raise ValueError(f"n = {n} below the measured shadowing threshold n0 = {n0}")
    pts, offs = _shadow_orbit_points(model, hom, n)
    dist = _audit_distance(model, hom, pts, samples=12)
    mu = mp.e ** hom.anchor_flow.multipliers.log_mu
    bound = mp.mpf("0.8") * mu ** (mp.mpf(n) / 2 - 2)
    if dist > max(bound, mp.mpf("0.05")):
        raise RuntimeError(
            f"shadowing distance audit failed at n = {n}: {mp.nstr(dist, 6)}"
        )
    m = hom.lattice_class
    orb = BasePeriodicOrbit(
        period_N=n * hom.anchor_orbit.period_N,
        representative=(pts[0][0], pts[0][1]),
        lattice_class=m,
        symbolic_id=f"shadow:m{m[0]},{m[1]}:n{n}",
        seed=None,
    )
    return orb, pts, dist


def shadowing_base_orbit(model: FlowModel, hom: HomoclinicDatum, n: int) -> BasePeriodicOrbit:
    """The unique period-(n N) base orbit shadowing the homoclinic loop."""
    orb, _, _ = _shadow_orbit_audited(model, hom, n)
    return orb


def _mod1_any(v):
    if isinstance(v, Fraction):
        return v - (v.numerator // v.denominator)
    return v - mp.floor(v)


def shadow_series(model: FlowModel, hom: HomoclinicDatum, n_range) -> ShadowSeries:
    """Flow periods T_n of the shadowing orbits for n in [n1, n2]."""
    n1, n2 = int(n_range[0]), int(n_range[1])
    pb = model.precision_bits
    with bits(pb):
        mu = mp.e ** hom.anchor_flow.multipliers.log_mu
        if mu ** n2 <= mp.mpf(2) ** (-pb + 32):
            raise ValueError(
                "precision budget exceeded: raise precision_bits or lower n2"
            )
    n_values = list(range(n1, n2 + 1))
    periods = []
    orbits = []
    audits = []
    for n in n_values:
        orb, pts, dist = _shadow_orbit_audited(model, hom, n)
        orbits.append(orb)
        audits.append(dist)
        with bits(pb):
            periods.append(
                mp.fsum(model.roof_value((to_mpf(p[0]), to_mpf(p[1]))) for p in pts)
            )
    return ShadowSeries(hom=hom, n_values=n_values, periods=periods, orbits=orbits, audit_distances=audits)


def _orbit_period_from_lift(model: FlowModel, orbit: BasePeriodicOrbit):
    """Birkhoff roof sum along the cycle.

    Exact rational iteration for linear bases. For perturbed bases the cycle
    is traversed half forward and half backward from the representative, so
    floating-point error is only amplified by lambda^(N/2) instead of
    lambda^N (the representative solves the lift equation to full precision).
    """
    pb = model.precision_bits
    rep = orbit.representative
    if isinstance(rep[0], Fraction) and getattr(model.base, "is_linear", False):
        pt = (rep[0], rep[1])
        vals = []
        with bits(pb):
            for _ in range(orbit.period_N):
                vals.append(model.roof_value((to_mpf(pt[0]), to_mpf(pt[1]))))
                pt = model.base.apply_lift(pt)
            return mp.fsum(vals)
    with bits(pb):
        n = orbit.period_N
        m = orbit.lattice_class
        k_half = n // 2
        vals = []
        pt = [to_mpf(rep[0]), to_mpf(rep[1])]
        for _ in range(k_half):
            vals.append(model.roof_value((pt[0], pt[1])))
            pt = list(model.base.apply_lift(pt))
        y = [to_mpf(rep[0]) + m[0], to_mpf(rep[1]) + m[1]]
        back = []
        for _ in range(n - k_half):
            y = list(_lift_inverse(model.base, y, pb))
            back.append(model.roof_value((y[0], y[1])))
        vals.extend(reversed(back))
        return mp.fsum(vals)


def _lift_inverse(base, pt, precision_bits):
    a = base.linear
    det = a[0][0] * a[1][1] - a[0][1] * a[1][0]
    x = [
        (a[1][1] * pt[0] - a[0][1] * pt[1]) / det,
        (-a[1][0] * pt[0] + a[0][0] * pt[1]) / det,
    ]
    if getattr(base, "is_linear", False):
        return x
    tol = mp.mpf(2) ** (-precision_bits - 4)
    for _ in range(200):
        fx = base.apply_lift(x)
        rx, ry = fx[0] - pt[0], fx[1] - pt[1]
        if abs(rx) + abs(ry) < tol:
            return x
        d = base.derivative(x)
        dd = d[0][0] * d[1][1] - d[0][1] * d[1][0]
        x[0] -= (d[1][1] * rx - d[0][1] * ry) / dd
        x[1] -= (-d[1][0] * rx + d[0][0] * ry) / dd
    raise RuntimeError("lift inverse Newton did not converge")


def excursion_time(model: FlowModel, hom: HomoclinicDatum, check: bool = True):
    """T' via the relative Birkhoff series over the homoclinic orbit, equal
    to the stable-branch height minus the unstable-branch height at the
    homoclinic coordinates; cross-checked against the Cauchy limit of
    T_n - n T when check is set."""
    pb = model.precision_bits
    with bits(pb):
        sec = hom.section
        t_series = sec.height_s(hom.xi_inf) - sec.height_u(hom.eta_inf)
        if not check:
            return t_series
        mults = hom.anchor_flow.multipliers
        mu = mp.e ** mults.log_mu
        n_c = int(mp.ceil((pb / 2 + 24) * mp.log(2) / (-mp.log(mu))))
        n_c = max(n_c, shadowing_n0(model, hom))
        _, pts, _ = _shadow_orbit_audited(model, hom, n_c)
        t_n = mp.fsum(model.roof_value((to_mpf(p[0]), to_mpf(p[1]))) for p in pts)
        t_cauchy = t_n - n_c * hom.anchor_flow.period_T
        if abs(t_cauchy - t_series) > mp.mpf(2) ** (-pb // 2):
            raise RuntimeError(
                "excursion-time cross-check failed: series "
                f"{mp.nstr(t_series, 30)} vs Cauchy {mp.nstr(t_cauchy, 30)}"
            )
        return t_series


def series_to_csv(series: ShadowSeries, t_prime=None, path=None):
    """CSV columns: n, T_n, residual, ratio (residuals need T')."""
    t = series.anchor_T
    resid = [
        (tn - n * t - t_prime) if t_prime is not None else None
        for n, tn in zip(series.n_values, series.periods)
    ]
    lines = ["n,T_n,residual,ratio"]
    for i, (n, tn) in enumerate(zip(series.n_values, series.periods)):
        r = resid[i]
        ratio = ""
        if r is not None and i > 0 and resid[i - 1] != 0:
            ratio = mp.nstr(r / resid[i - 1], 20)
        lines.append(
            f"{n},{mp.nstr(tn, 50)},{mp.nstr(r, 30) if r is not None else ''},{ratio}"
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text
