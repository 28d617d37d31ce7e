"""Stable/unstable templates and the chart-robust C1 obstruction functional.

The stable template T_s(eta) is the first-order flow-time tilt, relative to
the crude section, of the strong stable manifold through the section point on
the unstable axis at parameter eta (and mirrored for T_u). Together with the
first-jet hitting-time series along the unstable axis it assembles the
obstruction value

    zeta_hat = T_s(eta_inf) + sum_{l>=1} lam_s(-l) * d1_tau(Pi^{-l} q),

whose non-vanishing certifies that the stable distribution is not C1 along
the anchor's unstable leaf and makes the stable eigenvalue recoverable from
shadowing periods. The series converges at rate (mu*lambda)^{-1}, so only
volume-expanding anchors are admissible without a forced truncation.

The sum is evaluated in three zones to keep every error term below the
reported tail bound: explicit first-jet series terms while the noise
amplification mu^{-l} stays harmless, then the hitting-time Taylor
polynomial with explicitly accumulated weak-stable factors, and finally a
closed-form geometric tail (the same (mu lambda^j - 1)^{-1} structure as the
template-polynomial normalization).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp

from .jets import TJet
from .manifolds import stable_direction_at, unstable_direction_at
from .mparith import bits, to_mpf
from .shadowing import HomoclinicDatum, find_homoclinic
from .suspension import FlowModel, FlowPeriodicOrbit, SectionChart, section_at


def _unit(v):
    n = mp.sqrt(v[0] ** 2 + v[1] ** 2)
    return (v[0] / n, v[1] / n)


@dataclass(frozen=True)
class TemplateSample:
    anchor_id: str
    branch: str  # "s" | "u"
    parameter: object
    value: object
    weak_slope: object


@dataclass(frozen=True)
class ObstructionValue:
    lattice_class: tuple[int, int]
    eta_inf: object
    xi_inf: object
    zeta_hat: object
    template_part: object
    series_part: object
    explicit_terms: int
    poly_terms: int
    tail_bound: object | None
    term_audit: tuple


# ---------------------------------------------------------------------------
# transported roof-slope series (fiber slope of strong manifolds)


def _contraction_gate(model: FlowModel):
    """Per-step forward contraction bound for stable vectors (log)."""
    base = model.base
    rep = getattr(base, "cone_report", None)
    if rep is not None and rep.min_stable_backward_expansion:
        return math.log(rep.min_stable_backward_expansion)
    log_lam, log_mu, _, _ = base.eig_linear()
    return float(-log_mu)


def _direction_buffer(model: FlowModel) -> int:
    base = model.base
    log_lam, log_mu, _, _ = base.eig_linear()
    gap = float(log_lam - log_mu)
    return int((model.precision_bits + 32) * math.log(2) / gap) + 4


def slope_series_forward(model: FlowModel, point, direction, k_max: int):
    """sum_{k>=0} grad r(f^k y) . Df^k v  for v the stable direction at y:
    the fiber slope of the strong stable leaf through (y, *).

    The stable direction is rebuilt at every orbit index by a buffered
    backward pullback (coherent frames); transporting one seed forward would
    amplify its unstable contamination by lambda^k and destroy the tail.
    Signed contraction factors accumulate in log space.
    """
    base = model.base
    b = _direction_buffer(model)
    y = [to_mpf(point[0]), to_mpf(point[1])]
    orbit = [list(y)]
    for _ in range(k_max + b):
        orbit.append(list(base.apply_lift(orbit[-1])))
    derivs = [base.derivative(p) for p in orbit[: k_max + b]]
    units: list = [None] * (k_max + 1)
    _, _, _, e_s0 = base.eig_linear()
    s = _unit((to_mpf(e_s0[0]), to_mpf(e_s0[1])))
    for k in range(k_max + b - 1, -1, -1):
        dm = derivs[k]
        det_d = dm[0][0] * dm[1][1] - dm[0][1] * dm[1][0]
        s = _unit((
            (dm[1][1] * s[0] - dm[0][1] * s[1]) / det_d,
            (-dm[1][0] * s[0] + dm[0][0] * s[1]) / det_d,
        ))
        if k <= k_max:
            units[k] = s
    # align the overall sign with the requested direction at the base point
    sign = mp.sign(units[0][0] * to_mpf(direction[0]) + units[0][1] * to_mpf(direction[1]))
    scale = mp.sqrt(to_mpf(direction[0]) ** 2 + to_mpf(direction[1]) ** 2) * sign
    acc = []
    log_w = mp.mpf(0)
    w_sign = mp.mpf(1)
    for k in range(k_max):
        weight = w_sign * mp.e ** log_w
        acc.append(weight * model.roof_dir_deriv(orbit[k], units[k]))
        dm = derivs[k]
        img = (
            dm[0][0] * units[k][0] + dm[0][1] * units[k][1],
            dm[1][0] * units[k][0] + dm[1][1] * units[k][1],
        )
        nu = img[0] * units[k + 1][0] + img[1] * units[k + 1][1]
        log_w += mp.log(abs(nu))
        w_sign *= mp.sign(nu)
    return mp.fsum(acc) * scale


def slope_series_backward(model: FlowModel, point, direction, k_max: int):
    """-sum_{k>=1} grad r(f^-k y) . Df^-k v for v the unstable direction at
    y: the fiber slope of the strong unstable leaf (mirror of the forward
    series, with coherent frames built by buffered forward pushes)."""
    base = model.base
    from .manifolds import _apply_inverse_lift

    pb = model.precision_bits
    b = _direction_buffer(model)
    orbit = [[to_mpf(point[0]), to_mpf(point[1])]]
    for _ in range(k_max + b):
        orbit.append(list(_apply_inverse_lift(base, orbit[-1], pb)))
    # orbit[j] = f^{-j}(y); unit unstable directions by forward transport
    derivs = [base.derivative(p) for p in orbit]
    units: list = [None] * (k_max + 1)
    _, _, e_u0, _ = base.eig_linear()
    u = _unit((to_mpf(e_u0[0]), to_mpf(e_u0[1])))
    for j in range(k_max + b, 0, -1):
        dm = derivs[j]
        u = _unit((
            dm[0][0] * u[0] + dm[0][1] * u[1],
            dm[1][0] * u[0] + dm[1][1] * u[1],
        ))
        if j - 1 <= k_max:
            units[j - 1] = u
    sign = mp.sign(units[0][0] * to_mpf(direction[0]) + units[0][1] * to_mpf(direction[1]))
    scale = mp.sqrt(to_mpf(direction[0]) ** 2 + to_mpf(direction[1]) ** 2) * sign
    acc = []
    log_w = mp.mpf(0)
    w_sign = mp.mpf(1)
    for k in range(1, k_max + 1):
        # Df^{-1} at orbit[k-1] maps units[k-1] to nu * units[k]
        dm = derivs[k]
        img = (
            dm[0][0] * units[k][0] + dm[0][1] * units[k][1],
            dm[1][0] * units[k][0] + dm[1][1] * units[k][1],
        )
        nu = img[0] * units[k - 1][0] + img[1] * units[k - 1][1]
        log_w -= mp.log(abs(nu))
        w_sign *= mp.sign(nu)
        weight = w_sign * mp.e ** log_w
        acc.append(-weight * model.roof_dir_deriv(orbit[k], units[k]))
    return mp.fsum(acc) * scale


def _k_terms(model: FlowModel) -> int:
    pb = model.precision_bits
    gate = _contraction_gate(model)
    return int((pb + 24) * math.log(2) / gate) + 4


# ---------------------------------------------------------------------------
# templates


def stable_template(model: FlowModel, section: SectionChart, eta) -> TemplateSample:
    """First jet (flow time per unit stable chart coordinate) of the strong
    stable manifold through the section point at (0, eta), relative to the
    section."""
    pb = model.precision_bits
    with bits(pb):
        eta = to_mpf(eta)
        y = section.w_u.eval(eta)
        es = stable_direction_at(model.base, (y[0], y[1]), pb)
        g = slope_series_forward(model, y, es, _k_terms(model))
        d = section.d_embed(mp.mpf(0), eta)
        det = d[0][0] * d[1][1] - d[0][1] * d[1][0]
        u1 = (d[1][1] * es[0] - d[0][1] * es[1]) / det
        u2 = (-d[1][0] * es[0] + d[0][0] * es[1]) / det
        hs0 = section.h_s_prime_origin()
        ju = TJet.var_x(eta, 1, 0)
        hu_prime = section.height_u(ju).partial(1, 0)
        delta = to_mpf(section.cross_coeff)
        val = (g - ((hs0 + delta * eta) * u1 + hu_prime * u2)) / u1
        return TemplateSample(
            anchor_id=section.anchor_orbit.symbolic_id,
            branch="s",
            parameter=eta,
            value=val,
            weak_slope=u2 / u1,
        )


def unstable_template(model: FlowModel, section: SectionChart, xi) -> TemplateSample:
    """Mirror of stable_template under time reversal: the flow-time tilt of
    the strong unstable manifold through the section point at (xi, 0), as a
    function of the unstable chart coordinate."""
    pb = model.precision_bits
    with bits(pb):
        xi = to_mpf(xi)
        y = section.w_s.eval(xi)
        eu = unstable_direction_at(model.base, (y[0], y[1]), pb)
        g = slope_series_backward(model, y, eu, _k_terms(model))
        d = section.d_embed(xi, mp.mpf(0))
        det = d[0][0] * d[1][1] - d[0][1] * d[1][0]
        u1 = (d[1][1] * eu[0] - d[0][1] * eu[1]) / det  # stable chart comp
        u2 = (-d[1][0] * eu[0] + d[0][0] * eu[1]) / det  # unstable chart comp
        js = TJet.var_x(xi, 1, 0)
        hs_prime = section.height_s(js).partial(1, 0)
        delta = to_mpf(section.cross_coeff)
        val = (g - (hs_prime * u1 + (section_hu_prime_origin(section) + delta * xi) * u2)) / u2
        return TemplateSample(
            anchor_id=section.anchor_orbit.symbolic_id,
            branch="u",
            parameter=xi,
            value=val,
            weak_slope=u1 / u2,
        )


def section_hu_prime_origin(section: SectionChart):
    j = TJet.var_x(mp.mpf(0), 1, 0)
    return section.height_u(j).partial(1, 0)


# ---------------------------------------------------------------------------
# obstruction functional


def zeta_hat(model: FlowModel, hom: HomoclinicDatum, truncation: int | None = None, taylor_order: int = 6) -> ObstructionValue:
    """The chart-robust obstruction value at a homoclinic datum.

    Volume-expanding anchors get the fully summed three-zone value with a
    tail bound; other anchors require an explicit truncation (the series has
    no convergent tail there) and report tail_bound None.
    """
    pb = model.precision_bits
    anchor = hom.anchor_flow
    log_jac = float(anchor.multipliers.log_jacobian)
    sec = hom.section
    with bits(pb):
        tpl = stable_template(model, sec, hom.eta_inf)
        lam = mp.e ** anchor.multipliers.log_lambda
        mu = mp.e ** anchor.multipliers.log_mu
        if log_jac <= 0 and truncation is None:
            raise ValueError(
                "anchor not volume expanding: the obstruction series does not "
                "converge; analyze the time-reversed model or force a truncation"
            )
        if truncation is not None:
            acc = mp.mpf(0)
            lam_cum = mp.mpf(1)
            eta_l = hom.eta_inf
            v_hat = _weak_stable_chart_vector(model, sec, hom.eta_inf)
            audit = []
            for l in range(1, truncation + 1):
                g_l, v_hat = _backward_factor(model, sec, eta_l, v_hat)
                eta_l = eta_l / lam
                lam_cum *= g_l
                term = lam_cum * sec.d1_return_time_on_unstable_axis(eta_l)
                acc += term
                if l <= 12:
                    audit.append(float(term))
            z = tpl.value + acc
            return ObstructionValue(
                lattice_class=hom.lattice_class,
                eta_inf=hom.eta_inf,
                xi_inf=hom.xi_inf,
                zeta_hat=z,
                template_part=tpl.value,
                series_part=acc,
                explicit_terms=truncation,
                poly_terms=0,
                tail_bound=None,
                term_audit=tuple(audit),
            )
        # taylor coefficients a_j = d1 d2^j tau(0,0) / j!
        jet = sec.return_time_jet(0, 0, 1, taylor_order + 1)
        a = [jet.coeff(1, j) for j in range(taylor_order + 2)]  # a[0] = 0
        log_mu_f = float(anchor.multipliers.log_mu)
        l_explicit = max(4, int(40 * math.log(2) / (-log_mu_f)))
        log_lam_f = float(anchor.multipliers.log_lambda)
        l_poly = max(l_explicit + 4, int((pb - 56) * math.log(2) / log_lam_f) + 2)
        v_hat = _weak_stable_chart_vector(model, sec, hom.eta_inf)
        eta_l = hom.eta_inf
        lam_cum = mp.mpf(1)
        acc = mp.mpf(0)
        audit = []
        slack_obs = mp.mpf(0)
        for l in range(1, l_poly + 1):
            g_l, v_hat = _backward_factor(model, sec, eta_l, v_hat)
            eta_l = eta_l / lam
            lam_cum *= g_l
            slack_obs = max(slack_obs, abs(g_l * mu - 1) / (abs(eta_l) + mp.mpf(2) ** (-pb)))
            if l <= l_explicit:
                term = lam_cum * sec.d1_return_time_on_unstable_axis(eta_l)
            else:
                term = lam_cum * _poly_eval(a, taylor_order, eta_l)
            acc += term
            if l <= 12:
                audit.append(float(term))
        # closed-form geometric tail from l_poly onward
        tail_val = mp.mpf(0)
        tail_bnd = mp.mpf(0)
        eta_t = eta_l
        for j in range(1, taylor_order + 1):
            qj = (1 / mu) * lam ** (-j)
            if qj >= 1:
                raise ValueError("tail ratio >= 1; anchor pinching out of range")
            tail_val += lam_cum * a[j] * eta_t ** j * qj / (1 - qj)
        qj1 = (1 / mu) * lam ** (-(taylor_order + 1))
        rem = 8 * abs(a[taylor_order + 1]) * abs(eta_l / lam) ** (taylor_order + 1)
        tail_bnd += abs(lam_cum) * rem * qj1 / (1 - qj1) if qj1 < 1 else mp.inf
        # weak-stable factor drift slack on the closed tail
        slack = slack_obs * abs(eta_t) / (1 - 1 / lam)
        tail_bnd += abs(tail_val) * slack
        # noise floor amplified through the explicit zone
        noise = mp.mpf(2) ** (-pb + 8) * (1 / mu) ** l_explicit / (1 - mu)
        tail_bnd += noise
        # poly remainder over the poly zone
        rem_poly = abs(a[taylor_order + 1]) * 8
        eta_e = hom.eta_inf * lam ** (-(l_explicit + 1))
        q_rem = (1 / mu) * lam ** (-(taylor_order + 1))
        tail_bnd += (
            (1 / mu) ** (l_explicit + 1)
            * rem_poly
            * abs(eta_e) ** (taylor_order + 1)
            / (1 - q_rem)
        )
        # truncated height-series floors inside template and jets
        tail_bnd += to_mpf(sec.tail_bound_s) + to_mpf(sec.tail_bound_u)
        z = tpl.value + acc + tail_val
        return ObstructionValue(
            lattice_class=hom.lattice_class,
            eta_inf=hom.eta_inf,
            xi_inf=hom.xi_inf,
            zeta_hat=z,
            template_part=tpl.value,
            series_part=acc + tail_val,
            explicit_terms=l_explicit,
            poly_terms=l_poly - l_explicit,
            tail_bound=tail_bnd,
            term_audit=tuple(audit),
        )


def _poly_eval(a, order, eta):
    """Horner on a_1..a_order with zero constant term."""
    acc = mp.mpf(0)
    for j in range(order, 0, -1):
        acc = acc * eta + a[j]
    return acc * eta


def _weak_stable_chart_vector(model: FlowModel, sec: SectionChart, eta):
    """Chart components (1, c) of the weak-stable section direction at (0, eta)."""
    y = sec.w_u.eval(eta)
    es = stable_direction_at(model.base, (y[0], y[1]), model.precision_bits)
    d = sec.d_embed(mp.mpf(0), eta)
    det = d[0][0] * d[1][1] - d[0][1] * d[1][0]
    u1 = (d[1][1] * es[0] - d[0][1] * es[1]) / det
    u2 = (-d[1][0] * es[0] + d[0][0] * es[1]) / det
    return (mp.mpf(1), u2 / u1)


def _backward_factor(model: FlowModel, sec: SectionChart, eta, v_hat):
    """One backward return step of the weak-stable chart direction at (0, eta):
    returns (contraction factor g, transported direction (1, c'))."""
    base = model.base
    lam = sec.w_u.rho
    eta_prev = eta / lam
    d_here = sec.d_embed(mp.mpf(0), eta)
    amb = [
        d_here[0][0] * v_hat[0] + d_here[0][1] * v_hat[1],
        d_here[1][0] * v_hat[0] + d_here[1][1] * v_hat[1],
    ]
    # DF^{-1} at the axis point: inverse of the N-step chain from W_u(eta_prev)
    y = sec.w_u.eval(eta_prev)
    chain = []
    cur = [y[0], y[1]]
    for _ in range(sec.period_steps):
        chain.append(base.derivative(cur))
        cur = list(base.apply_lift(cur))
    for dm in reversed(chain):
        det_d = dm[0][0] * dm[1][1] - dm[0][1] * dm[1][0]
        amb = [
            (dm[1][1] * amb[0] - dm[0][1] * amb[1]) / det_d,
            (-dm[1][0] * amb[0] + dm[0][0] * amb[1]) / det_d,
        ]
    d_prev = sec.d_embed(mp.mpf(0), eta_prev)
    det = d_prev[0][0] * d_prev[1][1] - d_prev[0][1] * d_prev[1][0]
    w1 = (d_prev[1][1] * amb[0] - d_prev[0][1] * amb[1]) / det
    w2 = (-d_prev[1][0] * amb[0] + d_prev[0][0] * amb[1]) / det
    return w1, (mp.mpf(1), w2 / w1)


# ---------------------------------------------------------------------------
# obstruction scan


@dataclass(frozen=True)
class ObstructionScan:
    anchor_id: str
    entries: tuple  # (lattice class, eta_inf, xi_inf, zeta_hat, tail_bound)
    verdict: str  # "obstructed" | "unobstructed at scale"
    floor: float


def c1_obstruction_scan(model: FlowModel, anchor: FlowPeriodicOrbit, eta_max: float = 2.5, class_range: int = 1, truncation: int | None = None) -> ObstructionScan:
    """Max |zeta_hat| over homoclinic branches with |eta_inf| <= eta_max.

    Branches are all nonzero lattice classes with entries in
    [-class_range, class_range]. Verdict: obstructed when any branch exceeds
    ten times its floor (tail bound plus the precision floor).
    """
    pb = model.precision_bits
    sec = section_at(model, anchor.base_orbit)
    entries = []
    floor = float(mp.mpf(2) ** (-pb + 16))
    obstructed = False
    for mx in range(-class_range, class_range + 1):
        for my in range(-class_range, class_range + 1):
            if (mx, my) == (0, 0):
                continue
            try:
                hom = find_homoclinic(model, anchor, (mx, my), section=sec)
            except (ValueError, RuntimeError):
                continue
            if abs(float(hom.eta_inf)) > eta_max:
                continue
            ob = zeta_hat(model, hom, truncation=truncation)
            tb = float(ob.tail_bound) if ob.tail_bound is not None else 0.0
            entries.append(
                ((mx, my), hom.eta_inf, hom.xi_inf, ob.zeta_hat, ob.tail_bound)
            )
            if abs(float(ob.zeta_hat)) > 10 * max(tb, floor):
                obstructed = True
    return ObstructionScan(
        anchor_id=anchor.base_orbit.symbolic_id,
        entries=tuple(entries),
        verdict="obstructed" if obstructed else "unobstructed at scale",
        floor=floor,
    )


def scan_to_csv(scan: ObstructionScan, path=None) -> str:
    lines = ["branch,eta_inf,xi_inf,zeta_hat,tail_bound"]
    for (m, eta, xi, z, tb) in scan.entries:
        lines.append(
            f"({m[0]};{m[1]}),{mp.nstr(to_mpf(eta), 20)},{mp.nstr(to_mpf(xi), 20)},"
            f"{mp.nstr(to_mpf(z), 30)},{mp.nstr(to_mpf(tb), 8) if tb is not None else 'none'}"
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text
