"""Local invariant-manifold parametrizations at periodic points.

W(t) solves F(W(t)) = W(rho * t) coefficient-by-coefficient, where F is the
period-N return of the base map around an anchor cycle and rho is the stable
or unstable multiplier. In this internal coordinate the return map restricted
to the manifold is exactly linear, which the section charts and obstruction
series exploit (backward return = division by rho, no branch bookkeeping).

Evaluations outside the polynomial's trust radius are pushed through the
dynamics: W(t) = F^m(W(rho^{-m} t)) on the unstable side and
W(t) = F^{-m}(W(rho^m t)) on the stable side.

The linear-map case degenerates to the exact eigenline W(t) = p + t e, so a
single code path serves both exact and perturbed bases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp

from .jets import TJet
from .mparith import bits, to_mpf
from .torus_maps import BaseMap


def apply_lift_any(m, pt):
    """Lift application that accepts mpf pairs or TJet pairs."""
    return m.apply_lift(pt)


def derivative_at(m, pt):
    vals = [pt[0].value if isinstance(pt[0], TJet) else pt[0],
            pt[1].value if isinstance(pt[1], TJet) else pt[1]]
    return m.derivative(vals)


@dataclass
class ManifoldParam:
    base_map: object
    anchor_cycle: list          # lift points of the anchor cycle (mpf pairs)
    period: int
    kind: str                   # "s" | "u"
    rho: mp.mpf                 # internal multiplier of the N-step return
    coeffs: list                # [(w1x, w1y), (w2x, w2y), ...]
    trust_radius: mp.mpf
    precision_bits: int

    @property
    def anchor(self):
        return self.anchor_cycle[0]

    def eval_local(self, t):
        """Polynomial evaluation; t may be mpf or TJet."""
        x = t * 0
        y = t * 0
        for k in range(len(self.coeffs) - 1, -1, -1):
            x = x * t + self.coeffs[k][0]
            y = y * t + self.coeffs[k][1]
        x = x * t + self.anchor[0]
        y = y * t + self.anchor[1]
        return [x, y]

    def eval(self, t):
        """Manifold point in the lift; dynamic extension beyond the radius."""
        tv = t.value if isinstance(t, TJet) else to_mpf(t)
        r = self.trust_radius
        if abs(tv) <= r:
            return self.eval_local(t)
        n_steps = int(mp.ceil(mp.log(abs(tv) / r) / abs(mp.log(abs(self.rho)))))
        if self.kind == "u":
            inner = t * (self.rho ** (-n_steps)) if isinstance(t, TJet) else to_mpf(t) * self.rho ** (-n_steps)
            pt = self.eval_local(inner)
            for _ in range(n_steps * self.period):
                pt = apply_lift_any(self.base_map, pt)
            return pt
        inner = t * (self.rho ** n_steps) if isinstance(t, TJet) else to_mpf(t) * self.rho ** n_steps
        pt = self.eval_local(inner)
        for _ in range(n_steps * self.period):
            pt = _apply_inverse_lift(self.base_map, pt, self.precision_bits)
        return pt

    def derivative(self, t):
        """dW/dt at a scalar parameter (2-vector)."""
        j = TJet.var_x(to_mpf(t), 1, 0)
        tv = to_mpf(t)
        if abs(tv) <= self.trust_radius:
            p = self.eval_local(j)
            return (p[0].coeff(1, 0), p[1].coeff(1, 0))
        if self.kind == "u":
            p = self.eval(j)
            return (p[0].coeff(1, 0), p[1].coeff(1, 0))
        # stable branch, far argument: chain rule through inverse steps
        n_steps = int(mp.ceil(mp.log(abs(tv) / self.trust_radius) / abs(mp.log(abs(self.rho)))))
        inner = tv * self.rho ** n_steps
        pt = self.eval_local(TJet.var_x(inner, 1, 0))
        d = (pt[0].coeff(1, 0) * self.rho ** n_steps, pt[1].coeff(1, 0) * self.rho ** n_steps)
        cur = [pt[0].value, pt[1].value]
        for _ in range(n_steps * self.period):
            dm = self.base_map.derivative(cur)
            det = dm[0][0] * dm[1][1] - dm[0][1] * dm[1][0]
            d = ((dm[1][1] * d[0] - dm[0][1] * d[1]) / det,
                 (-dm[1][0] * d[0] + dm[0][0] * d[1]) / det)
            cur = _apply_inverse_lift(self.base_map, cur, self.precision_bits)
        return d


def _apply_inverse_lift(m, pt, precision_bits):
    """Inverse of the lift (not the torus map): Newton with linear seed.

    Accepts mpf pairs or TJet pairs; the jet path refines with the constant
    value-point derivative, gaining one nilpotent order per sweep.
    """
    a = m.linear
    det = a[0][0] * a[1][1] - a[0][1] * a[1][0]
    inv = ((a[1][1] / det, -a[0][1] / det), (-a[1][0] / det, a[0][0] / det))
    if isinstance(pt[0], TJet) or isinstance(pt[1], TJet):
        nx = pt[0].nx if isinstance(pt[0], TJet) else pt[1].nx
        ny = pt[0].ny if isinstance(pt[0], TJet) else pt[1].ny
        ptj = [
            pt[0] if isinstance(pt[0], TJet) else TJet.const(pt[0], nx, ny),
            pt[1] if isinstance(pt[1], TJet) else TJet.const(pt[1], nx, ny),
        ]
        x_val = _apply_inverse_lift(m, (ptj[0].value, ptj[1].value), precision_bits)
        if m.is_linear:
            return [
                ptj[0] * inv[0][0] + ptj[1] * inv[0][1],
                ptj[0] * inv[1][0] + ptj[1] * inv[1][1],
            ]
        x = [TJet.const(x_val[0], nx, ny), TJet.const(x_val[1], nx, ny)]
        d = m.derivative(x_val)
        dd = d[0][0] * d[1][1] - d[0][1] * d[1][0]
        for _ in range(nx + ny + 3):
            fx = m.apply_lift(x)
            rx = fx[0] - ptj[0]
            ry = fx[1] - ptj[1]
            x[0] = x[0] - (rx * d[1][1] - ry * d[0][1]) * (1 / dd)
            x[1] = x[1] - (ry * d[0][0] - rx * d[1][0]) * (1 / dd)
        return x
    x = [inv[0][0] * pt[0] + inv[0][1] * pt[1], inv[1][0] * pt[0] + inv[1][1] * pt[1]]
    if m.is_linear:
        return x
    tol = mp.mpf(2) ** (-precision_bits - 4)
    for _ in range(200):
        fx = m.apply_lift(x)
        rx, ry = fx[0] - pt[0], fx[1] - pt[1]
        if abs(rx) + abs(ry) < tol:
            return x
        d = m.derivative(x)
        dd = d[0][0] * d[1][1] - d[0][1] * d[1][0]
        x[0] -= (d[1][1] * rx - d[0][1] * ry) / dd
        x[1] -= (-d[1][0] * rx + d[0][0] * ry) / dd
    raise RuntimeError("lift inverse Newton did not converge")


def _return_jet(base_map, cycle, pt_jets):
    """Push a jet point once around the anchor cycle (N map steps)."""
    out = pt_jets
    for _ in range(len(cycle)):
        out = apply_lift_any(base_map, out)
    return out


def manifold_param(base_map, anchor_cycle, kind: str, precision_bits: int, order: int = 10) -> ManifoldParam:
    """Solve the conjugacy F(W(t)) = W(rho t) to the given polynomial order.

    W'(0) is one of the invariant directions of DF at the anchor, normalized
    to first component 1 (matching the eigenvector convention elsewhere).
    """
    with bits(precision_bits):
        n = len(anchor_cycle)
        p = [to_mpf(anchor_cycle[0][0]), to_mpf(anchor_cycle[0][1])]
        # DF(p) along the cycle
        df = [[mp.mpf(1), mp.mpf(0)], [mp.mpf(0), mp.mpf(1)]]
        cur = list(p)
        for _ in range(n):
            d = base_map.derivative(cur)
            df = [[d[0][0] * df[0][0] + d[0][1] * df[1][0], d[0][0] * df[0][1] + d[0][1] * df[1][1]],
                  [d[1][0] * df[0][0] + d[1][1] * df[1][0], d[1][0] * df[0][1] + d[1][1] * df[1][1]]]
            cur = list(base_map.apply_lift(cur))
        tr = df[0][0] + df[1][1]
        det = df[0][0] * df[1][1] - df[0][1] * df[1][0]
        disc = mp.sqrt(tr * tr - 4 * det)
        lam = (tr + disc) / 2
        mu = (tr - disc) / 2
        rho = lam if kind == "u" else mu
        if df[0][1] != 0:
            w1 = (mp.mpf(1), (rho - df[0][0]) / df[0][1])
        else:
            w1 = (mp.mpf(1), df[1][0] / (rho - df[1][1]))
        coeffs = [list(w1)]
        for k in range(2, order + 1):
            jet = TJet(k, 0)
            jet.c[0][0] = p[0]
            jet_y = TJet(k, 0)
            jet_y.c[0][0] = p[1]
            for i, (wx, wy) in enumerate(coeffs, start=1):
                jet.c[i][0] = wx
                jet_y.c[i][0] = wy
            img = _return_jet(base_map, anchor_cycle, [jet, jet_y])
            cx = img[0].coeff(k, 0)
            cy = img[1].coeff(k, 0)
            rk = rho ** k
            a11, a12 = df[0][0] - rk, df[0][1]
            a21, a22 = df[1][0], df[1][1] - rk
            dd = a11 * a22 - a12 * a21
            wx = -(a22 * cx - a12 * cy) / dd
            wy = -(-a21 * cx + a11 * cy) / dd
            coeffs.append([wx, wy])
        # trust radius: where each of the top coefficients' terms stays below
        # tolerance (coefficients can vanish by parity, so use several), then
        # audited against the conjugacy residual and halved until it holds
        tol = mp.mpf(2) ** (-precision_bits - 8)
        radius = mp.mpf(8)
        for k in range(max(2, order - 3), order + 1):
            top = max(abs(coeffs[k - 1][0]), abs(coeffs[k - 1][1]))
            if top > 0:
                radius = min(radius, (tol / top) ** (mp.mpf(1) / k))
        param = ManifoldParam(
            base_map=base_map,
            anchor_cycle=[(to_mpf(c[0]), to_mpf(c[1])) for c in anchor_cycle],
            period=n,
            kind=kind,
            rho=rho,
            coeffs=coeffs,
            trust_radius=radius,
            precision_bits=precision_bits,
        )
        if not base_map.is_linear:
            audit_tol = mp.mpf(2) ** (-precision_bits + 16)
            for _ in range(60):
                t0 = param.trust_radius if kind == "s" else param.trust_radius / abs(rho)
                w1 = param.eval_local(t0)
                img = list(w1)
                for _ in range(n):
                    img = apply_lift_any(base_map, img)
                w2 = param.eval_local(rho * t0)
                resid = abs(img[0] - w2[0]) + abs(img[1] - w2[1])
                if resid < audit_tol:
                    break
                param.trust_radius = param.trust_radius / 2
            else:
                raise RuntimeError("manifold conjugacy audit failed to converge")
        return param


def stable_direction_at(base_map, point, precision_bits: int, iterations: int | None = None):
    """Unit-free stable direction (first component 1) at an arbitrary point,
    by pulling a seed back along the forward orbit."""
    with bits(precision_bits):
        log_lam, log_mu, _, e_s = base_map.eig_linear()
        if base_map.is_linear:
            return (to_mpf(e_s[0]), to_mpf(e_s[1]))
        if iterations is None:
            gap = float(log_lam - log_mu)
            iterations = int((precision_bits + 16) * math.log(2) / gap) + 4
        fwd = [(to_mpf(point[0]), to_mpf(point[1]))]
        for _ in range(iterations):
            fwd.append(base_map.apply(fwd[-1]))
        v = (to_mpf(e_s[0]), to_mpf(e_s[1]))
        for k in range(iterations, 0, -1):
            d = base_map.derivative(fwd[k - 1])
            det = d[0][0] * d[1][1] - d[0][1] * d[1][0]
            v = ((d[1][1] * v[0] - d[0][1] * v[1]) / det,
                 (-d[1][0] * v[0] + d[0][0] * v[1]) / det)
            n = mp.sqrt(v[0] ** 2 + v[1] ** 2)
            v = (v[0] / n, v[1] / n)
        return (mp.mpf(1), v[1] / v[0])


def unstable_direction_at(base_map, point, precision_bits: int, iterations: int | None = None):
    """Unstable direction (first component 1) via the backward orbit."""
    with bits(precision_bits):
        log_lam, log_mu, e_u, _ = base_map.eig_linear()
        if base_map.is_linear:
            return (to_mpf(e_u[0]), to_mpf(e_u[1]))
        if iterations is None:
            gap = float(log_lam - log_mu)
            iterations = int((precision_bits + 16) * math.log(2) / gap) + 4
        bwd = [(to_mpf(point[0]), to_mpf(point[1]))]
        for _ in range(iterations):
            bwd.append(base_map.apply_inverse(bwd[-1], precision_bits))
        v = (to_mpf(e_u[0]), to_mpf(e_u[1]))
        for k in range(iterations, 0, -1):
            d = base_map.derivative(bwd[k])
            v = (d[0][0] * v[0] + d[0][1] * v[1], d[1][0] * v[0] + d[1][1] * v[1])
            n = mp.sqrt(v[0] ** 2 + v[1] ** 2)
            v = (v[0] / n, v[1] / n)
        return (mp.mpf(1), v[1] / v[0])


_ = BaseMap  # imported for type context
