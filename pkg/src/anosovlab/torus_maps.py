"""Hyperbolic torus diffeomorphisms: exact linear automorphisms and their
closed-form trigonometric perturbations.

A BaseMap is x |-> A x + eps * v(x) mod Z^2 with A an integer matrix,
|trace A| > 2, det A = +-1, and v a finite sum of trigonometric vector-field
terms. Everything downstream (suspension flows, shadowing, thermodynamics)
sits on top of three facilities provided here:

  * exact periodic-orbit enumeration for the linear part (integer lattice
    arithmetic, no floating point), with Newton continuation of every orbit
    to the perturbed map;
  * stable/unstable multiplier extraction along cycles via transported
    invariant directions (log-space products, safe for long cycles);
  * a numerical Anosov gate: strict cone-field invariance plus uniform
    expansion over a padded grid. It is an admissibility check, not a proof.

Linear-map orbits are exact rationals; perturbed-map computations run either
on float64 (orbit ensembles) or on mpmath at a caller-chosen precision
(shadowing and obstruction pipelines).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath as mp
import numpy as np

from .jets import TJet
from .mparith import bits, to_mpf

TWO_PI = 2 * math.pi


# ---------------------------------------------------------------------------
# map definition


@dataclass(frozen=True)
class TrigTerm:
    """One vector-field term amp * trig(2 pi wave . x)."""

    wave: tuple[int, int]
    amp: tuple[Fraction, Fraction]
    kind: str = "sin"  # "sin" | "cos"

    def __post_init__(self):
        if self.kind not in ("sin", "cos"):
            raise ValueError("trig term kind must be 'sin' or 'cos'")
        object.__setattr__(self, "wave", (int(self.wave[0]), int(self.wave[1])))
        object.__setattr__(
            self, "amp", (Fraction(self.amp[0]), Fraction(self.amp[1]))
        )


@dataclass(frozen=True)
class BaseMap:
    """Anosov diffeomorphism of the 2-torus with closed-form derivatives."""

    linear: tuple[tuple[int, int], tuple[int, int]]
    terms: tuple[TrigTerm, ...] = ()
    epsilon: Fraction = Fraction(0)
    cone_report: "ConeReport | None" = field(default=None, compare=False)

    def __post_init__(self):
        a = self.linear
        tr = a[0][0] + a[1][1]
        det = a[0][0] * a[1][1] - a[0][1] * a[1][0]
        if abs(tr) <= 2:
            raise ValueError(f"linear part not hyperbolic: |trace| = {abs(tr)} <= 2")
        if det not in (1, -1):
            raise ValueError(f"linear part not unimodular: det = {det}")

    # -- static data --------------------------------------------------------

    @property
    def is_linear(self) -> bool:
        return self.epsilon == 0 or not self.terms

    @property
    def trace(self) -> int:
        return self.linear[0][0] + self.linear[1][1]

    @property
    def det_linear(self) -> int:
        a = self.linear
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]

    @property
    def area_preserving_exactly(self) -> bool:
        """True only when the Jacobian determinant is identically one."""
        return self.det_linear == 1 and self.is_linear

    def eig_linear(self):
        """(log lambda, log mu, e_u, e_s) of the linear part at working
        precision; eigenvectors normalized to first component 1."""
        a = self.linear
        tr = mp.mpf(self.trace)
        det = mp.mpf(self.det_linear)
        root = mp.sqrt(tr * tr - 4 * det)
        lam = (tr + root) / 2
        mu = (tr - root) / 2
        if lam <= 1 or not (0 < mu < 1):
            raise ValueError("linear part does not have 0 < mu < 1 < lambda")
        b = a[0][1]
        if b == 0:
            raise ValueError("linear part with zero upper-right entry unsupported")
        e_u = (mp.mpf(1), (lam - a[0][0]) / b)
        e_s = (mp.mpf(1), (mu - a[0][0]) / b)
        return mp.log(lam), mp.log(mu), e_u, e_s

    # -- evaluation (mpf / Fraction / TJet components) -----------------------

    def vfield(self, x):
        """eps * v(x); works on mpf scalars and TJet components alike."""
        zero = x[0] * 0
        out = [zero, zero]
        eps = to_mpf(self.epsilon)
        for t in self.terms:
            phase = (x[0] * (2 * t.wave[0]) + x[1] * (2 * t.wave[1])) * mp.pi
            if isinstance(phase, TJet):
                w = phase.sin() if t.kind == "sin" else phase.cos()
            else:
                ph = to_mpf(phase)
                w = mp.sin(ph) if t.kind == "sin" else mp.cos(ph)
            out[0] = out[0] + w * (eps * to_mpf(t.amp[0]))
            out[1] = out[1] + w * (eps * to_mpf(t.amp[1]))
        return out

    def apply_lift(self, x):
        """Lift of the map to R^2 (exact on Fractions for linear maps)."""
        a = self.linear
        if self.is_linear:
            return (
                a[0][0] * x[0] + a[0][1] * x[1],
                a[1][0] * x[0] + a[1][1] * x[1],
            )
        v = self.vfield(x)
        return (
            x[0] * a[0][0] + x[1] * a[0][1] + v[0],
            x[0] * a[1][0] + x[1] * a[1][1] + v[1],
        )

    def apply(self, x):
        y = self.apply_lift(x)
        return (_mod1(y[0]), _mod1(y[1]))

    def derivative(self, x):
        """Df(x) as a 2x2 list of mpf (integer-valued for linear maps)."""
        a = self.linear
        d = [[mp.mpf(a[0][0]), mp.mpf(a[0][1])], [mp.mpf(a[1][0]), mp.mpf(a[1][1])]]
        if self.is_linear:
            return d
        eps = to_mpf(self.epsilon)
        two_pi = 2 * mp.pi
        for t in self.terms:
            phase = two_pi * (t.wave[0] * to_mpf(x[0]) + t.wave[1] * to_mpf(x[1]))
            dtrig = mp.cos(phase) if t.kind == "sin" else -mp.sin(phase)
            for i in range(2):
                ai = eps * to_mpf(t.amp[i]) * two_pi * dtrig
                d[i][0] += ai * t.wave[0]
                d[i][1] += ai * t.wave[1]
        return d

    def det_derivative(self, x):
        d = self.derivative(x)
        return d[0][0] * d[1][1] - d[0][1] * d[1][0]

    def apply_inverse(self, y, precision_bits: int = 64):
        """Newton inverse on the torus; exact for linear maps."""
        a = self.linear
        det = self.det_linear
        inv = ((a[1][1] * det, -a[0][1] * det), (-a[1][0] * det, a[0][0] * det))
        if self.is_linear:
            x = (
                inv[0][0] * y[0] + inv[0][1] * y[1],
                inv[1][0] * y[0] + inv[1][1] * y[1],
            )
            return (_mod1(x[0]), _mod1(x[1]))
        with bits(precision_bits):
            ym = (to_mpf(y[0]), to_mpf(y[1]))
            x = [
                inv[0][0] * ym[0] + inv[0][1] * ym[1],
                inv[1][0] * ym[0] + inv[1][1] * ym[1],
            ]
            tol = mp.mpf(2) ** (-precision_bits - 4)
            for _ in range(200):
                fx = self.apply_lift(x)
                rx = _nearest_residual(fx[0] - ym[0])
                ry = _nearest_residual(fx[1] - ym[1])
                if abs(rx) + abs(ry) < tol:
                    break
                d = self.derivative(x)
                dd = d[0][0] * d[1][1] - d[0][1] * d[1][0]
                x[0] -= (d[1][1] * rx - d[0][1] * ry) / dd
                x[1] -= (-d[1][0] * rx + d[0][0] * ry) / dd
            else:
                raise RuntimeError("inverse Newton did not converge")
            return (_mod1(x[0]), _mod1(x[1]))

    # -- float64 batched evaluation (ensembles) -----------------------------

    def apply_lift_np(self, x: np.ndarray) -> np.ndarray:
        a = np.array(self.linear, dtype=float)
        y = x @ a.T
        if not self.is_linear:
            eps = float(self.epsilon)
            for t in self.terms:
                phase = TWO_PI * (x @ np.array(t.wave, dtype=float))
                w = np.sin(phase) if t.kind == "sin" else np.cos(phase)
                y += eps * np.outer(w, np.array([float(t.amp[0]), float(t.amp[1])]))
        return y

    def derivative_np(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        d = np.broadcast_to(np.array(self.linear, dtype=float), (n, 2, 2)).copy()
        if not self.is_linear:
            eps = float(self.epsilon)
            for t in self.terms:
                phase = TWO_PI * (x @ np.array(t.wave, dtype=float))
                dtrig = np.cos(phase) if t.kind == "sin" else -np.sin(phase)
                amp = np.array([float(t.amp[0]), float(t.amp[1])])
                wave = np.array(t.wave, dtype=float)
                d += eps * TWO_PI * dtrig[:, None, None] * np.outer(amp, wave)[None, :, :]
        return d


def _mod1(x):
    if isinstance(x, Fraction):
        return x - (x.numerator // x.denominator)
    if isinstance(x, int):
        return Fraction(0)
    return x - mp.floor(x)


def _nearest_residual(x):
    """Reduce an mpf to (-1/2, 1/2] modulo 1."""
    return x - mp.floor(x + mp.mpf("0.5"))


# ---------------------------------------------------------------------------
# constructors


def make_linear_map(matrix) -> BaseMap:
    m = ((int(matrix[0][0]), int(matrix[0][1])), (int(matrix[1][0]), int(matrix[1][1])))
    return BaseMap(linear=m)


def make_perturbed_map(matrix, perturbation_terms, epsilon, grid_resolution: int = 64) -> BaseMap:
    """Build a perturbed map, gated by the cone certificate."""
    m = ((int(matrix[0][0]), int(matrix[0][1])), (int(matrix[1][0]), int(matrix[1][1])))
    terms = tuple(
        t if isinstance(t, TrigTerm) else TrigTerm(*t) for t in perturbation_terms
    )
    eps = epsilon if isinstance(epsilon, Fraction) else Fraction(str(epsilon))
    candidate = BaseMap(linear=m, terms=terms, epsilon=eps)
    if eps == 0:
        return candidate
    report = verify_anosov_cones(candidate, grid_resolution)
    if not report.passed:
        raise ValueError(
            "cone certificate failed at grid cell "
            f"{report.witness_cell}: {report.reason}"
        )
    return BaseMap(linear=m, terms=terms, epsilon=eps, cone_report=report)


# ---------------------------------------------------------------------------
# cone certificate


@dataclass(frozen=True)
class ConeReport:
    passed: bool
    grid_resolution: int
    unstable_slopes: tuple[float, float]
    stable_slopes: tuple[float, float]
    min_unstable_expansion: float
    min_stable_backward_expansion: float
    witness_cell: tuple[int, int] | None = None
    reason: str = ""


def verify_anosov_cones(base_map: BaseMap, grid_resolution: int = 64) -> ConeReport:
    """Strict invariance + uniform expansion of constant slope-interval cones.

    Every grid cell is checked with a Lipschitz pad on the derivative entries
    so off-grid points are covered; cone intervals are auto-tuned around the
    linear eigen-slopes. Failure is a report, not an exception.
    """
    a = np.array(base_map.linear, dtype=float)
    tr, det = base_map.trace, base_map.det_linear
    lam = (tr + math.sqrt(tr * tr - 4 * det)) / 2
    mu_ = det / lam
    s_u = (lam - a[0][0]) / a[0][1]
    s_s = (mu_ - a[0][0]) / a[0][1]

    res = grid_resolution
    xs = (np.arange(res) + 0.5) / res
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    d = base_map.derivative_np(pts)

    eps = abs(float(base_map.epsilon))
    lip = sum(
        max(abs(float(t.amp[0])), abs(float(t.amp[1])))
        * (TWO_PI ** 2)
        * (abs(t.wave[0]) + abs(t.wave[1])) ** 2
        for t in base_map.terms
    )
    pad = eps * lip * (0.5 / res) if base_map.terms else 0.0

    report = None
    for width_u, width_s in ((0.3, 0.45), (0.45, 0.7), (0.6, 1.0), (0.8, 1.4), (1.0, 1.8)):
        ok, report = _check_cones(d, res, pad, s_u, s_s, width_u, width_s)
        if ok:
            return report
    return report


def _corner_offsets(pad):
    if pad == 0.0:
        return [np.zeros((2, 2))]
    out = []
    for s00 in (-pad, pad):
        for s01 in (-pad, pad):
            for s10 in (-pad, pad):
                for s11 in (-pad, pad):
                    out.append(np.array([[s00, s01], [s10, s11]]))
    return out


def _check_cones(d, res, pad, s_u, s_s, width_u, width_s):
    lo_u, hi_u = s_u - width_u, s_u + width_u
    lo_s, hi_s = s_s - width_s, s_s + width_s
    margin_u = 0.03 * width_u
    margin_s = 0.03 * width_s
    min_exp_u = math.inf
    min_exp_s = math.inf

    def fail(idx_arr, reason):
        idx = int(idx_arr)
        return False, ConeReport(
            False, res, (lo_u, hi_u), (lo_s, hi_s),
            min_exp_u if math.isfinite(min_exp_u) else 0.0,
            min_exp_s if math.isfinite(min_exp_s) else 0.0,
            (idx // res, idx % res), reason,
        )

    for off in _corner_offsets(pad):
        m = d + off[None, :, :]
        detm = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
        if np.any(detm == 0):
            return fail(np.argmin(np.abs(detm)), "singular derivative")
        minv = np.empty_like(m)
        minv[:, 0, 0] = m[:, 1, 1] / detm
        minv[:, 0, 1] = -m[:, 0, 1] / detm
        minv[:, 1, 0] = -m[:, 1, 0] / detm
        minv[:, 1, 1] = m[:, 0, 0] / detm
        for s in (lo_u, hi_u):
            w0 = m[:, 0, 0] + m[:, 0, 1] * s
            w1 = m[:, 1, 0] + m[:, 1, 1] * s
            if np.any(w0 == 0):
                return fail(np.argmin(np.abs(w0)), "unstable cone folds")
            slope = w1 / w0
            bad = (slope <= lo_u + margin_u) | (slope >= hi_u - margin_u)
            if np.any(bad):
                return fail(np.argmax(bad), f"unstable cone not invariant (width {width_u})")
            growth = np.sqrt(w0 ** 2 + w1 ** 2) / math.sqrt(1 + s * s)
            min_exp_u = min(min_exp_u, float(growth.min()))
            if min_exp_u <= 1.0:
                return fail(np.argmin(growth), f"unstable expansion {min_exp_u:.4f} <= 1")
        for s in (lo_s, hi_s):
            w0 = minv[:, 0, 0] + minv[:, 0, 1] * s
            w1 = minv[:, 1, 0] + minv[:, 1, 1] * s
            if np.any(w0 == 0):
                return fail(np.argmin(np.abs(w0)), "stable cone folds")
            slope = w1 / w0
            bad = (slope <= lo_s + margin_s) | (slope >= hi_s - margin_s)
            if np.any(bad):
                return fail(np.argmax(bad), f"stable cone not invariant (width {width_s})")
            growth = np.sqrt(w0 ** 2 + w1 ** 2) / math.sqrt(1 + s * s)
            min_exp_s = min(min_exp_s, float(growth.min()))
            if min_exp_s <= 1.0:
                return fail(np.argmin(growth), f"stable backward expansion {min_exp_s:.4f} <= 1")
    return True, ConeReport(True, res, (lo_u, hi_u), (lo_s, hi_s), min_exp_u, min_exp_s)


# ---------------------------------------------------------------------------
# periodic orbits


@dataclass(frozen=True)
class BasePeriodicOrbit:
    period_N: int
    representative: tuple  # Fraction pair (linear) or float/mpf pair (perturbed)
    lattice_class: tuple[int, int]
    symbolic_id: str
    seed: tuple[Fraction, Fraction] | None = None


@dataclass(frozen=True)
class Multipliers:
    """Stable/unstable multipliers, stored in log space.

    jacobian == mu * lambda holds exactly by construction: log_jac is the
    primary quantity (sum of log det Df along the cycle) and log_mu is
    defined as log_jac - log_lambda.
    """

    log_mu: object
    log_lambda: object

    @property
    def mu(self):
        return mp.e ** self.log_mu if isinstance(self.log_mu, mp.mpf) else math.exp(self.log_mu)

    @property
    def lam(self):
        return mp.e ** self.log_lambda if isinstance(self.log_lambda, mp.mpf) else math.exp(self.log_lambda)

    @property
    def log_jacobian(self):
        return self.log_mu + self.log_lambda

    @property
    def jacobian(self):
        lj = self.log_jacobian
        return mp.e ** lj if isinstance(lj, mp.mpf) else math.exp(lj)


def _snf_2x2(m):
    """U m V = diag(d1, d2) with U, V unimodular; returns (diag, U, V)."""
    m = [[int(m[0][0]), int(m[0][1])], [int(m[1][0]), int(m[1][1])]]
    u = [[1, 0], [0, 1]]
    v = [[1, 0], [0, 1]]

    def row_op(i, j, k):
        m[i][0] += k * m[j][0]
        m[i][1] += k * m[j][1]
        u[i][0] += k * u[j][0]
        u[i][1] += k * u[j][1]

    def col_op(i, j, k):
        m[0][i] += k * m[0][j]
        m[1][i] += k * m[1][j]
        v[0][i] += k * v[0][j]
        v[1][i] += k * v[1][j]

    def swap_rows():
        m[0], m[1] = m[1], m[0]
        u[0], u[1] = u[1], u[0]

    def swap_cols():
        m[0][0], m[0][1] = m[0][1], m[0][0]
        m[1][0], m[1][1] = m[1][1], m[1][0]
        v[0][0], v[0][1] = v[0][1], v[0][0]
        v[1][0], v[1][1] = v[1][1], v[1][0]

    for _ in range(400):
        if m[0][0] == 0:
            if m[1][0] != 0:
                swap_rows()
            elif m[0][1] != 0:
                swap_cols()
            elif m[1][1] != 0:
                swap_rows()
                swap_cols()
            else:
                break
        if m[1][0] != 0:
            if m[0][0] != 0 and abs(m[1][0]) < abs(m[0][0]):
                swap_rows()
            if m[0][0] != 0:
                row_op(1, 0, -(m[1][0] // m[0][0]))
            continue
        if m[0][1] != 0:
            if m[0][0] != 0 and abs(m[0][1]) < abs(m[0][0]):
                swap_cols()
            if m[0][0] != 0:
                col_op(1, 0, -(m[0][1] // m[0][0]))
            continue
        break
    if m[0][0] < 0:
        m[0][0] = -m[0][0]
        u[0][0], u[0][1] = -u[0][0], -u[0][1]
    if m[1][1] < 0:
        m[1][1] = -m[1][1]
        u[1][0], u[1][1] = -u[1][0], -u[1][1]
    return m, u, v


def mat_pow_int(a, n: int):
    r = ((1, 0), (0, 1))
    b = (tuple(a[0]), tuple(a[1]))
    while n:
        if n & 1:
            r = _mat_mul_int(r, b)
        b = _mat_mul_int(b, b)
        n >>= 1
    return r


def _mat_mul_int(a, b):
    return (
        (a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]),
        (a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]),
    )


def lattice_point_count(linear, n: int) -> int:
    """|det(A^n - I)|: the exact number of period-n points of the linear map."""
    an = mat_pow_int(linear, n)
    m = ((an[0][0] - 1, an[0][1]), (an[1][0], an[1][1] - 1))
    return abs(m[0][0] * m[1][1] - m[0][1] * m[1][0])


def lattice_points_brute(linear, n: int):
    """Small-n brute-force oracle: scan the (Q x Q) rational grid directly."""
    an = mat_pow_int(linear, n)
    m = ((an[0][0] - 1, an[0][1]), (an[1][0], an[1][1] - 1))
    q = abs(m[0][0] * m[1][1] - m[0][1] * m[1][0])
    hits = []
    for i in range(q):
        for j in range(q):
            if (m[0][0] * i + m[0][1] * j) % q == 0 and (m[1][0] * i + m[1][1] * j) % q == 0:
                hits.append((Fraction(i, q), Fraction(j, q)))
    return hits


def _linear_period_n_points_int(linear, n: int):
    """(Q, int array of period-n points scaled by Q, int array of classes)."""
    an = mat_pow_int(linear, n)
    m = ((an[0][0] - 1, an[0][1]), (an[1][0], an[1][1] - 1))
    diag, _u, v = _snf_2x2(m)
    d1, d2 = diag[0][0], diag[1][1]
    q = d1 * d2
    i = np.arange(d1, dtype=np.int64)
    j = np.arange(d2, dtype=np.int64)
    gi, gj = np.meshgrid(i, j, indexing="ij")
    gi = gi.ravel()
    gj = gj.ravel()
    # x = V diag(1/d1, 1/d2) (i, j); scale by q = d1 d2
    ax = (v[0][0] * gi * d2 + v[0][1] * gj * d1) % q
    ay = (v[1][0] * gi * d2 + v[1][1] * gj * d1) % q
    cx = (m[0][0] * ax + m[0][1] * ay) // q
    cy = (m[1][0] * ax + m[1][1] * ay) // q
    assert np.all((m[0][0] * ax + m[0][1] * ay) % q == 0)
    assert np.all((m[1][0] * ax + m[1][1] * ay) % q == 0)
    return q, np.stack([ax, ay], axis=1), np.stack([cx, cy], axis=1)


def enumerate_periodic_orbits(base_map: BaseMap, n_max: int, precision_bits: int = 64):
    """One BasePeriodicOrbit per cycle of each period <= n_max.

    Linear maps are enumerated exactly (integer lattice arithmetic); for
    perturbed maps every linear cycle representative is continued by a damped
    Newton homotopy on the lifted fixed-point equation with the lattice class
    frozen from the seed.
    """
    seen: set = set()
    orbits: list[BasePeriodicOrbit] = []
    a = base_map.linear
    for n in range(1, n_max + 1):
        q, pts, classes = _linear_period_n_points_int(a, n)
        keys = [
            (Fraction(int(x), q), Fraction(int(y), q)) for x, y in pts
        ]
        fresh_idx = [k for k, key in enumerate(keys) if key not in seen]
        if not fresh_idx:
            continue
        fresh_pts = pts[fresh_idx]
        enc = fresh_pts[:, 0] * q + fresh_pts[:, 1]
        order = np.argsort(enc)
        enc_sorted = enc[order]
        # permutation: image of each fresh point under the map, looked up
        img = np.stack(
            [
                (a[0][0] * fresh_pts[:, 0] + a[0][1] * fresh_pts[:, 1]) % q,
                (a[1][0] * fresh_pts[:, 0] + a[1][1] * fresh_pts[:, 1]) % q,
            ],
            axis=1,
        )
        enc_img = img[:, 0] * q + img[:, 1]
        pos = np.searchsorted(enc_sorted, enc_img)
        if not np.all(enc_sorted[pos] == enc_img):
            raise RuntimeError("period-n point set not map-invariant (bug)")
        perm = order[pos]
        visited = np.zeros(len(fresh_idx), dtype=bool)
        cycle_reps = []
        for start in range(len(fresh_idx)):
            if visited[start]:
                continue
            cyc = []
            cur = start
            while not visited[cur]:
                visited[cur] = True
                cyc.append(cur)
                cur = int(perm[cur])
            assert len(cyc) == n, "exact period mismatch in cycle grouping"
            best = min(cyc, key=lambda k: (int(fresh_pts[k, 0]), int(fresh_pts[k, 1])))
            cycle_reps.append(best)
        for k in sorted(cycle_reps, key=lambda t: (int(fresh_pts[t, 0]), int(fresh_pts[t, 1]))):
            rep = (Fraction(int(fresh_pts[k, 0]), q), Fraction(int(fresh_pts[k, 1]), q))
            gidx = fresh_idx[k]
            cls = (int(classes[gidx, 0]), int(classes[gidx, 1]))
            sid = f"n{n}:{rep[0].numerator}/{rep[0].denominator}:{rep[1].numerator}/{rep[1].denominator}"
            orbits.append(
                BasePeriodicOrbit(
                    period_N=n, representative=rep, lattice_class=cls,
                    symbolic_id=sid, seed=rep,
                )
            )
        for key in keys:
            seen.add(key)
    if base_map.is_linear:
        return orbits
    return _continue_orbits(base_map, orbits)


def _continue_orbits(base_map: BaseMap, seeds, max_substep=Fraction(1, 25)):
    """Continuation of all seed orbits to the perturbed map (float64).

    Each cycle is solved as a sequence of points (f(x_k) = x_{k+1} + off_k,
    integer offsets frozen from the exact linear cycle) with hyperbolic
    frame sweeps: uniformly conditioned in the period and with the wide
    pseudo-orbit basin of the constructive shadowing argument.
    """
    eps = base_map.epsilon
    n_sub = max(1, math.ceil(abs(float(eps)) / float(max_substep)))
    out = []
    by_period: dict[int, list] = {}
    for o in seeds:
        by_period.setdefault(o.period_N, []).append(o)
    lin = BaseMap(linear=base_map.linear)
    a_int = base_map.linear
    for n, group in sorted(by_period.items()):
        bsz = len(group)
        pts = np.zeros((bsz, n, 2))
        offs = np.zeros((bsz, n, 2))
        for b, o in enumerate(group):
            cur = o.representative
            for k in range(n):
                pts[b, k, 0] = float(cur[0])
                pts[b, k, 1] = float(cur[1])
                nxt = lin.apply_lift(cur)
                red = (_mod1(nxt[0]), _mod1(nxt[1]))
                offs[b, k, 0] = float(nxt[0] - red[0])
                offs[b, k, 1] = float(nxt[1] - red[1])
                cur = red
        seed_pts = pts.copy()
        for j in range(1, n_sub + 1):
            sub = BaseMap(
                linear=base_map.linear,
                terms=base_map.terms,
                epsilon=eps * Fraction(j, n_sub),
            )
            pts = _sequence_newton_np(sub, pts, offs, group)
        disp = np.max(np.abs(pts - seed_pts)) if bsz else 0.0
        budget = 30.0 * abs(float(eps)) + 1e-9
        if disp > budget:
            raise RuntimeError(
                f"continued orbit displacement {disp:.3g} exceeds budget {budget:.3g}"
            )
        for b, o in enumerate(group):
            cyc = pts[b]
            k = int(np.lexsort((cyc[:, 1], cyc[:, 0]))[0])
            rep = (cyc[k, 0], cyc[k, 1])
            rolled = np.roll(offs[b], -k, axis=0)
            cls_vec = np.zeros(2)
            a = np.array(a_int, dtype=float)
            for q in range(n):
                cls_vec = a @ cls_vec + rolled[q]
            out.append(
                BasePeriodicOrbit(
                    period_N=n,
                    representative=(float(rep[0]), float(rep[1])),
                    lattice_class=(int(round(cls_vec[0])), int(round(cls_vec[1]))),
                    symbolic_id=o.symbolic_id,
                    seed=o.seed,
                )
            )
    return out


def _sequence_newton_np(sub: BaseMap, pts, offs, group, iters=50, tol=2e-13):
    """Batched cyclic sequence Newton with hyperbolic frame sweeps."""
    bsz, n, _ = pts.shape
    a = np.array(sub.linear, dtype=float)
    tr, det = sub.trace, sub.det_linear
    lam = (tr + math.sqrt(tr * tr - 4 * det)) / 2
    e_u = np.array([1.0, (lam - a[0, 0]) / a[0, 1]])
    e_u /= np.linalg.norm(e_u)
    e_s = np.array([1.0, (det / lam - a[0, 0]) / a[0, 1]])
    e_s /= np.linalg.norm(e_s)
    wraps = max(3, int(72.0 / (n * math.log(lam))) + 2)
    step = None
    for _ in range(iters):
        flat = pts.reshape(-1, 2)
        fx = sub.apply_lift_np(flat).reshape(bsz, n, 2)
        resid = fx - np.roll(pts, -1, axis=1) - offs
        derivs = sub.derivative_np(flat).reshape(bsz, n, 2, 2)
        dets = derivs[..., 0, 0] * derivs[..., 1, 1] - derivs[..., 0, 1] * derivs[..., 1, 0]
        u = np.empty((bsz, n, 2))
        nu_u = np.empty((bsz, n))
        v = np.broadcast_to(e_u, (bsz, 2)).copy()
        for _w in range(wraps):
            for k in range(n):
                u[:, k] = v
                w = np.einsum("bij,bj->bi", derivs[:, k], v)
                nrm = np.linalg.norm(w, axis=1)
                nu_u[:, k] = nrm
                v = w / nrm[:, None]
        s = np.empty((bsz, n, 2))
        nu_s = np.empty((bsz, n))
        w = np.broadcast_to(e_s, (bsz, 2)).copy()
        for _w in range(wraps):
            for k in range(n - 1, -1, -1):
                dm = derivs[:, k]
                prev = np.empty((bsz, 2))
                prev[:, 0] = (dm[:, 1, 1] * w[:, 0] - dm[:, 0, 1] * w[:, 1]) / dets[:, k]
                prev[:, 1] = (-dm[:, 1, 0] * w[:, 0] + dm[:, 0, 0] * w[:, 1]) / dets[:, k]
                nrm = np.linalg.norm(prev, axis=1)
                s[:, k] = prev / nrm[:, None]
                nu_s[:, k] = 1.0 / nrm
                w = s[:, k]
        u_next = np.roll(u, -1, axis=1)
        s_next = np.roll(s, -1, axis=1)
        det2 = u_next[..., 0] * s_next[..., 1] - s_next[..., 0] * u_next[..., 1]
        rho_u = (resid[..., 0] * s_next[..., 1] - s_next[..., 0] * resid[..., 1]) / det2
        rho_s = (u_next[..., 0] * resid[..., 1] - resid[..., 0] * u_next[..., 1]) / det2
        a_c = np.zeros((bsz, n))
        acur = np.zeros(bsz)
        for _w in range(wraps):
            for k in range(n - 1, -1, -1):
                acur = (acur - rho_u[:, k]) / nu_u[:, k]
                a_c[:, k] = acur
        b_c = np.zeros((bsz, n))
        bcur = np.zeros(bsz)
        first = True
        for _w in range(wraps):
            for k in range(n):
                if first:
                    first = False
                else:
                    bcur = nu_s[:, k - 1] * bcur + rho_s[:, k - 1]
                b_c[:, k] = bcur
        delta = a_c[..., None] * u + b_c[..., None] * s
        nrm = np.max(np.abs(delta), axis=(1, 2), keepdims=True)
        scale = np.where(nrm > 0.25, 0.25 / np.maximum(nrm, 1e-300), 1.0)
        pts = pts + delta * scale
        step = float(np.max(np.abs(delta)))
        if step < tol:
            return pts
    bad = int(np.argmax(np.max(np.abs(resid), axis=(1, 2))))
    raise RuntimeError(
        f"sequence Newton did not converge for seed {group[bad].symbolic_id} "
        f"(epsilon too large for continuation; last step {step:.3g})"
    )


def _cycle_np(base_map: BaseMap, x0, n):
    """Torus cycle from x0 plus the exact lift endpoint of one period.

    The integer part of the lift is tracked separately (lift(f)(y + k) =
    lift(f)(y) + A k for integer k), so the lattice class stays exact even
    when A^n is large.
    """
    a = np.array(base_map.linear, dtype=float)
    pts = np.empty((n, 2))
    y = np.asarray(x0, dtype=float) % 1.0
    k = np.zeros(2)
    for i in range(n):
        pts[i] = y
        lifted = base_map.apply_lift_np(np.array([y]))[0]
        y_next = lifted % 1.0
        k = a @ k + np.rint(lifted - y_next)
        y = y_next
    lift_end = y + k
    return pts, lift_end


# -- high-precision orbit refinement ---------------------------------------


def refine_orbit_mp(base_map: BaseMap, orbit: BasePeriodicOrbit, precision_bits: int):
    """Polish an orbit representative to mpf at the requested precision."""
    if base_map.is_linear:
        return (orbit.representative[0], orbit.representative[1])
    with bits(precision_bits):
        x = [to_mpf(orbit.representative[0]), to_mpf(orbit.representative[1])]
        m = orbit.lattice_class
        n = orbit.period_N
        tol = mp.mpf(2) ** (-precision_bits)
        for _ in range(100):
            y = [x[0], x[1]]
            dfn = [[mp.mpf(1), mp.mpf(0)], [mp.mpf(0), mp.mpf(1)]]
            for _ in range(n):
                d = base_map.derivative(y)
                dfn = _mat_mul_mp(d, dfn)
                y = list(base_map.apply_lift(y))
            g = [y[0] - x[0] - m[0], y[1] - x[1] - m[1]]
            j = [[dfn[0][0] - 1, dfn[0][1]], [dfn[1][0], dfn[1][1] - 1]]
            det = j[0][0] * j[1][1] - j[0][1] * j[1][0]
            dx = (j[1][1] * g[0] - j[0][1] * g[1]) / det
            dy = (-j[1][0] * g[0] + j[0][0] * g[1]) / det
            x[0] -= dx
            x[1] -= dy
            if abs(dx) + abs(dy) < tol:
                break
        else:
            raise RuntimeError(f"high-precision polish failed for {orbit.symbolic_id}")
        return (x[0], x[1])


def _mat_mul_mp(a, b):
    return [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]


def orbit_cycle(base_map: BaseMap, orbit: BasePeriodicOrbit, precision_bits: int = 64):
    """The full cycle, starting at the representative, at working precision."""
    if base_map.is_linear:
        pts = [orbit.representative]
        for _ in range(orbit.period_N - 1):
            pts.append(base_map.apply(pts[-1]))
        return pts
    with bits(precision_bits):
        x = refine_orbit_mp(base_map, orbit, precision_bits)
        pts = [x]
        for _ in range(orbit.period_N - 1):
            pts.append(base_map.apply(pts[-1]))
        return pts


def orbit_multipliers(base_map: BaseMap, orbit: BasePeriodicOrbit, precision_bits: int = 64) -> Multipliers:
    """Multipliers of the cycle product of Df via transported unstable
    directions (log-space accumulation; no long matrix products)."""
    with bits(precision_bits):
        cyc = orbit_cycle(base_map, orbit, precision_bits)
        n = orbit.period_N
        derivs = [base_map.derivative(p) for p in cyc]
        log_jac = mp.fsum(_log_det(d) for d in derivs)
        log_lam_lin, log_mu_lin, _, _ = base_map.eig_linear()
        gap = float(log_lam_lin - log_mu_lin)
        reps = int((precision_bits + 32) * math.log(2) / (gap * n)) + 2
        v = _unstable_direction_seed(base_map)
        for _ in range(min(reps, 2000)):
            for d in derivs:
                v = _normalize(_mat_vec(d, v))
        log_lam = mp.mpf(0)
        for d in derivs:
            w = _mat_vec(d, v)
            nrm = mp.sqrt(w[0] ** 2 + w[1] ** 2)
            log_lam += mp.log(nrm)
            v = (w[0] / nrm, w[1] / nrm)
        log_mu = log_jac - log_lam
        if not (log_mu < 0 < log_lam):
            raise ValueError(
                f"non-hyperbolic spectrum on orbit {orbit.symbolic_id}: "
                f"log mu = {log_mu}, log lambda = {log_lam}"
            )
        return Multipliers(log_mu=log_mu, log_lambda=log_lam)


def _log_det(d):
    det = d[0][0] * d[1][1] - d[0][1] * d[1][0]
    if det <= 0:
        raise ValueError("orientation-reversing or singular derivative on orbit")
    if det == 1:
        return mp.mpf(0)
    return mp.log(det)


def _mat_vec(d, v):
    return (d[0][0] * v[0] + d[0][1] * v[1], d[1][0] * v[0] + d[1][1] * v[1])


def _normalize(v):
    n = mp.sqrt(v[0] ** 2 + v[1] ** 2)
    return (v[0] / n, v[1] / n)


def _unstable_direction_seed(base_map: BaseMap):
    _, _, e_u, _ = base_map.eig_linear()
    return _normalize((to_mpf(e_u[0]), to_mpf(e_u[1])))


def multipliers_batch(base_map: BaseMap, orbits):
    """Float64 multipliers for a whole ensemble, batched per period.

    Returns dict symbolic_id -> (log_mu, log_lambda). For exactly
    area-preserving maps log_jac is pinned to 0 so mu * lambda == 1 exactly.
    """
    out = {}
    by_period: dict[int, list] = {}
    for o in orbits:
        by_period.setdefault(o.period_N, []).append(o)
    a = np.array(base_map.linear, dtype=float)
    tr = base_map.trace
    det = base_map.det_linear
    lam_lin = (tr + math.sqrt(tr * tr - 4 * det)) / 2
    e_u = np.array([1.0, (lam_lin - a[0, 0]) / a[0, 1]])
    e_u /= np.linalg.norm(e_u)
    exact_area = base_map.area_preserving_exactly
    for n, group in sorted(by_period.items()):
        x = np.array([[float(o.representative[0]), float(o.representative[1])] for o in group])
        derivs = []
        cur = x.copy()
        log_jac = np.zeros(len(group))
        for _ in range(n):
            d = base_map.derivative_np(cur)
            derivs.append(d)
            log_jac += np.log(d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0])
            cur = base_map.apply_lift_np(cur) % 1.0
        if exact_area:
            log_jac[:] = 0.0
        v = np.broadcast_to(e_u, (len(group), 2)).copy()
        reps = max(2, int(math.ceil(44.0 / n)))
        for _ in range(reps):
            for d in derivs:
                v = np.einsum("nij,nj->ni", d, v)
                v /= np.linalg.norm(v, axis=1, keepdims=True)
        log_lam = np.zeros(len(group))
        for d in derivs:
            v = np.einsum("nij,nj->ni", d, v)
            nrm = np.linalg.norm(v, axis=1)
            log_lam += np.log(nrm)
            v /= nrm[:, None]
        for o, lj, ll in zip(group, log_jac, log_lam):
            out[o.symbolic_id] = (lj - ll, ll)
    return out


def invariant_directions(base_map: BaseMap, point, precision_bits: int = 64, iterations: int | None = None):
    """Unit stable/unstable directions at a point by cone iteration.

    Exact eigen-directions for linear maps. The stable direction is pulled
    back along the forward orbit, the unstable one pushed forward along the
    backward orbit; both converge geometrically at rate mu/lambda.
    """
    with bits(precision_bits):
        log_lam, log_mu, e_u, e_s = base_map.eig_linear()
        if base_map.is_linear:
            return _normalize((to_mpf(e_s[0]), to_mpf(e_s[1]))), _normalize(
                (to_mpf(e_u[0]), to_mpf(e_u[1]))
            )
        if iterations is None:
            gap = float(log_lam - log_mu)
            iterations = int((precision_bits + 16) * math.log(2) / gap) + 4
        x = (to_mpf(point[0]), to_mpf(point[1]))
        fwd = [x]
        for _ in range(iterations):
            fwd.append(base_map.apply(fwd[-1]))
        v = _normalize((to_mpf(e_s[0]), to_mpf(e_s[1])))
        for k in range(iterations, 0, -1):
            d = base_map.derivative(fwd[k - 1])
            det = d[0][0] * d[1][1] - d[0][1] * d[1][0]
            v = _normalize(
                ((d[1][1] * v[0] - d[0][1] * v[1]) / det,
                 (-d[1][0] * v[0] + d[0][0] * v[1]) / det)
            )
        stable = v if v[0] >= 0 else (-v[0], -v[1])
        bwd = [x]
        for _ in range(iterations):
            bwd.append(base_map.apply_inverse(bwd[-1], precision_bits))
        w = _normalize((to_mpf(e_u[0]), to_mpf(e_u[1])))
        for k in range(iterations, 0, -1):
            d = base_map.derivative(bwd[k])
            w = _normalize(_mat_vec(d, w))
        unstable = w if w[0] >= 0 else (-w[0], -w[1])
        return stable, unstable


# ---------------------------------------------------------------------------
# time reversal


class ReversedMap:
    """f^{-1} as a first-class map for perturbed bases.

    Linear maps invert exactly (time_reversed callers should prefer the
    integer BaseMap A^{-1} in that case); here the lift inverse is computed
    by Newton, with a jet-aware path so the manifold machinery can run on
    reversed models. apply_inverse is the forward map, so backward pipelines
    are cheap.
    """

    def __init__(self, forward: BaseMap, precision_bits: int = 256):
        self.forward = forward
        self.precision_bits = precision_bits
        a = forward.linear
        det = forward.det_linear
        self.linear = (
            (a[1][1] * det, -a[0][1] * det),
            (-a[1][0] * det, a[0][0] * det),
        )
        self.is_linear = forward.is_linear
        self.epsilon = forward.epsilon
        self.terms = forward.terms

    @property
    def trace(self) -> int:
        return self.linear[0][0] + self.linear[1][1]

    @property
    def det_linear(self) -> int:
        a = self.linear
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]

    @property
    def area_preserving_exactly(self) -> bool:
        return self.forward.area_preserving_exactly

    def eig_linear(self):
        a = self.linear
        tr = mp.mpf(self.trace)
        det = mp.mpf(self.det_linear)
        root = mp.sqrt(tr * tr - 4 * det)
        lam = (tr + root) / 2
        mu = (tr - root) / 2
        b = a[0][1]
        if b == 0:
            raise ValueError("reversed linear part with zero upper-right entry")
        e_u = (mp.mpf(1), (lam - a[0][0]) / b)
        e_s = (mp.mpf(1), (mu - a[0][0]) / b)
        return mp.log(lam), mp.log(mu), e_u, e_s

    def apply_lift(self, y):
        if isinstance(y[0], TJet) or isinstance(y[1], TJet):
            return self._apply_lift_jets(y)
        a = self.linear
        x = [
            a[0][0] * to_mpf(y[0]) + a[0][1] * to_mpf(y[1]),
            a[1][0] * to_mpf(y[0]) + a[1][1] * to_mpf(y[1]),
        ]
        if self.forward.is_linear:
            return (x[0], x[1])
        tol = mp.mpf(2) ** (-self.precision_bits - 4)
        for _ in range(200):
            fx = self.forward.apply_lift(x)
            rx, ry = fx[0] - to_mpf(y[0]), fx[1] - to_mpf(y[1])
            if abs(rx) + abs(ry) < tol:
                return (x[0], x[1])
            d = self.forward.derivative(x)
            dd = d[0][0] * d[1][1] - d[0][1] * d[1][0]
            x[0] -= (d[1][1] * rx - d[0][1] * ry) / dd
            x[1] -= (-d[1][0] * rx + d[0][0] * ry) / dd
        raise RuntimeError("reversed lift Newton did not converge")

    def _apply_lift_jets(self, y):
        nx = y[0].nx if isinstance(y[0], TJet) else y[1].nx
        ny = y[0].ny if isinstance(y[0], TJet) else y[1].ny
        yj = [
            y[0] if isinstance(y[0], TJet) else TJet.const(y[0], nx, ny),
            y[1] if isinstance(y[1], TJet) else TJet.const(y[1], nx, ny),
        ]
        x_val = self.apply_lift((yj[0].value, yj[1].value))
        x = [TJet.const(x_val[0], nx, ny), TJet.const(x_val[1], nx, ny)]
        d = self.forward.derivative(x_val)
        dd = d[0][0] * d[1][1] - d[0][1] * d[1][0]
        for _ in range(nx + ny + 3):
            fx = self.forward.apply_lift(x)
            rx = fx[0] - yj[0]
            ry = fx[1] - yj[1]
            x[0] = x[0] - (rx * d[1][1] - ry * d[0][1]) * (1 / dd)
            x[1] = x[1] - (ry * d[0][0] - rx * d[1][0]) * (1 / dd)
        return x

    def apply(self, y):
        x = self.apply_lift((to_mpf(y[0]), to_mpf(y[1])))
        return (_mod1(x[0]), _mod1(x[1]))

    def apply_inverse(self, x, precision_bits: int | None = None):
        return self.forward.apply(x)

    def derivative(self, y):
        x = self.apply_lift((to_mpf(y[0]), to_mpf(y[1])))
        d = self.forward.derivative(x)
        det = d[0][0] * d[1][1] - d[0][1] * d[1][0]
        return [
            [d[1][1] / det, -d[0][1] / det],
            [-d[1][0] / det, d[0][0] / det],
        ]


# ---------------------------------------------------------------------------
# serialization


def map_to_json(base_map: BaseMap) -> dict:
    return {
        "linear": [list(base_map.linear[0]), list(base_map.linear[1])],
        "terms": [
            {
                "wave": list(t.wave),
                "amp": [str(t.amp[0]), str(t.amp[1])],
                "kind": t.kind,
            }
            for t in base_map.terms
        ],
        "epsilon": str(base_map.epsilon),
    }


def map_from_json(obj: dict) -> BaseMap:
    terms = [
        TrigTerm(
            wave=tuple(t["wave"]),
            amp=(Fraction(t["amp"][0]), Fraction(t["amp"][1])),
            kind=t.get("kind", "sin"),
        )
        for t in obj.get("terms", [])
    ]
    eps = Fraction(obj.get("epsilon", "0"))
    if eps == 0 or not terms:
        return make_linear_map(obj["linear"])
    return make_perturbed_map(obj["linear"], terms, eps)


def orbits_to_csv(base_map: BaseMap, orbits, path=None):
    """CSV columns: symbolic_id, N, x1, x2, mu, lambda, jacobian."""
    mults = multipliers_batch(base_map, orbits)
    lines = ["symbolic_id,N,x1,x2,mu,lambda,jacobian"]
    for o in orbits:
        lm, ll = mults[o.symbolic_id]
        lines.append(
            f"{o.symbolic_id},{o.period_N},{float(o.representative[0]):.17g},"
            f"{float(o.representative[1]):.17g},{math.exp(lm):.17g},"
            f"{math.exp(ll):.17g},{math.exp(lm + ll):.17g}"
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text
