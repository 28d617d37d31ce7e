"""Truncated bivariate Taylor arithmetic (jets) at mpmath precision.

A TJet stores coefficients c[i][j] of a Taylor expansion sum c[i][j] x^i y^j
with independent degree caps in x and y. The laboratory pushes jets through
torus maps and roof functions to obtain exact mixed partial derivatives of
return times and manifold parametrizations, so the caps stay tiny (x-degree
at most ~2, y-degree at most ~8) and dense convolution is cheap.

All coefficient arithmetic happens at the caller's mpmath working precision.
"""

from __future__ import annotations

import mpmath as mp

from .mparith import to_mpf


class TJet:
    __slots__ = ("nx", "ny", "c")

    def __init__(self, nx: int, ny: int, coeffs=None):
        self.nx = nx
        self.ny = ny
        if coeffs is None:
            z = mp.mpf(0)
            self.c = [[z for _ in range(ny + 1)] for _ in range(nx + 1)]
        else:
            self.c = coeffs

    @classmethod
    def const(cls, value, nx: int, ny: int) -> "TJet":
        j = cls(nx, ny)
        j.c[0][0] = to_mpf(value)
        return j

    @classmethod
    def var_x(cls, value, nx: int, ny: int) -> "TJet":
        j = cls.const(value, nx, ny)
        if nx >= 1:
            j.c[1][0] = mp.mpf(1)
        return j

    @classmethod
    def var_y(cls, value, nx: int, ny: int) -> "TJet":
        j = cls.const(value, nx, ny)
        if ny >= 1:
            j.c[0][1] = mp.mpf(1)
        return j

    def copy(self) -> "TJet":
        return TJet(self.nx, self.ny, [row[:] for row in self.c])

    def __add__(self, other):
        other = _coerce(other, self.nx, self.ny)
        out = self.copy()
        for i in range(self.nx + 1):
            for j in range(self.ny + 1):
                out.c[i][j] = out.c[i][j] + other.c[i][j]
        return out

    __radd__ = __add__

    def __neg__(self):
        out = self.copy()
        for i in range(self.nx + 1):
            for j in range(self.ny + 1):
                out.c[i][j] = -out.c[i][j]
        return out

    def __sub__(self, other):
        return self + (-_coerce(other, self.nx, self.ny))

    def __rsub__(self, other):
        return _coerce(other, self.nx, self.ny) + (-self)

    def __mul__(self, other):
        if not isinstance(other, TJet):
            s = to_mpf(other)
            out = self.copy()
            for i in range(self.nx + 1):
                for j in range(self.ny + 1):
                    out.c[i][j] = out.c[i][j] * s
            return out
        out = TJet(self.nx, self.ny)
        for i1 in range(self.nx + 1):
            for j1 in range(self.ny + 1):
                a = self.c[i1][j1]
                if a == 0:
                    continue
                for i2 in range(self.nx + 1 - i1):
                    for j2 in range(self.ny + 1 - j1):
                        b = other.c[i2][j2]
                        if b == 0:
                            continue
                        out.c[i1 + i2][j1 + j2] += a * b
        return out

    __rmul__ = __mul__

    @property
    def value(self) -> mp.mpf:
        return self.c[0][0]

    def nilpotent(self) -> "TJet":
        out = self.copy()
        out.c[0][0] = mp.mpf(0)
        return out

    def apply_series(self, derivs) -> "TJet":
        """Compose with an analytic function given by [f(c00), f'(c00), ...].

        The derivative list must reach order nx + ny (total nilpotent order).
        """
        n = self.nilpotent()
        out = TJet.const(derivs[0], self.nx, self.ny)
        power = TJet.const(1, self.nx, self.ny)
        fact = mp.mpf(1)
        for k in range(1, len(derivs)):
            power = power * n
            fact *= k
            if _is_zero(power):
                break
            out = out + power * (to_mpf(derivs[k]) / fact)
        return out

    def sin(self) -> "TJet":
        c0 = self.value
        s, c = mp.sin(c0), mp.cos(c0)
        cyc = [s, c, -s, -c]
        order = self.nx + self.ny
        return self.apply_series([cyc[k % 4] for k in range(order + 1)])

    def cos(self) -> "TJet":
        c0 = self.value
        s, c = mp.sin(c0), mp.cos(c0)
        cyc = [c, -s, -c, s]
        order = self.nx + self.ny
        return self.apply_series([cyc[k % 4] for k in range(order + 1)])

    def log(self) -> "TJet":
        c0 = self.value
        if c0 <= 0:
            raise ValueError("log of non-positive jet constant term")
        order = self.nx + self.ny
        derivs = [mp.log(c0)]
        for k in range(1, order + 1):
            derivs.append((-1) ** (k + 1) * mp.factorial(k - 1) / c0 ** k)
        return self.apply_series(derivs)

    def coeff(self, i: int, j: int) -> mp.mpf:
        return self.c[i][j]

    def partial(self, i: int, j: int) -> mp.mpf:
        """Mixed partial d^{i+j} / dx^i dy^j at the expansion point."""
        return self.c[i][j] * mp.factorial(i) * mp.factorial(j)

    def max_abs_coeff(self) -> mp.mpf:
        return max(abs(self.c[i][j]) for i in range(self.nx + 1) for j in range(self.ny + 1))

    def eval(self, x, y) -> mp.mpf:
        x = to_mpf(x)
        y = to_mpf(y)
        total = mp.mpf(0)
        for i in range(self.nx, -1, -1):
            row = mp.mpf(0)
            for j in range(self.ny, -1, -1):
                row = row * y + self.c[i][j]
            total = total * x + row
        return total


def _coerce(v, nx, ny) -> TJet:
    if isinstance(v, TJet):
        return v
    return TJet.const(v, nx, ny)


def _is_zero(j: TJet) -> bool:
    return all(j.c[i][k] == 0 for i in range(j.nx + 1) for k in range(j.ny + 1))


def jet_point_x(x0, y0, nx: int, ny: int):
    """2-vector of jets seeded as (x0 + x, y0) — a displacement in coordinate 1."""
    return [TJet.var_x(x0, nx, ny), TJet.const(y0, nx, ny)]


def jet_vec_const(v, nx: int, ny: int):
    return [TJet.const(v[0], nx, ny), TJet.const(v[1], nx, ny)]
