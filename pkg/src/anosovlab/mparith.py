"""Arbitrary-precision arithmetic helpers shared by the whole laboratory.

All high-precision paths run on mpmath with an explicit significand width in
bits. Conversions from exact rationals go through numerator/denominator so no
binary double ever contaminates a 256-bit computation, and Birkhoff sums use
mpmath.fsum (exact accumulation, single final rounding) so that summing a
cycle twice is bit-for-bit twice the single-cycle sum.
"""

from __future__ import annotations

from contextlib import contextmanager
from fractions import Fraction

import mpmath as mp


@contextmanager
def bits(precision_bits: int):
    """Run a block at the given significand width (plus guard bits)."""
    with mp.workprec(precision_bits + 16):
        yield


def to_mpf(x) -> mp.mpf:
    """Convert int/Fraction/str/float/mpf to mpf at the current precision."""
    if isinstance(x, mp.mpf):
        return x
    if isinstance(x, Fraction):
        return mp.mpf(x.numerator) / x.denominator
    if isinstance(x, (int, str)):
        return mp.mpf(x)
    return mp.mpf(x)


def exact_sum(terms) -> mp.mpf:
    """Sum with exact accumulation (one rounding at the end)."""
    return mp.fsum(terms)


def frac_mod1(q: Fraction) -> Fraction:
    return q - Fraction(q.numerator // q.denominator) if q.denominator != 1 else Fraction(q.numerator % 1)


def mpf_mod1(x: mp.mpf) -> mp.mpf:
    return x - mp.floor(x)


def dist_mod1(a, b) -> mp.mpf:
    """Distance on R/Z."""
    d = mpf_mod1(to_mpf(a) - to_mpf(b))
    return min(d, 1 - d)


def dist_torus(x, y) -> mp.mpf:
    return mp.sqrt(dist_mod1(x[0], y[0]) ** 2 + dist_mod1(x[1], y[1]) ** 2)


def mpf_str(x, sig_digits: int) -> str:
    """Deterministic decimal rendering with an explicit digit count."""
    if x is None:
        return "none"
    if isinstance(x, (int,)):
        return str(x)
    return mp.nstr(mp.mpf(x), sig_digits, strip_zeros=False)


def agree_bits(a, b) -> float:
    """Number of agreeing significant bits between two mpf values."""
    a = to_mpf(a)
    b = to_mpf(b)
    d = abs(a - b)
    if d == 0:
        return float(mp.mp.prec)
    scale = max(abs(a), abs(b), mp.mpf(1) * 0)
    if scale == 0:
        return float(mp.mp.prec)
    return float(-mp.log(d / scale, 2))
