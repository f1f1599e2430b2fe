"""Double-double arithmetic from error-free float transformations.

A number is a pair ``(hi, lo)`` of floats with ``|lo| <= ulp(hi)/2``; sums and
products keep roughly 106 bits, enough to absorb the cancellation in the
alternating closed-form sums well past index 8.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Tuple

DD = Tuple[float, float]
_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a: float, b: float) -> DD:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _fast_two_sum(a: float, b: float) -> DD:
    s = a + b
    return s, b - (s - a)


def _split(a: float) -> DD:
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a: float, b: float) -> DD:
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def dd_from_fraction(x: Fraction) -> DD:
    hi = float(x)
    return hi, float(x - Fraction(hi))


def dd_add(x: DD, y: DD) -> DD:
    s, e = two_sum(x[0], y[0])
    t, f = two_sum(x[1], y[1])
    e += t
    s, e = _fast_two_sum(s, e)
    e += f
    return _fast_two_sum(s, e)


def dd_mul(x: DD, y: DD) -> DD:
    p, e = two_prod(x[0], y[0])
    e += x[0] * y[1] + x[1] * y[0]
    return _fast_two_sum(p, e)


def dd_div_int(x: DD, d: int) -> DD:
    q1 = x[0] / d
    p, e = two_prod(q1, float(d))
    r = dd_add(x, (-p, -e))
    q2 = (r[0] + r[1]) / d
    return _fast_two_sum(q1, q2)
