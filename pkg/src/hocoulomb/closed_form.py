"""Closed-form Coulomb matrix elements in the isotropic oscillator basis.

The element is a sum over six Laguerre-expansion indices ``(k_i, k'_i)``, one
pair per axis.  The axes couple only through the factor ``1 / (1 + 2 Omega)``
where ``Omega = sum_i (s_i + k_i + k'_i)``, so each axis is reduced to a
polynomial in ``p_i = s_i + k_i + k'_i`` and the three polynomials are
convolved on ``Omega`` before the final division.

Two backends are offered:

``exact``
    every term is an exact rational; the result is carried as
    ``r * sqrt(m) * sqrt(2/pi) / a`` with ``r`` rational and ``m`` square-free.
``float``
    the per-axis polynomials are formed exactly, rounded to double-double
    pairs, and the cross-axis convolution runs in compensated (double-double)
    arithmetic.  The alternating sums still lose about two decimal digits per
    unit of index, so past a threshold (see :func:`cancellation_audit`) the
    float result should not be trusted.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ._compensated import DD, dd_add, dd_div_int, dd_from_fraction, dd_mul
from .core import (
    AxisPair,
    KeyLike,
    as_flat,
    axis_pair,
    axis_parity,
    binomial,
    double_factorial,
)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
BACKENDS = ("exact", "float")


class FloatOverflowError(ArithmeticError):
    """The float backend produced a non-finite intermediate; retry with ``exact``."""


class ElementEvaluationError(RuntimeError):
    def __init__(self, key, cause: BaseException):
        super().__init__(f"evaluation failed for key {tuple(key)}: {cause!r}")
        self.key = tuple(key)
        self.cause = cause


@dataclass(frozen=True)
class OscillatorScale:
    """Oscillator length ``a = sqrt(hbar / m omega)``."""

    a: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.a, (int, float)) and math.isfinite(self.a) and self.a > 0):
            raise ValueError(f"oscillator length must be a positive finite number, got {self.a!r}")


ScaleLike = Union[OscillatorScale, float, int]


def as_scale(scale: ScaleLike) -> OscillatorScale:
    if isinstance(scale, OscillatorScale):
        return scale
    return OscillatorScale(float(scale))


def _scale_value(scale: ScaleLike) -> float:
    if type(scale) is float and 0.0 < scale < math.inf:
        return scale
    return as_scale(scale).a


def check_backend(backend: str) -> str:
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    return backend


def squarefree_split(n: int) -> Tuple[int, int]:
    """Write a positive integer as ``f**2 * m`` with ``m`` square-free."""
    if n <= 0:
        raise ValueError(f"expected a positive integer, got {n}")
    f, m = 1, 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            f *= p ** (e // 2)
            if e & 1:
                m *= p
        p += 1 if p == 2 else 2
    return f, m * n


@dataclass(frozen=True)
class ExactValue:
    """``rational * sqrt(radicand)`` in units of ``sqrt(2/pi) / a``.

    ``radicand`` is square-free, and is 1 whenever ``rational`` is zero, so
    equal numbers always compare equal.
    """

    rational: Fraction
    radicand: int = 1

    def __post_init__(self):
        if self.rational == 0 and self.radicand != 1:
            object.__setattr__(self, "radicand", 1)

    @classmethod
    def from_sqrt(cls, coefficient: Fraction, square: Fraction) -> "ExactValue":
        """Build ``coefficient * sqrt(square)`` for a non-negative rational ``square``."""
        square = Fraction(square)
        if square < 0:
            raise ValueError("cannot take the square root of a negative rational")
        if square == 0 or coefficient == 0:
            return cls(Fraction(0))
        p, q = square.numerator, square.denominator
        f, m = squarefree_split(p * q)
        return cls(Fraction(coefficient) * Fraction(f, q), m)

    def __add__(self, other: "ExactValue") -> "ExactValue":
        if not isinstance(other, ExactValue):
            return NotImplemented
        if other.rational == 0:
            return self
        if self.rational == 0:
            return other
        if self.radicand != other.radicand:
            raise ValueError(
                f"cannot add sqrt({self.radicand}) and sqrt({other.radicand}) terms exactly"
            )
        return ExactValue(self.rational + other.rational, self.radicand)

    def __sub__(self, other: "ExactValue") -> "ExactValue":
        return self + (-other)

    def __neg__(self) -> "ExactValue":
        return ExactValue(-self.rational, self.radicand)

    def times(self, factor: Fraction) -> "ExactValue":
        return ExactValue(self.rational * factor, self.radicand)

    def times_sqrt(self, square: Fraction) -> "ExactValue":
        """Multiply by ``sqrt(square)``."""
        return ExactValue.from_sqrt(self.rational, Fraction(self.radicand) * square)

    def square(self) -> Fraction:
        """Signed square ``sign * value**2`` in the same units; exact and unique."""
        sq = self.rational * self.rational * self.radicand
        return sq if self.rational >= 0 else -sq

    def reduced_float(self) -> float:
        """Value in units of ``sqrt(2/pi) / a``."""
        if self.radicand == 1:
            return float(self.rational)
        return float(self.rational) * math.sqrt(self.radicand)

    def to_float(self, a: float = 1.0) -> float:
        return self.reduced_float() * SQRT_2_OVER_PI / a


class ElementValue(NamedTuple):
    """A matrix element in absolute units (``value`` already includes ``1/a``)."""

    value: float
    backend: str
    a: float = 1.0
    exact: Optional[ExactValue] = None

    def __float__(self) -> float:
        return self.value


ZERO = ExactValue(Fraction(0))
_ZERO_EXACT = ElementValue(0.0, "exact", 1.0, ZERO)


# ---------------------------------------------------------------------------
# per-axis structure


def _axis_term(n14: AxisPair, n23: AxisPair, s: int, k: int, kp: int) -> Fraction:
    sign = -1 if (k + kp) & 1 else 1
    num = sign * binomial(n14.n_plus, n14.n_minus - k) * binomial(n23.n_plus, n23.n_minus - kp)
    num *= double_factorial(2 * s + 2 * k + 2 * kp - 1)
    den = math.factorial(k) * math.factorial(kp) << (2 * s + k + kp)
    return Fraction(num, den)


def axis_sum(pair14: AxisPair, pair23: AxisPair, s: int) -> List[Tuple[int, int, Fraction]]:
    """Single-axis double sum as ``(k, k', coefficient)`` triples.

    Each triple contributes ``coefficient`` at ``p = s + k + k'``; the cross-axis
    factor ``1 / (1 + 2 Omega)`` is applied by the caller.
    """
    if 2 * s != pair14.diff + pair23.diff:
        raise ValueError(
            f"s={s} inconsistent with axis differences {pair14.diff} and {pair23.diff}"
        )
    return [
        (k, kp, _axis_term(pair14, pair23, s, k, kp))
        for k in range(pair14.n_minus + 1)
        for kp in range(pair23.n_minus + 1)
    ]


@lru_cache(maxsize=65536)
def _axis_polynomial(m14: int, p14: int, m23: int, p23: int) -> Tuple[Tuple[int, Fraction], ...]:
    pair14 = AxisPair(m14, p14, p14 - m14)
    pair23 = AxisPair(m23, p23, p23 - m23)
    s = (pair14.diff + pair23.diff) // 2
    poly: Dict[int, Fraction] = {}
    for k, kp, c in axis_sum(pair14, pair23, s):
        p = s + k + kp
        poly[p] = poly.get(p, 0) + c
    return tuple(sorted((p, c) for p, c in poly.items() if c != 0))


@lru_cache(maxsize=65536)
def _axis_terms_float(m14: int, p14: int, m23: int, p23: int) -> Tuple[np.ndarray, np.ndarray]:
    pair14 = AxisPair(m14, p14, p14 - m14)
    pair23 = AxisPair(m23, p23, p23 - m23)
    s = (pair14.diff + pair23.diff) // 2
    terms = axis_sum(pair14, pair23, s)
    coef = np.array([float(c) for _, _, c in terms])
    power = np.array([s + k + kp for k, kp, _ in terms], dtype=np.int64)
    return coef, power


@lru_cache(maxsize=65536)
def _axis_polynomial_dd(m14: int, p14: int, m23: int, p23: int) -> Tuple[Tuple[int, DD], ...]:
    return tuple((p, dd_from_fraction(c)) for p, c in _axis_polynomial(m14, p14, m23, p23))


def clear_caches() -> None:
    """Drop memoised per-axis sums (used by benchmarks for cold timings)."""
    _axis_polynomial.cache_clear()
    _axis_terms_float.cache_clear()
    _axis_polynomial_dd.cache_clear()


def _axis_pairs(flat: Sequence[int], axis: int) -> Tuple[AxisPair, AxisPair]:
    n1, n2, n3, n4 = flat[axis], flat[3 + axis], flat[6 + axis], flat[9 + axis]
    return axis_pair(n1, n4), axis_pair(n2, n3)


def _prefactor(flat: Sequence[int], pairs, s_total: int) -> Tuple[int, Fraction]:
    """Phase and the squared normalisation product."""
    phase_exp = sum(flat[0:3]) + sum(flat[9:12]) - s_total
    sign = -1 if phase_exp & 1 else 1
    square = Fraction(1)
    for pair in pairs:
        falling = math.factorial(pair.n_plus) // math.factorial(pair.n_minus)
        square *= Fraction(1 << pair.diff, falling)
    return sign, square


def element_exact(key: KeyLike) -> ExactValue:
    """Exact element in units of ``sqrt(2/pi) / a``."""
    flat = as_flat(key)
    svals = [axis_parity(flat, i) for i in range(3)]
    if any(s is None for s in svals):
        return ZERO
    axis_pairs = [_axis_pairs(flat, i) for i in range(3)]
    # convolve the three axis polynomials on Omega
    combined: Dict[int, Fraction] = {0: Fraction(1)}
    for p14, p23 in axis_pairs:
        poly = _axis_polynomial(p14.n_minus, p14.n_plus, p23.n_minus, p23.n_plus)
        nxt: Dict[int, Fraction] = {}
        for om, c in combined.items():
            for p, d in poly:
                nxt[om + p] = nxt.get(om + p, 0) + c * d
        combined = nxt
    total = sum((c / (2 * om + 1) for om, c in combined.items()), Fraction(0))
    sign, square = _prefactor(flat, [p for pp in axis_pairs for p in pp], sum(svals))
    return ExactValue.from_sqrt(sign * total, square)


def _element_float_reduced(flat: Sequence[int], summation: str = "compensated") -> float:
    svals = [axis_parity(flat, i) for i in range(3)]
    if any(s is None for s in svals):
        return 0.0
    axis_pairs = [_axis_pairs(flat, i) for i in range(3)]
    if summation == "compensated":
        total = _cross_axis_dd(axis_pairs)
    elif summation == "naive":
        total = _cross_axis_naive(axis_pairs)
    else:
        raise ValueError(f"unknown summation {summation!r}")
    sign, square = _prefactor(flat, [p for pp in axis_pairs for p in pp], sum(svals))
    result = sign * total * math.sqrt(square)
    if not math.isfinite(result):
        raise FloatOverflowError(f"non-finite float result for key {tuple(flat)}")
    return result


def _cross_axis_dd(axis_pairs) -> float:
    """Omega convolution and final sum in double-double arithmetic."""
    combined: Dict[int, DD] = {0: (1.0, 0.0)}
    for p14, p23 in axis_pairs:
        poly = _axis_polynomial_dd(p14.n_minus, p14.n_plus, p23.n_minus, p23.n_plus)
        nxt: Dict[int, DD] = {}
        for om, c in combined.items():
            for p, d in poly:
                prod = dd_mul(c, d)
                prev = nxt.get(om + p)
                nxt[om + p] = prod if prev is None else dd_add(prev, prod)
        combined = nxt
    total = (0.0, 0.0)
    for om in sorted(combined):
        total = dd_add(total, dd_div_int(combined[om], 2 * om + 1))
    if not all(math.isfinite(x) for x in total):
        raise FloatOverflowError("non-finite intermediate in compensated sum")
    return total[0] + total[1]


def _cross_axis_naive(axis_pairs) -> float:
    """Plain double-precision six-index sum; kept for the cancellation audit."""
    (cx, px), (cy, py), (cz, pz) = (
        _axis_terms_float(a.n_minus, a.n_plus, b.n_minus, b.n_plus) for a, b in axis_pairs
    )
    with np.errstate(over="raise", invalid="raise"):
        try:
            coef = cx[:, None, None] * cy[None, :, None] * cz[None, None, :]
            omega = px[:, None, None] + py[None, :, None] + pz[None, None, :]
            return float(np.sum(coef / (2 * omega + 1)))
        except FloatingPointError as exc:
            raise FloatOverflowError(str(exc)) from exc


def element_direct(key: KeyLike, scale: ScaleLike = 1.0, backend: str = "exact") -> ElementValue:
    """Evaluate one matrix element from the closed-form sum.

    Returns exactly zero when any axis violates the parity selection rule.
    """
    flat = as_flat(key)
    if ((flat[0] + flat[3] + flat[6] + flat[9]) & 1 or (flat[1] + flat[4] + flat[7] + flat[10]) & 1
            or (flat[2] + flat[5] + flat[8] + flat[11]) & 1):
        # |n1-n4| + |n2-n3| has the parity of n1+n2+n3+n4
        if scale == 1.0 and backend == "exact":
            return _ZERO_EXACT
        a = _scale_value(scale)
        return ElementValue(0.0, check_backend(backend), a, ZERO if backend == "exact" else None)
    a = _scale_value(scale)
    exact = check_backend(backend) == "exact"
    if exact:
        ex = element_exact(flat)
        return ElementValue(ex.to_float(a), "exact", a, ex)
    reduced = _element_float_reduced(flat)
    return ElementValue(reduced * SQRT_2_OVER_PI / a, "float", a)


def _evaluate_chunk(args) -> List[ElementValue]:
    keys, a, backend = args
    out = []
    for key in keys:
        try:
            out.append(element_direct(key, a, backend))
        except Exception as exc:  # noqa: BLE001 - re-raised with attribution
            raise ElementEvaluationError(as_flat(key), exc) from exc
    return out


def element_batch(
    keys: Sequence[KeyLike],
    scale: ScaleLike = 1.0,
    backend: str = "exact",
    workers: int = 1,
) -> List[ElementValue]:
    """Evaluate many elements; results are returned in input order."""
    a = as_scale(scale).a
    check_backend(backend)
    keys = [as_flat(k) for k in keys]
    if workers <= 1 or len(keys) < 2:
        return _evaluate_chunk((keys, a, backend))
    size = -(-len(keys) // workers)
    chunks = [(keys[i:i + size], a, backend) for i in range(0, len(keys), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_evaluate_chunk, chunks))
    return [v for part in parts for v in part]


@dataclass(frozen=True)
class CancellationAudit:
    summation: str
    tolerance: float
    max_rel_error: Dict[int, float]

    @property
    def first_failure(self) -> Optional[int]:
        """Smallest audited index whose float error exceeds the tolerance."""
        bad = [n for n, err in sorted(self.max_rel_error.items()) if err > self.tolerance]
        return bad[0] if bad else None

    @property
    def reliable_up_to(self) -> int:
        """Largest index ``n`` such that every audited index ``<= n`` passed."""
        first = self.first_failure
        return max(self.max_rel_error) if first is None else first - 1


def audit_keys(n: int, samples: int = 24, seed: int = 0) -> List[Tuple[int, ...]]:
    """Deterministic nonzero keys with all indices ``<= n`` and at least one ``== n``."""
    import random

    rng = random.Random(seed * 1000 + n)
    keys = [(n,) * 12, (n, 0, 0, 0, 0, 0, 0, 0, 0, n, 0, 0), (n,) * 6 + (0,) * 6]
    while len(keys) < samples + 3:
        k = [rng.randint(0, n) for _ in range(12)]
        k[rng.randrange(12)] = n
        if all(axis_parity(k, i) is not None for i in range(3)):
            keys.append(tuple(k))
    return keys


def cancellation_audit(
    max_index: int = 14,
    tolerance: float = 1e-6,
    samples: int = 24,
    summation: str = "compensated",
    seed: int = 0,
) -> CancellationAudit:
    """Largest relative float-vs-exact error per maximum quantum number."""
    errors: Dict[int, float] = {}
    for n in range(max_index + 1):
        worst = 0.0
        for key in audit_keys(n, samples, seed):
            exact = element_exact(key).reduced_float()
            if exact == 0.0:
                continue
            try:
                approx = _element_float_reduced(key, summation)
            except FloatOverflowError:
                worst = math.inf
                break
            worst = max(worst, abs(approx - exact) / abs(exact))
        errors[n] = worst
    return CancellationAudit(summation, tolerance, errors)
