"""Recurrences over one axis pair of quantum numbers.

Elements are handled in *unnormalised* form, the element multiplied by
``prod_j sqrt(2^n_j n_j!)`` over all twelve quantum numbers.  In that form the
Hermite three-term recurrence gives integer coefficients::

    Vbar(n- + 1, n+) = Vbar(n-, n+ + 1) + 2 n+ Vbar(n-, n+ - 1) - 2 n- Vbar(n- - 1, n+)

so a whole ``(n-, n+)`` family follows from its ``n- = 0`` row, and on the
exact backend every unnormalised value is a plain rational (in units of
``sqrt(2/pi) / a``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from types import MappingProxyType
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .closed_form import (
    SQRT_2_OVER_PI,
    ElementValue,
    ExactValue,
    ScaleLike,
    as_scale,
    check_backend,
    element_direct,
)
from .core import KeyLike, as_flat, axis_pair

Number = Union[Fraction, float, int]
AXIS_NAMES = {"x": 0, "y": 1, "z": 2}
PAIRS = ("14", "23")


class MissingNeighborError(KeyError):
    """A recurrence step needed a neighbour that was not available."""


@dataclass(frozen=True)
class UnnormalizedValue:
    """Unnormalised element in units of ``sqrt(2/pi) / a``.

    ``value`` is a :class:`~fractions.Fraction` on the exact backend and a float
    otherwise.
    """

    value: Number
    backend: str
    a: float = 1.0


def normalization_square(key: KeyLike) -> int:
    """``prod_j 2^n_j n_j!`` over the twelve quantum numbers."""
    out = 1
    for n in as_flat(key):
        out *= math.factorial(n) << n
    return out


def _normalization_float(flat: Sequence[int]) -> float:
    return math.prod(math.sqrt(math.factorial(n) * 2.0 ** n) for n in flat)


def unnormalize(value: ElementValue, key: KeyLike) -> UnnormalizedValue:
    flat = as_flat(key)
    if value.exact is not None:
        ex = value.exact
        if ex.rational == 0:
            return UnnormalizedValue(Fraction(0), "exact", value.a)
        square = ex.radicand * normalization_square(flat)
        root = math.isqrt(square)
        if root * root != square:
            raise ArithmeticError(f"unnormalised value of {flat} is not rational")
        return UnnormalizedValue(ex.rational * root, "exact", value.a)
    reduced = value.value * value.a / SQRT_2_OVER_PI
    return UnnormalizedValue(reduced * _normalization_float(flat), "float", value.a)


def normalize(value: UnnormalizedValue, key: KeyLike) -> ElementValue:
    flat = as_flat(key)
    if value.backend == "exact":
        ex = ExactValue.from_sqrt(Fraction(value.value), Fraction(1, normalization_square(flat)))
        return ElementValue(ex.to_float(value.a), "exact", value.a, ex)
    reduced = float(value.value) / _normalization_float(flat)
    return ElementValue(reduced * SQRT_2_OVER_PI / value.a, "float", value.a)


# ---------------------------------------------------------------------------
# single steps


def recur_step_normalized(
    n_minus: int,
    n_plus: int,
    neighbors: Tuple[ElementValue, ElementValue, Optional[ElementValue]],
) -> ElementValue:
    """``V(n-, n+)`` from ``V(n- - 1, n+ + 1)``, ``V(n- - 1, n+ - 1)`` and ``V(n- - 2, n+)``.

    The last neighbour enters with weight ``sqrt((n- - 1)/n-)`` and may be
    ``None`` when ``n- = 1``.
    """
    if n_minus <= 0:
        raise ValueError("normalised recurrence needs n_minus > 0")
    if n_plus < n_minus:
        raise ValueError("normalised recurrence needs n_plus >= n_minus")
    up, down, back = neighbors
    weights = (
        Fraction(n_plus + 1, n_minus),
        Fraction(n_plus, n_minus),
        Fraction(n_minus - 1, n_minus),
    )
    if back is None:
        if n_minus != 1:
            raise MissingNeighborError("V(n- - 2, n+) is required when n_minus > 1")
        back = ElementValue(0.0, up.backend, up.a, ExactValue(Fraction(0)) if up.exact else None)
    values = (up, down, back)
    if all(v.exact is not None for v in values):
        total = (
            up.exact.times_sqrt(weights[0])
            + down.exact.times_sqrt(weights[1])
            - back.exact.times_sqrt(weights[2])
        )
        return ElementValue(total.to_float(up.a), "exact", up.a, total)
    total = (
        math.sqrt(weights[0]) * up.value
        + math.sqrt(weights[1]) * down.value
        - math.sqrt(weights[2]) * back.value
    )
    return ElementValue(total, "float", up.a)


def recur_step_unnormalized(
    n_minus: int,
    n_plus: int,
    neighbors: Tuple[Optional[Number], Optional[Number], Optional[Number]],
) -> Number:
    """``Vbar(n- + 1, n+) = Vbar(n-, n+ + 1) + 2 n+ Vbar(n-, n+ - 1) - 2 n- Vbar(n- - 1, n+)``.

    Neighbours whose coefficient vanishes (``n+ = 0`` or ``n- = 0``) may be ``None``.
    """
    if n_minus < 0 or n_plus < n_minus:
        raise ValueError(f"need 0 <= n_minus <= n_plus, got ({n_minus}, {n_plus})")
    up, down, back = neighbors
    if up is None:
        raise MissingNeighborError(f"Vbar({n_minus}, {n_plus + 1}) is required")
    result = up
    if n_plus:
        if down is None:
            raise MissingNeighborError(f"Vbar({n_minus}, {n_plus - 1}) is required")
        result = result + 2 * n_plus * down
    if n_minus:
        if back is None:
            raise MissingNeighborError(f"Vbar({n_minus - 1}, {n_plus}) is required")
        result = result - 2 * n_minus * back
    return result


def recur_step_four_index(
    n_plus: int,
    m_minus: int,
    m_plus: int,
    neighbors: Tuple[Number, Optional[Number]],
) -> Number:
    """Printed four-index transfer ``Vbar[{0,n+},{m-,m+ + 1}] = Vbar[{0,n+ + 1},{m-,m+}] + Vbar[{0,n+},{m- - 1,m+}]``.

    This relation does not survive comparison with direct evaluation (see
    :func:`validate_four_index`), so nothing in the package relies on it.
    """
    if min(n_plus, m_minus, m_plus) < 0:
        raise ValueError("indices must be non-negative")
    first, second = neighbors
    if first is None:
        raise MissingNeighborError(f"Vbar[{{0,{n_plus + 1}}},{{{m_minus},{m_plus}}}] is required")
    if m_minus == 0:
        return first
    if second is None:
        raise MissingNeighborError(f"Vbar[{{0,{n_plus}}},{{{m_minus - 1},{m_plus}}}] is required")
    return first + second


def four_index_neighbors(key: KeyLike, axis: int) -> Tuple[Tuple[int, ...], Tuple[int, ...], Optional[Tuple[int, ...]]]:
    """Target and neighbour keys of the four-index relation for ``key`` on ``axis``.

    The key must have ``n4 = 0`` and ``n2 >= 1`` on that axis: the (1,4) pair is
    ``{0, n+}`` with ``n+ = n1`` and the (2,3) pair is ``{m-, m+ + 1}`` with
    ``m- = n3``, ``m+ + 1 = n2``.
    """
    flat = list(as_flat(key))
    n1, n2, n3, n4 = flat[axis], flat[3 + axis], flat[6 + axis], flat[9 + axis]
    if n4 != 0 or n2 < 1:
        raise ValueError(
            f"key {tuple(flat)} does not have the four-index shape on axis {axis}"
        )
    first = list(flat)
    first[axis], first[3 + axis] = n1 + 1, n2 - 1
    second = None
    if n3 > 0:
        second = list(flat)
        second[3 + axis], second[6 + axis] = n2 - 1, n3 - 1
        second = tuple(second)
    return tuple(flat), tuple(first), second


@dataclass(frozen=True)
class FourIndexReport:
    checked: int
    mismatches: Tuple[Tuple[Tuple[int, ...], Fraction, Fraction], ...]

    @property
    def valid(self) -> bool:
        return not self.mismatches

    def summary(self) -> str:
        if self.valid:
            return f"four-index relation holds on all {self.checked} checked keys"
        key, lhs, rhs = self.mismatches[0]
        return (
            f"four-index relation fails on {len(self.mismatches)} of {self.checked} keys; "
            f"first: {key} direct={lhs} relation={rhs}"
        )


def _vbar_exact(flat: Tuple[int, ...]) -> Fraction:
    return Fraction(unnormalize(element_direct(flat), flat).value)


def validate_four_index(max_index: int = 3) -> FourIndexReport:
    """Compare the four-index relation with direct evaluation on every x-axis shape.

    Off-axis indices are held at zero; all four x-axis indices range up to
    ``max_index`` (neighbours may exceed it by one).
    """
    checked = 0
    mismatches = []
    for n1 in range(max_index + 1):
        for n2 in range(1, max_index + 1):
            for n3 in range(max_index + 1):
                key = (n1, 0, 0, n2, 0, 0, n3, 0, 0, 0, 0, 0)
                target, first, second = four_index_neighbors(key, 0)
                lhs = _vbar_exact(target)
                rhs = recur_step_four_index(
                    n1, n3, n2 - 1,
                    (_vbar_exact(first), _vbar_exact(second) if second else None),
                )
                checked += 1
                if lhs != rhs:
                    mismatches.append((target, lhs, Fraction(rhs)))
    return FourIndexReport(checked, tuple(mismatches))


@lru_cache(maxsize=1)
def four_index_enabled() -> bool:
    """Whether the four-index relation passed validation (indices <= 3)."""
    return validate_four_index(3).valid


# ---------------------------------------------------------------------------
# families


def _axis_index(axis: Union[str, int]) -> int:
    if isinstance(axis, str):
        if axis not in AXIS_NAMES:
            raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
        return AXIS_NAMES[axis]
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2; got {axis!r}")
    return axis


def _pair_positions(axis: int, pair: str) -> Tuple[int, int]:
    """Flat positions holding ``(n-, n+)`` of the family."""
    if pair == "14":
        return axis, 9 + axis
    if pair == "23":
        return 3 + axis, 6 + axis
    raise ValueError(f"pair must be '14' or '23'; got {pair!r}")


def family_signature(key: KeyLike, axis: Union[str, int], pair: str) -> Tuple[Tuple[int, ...], int, int]:
    """Split a key into its family base key (pair zeroed) and its ordered ``(n-, n+)``."""
    flat = list(as_flat(key))
    i, j = _pair_positions(_axis_index(axis), pair)
    lo, hi, _ = axis_pair(flat[i], flat[j])
    flat[i] = flat[j] = 0
    return tuple(flat), lo, hi


@dataclass(frozen=True)
class RecurrenceFrontier:
    axis: int
    pair: str
    n_max: int
    base_key: Tuple[int, ...]
    backend: str
    a: float
    table: Mapping[Tuple[int, int], Number]
    seeds: frozenset
    seed_calls: int = field(default=0)

    def key_for(self, n_minus: int, n_plus: int) -> Tuple[int, ...]:
        flat = list(self.base_key)
        i, j = _pair_positions(self.axis, self.pair)
        flat[i], flat[j] = n_minus, n_plus
        return tuple(flat)

    def _ordered(self, n_a: int, n_b: int) -> Tuple[int, int]:
        lo, hi, _ = axis_pair(n_a, n_b)
        if hi > self.n_max:
            raise KeyError(f"({n_a}, {n_b}) is outside the family range n_max={self.n_max}")
        return lo, hi

    def unnormalized(self, n_a: int, n_b: int) -> UnnormalizedValue:
        lo, hi = self._ordered(n_a, n_b)
        return UnnormalizedValue(self.table[lo, hi], self.backend, self.a)

    def value(self, n_a: int, n_b: int) -> ElementValue:
        lo, hi = self._ordered(n_a, n_b)
        return normalize(self.unnormalized(lo, hi), self.key_for(lo, hi))

    def pairs(self) -> List[Tuple[int, int]]:
        return [(lo, hi) for hi in range(self.n_max + 1) for lo in range(hi + 1)]

    def entries(self) -> Dict[Tuple[int, ...], ElementValue]:
        """Normalised values of every in-range member keyed by flat key."""
        return {self.key_for(lo, hi): self.value(lo, hi) for lo, hi in self.pairs()}


def build_family(
    axis: Union[str, int],
    pair: str,
    n_max: int,
    base_key: Optional[KeyLike] = None,
    scale: ScaleLike = 1.0,
    backend: str = "exact",
    seed_evaluator: Callable[..., ElementValue] = element_direct,
) -> RecurrenceFrontier:
    """Fill the ``(n-, n+)`` family with ``n+ <= n_max`` on one axis pair.

    The ``n- = 0`` row is evaluated directly up to ``n+ = 2 n_max`` (the
    recurrence reaches one step further in ``n+`` per row); everything else
    comes from :func:`recur_step_unnormalized`.  The two pair entries of
    ``base_key`` are ignored.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    ax = _axis_index(axis)
    check_backend(backend)
    a = as_scale(scale).a
    base = (0,) * 12 if base_key is None else as_flat(base_key)
    base, _, _ = family_signature(base, ax, pair)
    proto = RecurrenceFrontier(ax, pair, n_max, base, backend, a, {}, frozenset())

    table: Dict[Tuple[int, int], Number] = {}
    width = 2 * n_max
    for n_plus in range(width + 1):
        key = proto.key_for(0, n_plus)
        try:
            seed = seed_evaluator(key, a, backend)
        except Exception as exc:
            raise RuntimeError(f"seed evaluation failed for key {key}: {exc}") from exc
        table[0, n_plus] = unnormalize(seed, key).value
    seeds = frozenset(table)

    def get(lo, hi):
        if lo < 0 or hi < 0:
            return None
        if lo > hi:
            lo, hi = hi, lo
        try:
            return table[lo, hi]
        except KeyError:
            raise MissingNeighborError(f"family entry {proto.key_for(lo, hi)} is absent") from None

    for row in range(n_max):
        # produces row + 1 from rows row and row - 1
        for n_plus in range(row + 1, width - row):
            table[row + 1, n_plus] = recur_step_unnormalized(
                row, n_plus,
                (get(row, n_plus + 1), get(row, n_plus - 1) if n_plus else None,
                 get(row - 1, n_plus) if row else None),
            )
    return RecurrenceFrontier(
        ax, pair, n_max, base, backend, a, MappingProxyType(table), seeds, len(seeds)
    )
