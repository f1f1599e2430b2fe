"""Index algebra for two-body matrix elements in the 3D oscillator product basis.

A matrix element ``V^{l1 l2}_{l3 l4}`` is addressed by four single-particle
states, each a triple of Cartesian oscillator quanta.  Particles 1 and 4 share
coordinate ``r1``; particles 2 and 3 share ``r2``.  Everything in this module
is pure integer arithmetic.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional, Sequence, Tuple, Union

AXES = ("x", "y", "z")


class QuantumTriple(NamedTuple):
    """Oscillator quanta ``(nx, ny, nz)`` of one particle."""

    nx: int
    ny: int
    nz: int

    @property
    def total(self) -> int:
        return self.nx + self.ny + self.nz


class ElementKey(NamedTuple):
    """Ordered quadruple ``(lambda1, lambda2, lambda3, lambda4)``.

    The flat 12-integer order used throughout the package (and on the command
    line) is ``n1x n1y n1z n2x n2y n2z n3x n3y n3z n4x n4y n4z``.
    """

    lambda1: QuantumTriple
    lambda2: QuantumTriple
    lambda3: QuantumTriple
    lambda4: QuantumTriple

    def flat(self) -> Tuple[int, ...]:
        return self.lambda1 + self.lambda2 + self.lambda3 + self.lambda4

    @classmethod
    def from_flat(cls, indices: Sequence[int]) -> "ElementKey":
        flat = check_indices(indices)
        return cls(*(QuantumTriple(*flat[3 * j:3 * j + 3]) for j in range(4)))

    def axis_indices(self, axis: int) -> Tuple[int, int, int, int]:
        """Return ``(n1, n2, n3, n4)`` along one Cartesian axis (0, 1 or 2)."""
        return (self.lambda1[axis], self.lambda2[axis],
                self.lambda3[axis], self.lambda4[axis])


KeyLike = Union[ElementKey, Sequence[int]]


class AxisPair(NamedTuple):
    n_minus: int
    n_plus: int
    diff: int


def check_indices(indices: Iterable[int]) -> Tuple[int, ...]:
    """Validate twelve non-negative integer quantum numbers."""
    flat = indices if indices.__class__ is tuple else tuple(indices)
    if len(flat) != 12:
        raise ValueError(f"expected 12 quantum numbers, got {len(flat)}")
    for n in flat:
        if n.__class__ is not int or n < 0:
            break
    else:
        return flat
    for n in flat:
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            raise ValueError(f"quantum numbers must be non-negative integers, got {n!r}")
    return flat


def as_flat(key: KeyLike) -> Tuple[int, ...]:
    """Return the flat 12-tuple for an :class:`ElementKey` or plain sequence."""
    if key.__class__ is ElementKey:
        return key.flat()
    return check_indices(key)


def as_key(key: KeyLike) -> ElementKey:
    if isinstance(key, ElementKey):
        return key
    return ElementKey.from_flat(key)


def axis_pair(na: int, nb: int) -> AxisPair:
    if na < 0 or nb < 0:
        raise ValueError(f"quantum numbers must be non-negative, got ({na}, {nb})")
    if na <= nb:
        return AxisPair(na, nb, nb - na)
    return AxisPair(nb, na, na - nb)


def axis_parity(flat: Sequence[int], axis: int) -> Optional[int]:
    """Return ``s`` for one axis of a flat key, or ``None`` if the parity sum is odd."""
    n1, n2, n3, n4 = flat[axis], flat[3 + axis], flat[6 + axis], flat[9 + axis]
    total = abs(n1 - n4) + abs(n2 - n3)
    if total & 1:
        return None
    return total >> 1


def selection_rule(key: KeyLike) -> Tuple[Optional[int], Optional[int], Optional[int]]:
    """Per-axis half parity sums ``(s_x, s_y, s_z)``.

    An entry is ``None`` when ``|n1 - n4| + |n2 - n3|`` is odd on that axis, in
    which case the element vanishes identically.
    """
    flat = as_flat(key)
    return (axis_parity(flat, 0), axis_parity(flat, 1), axis_parity(flat, 2))


def is_allowed(key: KeyLike) -> bool:
    return all(s is not None for s in selection_rule(key))


@lru_cache(maxsize=None)
def double_factorial(m: int) -> int:
    """``m!!`` with ``(-1)!! = 0!! = 1``."""
    if m < -1:
        raise ValueError(f"double factorial undefined for {m}")
    result = 1
    while m > 1:
        result *= m
        m -= 2
    return result


def binomial(n: int, k: int) -> int:
    if n < 0:
        raise ValueError(f"binomial needs n >= 0, got {n}")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


# Position permutations of the flat key generating the symmetry orbit.  The
# value depends on (l1, l4) and (l2, l3) only as unordered pairs and is
# unchanged when the two pairs trade places, so the orbit is the order-8 group
# generated by l1<->l4, l2<->l3 and (l1, l4)<->(l2, l3).
def _orbit_permutations() -> Tuple[Tuple[int, int, int, int], ...]:
    gens = [(3, 1, 2, 0), (0, 2, 1, 3), (1, 0, 3, 2)]
    seen = {(0, 1, 2, 3)}
    frontier = [(0, 1, 2, 3)]
    while frontier:
        perm = frontier.pop()
        for g in gens:
            new = tuple(perm[i] for i in g)
            if new not in seen:
                seen.add(new)
                frontier.append(new)
    return tuple(sorted(seen))


ORBIT_PERMUTATIONS = _orbit_permutations()


def orbit(key: KeyLike) -> Tuple[Tuple[int, ...], ...]:
    """All distinct flat keys equivalent to ``key``, sorted lexicographically."""
    flat = as_flat(key)
    triples = (flat[0:3], flat[3:6], flat[6:9], flat[9:12])
    members = {
        triples[p[0]] + triples[p[1]] + triples[p[2]] + triples[p[3]]
        for p in ORBIT_PERMUTATIONS
    }
    return tuple(sorted(members))


def canonical_key(key: KeyLike) -> Tuple[ElementKey, int]:
    """Return the lexicographically smallest orbit member and the orbit size.

    The orbit size (1, 2, 4 or 8) doubles as the multiplicity class tag: it is
    the number of distinct keys in the full tensor sharing this value.
    """
    members = orbit(key)
    return ElementKey.from_flat(members[0]), len(members)


def canonical_flat(flat: Tuple[int, ...]) -> Tuple[int, ...]:
    """Fast path of :func:`canonical_key` for already validated flat tuples."""
    a, b, c, d = flat[0:3], flat[3:6], flat[6:9], flat[9:12]
    return min(
        a + b + c + d, d + b + c + a, a + c + b + d, d + c + b + a,
        b + a + d + c, c + a + d + b, b + d + a + c, c + d + a + b,
    )
