import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from hocoulomb.closed_form import element_direct
from hocoulomb.recurrence import (
    MissingNeighborError,
    build_family,
    family_signature,
    four_index_enabled,
    four_index_neighbors,
    normalization_square,
    normalize,
    recur_step_four_index,
    recur_step_normalized,
    recur_step_unnormalized,
    unnormalize,
    validate_four_index,
)


def x14(lo, hi, rest=None):
    flat = list(rest or (0,) * 12)
    flat[0], flat[9] = lo, hi
    return tuple(flat)


def vbar(key):
    return unnormalize(element_direct(key), key).value


def test_normalization_square():
    assert normalization_square((0,) * 12) == 1
    assert normalization_square((2,) + (0,) * 10 + (3,)) == 8 * 48


@given(st.lists(st.integers(0, 3), min_size=12, max_size=12).map(tuple))
@settings(max_examples=50)
def test_unnormalised_values_are_rational_and_roundtrip(key):
    v = element_direct(key)
    u = unnormalize(v, key)
    assert isinstance(u.value, Fraction)
    assert normalize(u, key).exact == v.exact


def test_float_roundtrip():
    key = (1, 2, 0, 0, 1, 1, 1, 0, 1, 2, 1, 0)
    v = element_direct(key, 2.0, "float")
    back = normalize(unnormalize(v, key), key)
    assert back.value == pytest.approx(v.value, rel=1e-14)


def test_normalised_step_first_row():
    up, down = element_direct(x14(0, 2)), element_direct(x14(0, 0))
    got = recur_step_normalized(1, 1, (up, down, None))
    assert got.exact == element_direct(x14(1, 1)).exact


@pytest.mark.parametrize("n_minus, n_plus", [(2, 3), (1, 5), (3, 3), (2, 6)])
def test_normalised_step_matches_direct(n_minus, n_plus):
    rest = (0, 1, 0, 1, 0, 2, 1, 1, 0, 0, 0, 2)
    nb = (
        element_direct(x14(n_minus - 1, n_plus + 1, rest)),
        element_direct(x14(n_minus - 1, n_plus - 1, rest)),
        element_direct(x14(n_minus - 2, n_plus, rest)) if n_minus >= 2 else None,
    )
    got = recur_step_normalized(n_minus, n_plus, nb)
    assert got.exact == element_direct(x14(n_minus, n_plus, rest)).exact
    flt = recur_step_normalized(
        n_minus, n_plus, tuple(None if v is None else element_direct(
            x14(*k, rest), backend="float") for v, k in zip(nb, [
                (n_minus - 1, n_plus + 1), (n_minus - 1, n_plus - 1), (max(n_minus - 2, 0), n_plus)]))
    )
    assert flt.value == pytest.approx(got.value, rel=1e-12, abs=1e-15)


def test_normalised_step_guards():
    v = element_direct((0,) * 12)
    with pytest.raises(ValueError):
        recur_step_normalized(0, 2, (v, v, v))
    with pytest.raises(ValueError):
        recur_step_normalized(3, 2, (v, v, v))
    with pytest.raises(MissingNeighborError):
        recur_step_normalized(2, 3, (v, v, None))


def test_unnormalised_step_exhaustive_small():
    rest = (0, 1, 1, 2, 0, 0, 1, 1, 0, 0, 0, 1)
    for n_minus in range(4):
        for n_plus in range(n_minus, 6):
            got = recur_step_unnormalized(n_minus, n_plus, (
                vbar(x14(n_minus, n_plus + 1, rest)),
                vbar(x14(n_minus, n_plus - 1, rest)) if n_plus else None,
                vbar(x14(n_minus - 1, n_plus, rest)) if n_minus else None,
            ))
            assert got == vbar(x14(n_minus + 1, n_plus, rest))


def test_unnormalised_step_guards():
    with pytest.raises(ValueError):
        recur_step_unnormalized(2, 1, (1, 1, 1))
    with pytest.raises(MissingNeighborError):
        recur_step_unnormalized(0, 1, (None, 1, None))
    with pytest.raises(MissingNeighborError):
        recur_step_unnormalized(1, 1, (1, 1, None))
    assert recur_step_unnormalized(0, 0, (5, None, None)) == 5


def test_four_index_relation_fails_validation():
    report = validate_four_index(3)
    assert report.checked == 48
    assert not report.valid
    key, lhs, rhs = report.mismatches[0]
    assert key == (0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0)
    assert (lhs, rhs) == (Fraction(5, 3), Fraction(4, 3))
    assert four_index_enabled() is False


def test_four_index_zero_m_minus_holds():
    # with m- = 0 the printed relation reduces to a single neighbour and is consistent
    target, first, second = four_index_neighbors((0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0), 0)
    assert second is None
    assert recur_step_four_index(0, 0, 0, (vbar(first), None)) == vbar(target)


def test_four_index_neighbors_shape_guard():
    with pytest.raises(ValueError):
        four_index_neighbors((0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0), 0)


def test_four_index_step_is_plain_sum():
    assert recur_step_four_index(0, 1, 1, (Fraction(1, 3), Fraction(1, 6))) == Fraction(1, 2)
    with pytest.raises(MissingNeighborError):
        recur_step_four_index(0, 1, 1, (Fraction(1), None))


def test_family_n_max_4_matches_direct():
    fam = build_family("x", "14", 4)
    entries = fam.entries()
    assert len(entries) == 15
    for key, value in entries.items():
        assert value.exact == element_direct(key).exact
    assert fam.seed_calls == 9


@pytest.mark.parametrize("axis", ["x", "y", "z"])
@pytest.mark.parametrize("pair", ["14", "23"])
def test_family_random_bases(axis, pair):
    rng = random.Random(axis + pair)
    for _ in range(6):
        base = tuple(rng.randint(0, 3) for _ in range(12))
        fam = build_family(axis, pair, 4, base, scale=1.5)
        for key, value in fam.entries().items():
            assert value.exact == element_direct(key, 1.5).exact
            assert value.a == 1.5


def test_family_float_deviation_at_n_max_8():
    exact = build_family("x", "14", 8)
    flt = build_family("x", "14", 8, backend="float")
    worst = 0.0
    for lo, hi in exact.pairs():
        e, f = exact.value(lo, hi).value, flt.value(lo, hi).value
        worst = max(worst, abs(f - e) / abs(e) if e else abs(f))
    assert worst <= 1e-9


def test_family_lookup_order_and_range():
    fam = build_family("y", "23", 3)
    assert fam.value(3, 1) == fam.value(1, 3)
    with pytest.raises(KeyError):
        fam.value(0, 4)


def test_family_signature_roundtrip():
    key = (1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0)
    base, lo, hi = family_signature(key, "y", "23")
    assert (lo, hi) == (0, 1) and base[4] == base[7] == 0
    fam = build_family("y", "23", 1, base)
    assert fam.value(lo, hi).exact == element_direct(key).exact


def test_family_seed_failure_names_key():
    def failing(key, a, backend):
        raise ArithmeticError("no")

    with pytest.raises(RuntimeError, match=r"\(0, 0, 0"):
        build_family("x", "14", 2, seed_evaluator=failing)


@pytest.mark.parametrize("kwargs", [
    {"axis": "w", "pair": "14", "n_max": 2},
    {"axis": "x", "pair": "13", "n_max": 2},
    {"axis": "x", "pair": "14", "n_max": -1},
    {"axis": 3, "pair": "14", "n_max": 2},
])
def test_family_rejects_bad_arguments(kwargs):
    with pytest.raises(ValueError):
        build_family(**kwargs)


def test_family_ignores_pair_entries_of_base():
    a = build_family("x", "14", 3, (4,) + (0,) * 8 + (2, 0, 0))
    b = build_family("x", "14", 3)
    assert dict(a.table) == dict(b.table)
