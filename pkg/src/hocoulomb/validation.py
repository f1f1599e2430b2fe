"""Closed form versus quadrature over every canonical key within a cutoff."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

from .closed_form import element_direct
from .core import canonical_flat
from .oracle import QuadratureSpec, element_quadrature_batch
from .tensor_store import BasisCutoff

ZERO_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ValidationRow:
    key: Tuple[int, ...]
    closed_form: float
    quadrature: float
    rel_error: float
    status: str  # "ok", "zero" or "FAIL"


@dataclass(frozen=True)
class ValidationReport:
    rows: Tuple[ValidationRow, ...]
    threshold: float

    @property
    def failures(self) -> List[ValidationRow]:
        return [r for r in self.rows if r.status == "FAIL"]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def nonzero_errors(self) -> List[float]:
        return [r.rel_error for r in self.rows if r.status != "zero"]

    @property
    def max_rel_error(self) -> float:
        errs = self.nonzero_errors
        return max(errs) if errs else 0.0

    @property
    def mean_rel_error(self) -> float:
        errs = self.nonzero_errors
        return sum(errs) / len(errs) if errs else 0.0


def all_canonical_keys(cutoff: BasisCutoff) -> List[Tuple[int, ...]]:
    """Every canonical key in the cutoff, parity-forbidden ones included."""
    basis = sorted(tuple(s) for s in cutoff.basis())
    keys = []
    for s1 in basis:
        for s2 in basis:
            for s3 in basis:
                for s4 in basis:
                    flat = s1 + s2 + s3 + s4
                    if canonical_flat(flat) == flat:
                        keys.append(flat)
    return keys


def compare(
    keys: Sequence[Tuple[int, ...]],
    a: float = 1.0,
    spec: Optional[QuadratureSpec] = None,
    threshold: float = 1e-8,
    evaluator: Optional[Callable[[Tuple[int, ...], float], float]] = None,
) -> ValidationReport:
    """Row-by-row comparison; ``evaluator(key, a)`` defaults to the exact closed form."""
    if evaluator is None:
        def evaluator(key, a):
            return element_direct(key, a, "exact").value
    quad, _ = element_quadrature_batch(keys, a, spec)
    rows = []
    for key, q in zip(keys, quad):
        cf = evaluator(key, a)
        q = float(q)
        if cf == 0.0:
            rel = abs(q)
            status = "zero" if abs(q) < ZERO_TOLERANCE else "FAIL"
        else:
            rel = abs(cf - q) / abs(cf)
            same_sign = math.copysign(1.0, cf) == math.copysign(1.0, q)
            status = "ok" if rel <= threshold and same_sign else "FAIL"
        rows.append(ValidationRow(tuple(key), cf, q, rel, status))
    return ValidationReport(tuple(rows), threshold)


def validate(
    cutoff: BasisCutoff,
    a: float = 1.0,
    spec: Optional[QuadratureSpec] = None,
    threshold: float = 1e-8,
    evaluator=None,
) -> ValidationReport:
    return compare(all_canonical_keys(cutoff), a, spec, threshold, evaluator)

