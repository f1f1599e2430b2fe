"""Timing of a one-axis family sweep: direct closed form versus recurrence."""
from __future__ import annotations

import time
from typing import Optional, Sequence

from .closed_form import clear_caches, element_direct
from .recurrence import build_family

MAX_BENCH_INDEX = 16


def bench_family(
    n_max: int,
    repetitions: int = 3,
    axis: str = "x",
    pair: str = "14",
    base_key: Optional[Sequence[int]] = None,
    backend: str = "exact",
) -> dict:
    """Best-of-``repetitions`` wall time (ns) for all ``(n-, n+)`` with ``n+ <= n_max``.

    Per-axis sum caches are cleared before every timed run so neither path
    benefits from earlier work.
    """
    if not 0 <= n_max <= MAX_BENCH_INDEX:
        raise ValueError(f"n_max must lie in [0, {MAX_BENCH_INDEX}]")
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    proto = build_family(axis, pair, 0, base_key, backend=backend)
    keys = [proto.key_for(lo, hi) for hi in range(n_max + 1) for lo in range(hi + 1)]

    direct_ns = recurrence_ns = None
    for _ in range(repetitions):
        clear_caches()
        t0 = time.perf_counter_ns()
        for key in keys:
            element_direct(key, 1.0, backend)
        elapsed = time.perf_counter_ns() - t0
        direct_ns = elapsed if direct_ns is None else min(direct_ns, elapsed)

        clear_caches()
        t0 = time.perf_counter_ns()
        frontier = build_family(axis, pair, n_max, base_key, backend=backend)
        frontier.entries()
        elapsed = time.perf_counter_ns() - t0
        recurrence_ns = elapsed if recurrence_ns is None else min(recurrence_ns, elapsed)

    return {
        "n_max": n_max,
        "axis": axis,
        "pair": pair,
        "backend": backend,
        "entries": len(keys),
        "seed_evaluations": frontier.seed_calls,
        "repetitions": repetitions,
        "direct_ns": direct_ns,
        "recurrence_ns": recurrence_ns,
        "ratio": direct_ns / max(recurrence_ns, 1),
    }
