"""Flop and wall-time accounting, broken down by algorithm phase.

Flops are counted in real double-precision operations with the usual
conventions: a complex multiply costs 6 real flops, a complex add 2, a
real multiply-add pair 2.  Counts depend only on problem shapes, never on
matrix values, so two runs with the same configuration report identical
numbers.
"""

from __future__ import annotations

import threading
import time
from collections import defaultdict
from contextlib import contextmanager

PHASE_REDUCTION = "contr_hess_reduction"
PHASE_RQ = "small_batched_rq"
PHASE_BATCHED_GEMM = "batched_gemm"
PHASE_OUTER_GEMM = "outer_gemm"
PHASE_TAIL = "tail_solves"

ALL_PHASES = (PHASE_REDUCTION, PHASE_RQ, PHASE_BATCHED_GEMM, PHASE_OUTER_GEMM, PHASE_TAIL)


def gemm_flops(m: int, n: int, k: int, complex_data: bool) -> float:
    """Real flops of an m*n*k multiply-accumulate."""
    return (8.0 if complex_data else 2.0) * m * n * k


class PhaseCounters:
    """Thread-safe accumulator of per-phase flops and wall seconds."""

    def __init__(self):
        self._lock = threading.Lock()
        self.flops: dict[str, float] = defaultdict(float)
        self.seconds: dict[str, float] = defaultdict(float)

    def add(self, phase: str, flops: float) -> None:
        with self._lock:
            self.flops[phase] += flops

    def add_seconds(self, phase: str, seconds: float) -> None:
        with self._lock:
            self.seconds[phase] += seconds

    @contextmanager
    def timed(self, phase: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.add_seconds(phase, time.perf_counter() - t0)

    def total_flops(self) -> float:
        return sum(self.flops.values())

    def snapshot(self) -> dict[str, tuple[float, float]]:
        with self._lock:
            phases = set(self.flops) | set(self.seconds)
            return {p: (self.flops.get(p, 0.0), self.seconds.get(p, 0.0)) for p in phases}


def add_flops(counter: PhaseCounters | None, phase: str, flops: float) -> None:
    if counter is not None:
        counter.add(phase, flops)
