"""Parallel annihilation schedules for trapezoidal blocks.

A block of shape nRows x nCols (nCols >= nRows) carries nonzeros at (r, c)
with c >= r (1-based).  Bringing it to the upper-triangular-from-the-right
shape zeroes, in every row r, the entries at columns r .. r+delta-1 where
delta = nCols - nRows; each zero is introduced by a Givens rotation pairing
the target column with a helper column further right (at most r+delta, so
no nonzero below the rotation row can leak back into an annihilated
position).

Rotations are grouped greedily into steps.  Rotations of one step touch
pairwise disjoint column pairs and may run concurrently; between steps, a
position becomes eligible ("available") once the target directly below it
in its column is gone, and helper columns used in a step rest for one step.
The schedule is a pure function of (nRows, nCols) and is cached, so every
block of the same shape reuses it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class AnnihilationSchedule:
    """Step-grouped Givens rotation plan for one block shape.

    ``rot_info`` stores 1-based triplets (r, c1, c2) flat, in execution
    order: the entry at (r, c1) is zeroed with the help of (r, c2).
    ``job_size[t]`` is the number of rotations in step t.
    """

    n_rows: int
    n_cols: int
    num_steps: int
    num_rots: int
    job_size: np.ndarray
    rot_info: np.ndarray

    def steps(self):
        """Yield one list of (r, c1, c2) triplets per step."""
        off = 0
        for size in self.job_size:
            triplets = [tuple(self.rot_info[3 * k: 3 * k + 3]) for k in range(off, off + size)]
            off += size
            yield triplets

    def format_grid(self) -> str:
        """Text grid of annihilation step numbers per matrix position.

        Targets show the step that zeroes them, retained entries show '.',
        structural zeros are blank.
        """
        delta = self.n_cols - self.n_rows
        width = max(2, len(str(self.num_steps)))
        cell = {}
        for t, rots in enumerate(self.steps(), start=1):
            for r, c1, _ in rots:
                cell[(r, c1)] = t
        lines = []
        for r in range(1, self.n_rows + 1):
            row = []
            for c in range(1, self.n_cols + 1):
                if c < r:
                    row.append(" " * width)
                elif (r, c) in cell:
                    row.append(str(cell[(r, c)]).rjust(width))
                elif c >= r + delta:
                    row.append(".".rjust(width))
                else:
                    row.append("?".rjust(width))
            lines.append(" ".join(row))
        return "\n".join(lines)


@dataclass
class ScheduleCheck:
    """Outcome of :func:`validate_schedule`: ok, or the first violation."""

    ok: bool
    violation: str | None = None
    details: dict = field(default_factory=dict)


@lru_cache(maxsize=None)
def greedy_schedule(n_rows: int, n_cols: int) -> AnnihilationSchedule:
    """Greedy step-parallel annihilation plan for an upper trapezoid.

    Scans rows bottom-up and targets left-to-right, picking for each the
    rightmost legal helper.  A position is available from the start when
    nothing below it in its column ever needs annihilation (the bottom row,
    and the first column of every row); afterwards, zeroing (r, c) makes
    (r-1, c) available at the next step.  Helpers used in a step become
    usable again one step later.
    """
    if n_rows < 1:
        raise ValueError("n_rows must be positive")
    if n_cols < n_rows:
        raise ValueError("n_cols must be at least n_rows")
    delta = n_cols - n_rows

    # ready: not yet annihilated and not resting as last step's helper.
    ready = {}
    available = {}
    for r in range(1, n_rows + 1):
        for c in range(r, r + delta + 1):
            ready[(r, c)] = True
            # No target below (r, c) in column c: either bottom row, or the
            # column's deepest target is this row itself (c == r).
            available[(r, c)] = r == n_rows or c == r

    job_size: list[int] = []
    rot_info: list[int] = []
    busy: list[tuple[int, int]] = []
    promote: list[tuple[int, int]] = []

    while True:
        for pos in busy:
            ready[pos] = True
        busy.clear()
        for pos in promote:
            available[pos] = True
        promote.clear()

        count = 0
        for r in range(n_rows, 0, -1):
            for c1 in range(r, r + delta + 1):
                if not (ready[(r, c1)] and available[(r, c1)]):
                    continue
                for c2 in range(r + delta, c1, -1):
                    if ready[(r, c2)] and available[(r, c2)]:
                        rot_info.extend((r, c1, c2))
                        count += 1
                        ready[(r, c1)] = False
                        ready[(r, c2)] = False
                        busy.append((r, c2))
                        if r > 1:
                            available[(r - 1, c1)] = False
                            promote.append((r - 1, c1))
                        break
        if count == 0:
            break
        job_size.append(count)

    job = np.asarray(job_size, dtype=np.int64)
    info = np.asarray(rot_info, dtype=np.int64)
    job.setflags(write=False)
    info.setflags(write=False)
    return AnnihilationSchedule(
        n_rows=n_rows,
        n_cols=n_cols,
        num_steps=len(job_size),
        num_rots=int(job.sum()) if len(job_size) else 0,
        job_size=job,
        rot_info=info,
    )


@lru_cache(maxsize=None)
def mirrored_schedule(n_rows: int, n_cols: int) -> AnnihilationSchedule:
    """Top-down schedule for lower trapezoids (row r nonzero for c <= r+delta).

    Obtained by flipping :func:`greedy_schedule` in both axes: targets become
    the superdiagonal band entries, helpers sit to the left of their target,
    rows are finished first at the top.  Step structure and safety carry over
    by symmetry.
    """
    base = greedy_schedule(n_rows, n_cols)
    info = np.empty_like(np.asarray(base.rot_info))
    for k in range(base.num_rots):
        r, c1, c2 = base.rot_info[3 * k: 3 * k + 3]
        info[3 * k: 3 * k + 3] = (n_rows + 1 - r, n_cols + 1 - c1, n_cols + 1 - c2)
    info.setflags(write=False)
    return AnnihilationSchedule(
        n_rows=base.n_rows,
        n_cols=base.n_cols,
        num_steps=base.num_steps,
        num_rots=base.num_rots,
        job_size=base.job_size,
        rot_info=info,
    )


def validate_schedule(schedule: AnnihilationSchedule) -> ScheduleCheck:
    """Check a schedule against all structural invariants.

    Verifies target coverage (each of the nRows*(nCols-nRows) positions
    exactly once), per-step column disjointness, bottom-up safety (both
    columns of a rotation are fully annihilated below its row), job size
    consistency, and finally replays the rotations symbolically on the
    trapezoid pattern to prove no fill-in.  Returns the first violation
    found, or success.
    """
    s = schedule
    delta = s.n_cols - s.n_rows

    def fail(msg, **details):
        return ScheduleCheck(False, msg, details)

    if len(s.rot_info) != 3 * s.num_rots:
        return fail("rot_info length disagrees with num_rots")
    if len(s.job_size) != s.num_steps:
        return fail("job_size length disagrees with num_steps")
    if s.num_steps and min(s.job_size) < 1:
        return fail("empty step in job_size")
    if int(np.sum(s.job_size)) != s.num_rots:
        return fail("sum(job_size) != num_rots")
    if s.num_rots != s.n_rows * delta:
        return fail("rotation count differs from target count",
                    expected=s.n_rows * delta, actual=s.num_rots)

    targets = {(r, c) for r in range(1, s.n_rows + 1) for c in range(r, r + delta)}
    anni_step: dict[tuple[int, int], int] = {}
    for t, rots in enumerate(s.steps(), start=1):
        used_cols: set[int] = set()
        for r, c1, c2 in rots:
            if (r, c1) not in targets:
                return fail("rotation target outside trapezoid targets", rot=(r, c1, c2))
            if not (c1 < c2 <= r + delta):
                return fail("helper column out of the safe range", rot=(r, c1, c2))
            if (r, c1) in anni_step:
                return fail("target annihilated twice", rot=(r, c1, c2))
            if c1 in used_cols or c2 in used_cols:
                return fail("column clash within a step", step=t, rot=(r, c1, c2))
            used_cols.update((c1, c2))
            anni_step[(r, c1)] = t
    missing = targets - set(anni_step)
    if missing:
        return fail("targets never annihilated", missing=sorted(missing)[:8])

    for t, rots in enumerate(s.steps(), start=1):
        for r, c1, c2 in rots:
            for col in (c1, c2):
                for rr in range(r + 1, min(col, s.n_rows) + 1):
                    if anni_step.get((rr, col), 10 ** 9) >= t:
                        return fail("safety violation: unannihilated target below",
                                    rot=(r, c1, c2), below=(rr, col), step=t)

    # Symbolic replay on the nonzero pattern: annihilated positions must stay
    # exactly zero, and no rotation may combine a nonzero into one.
    nz = np.zeros((s.n_rows + 1, s.n_cols + 1), dtype=bool)
    for r in range(1, s.n_rows + 1):
        nz[r, r:] = True
    done: set[tuple[int, int]] = set()
    for t, rots in enumerate(s.steps(), start=1):
        for r, c1, c2 in rots:
            for rr in range(1, s.n_rows + 1):
                merged = nz[rr, c1] or nz[rr, c2]
                if rr == r:
                    nz[rr, c1] = False
                    nz[rr, c2] = merged
                    continue
                for col in (c1, c2):
                    if merged and not nz[rr, col] and ((rr, col) in done or col < rr):
                        return fail("fill-in at a zero position",
                                    rot=(r, c1, c2), filled=(rr, col), step=t)
                nz[rr, c1] = merged
                nz[rr, c2] = merged
            done.add((r, c1))
    for (r, c) in targets:
        if nz[r, c]:
            return fail("target still nonzero after replay", target=(r, c))
    return ScheduleCheck(True)
