"""Test-system generation and run configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError


@dataclass
class SystemBundle:
    """State-space triple (A, B, C) with consistent dimensions."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    name: str = ""

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.C.shape[1] != n:
            raise DimensionMismatchError("inconsistent system dimensions")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass
class RunConfig:
    """Knobs shared by the CLI commands.

    ``block_size`` is the reduction panel width, ``nb`` the solver window
    block, ``batch`` the number of shifts factored simultaneously (None:
    all at once), and the two worker counts size the update and
    panel/window pools.
    """

    block_size: int = 64
    nb: int = 32
    batch: int | None = None
    workers_panel: int = 1
    workers_update: int = 1
    strategy: str = "sequential"
    seed: int = 0
    maxiter: int = 30
    tol: float = 1e-6
    fixed_iters: bool = False
    singular_rtol: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if min(self.block_size, self.nb, self.workers_panel, self.workers_update) < 1:
            raise ValueError("config values must be positive")
        if self.batch is not None and self.batch < 1:
            raise ValueError("batch must be >= 1 (or omitted)")
        if self.strategy not in ("sequential", "overlapped"):
            raise ValueError("strategy must be 'sequential' or 'overlapped'")


def random_stable_system(n: int, m: int, p: int, seed: int = 0,
                         margin: float = 0.05) -> SystemBundle:
    """Seeded random triple with A shifted to a negative spectral abscissa.

    A Gaussian matrix is moved left by its largest real eigenvalue part
    plus a margin proportional to sqrt(n), which makes every generated
    system stable by construction and the generator reproducible from the
    seed alone.
    """
    rng = np.random.default_rng(seed)
    A = np.asfortranarray(rng.standard_normal((n, n)))
    abscissa = float(np.max(np.real(np.linalg.eigvals(A))))
    A -= (abscissa + margin * np.sqrt(n)) * np.eye(n)
    B = np.asfortranarray(rng.standard_normal((n, m)))
    C = np.asfortranarray(rng.standard_normal((p, n)))
    return SystemBundle(A=A, B=B, C=C, name=f"random-n{n}-m{m}-p{p}-s{seed}")
