"""shiftsolve: batched direct solvers for shifted linear systems.

One orthogonal reduction of (A, B, C) to controller-Hessenberg form buys
cheap simultaneous solves of (A - sigma I) x = b for many shifts: transfer
function evaluation, reduced and transposed shifted systems, structured
pseudospectrum grids, and an interpolatory model-reduction driver on top.
"""

from .batched import BlockBatch, batched_lq, batched_rq
from .counters import PhaseCounters
from .errors import (
    DimensionMismatchError,
    EigensolverError,
    SingularDiagonalError,
    SingularShiftError,
)
from .hessenberg import (
    ControllerHessForm,
    PanelResult,
    accumulate_q,
    mhessenberg_reduce,
    reduce_controller_hessenberg,
)
from .irka import IrkaState, ReducedModel, irka_iterate, small_eig_pencil
from .kernels import (
    BlockReflector,
    GivensRotation,
    Householder,
    apply_block_reflector,
    gemm_acc,
    givens,
    householder_vector,
    trsm_upper,
)
from .pools import WorkerPool
from .schedule import (
    AnnihilationSchedule,
    greedy_schedule,
    mirrored_schedule,
    validate_schedule,
)
from .solvers import (
    ShiftBatchWorkspace,
    ShiftedSolveResult,
    TransferFunctionResult,
    eval_transfer_function,
    solve_shifted_reduced,
    solve_shifted_transposed,
    structured_pseudospectrum_grid,
)
from .systems import RunConfig, SystemBundle, random_stable_system

__version__ = "0.1.0"

__all__ = [
    "AnnihilationSchedule",
    "BlockBatch",
    "BlockReflector",
    "ControllerHessForm",
    "DimensionMismatchError",
    "EigensolverError",
    "GivensRotation",
    "Householder",
    "IrkaState",
    "PanelResult",
    "PhaseCounters",
    "ReducedModel",
    "RunConfig",
    "ShiftBatchWorkspace",
    "ShiftedSolveResult",
    "SingularDiagonalError",
    "SingularShiftError",
    "SystemBundle",
    "TransferFunctionResult",
    "WorkerPool",
    "accumulate_q",
    "apply_block_reflector",
    "batched_lq",
    "batched_rq",
    "eval_transfer_function",
    "gemm_acc",
    "givens",
    "greedy_schedule",
    "householder_vector",
    "irka_iterate",
    "mhessenberg_reduce",
    "mirrored_schedule",
    "random_stable_system",
    "reduce_controller_hessenberg",
    "small_eig_pencil",
    "solve_shifted_reduced",
    "solve_shifted_transposed",
    "structured_pseudospectrum_grid",
    "trsm_upper",
    "validate_schedule",
]
