"""Fast solvers for 1D/2D time-dependent nonlocal diffusion with weakly singular kernels.

Piecewise quadratic collocation in space, Crank-Nicolson or BDF4 in time,
and Conjugate Gradient Squared with FFT-based structured operator products.
"""

from .pqc import (
    CollocationGrid,
    CoefficientTable,
    StructuredOperator1D,
    WeaklySingularKernel,
    assemble_operator,
    boundary_vector,
    compute_coefficients,
)
from .toeplitz import (
    BlockToeplitzTable,
    KroneckerOperator,
    ToeplitzSymbol,
    apply_operator_1d,
    btcb_apply,
    embed_rectangular,
    kron_apply,
    toeplitz_matvec,
)
from .kernels2d import (
    AdditiveOperator,
    Grid2D,
    MultiplicativeOperator,
    QuadratureSpec,
    apply_additive,
    assemble_additive_coefficients,
    boundary_vector_2d,
    build_additive,
    build_multiplicative,
)
from .solvers import (
    CgsConfig,
    SolveReport,
    TimeStepConfig,
    bdf4_run,
    cgs_solve,
    crank_nicolson_run,
    steady_solve,
)
from .manufactured import ManufacturedSolution, discretize, get_solution
from .analysis import SpectralReport, dominance_report, symmetric_part_extremes
from .study import StudySpec, run_diagnostics, run_study, run_timing

__version__ = "0.1.0"
