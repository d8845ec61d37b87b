"""Scattering theory for compactly supported perturbations of periodic Jacobi operators."""

from .background import (
    BackgroundOperator,
    FloquetSolution,
    SpectralData,
    baker_akhiezer,
    band_edges,
    constant_background,
    dirichlet_eigenvalues,
    discriminant,
    floquet_multiplier,
    green_background,
    monodromy,
    transfer_matrix,
    wronskian_background,
)
from .errors import (
    BandEdge,
    BranchTrackingFailure,
    ConvergenceFailure,
    DegenerateEigenvector,
    EigenvalueHit,
    PositivityLoss,
    ProfileIncomplete,
    RadiusTooSmall,
    RootFindingFailure,
    ScatterError,
    SchemaError,
    WindowOverflow,
)
from .krein import (
    ShiftProfile,
    TraceReport,
    alpha_expansion,
    alpha_from_shift,
    alpha_log_derivative_residual,
    perturbation_determinant,
    spectral_shift,
    tau_from_recursion,
    trace_direct,
    trace_reports,
    trace_via_shift,
)
from .perturbation import (
    Asymptotics,
    JostSolution,
    Perturbation,
    ScatteringFunction,
    alpha,
    alpha_asymptotics,
    eigenvalues,
    green,
    jost,
    jost_z_derivative,
    scattering_function,
    trivial_perturbation,
    wronskian,
)
from .toda import (
    ConservedReport,
    TodaState,
    conserved_quantity_A,
    conserved_report,
    evolve,
    toda_vector_field,
)

__all__ = [name for name in dir() if not name.startswith("_")]
