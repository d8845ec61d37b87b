"""Exception types raised by the numerical routines."""


class ScatterError(Exception):
    """Base class for numerical failures in this package."""


class BandEdge(ScatterError):
    """z is numerically at a band edge, where the Floquet multiplier degenerates."""


class DegenerateEigenvector(ScatterError):
    """Monodromy eigenvector cannot be normalized (coincident multipliers or a
    Dirichlet divisor point hit exactly)."""


class RootFindingFailure(ScatterError):
    """A root expected by the band/gap structure could not be located."""


class EigenvalueHit(ScatterError):
    """z coincides with an eigenvalue of the perturbed operator (Wronskian ~ 0)."""


class ConvergenceFailure(ScatterError):
    """An iterative search failed to converge."""


class BranchTrackingFailure(ScatterError):
    """Continuous branch of arg alpha could not be followed along the grid."""


class ProfileIncomplete(ScatterError):
    """Spectral shift profile does not cover the required interval."""


class RadiusTooSmall(ScatterError):
    """Expansion circle intersects the padded spectral interval."""


class PositivityLoss(ScatterError):
    """An off-diagonal coefficient became non-positive during time stepping."""


class WindowOverflow(ScatterError):
    """Adaptive window exceeded the configured maximum size."""


class SchemaError(ScatterError):
    """Input data does not match the expected schema."""
