"""Exception types shared across the package."""


class EotPairsError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(EotPairsError):
    pass


class AsymmetricMatrixError(EotPairsError):
    pass


class NotAppropriateError(EotPairsError):
    """Potential matrices have spectrum outside the admissible range."""


class DegenerateWeightsError(EotPairsError):
    """All mixture weights are zero."""


class QuadratureError(EotPairsError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


class SimulationError(EotPairsError):
    """Non-finite state or density encountered during simulation."""


class BuilderError(EotPairsError):
    """Benchmark pair construction failed."""


class FormatError(EotPairsError):
    """Malformed pair, tensor, or reference-vector file."""


class ProtocolError(EotPairsError):
    """Violation of the subprocess drift-evaluation protocol."""
