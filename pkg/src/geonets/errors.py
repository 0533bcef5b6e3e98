"""Exception taxonomy.

Every error names the module and operation it came from so the CLI can emit
machine-readable failure records.  ValidationError maps to exit code 2,
NumericalError to exit code 3.
"""


class GeonetsError(Exception):
    module = "geonets"
    operation = ""

    def __init__(self, message, module=None, operation=None, detail=None):
        super().__init__(message)
        if module is not None:
            self.module = module
        if operation is not None:
            self.operation = operation
        self.detail = detail or {}

    def record(self):
        return {
            "error": type(self).__name__,
            "module": self.module,
            "operation": self.operation,
            "message": str(self),
            "detail": self.detail,
        }


class ValidationError(GeonetsError):
    """Bad inputs: schema violations, precondition failures, malformed nets."""


class NumericalError(GeonetsError):
    """The computation itself failed: divergence, ambiguity, collapse."""


class ChartDomainError(ValidationError):
    module = "riemann"


class MetricNotPositiveError(ValidationError):
    module = "riemann"


class BvpError(NumericalError):
    module = "riemann"
    operation = "geodesic_bvp"


class OutsideUniquenessError(NumericalError):
    """Produced geodesic is at least as long as the injectivity-radius bound."""

    module = "riemann"
    operation = "geodesic_bvp"


class IvpError(NumericalError):
    module = "riemann"
    operation = "geodesic_ivp"


class DegenerateEdgeError(ValidationError):
    module = "net"


class NonStationaryError(ValidationError):
    module = "net"


class SolverError(NumericalError):
    module = "solver"
    operation = "stationarize"


class EdgeCollapseError(SolverError):
    """An edge shrank below 1e-6 * inj_radius_lb; the limit leaves the net class."""


class AmbiguousGeometryError(NumericalError):
    """A pair of edges sits in the refusal band between touching and clearly apart."""

    module = "surgery"
    operation = "detect_coincidences"


class ContinuationError(NumericalError):
    module = "continuation"
    operation = "continue_net"
