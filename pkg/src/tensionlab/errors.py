"""Exception hierarchy. Every error carries a stable kebab-case ``code``."""


class TensionLabError(Exception):
    code = "tensionlab-error"

    def __init__(self, message=None):
        super().__init__(message or self.code)

    def __str__(self):
        msg = super().__str__()
        return msg if msg.startswith(self.code) else f"{self.code}: {msg}"


class GridTooSmallError(TensionLabError, ValueError):
    code = "grid-too-small"


class GridMismatchError(TensionLabError, ValueError):
    code = "grid-mismatch"


class OutOfDomainError(TensionLabError, ValueError):
    code = "out-of-domain"


class NoValidInteriorError(TensionLabError, ValueError):
    code = "no-valid-interior"


class NotHarmonicError(TensionLabError, ValueError):
    code = "not-harmonic"


class NotFlatError(TensionLabError, ValueError):
    code = "not-flat"


class UnknownMetricError(TensionLabError, KeyError):
    code = "unknown-name"


class MetricEvaluationError(TensionLabError, FloatingPointError):
    code = "metric-evaluation-failure"


class DidNotConvergeError(TensionLabError, RuntimeError):
    code = "did-not-converge"


class EllipticityError(TensionLabError, ValueError):
    code = "ellipticity-violation"


class SolverStagnationError(TensionLabError, RuntimeError):
    code = "cg-stagnation"


class ConstraintOutsideGridError(TensionLabError, ValueError):
    code = "constraint-outside-grid"


class NotInjectiveError(TensionLabError, RuntimeError):
    code = "not-injective-seed"


class DegenerateJacobianError(TensionLabError, ValueError):
    code = "degenerate-jacobian"


class AllDegenerateError(TensionLabError, ValueError):
    code = "all-degenerate"


class DegenerateError(TensionLabError, ValueError):
    code = "degenerate"


class AlphaOutOfDiskError(TensionLabError, ValueError):
    code = "alpha-out-of-disk"


class OrientationError(TensionLabError, ValueError):
    code = "orientation-violation"


class DomainDegeneracyError(TensionLabError, ValueError):
    code = "domain-includes-degeneracy"


class QuadratureError(TensionLabError, RuntimeError):
    code = "quadrature-failure"


class FormatError(TensionLabError, ValueError):
    code = "malformed-input"
