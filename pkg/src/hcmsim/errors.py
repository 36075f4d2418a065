"""Exception types raised by the simulation toolkit."""


class HcmError(Exception):
    """Base class for all toolkit errors."""


class GeometryInfeasible(HcmError):
    """Stator dimensions are mutually inconsistent (e.g. overlapping teeth)."""


class MeshQualityFailure(HcmError):
    """A generated element has a non-positive Jacobian."""


class IoFailure(HcmError):
    """File import/export failed or was rejected."""


class FrameDegenerate(HcmError):
    """Material frame vectors are not orthonormal."""


class MissingMaterial(HcmError):
    """A mesh region tag has no material assigned."""


class SingularElement(HcmError):
    """Element Jacobian non-positive during assembly (carries element id)."""

    def __init__(self, element_id, detail=""):
        self.element_id = element_id
        super().__init__(f"element {element_id}: non-positive Jacobian {detail}".rstrip())


class EmptyConstraintSet(HcmError):
    """A required boundary tag (e.g. FIXED_BASE) has no faces."""


class DielectricSingular(HcmError):
    """Interior dielectric block is not invertible."""


class SolverNoConverge(HcmError):
    """Eigen or linear solver failed to converge (carries diagnostics)."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ShiftHitsEigenvalue(HcmError):
    """Shift-invert factorization hit an eigenvalue (retried internally)."""


class StepTooLarge(HcmError):
    """Transient time step exceeds the resolution bound for the drive."""


class DampingNegative(HcmError):
    """Rayleigh damping coefficients must be non-negative."""


class DampingRequired(HcmError):
    """Sweep amplitude is unbounded at resonance without damping."""


class IncompatiblePattern(HcmError):
    """Electrode sector count incompatible with the drive pattern."""


class DegenerateFit(HcmError):
    """Least-squares fit input is degenerate (e.g. all abscissae equal)."""


class NoModesInBand(HcmError):
    """No eigenmodes in the requested sweep band."""


class ModeAlignmentConflict(HcmError):
    """A measured peak maps onto more than one simulated mode."""


class ConfigParseError(HcmError):
    """Run-config text could not be parsed (carries line info when known)."""


class ConfigValidationError(HcmError):
    """Run-config key failed validation (carries the offending key)."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class StageDependencyError(HcmError):
    """A pipeline stage was requested without its prerequisite artifacts."""


class AmbiguousClassificationWarning(UserWarning):
    """Nodal-diameter classification is ambiguous (top two magnitudes close)."""
