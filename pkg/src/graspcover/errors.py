"""Exception types shared across the toolkit."""


class GraspCoverError(Exception):
    """Base class for all toolkit errors."""


class MeshParseError(GraspCoverError):
    """Mesh file exists but does not parse as a supported format."""


class EmptyMeshError(GraspCoverError):
    """Mesh contains no non-degenerate faces."""


class InvalidStepError(GraspCoverError):
    """Rotation step outside (0, 180] degrees."""


class InvalidKError(GraspCoverError):
    """Requested subset size outside [1, set size]."""


class EmptyInputError(GraspCoverError):
    """Operation requires a non-empty pose/grasp set."""


class EmptyReferenceError(GraspCoverError):
    """Coverage requires a non-empty reference set."""


class NoValidSamplesError(GraspCoverError):
    """Precision requires at least one valid sample."""


class MissingRobustnessError(GraspCoverError):
    """Reference set has no robustness labels."""


class EmptyRobustSetError(GraspCoverError):
    """Robust filtering left no grasps at the requested threshold."""


class BudgetExceededError(GraspCoverError):
    """A configured enumeration/attempt cap was hit."""


class ReferenceMismatchError(GraspCoverError):
    """Reference file was generated under a different config."""


class ConfigError(GraspCoverError):
    """Run configuration is invalid."""
