from slicemotion.errors import DocstringMessageMixin, InvalidInputError, NumericalError


class EstimatorError(InvalidInputError):
    """The estimator inputs are invalid."""


class ShapeMismatchError(EstimatorError):
    """Tensor shapes are inconsistent."""


class EmptySequenceError(DocstringMessageMixin, EstimatorError):
    """The recurrent network needs at least one step."""


class MissingOrientationError(EstimatorError):
    """Stacks from every orientation group are required."""


class TrainingDivergedError(NumericalError):
    """Training produced a non-finite loss."""


class CheckpointError(InvalidInputError):
    """The checkpoint file is malformed."""
