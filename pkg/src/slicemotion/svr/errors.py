from slicemotion.errors import DocstringMessageMixin, InvalidInputError, NumericalError


class RegistrationError(InvalidInputError):
    """The registration inputs are invalid."""


class EmptyImageError(DocstringMessageMixin, RegistrationError):
    """The image holds no object to register."""


class SimilarityError(DocstringMessageMixin, NumericalError):
    """Similarity is undefined for inputs with zero variance."""


class ReconstructionError(InvalidInputError):
    """The super-resolution inputs are invalid."""


class NoKeptSlicesError(DocstringMessageMixin, ReconstructionError):
    """Every slice was rejected, nothing is left to reconstruct from."""
