from slicemotion.errors import DocstringMessageMixin, InvalidInputError


class AcquisitionError(InvalidInputError):
    """The slice stack geometry is inconsistent."""


class TrajectoryLengthError(DocstringMessageMixin, AcquisitionError):
    """The trajectory does not provide one sample per slice."""


class StackTooShortError(DocstringMessageMixin, AcquisitionError):
    """At least two slices are required to split a stack."""


class StackFormatError(AcquisitionError):
    """The stack directory is malformed."""
