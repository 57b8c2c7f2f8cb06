from slicemotion.errors import DocstringMessageMixin, InvalidInputError


class SdaError(InvalidInputError):
    """The reconstruction inputs are invalid."""


class EmptyInputError(DocstringMessageMixin, SdaError):
    """No slices were given to reconstruct from."""


class ScheduleIndexError(DocstringMessageMixin, SdaError):
    """The iteration is outside the sigma schedule."""
