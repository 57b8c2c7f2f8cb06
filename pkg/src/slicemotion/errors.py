class SlicemotionError(Exception):
    """Base class for all errors raised by slicemotion."""


class InvalidInputError(SlicemotionError, ValueError):
    """The given input is malformed or inconsistent."""


class NumericalError(SlicemotionError, RuntimeError):
    """A numerical procedure failed to produce a usable result."""


class DocstringMessageMixin:
    """Mixin that uses the first docstring line as the default message."""

    def __init__(self, *args: object) -> None:
        if not args:
            assert self.__doc__ is not None
            args = (self.__doc__.partition("\n")[0],)
        super().__init__(*args)  # type: ignore[call-arg]


class RetryBudgetExhaustedError(DocstringMessageMixin, NumericalError):
    """The retry budget was exhausted before a valid sample was drawn."""
