from slicemotion.errors import DocstringMessageMixin, InvalidInputError


class MetricError(InvalidInputError):
    """The metric inputs are invalid."""


class ConstantReferenceError(DocstringMessageMixin, MetricError):
    """The reference has zero intensity range, so normalization is undefined."""
