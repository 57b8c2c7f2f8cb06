from slicemotion.errors import DocstringMessageMixin, InvalidInputError


class SplineError(InvalidInputError):
    """The spline abscissae are invalid."""


class DuplicateAbscissaError(DocstringMessageMixin, SplineError):
    """Spline abscissae must be strictly increasing."""


class TooFewPointsError(DocstringMessageMixin, SplineError):
    """At least two points are needed to fit a spline."""


class TrajectoryError(InvalidInputError):
    """The trajectory is inconsistent."""
