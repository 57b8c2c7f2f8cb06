from slicemotion.errors import DocstringMessageMixin, InvalidInputError


class GeometryError(DocstringMessageMixin, InvalidInputError):
    """The given matrix is not a proper rotation."""
