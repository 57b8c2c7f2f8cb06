from slicemotion.errors import DocstringMessageMixin, InvalidInputError


class VolumeError(InvalidInputError):
    """The volume is inconsistent with its grid."""


class VolumeFormatError(VolumeError):
    """The volume file is malformed."""


class MalformedHeaderError(DocstringMessageMixin, VolumeFormatError):
    """The volume header could not be parsed."""


class PayloadSizeMismatchError(DocstringMessageMixin, VolumeFormatError):
    """The volume payload size does not match the header dimensions."""


class UnsupportedDatatypeError(DocstringMessageMixin, VolumeFormatError):
    """The volume datatype is not supported."""
