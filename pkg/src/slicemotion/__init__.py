def _get_version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version(_dist_name)
    except PackageNotFoundError:
        return "0+unknown"


_dist_name = "slicemotion"
__version__ = _get_version()
