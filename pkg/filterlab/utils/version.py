from importlib.metadata import PackageNotFoundError, version

FALLBACK_VERSION = "0+unknown"


def library_version() -> str:
    """Installed version of filterlab, or a placeholder when running from a source checkout."""
    try:
        return version("filterlab")
    except PackageNotFoundError:
        return FALLBACK_VERSION
