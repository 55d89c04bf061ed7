from pathlib import Path


def _get_version() -> str:
    """
    Version written by setuptools-scm at build time, or read from the git
    checkout when running from source.
    """
    try:
        from ._version import version
        return version
    except ImportError:
        ...
    if (Path(__file__).resolve().parent.parent / '.git').exists():
        try:
            from setuptools_scm import get_version
            return get_version(root='..', relative_to=__file__)
        except (ImportError, LookupError):
            ...
    return '0.0.unknown'


__version__ = version = _get_version()
