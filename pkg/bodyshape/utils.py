"""
Module that contains general-use utilities used in multiple places throughout
``bodyshape``: step logging, atomic file output and JSON helpers.
"""
import logging
import os
import tempfile
import time
from contextlib import contextmanager
from functools import partial
from pathlib import Path
from typing import Any, Union

import numpy as np
import simplejson

from .constants import SUCCESS_LEVEL
from .shapes import SchemaError

logging.addLevelName(SUCCESS_LEVEL, 'SUCCESS')
logger = logging.getLogger(__name__)
logger.success = partial(logger.log, SUCCESS_LEVEL)

PathLike = Union[str, os.PathLike]


@contextmanager
def safe_load(name, cls=None, reraise=True):
    """
    Context manager to run and time one named step.

    This will log standard messages to indicate success or failure. With
    ``reraise=False`` a failure is logged and swallowed so that the rest of a
    batch can continue.

    Parameters
    ----------
    name: ``str``
        The name of the step to be logged. This will be used in the log
        message.

    cls: ``type``, optional
        The class of a loaded object to be logged. This will be used in the log
        message.

    reraise: ``bool``, optional
        Whether a failure propagates to the caller.
    """
    start_time = time.monotonic()

    if cls is None:
        identifier = name
    else:
        identifier = ' '.join((name, str(cls)))
    logger.info('Loading %s...', identifier)
    try:
        yield
        duration = time.monotonic() - start_time
        logger.success('Successfully loaded %s in %.2f s',
                       identifier, duration)
    except Exception as exc:
        duration = time.monotonic() - start_time
        logger.error('Failed to load %s after %.2f s: %s', identifier,
                     duration, exc)
        logger.debug(exc, exc_info=True)
        if reraise:
            raise


def atomic_write(path: PathLike, data: Union[str, bytes]) -> Path:
    """
    Write ``data`` to ``path`` through a temporary file and a rename.

    The temporary file lives in the destination directory, so readers see
    either the old file or the complete new one.

    Returns
    -------
    path : pathlib.Path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode('utf-8')
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.',
                               suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    logger.debug('Wrote %d bytes to %s', len(data), path)
    return path


def _json_default(obj: Any):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f'Object of type {type(obj).__name__} is not JSON '
                    'serializable')


def dumps_json(document: Any) -> str:
    """
    Serialize ``document`` with sorted keys and shortest round-trip floats.

    Raises
    ------
    ValueError
        If the document contains NaN or infinity.
    """
    return simplejson.dumps(document, indent=2, sort_keys=True,
                            allow_nan=False, default=_json_default) + '\n'


def dump_json(document: Any, path: PathLike) -> Path:
    """Atomically write ``document`` as JSON to ``path``."""
    return atomic_write(path, dumps_json(document))


def load_json(path: PathLike) -> Any:
    """
    Read a JSON document written by `dump_json`.

    Raises
    ------
    SchemaError
        If the file is not valid JSON.
    """
    with open(path, 'r', encoding='utf-8') as f:
        text = f.read()
    try:
        return simplejson.loads(text)
    except simplejson.JSONDecodeError as exc:
        raise SchemaError(f'{path}: invalid JSON ({exc})') from exc


def check_format_version(document: dict, expected: int, what: str) -> None:
    """Raise `SchemaError` unless ``document`` has the expected version."""
    version = document.get('format_version') if isinstance(document,
                                                           dict) else None
    if version != expected:
        raise SchemaError(
            f'{what}: unsupported format_version {version!r}, '
            f'expected {expected}'
        )
