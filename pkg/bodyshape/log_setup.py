"""
Logging for ``bodyshape`` runs.

The console shows INFO and above, in color, plus anything routed through
``warnings.warn``. ``--quiet`` raises the console to WARNING and ``--debug``
lowers it to DEBUG.

With a log directory configured, every run also writes a rotating file at
level 5 and up::

    {LOG_DIR}/YYYY_MM/bodyshape_<command>_DD_HHhMMmSSs.log

``matplotlib`` and ``PIL`` are held at WARNING so plotting stays quiet.
"""
import logging
import logging.config
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional, Union

import coloredlogs
import yaml

from . import constants

logger = logging.getLogger(__name__)
LOG_DIR = None

CONSOLE = 'console'
LOG_FILE = 'debug'
QUIET_LIBRARIES = ('matplotlib', 'PIL')


class ColoredFormatter(coloredlogs.ColoredFormatter):
    """``coloredlogs`` console formatter that knows the SUCCESS level."""

    def __init__(self, fmt=None, datefmt=None, **kwargs):
        level_styles = dict(coloredlogs.DEFAULT_LEVEL_STYLES)
        level_styles['success'] = dict(color='green', bold=True)
        super().__init__(fmt=fmt, datefmt=datefmt, level_styles=level_styles,
                         **kwargs)


def level_number(level: Union[int, str]) -> int:
    """
    Numeric value of ``level``, given as a number or a level name.

    Raises
    ------
    ValueError
        For names ``logging`` does not know.
    """
    if isinstance(level, int):
        return level
    number = logging.getLevelName(str(level).upper())
    if not isinstance(number, int):
        raise ValueError(f'Invalid log level {level!r}')
    return number


def configure_log_directory(dir_logs: Optional[Union[str, Path]]):
    """
    Set the directory run logs go to, or ``None`` for console only.
    """
    global LOG_DIR
    LOG_DIR = Path(dir_logs).expanduser().resolve() if dir_logs else None


def get_log_directory() -> Optional[Path]:
    return LOG_DIR


def run_log_path(command: str) -> Path:
    """
    Create the log file of one ``command`` run under the month directory.

    Raises
    ------
    RuntimeError
        When no log directory is configured.
    """
    if LOG_DIR is None:
        raise RuntimeError('No log directory; call configure_log_directory')
    month = LOG_DIR / time.strftime('%Y_%m')
    month.mkdir(parents=True, exist_ok=True)
    path = month / f'bodyshape_{command}_{time.strftime("%d_%Hh%Mm%Ss")}.log'
    path.touch()
    return path


def setup_logging(command: str = 'run') -> None:
    """
    Apply ``logging.yml``.

    The file handler is dropped when no log directory is configured,
    otherwise it writes to `run_log_path` for ``command``.
    """
    with open(constants.FILE_YAML) as f:
        config = yaml.safe_load(f)

    if LOG_DIR is None:
        del config['handlers'][LOG_FILE]
        config['root']['handlers'].remove(LOG_FILE)
    else:
        config['handlers'][LOG_FILE]['filename'] = str(run_log_path(command))

    logging.captureWarnings(True)
    logging.config.dictConfig(config)
    for name in QUIET_LIBRARIES:
        logging.getLogger(name).setLevel(logging.WARNING)


def _root_handler(name: str) -> logging.Handler:
    for handler in logging.getLogger('').handlers:
        if handler.name == name:
            return handler
    raise RuntimeError(f'No {name} handler')


def get_console_handler() -> logging.Handler:
    return _root_handler(CONSOLE)


def get_log_file_handler() -> logging.Handler:
    """The rotating run-log handler; only present with a log directory."""
    return _root_handler(LOG_FILE)


def get_console_level() -> int:
    return get_console_handler().level


def get_console_level_name() -> str:
    return logging.getLevelName(get_console_level())


def set_console_level(level: Union[int, str] = logging.INFO):
    """Show console messages at ``level`` and above."""
    get_console_handler().level = level_number(level)


def set_verbosity(quiet: bool = False, debug: bool = False):
    """
    Console level from the ``--quiet`` and ``--debug`` flags.

    ``debug`` wins when both are given.
    """
    if debug:
        set_console_level(logging.DEBUG)
    elif quiet:
        set_console_level(logging.WARNING)
    else:
        set_console_level(logging.INFO)


def debug_mode(debug: Optional[bool] = None):
    """
    Switch the console to DEBUG (``True``) or back to INFO (``False``).

    Called without an argument, reports whether the console is at DEBUG
    or lower.
    """
    if debug is None:
        return get_console_level() <= logging.DEBUG
    set_console_level(logging.DEBUG if debug else logging.INFO)


@contextmanager
def debug_context():
    """
    Run a block with the console at DEBUG, then restore the previous level.

    .. code-block:: python

        with debug_context():
            kmeans_fit(X, 5, seed=3)
    """
    previous = get_console_level()
    debug_mode(True)
    try:
        yield
    finally:
        set_console_level(previous)
