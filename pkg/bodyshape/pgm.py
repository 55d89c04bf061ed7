"""
Reading and writing of 8-bit PGM (portable graymap) files.

Binary (``P5``) and ASCII (``P2``) files with ``maxval`` 255 are accepted.
Header fields may be separated by any whitespace and ``#`` comments run to the
end of their line. Files are always written as ``P5`` with a single-space
header, ``P5 <width> <height> 255`` and a newline.
"""
import logging
import os
from typing import Union

import numpy as np

from .shapes import PgmError
from .utils import atomic_write

logger = logging.getLogger(__name__)

_WHITESPACE = b' \t\r\n\x0b\x0c'


def _header_tokens(data: bytes, count: int):
    """
    Split the first ``count`` header tokens off of ``data``.

    Returns
    -------
    tokens : list of bytes
    offset : int
        Index of the byte following the last token.
    """
    tokens = []
    pos = 0
    size = len(data)
    while len(tokens) < count:
        while pos < size and data[pos] in _WHITESPACE:
            pos += 1
        if pos < size and data[pos:pos + 1] == b'#':
            while pos < size and data[pos:pos + 1] not in (b'\n', b'\r'):
                pos += 1
            continue
        if pos >= size:
            raise PgmError('malformed PGM: truncated header')
        start = pos
        while (pos < size and data[pos] not in _WHITESPACE
               and data[pos:pos + 1] != b'#'):
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def _parse_int(token: bytes, what: str) -> int:
    try:
        return int(token.decode('ascii'))
    except (UnicodeDecodeError, ValueError):
        raise PgmError(f'malformed PGM: bad {what} {token!r}') from None


def decode_pgm(data: bytes) -> np.ndarray:
    """
    Decode PGM bytes into a ``(height, width)`` ``uint8`` array.

    Raises
    ------
    PgmError
        If the header is malformed, a dimension is zero, ``maxval`` is not
        255 or the pixel payload is truncated.
    """
    tokens, offset = _header_tokens(data, 4)
    magic, width, height, maxval = tokens
    if magic not in (b'P5', b'P2'):
        raise PgmError(f'malformed PGM: unknown magic {magic!r}')
    width = _parse_int(width, 'width')
    height = _parse_int(height, 'height')
    maxval = _parse_int(maxval, 'maxval')
    if width <= 0 or height <= 0:
        raise PgmError(f'malformed PGM: zero dimensions {width}x{height}')
    if maxval != 255:
        raise PgmError(f'malformed PGM: maxval {maxval} is not 255')
    count = width * height

    if magic == b'P5':
        # Exactly one whitespace byte separates the header from the payload
        if offset >= len(data) or data[offset] not in _WHITESPACE:
            raise PgmError('malformed PGM: truncated pixel payload')
        payload = data[offset + 1:offset + 1 + count]
        if len(payload) < count:
            raise PgmError('malformed PGM: truncated pixel payload')
        pixels = np.frombuffer(payload, dtype=np.uint8)
    else:
        values = data[offset:].split()
        if len(values) < count:
            raise PgmError('malformed PGM: truncated pixel payload')
        try:
            pixels = np.array([int(v) for v in values[:count]],
                              dtype=np.int64)
        except ValueError:
            raise PgmError('malformed PGM: non-numeric pixel') from None
        if pixels.min() < 0 or pixels.max() > 255:
            raise PgmError('malformed PGM: pixel outside [0, 255]')
        pixels = pixels.astype(np.uint8)
    return pixels.reshape(height, width).copy()


def read_pgm(path: Union[str, os.PathLike]) -> np.ndarray:
    """
    Read a PGM file into a ``(height, width)`` ``uint8`` array.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    PgmError
        See `decode_pgm`.
    """
    with open(path, 'rb') as f:
        data = f.read()
    logger.debug('Read %d bytes of PGM from %s', len(data), path)
    return decode_pgm(data)


def encode_pgm(pixels: np.ndarray) -> bytes:
    """Encode a 2D ``uint8`` array as binary P5 bytes."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or 0 in pixels.shape:
        raise PgmError(f'cannot encode array of shape {pixels.shape}')
    height, width = pixels.shape
    header = f'P5 {width} {height} 255\n'.encode('ascii')
    return header + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def write_pgm(pixels: np.ndarray, path: Union[str, os.PathLike]) -> None:
    """Atomically write ``pixels`` to ``path`` as a binary P5 file."""
    atomic_write(path, encode_pgm(pixels))
