"""
Binary masks, grayscale images and the image operations applied to them.

`Mask` and `GrayImage` are immutable: their arrays are read-only and every
operation returns a new object. Arrays are indexed ``[row, column]``, so a
mask of ``width`` by ``height`` pixels has ``cells.shape == (height, width)``.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import os
from typing import Union

import numpy as np
from scipy import ndimage

from .constants import MAX_ROTATION
from .pgm import read_pgm, write_pgm
from .shapes import EmptyMaskError, ParameterError

logger = logging.getLogger(__name__)

FOREGROUND_THRESHOLD = 127
RESIZE_METHODS = ('nearest', 'bilinear')


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True, eq=False)
class Mask:
    """
    A binary foreground grid, ``0`` for background and ``1`` for foreground.

    Parameters
    ----------
    cells : array-like
        Two-dimensional ``(height, width)`` array holding only 0 and 1 (or
        booleans).
    """
    cells: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.cells)
        if raw.ndim != 2 or raw.shape[0] < 1 or raw.shape[1] < 1:
            raise ParameterError(
                f'Mask needs a nonempty 2D grid, got shape {raw.shape}'
            )
        if raw.dtype != bool and not np.isin(raw, (0, 1)).all():
            raise ParameterError('Mask cells must all be 0 or 1')
        cells = np.array(raw, dtype=np.uint8, copy=True)
        object.__setattr__(self, 'cells', _freeze(cells))

    @classmethod
    def from_rows(cls, rows) -> Mask:
        return cls(np.array(rows, dtype=np.int64))

    @classmethod
    def from_pixels(cls, pixels: np.ndarray) -> Mask:
        """Threshold 8-bit pixels: values above 127 become foreground."""
        return cls(np.asarray(pixels) > FOREGROUND_THRESHOLD)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def foreground_count(self) -> int:
        return int(self.cells.sum())

    @property
    def usable(self) -> bool:
        """Whether the mask has at least one foreground pixel."""
        return bool(self.cells.any())

    def centroid(self) -> tuple[float, float]:
        """``(row, column)`` mean of the foreground pixels."""
        if not self.usable:
            raise EmptyMaskError('empty mask has no centroid')
        rows, cols = np.nonzero(self.cells)
        return float(rows.mean()), float(cols.mean())

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return np.array_equal(self.cells, other.cells)

    __hash__ = None

    def __repr__(self):
        return (f'Mask(width={self.width}, height={self.height}, '
                f'foreground={self.foreground_count})')


@dataclasses.dataclass(frozen=True, eq=False)
class GrayImage:
    """Real intensities in ``[0, 1]`` on a ``(height, width)`` grid."""
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ParameterError(
                f'GrayImage needs a nonempty 2D grid, got shape '
                f'{values.shape}'
            )
        if not np.isfinite(values).all():
            raise ParameterError('GrayImage values must be finite')
        if values.min() < -1e-9 or values.max() > 1 + 1e-9:
            raise ParameterError('GrayImage values must lie in [0, 1]')
        np.clip(values, 0.0, 1.0, out=values)
        object.__setattr__(self, 'values', _freeze(values))

    @classmethod
    def from_mask(cls, mask: Mask) -> GrayImage:
        return cls(mask.cells.astype(np.float64))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None

    def __repr__(self):
        return f'GrayImage(width={self.width}, height={self.height})'


Image = Union[Mask, GrayImage]


def load_mask(path: Union[str, os.PathLike]) -> Mask:
    """
    Load a PGM file as a `Mask`, thresholding pixels above 127.

    An all-background file loads fine; check `Mask.usable` before measuring.
    """
    return Mask.from_pixels(read_pgm(path))


def save_mask(mask: Mask, path: Union[str, os.PathLike]) -> None:
    """Write ``mask`` as a binary P5 PGM with values 0 and 255."""
    write_pgm(mask.cells * np.uint8(255), path)


def rotate(mask: Mask, degrees: float) -> Mask:
    """
    Rotate ``mask`` about its foreground centroid.

    Nearest-neighbour resampling keeps the result binary; the canvas size is
    unchanged and anything rotated off of it is dropped.

    Parameters
    ----------
    mask : Mask
    degrees : float
        Angle in ``[-45, 45]``; positive turns counter-clockwise on screen.

    Raises
    ------
    ParameterError
        If ``degrees`` is outside of the augmentation range.
    """
    if not math.isfinite(degrees) or abs(degrees) > MAX_ROTATION:
        raise ParameterError(
            f'rotation of {degrees} degrees outside of '
            f'[-{MAX_ROTATION}, {MAX_ROTATION}]'
        )
    if degrees == 0 or not mask.usable:
        return Mask(mask.cells)
    center = np.array(mask.centroid())
    theta = math.radians(degrees)
    cos, sin = math.cos(theta), math.sin(theta)
    # Maps output (row, col) back to the input grid
    matrix = np.array([[cos, -sin], [sin, cos]])
    offset = center - matrix @ center
    rotated = ndimage.affine_transform(
        mask.cells, matrix, offset=offset, output_shape=mask.cells.shape,
        order=0, mode='constant', cval=0,
    )
    return Mask(rotated > 0)


def flip_horizontal(mask: Mask) -> Mask:
    """Mirror ``mask`` so column ``j`` swaps with ``width - 1 - j``."""
    return Mask(mask.cells[:, ::-1])


def _nearest_indices(src: int, dst: int) -> np.ndarray:
    idx = ((np.arange(dst) * 2 + 1) * src) // (2 * dst)
    return np.minimum(idx, src - 1)


def _bilinear(values: np.ndarray, width: int, height: int) -> np.ndarray:
    src_h, src_w = values.shape
    rows = (np.arange(height) + 0.5) * (src_h / height) - 0.5
    cols = (np.arange(width) + 0.5) * (src_w / width) - 0.5
    grid = np.meshgrid(rows, cols, indexing='ij')
    return ndimage.map_coordinates(values, grid, order=1, mode='nearest')


def resize(image: Image, width: int, height: int,
           method: str = 'nearest') -> Image:
    """
    Resize a `Mask` or `GrayImage` to ``width`` by ``height`` pixels.

    Sampling uses pixel centres. A mask resized bilinearly is thresholded at
    one half so the result is still a `Mask`.

    Parameters
    ----------
    image : Mask or GrayImage
    width, height : int
    method : {'nearest', 'bilinear'}
    """
    if width < 1 or height < 1:
        raise ParameterError(f'cannot resize to {width}x{height}')
    if method not in RESIZE_METHODS:
        raise ParameterError(f'unknown resize method {method!r}')
    is_mask = isinstance(image, Mask)
    data = image.cells if is_mask else image.values
    if (width, height) == (image.width, image.height):
        return type(image)(data)
    if method == 'nearest':
        rows = _nearest_indices(image.height, height)
        cols = _nearest_indices(image.width, width)
        out = data[np.ix_(rows, cols)]
        return type(image)(out)
    out = _bilinear(data.astype(np.float64), width, height)
    if is_mask:
        return Mask(out >= 0.5)
    return GrayImage(np.clip(out, 0.0, 1.0))


def sobel_edges(image: GrayImage) -> GrayImage:
    """
    Sobel gradient magnitude, normalised by its maximum.

    Borders replicate the edge pixels. A constant image gives all zeros.

    Raises
    ------
    ParameterError
        If either dimension is smaller than 3.
    """
    if image.width < 3 or image.height < 3:
        raise ParameterError('sobel_edges needs at least a 3x3 image')
    gx = ndimage.sobel(image.values, axis=1, mode='nearest')
    gy = ndimage.sobel(image.values, axis=0, mode='nearest')
    magnitude = np.hypot(gx, gy)
    peak = magnitude.max()
    if peak <= 0:
        return GrayImage(np.zeros_like(magnitude))
    return GrayImage(magnitude / peak)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1D Gaussian weights of radius ``ceil(3 sigma)``, summing to one."""
    if not sigma > 0:
        raise ParameterError(f'sigma must be positive, got {sigma}')
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-x ** 2 / (2 * sigma ** 2))
    return kernel / kernel.sum()


def gaussian_blur(image: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian blur with edge replication."""
    kernel = gaussian_kernel(sigma)
    blurred = ndimage.convolve1d(image.values, kernel, axis=0, mode='nearest')
    blurred = ndimage.convolve1d(blurred, kernel, axis=1, mode='nearest')
    return GrayImage(np.clip(blurred, 0.0, 1.0))


def edge_features(mask: Mask, size: int = 32,
                  sigma: float = 1.0) -> GrayImage:
    """
    Resize, then Sobel edges, then Gaussian blur.

    This is the edge preprocessing a classifier can use instead of the raw
    mask.
    """
    gray = resize(GrayImage.from_mask(mask), size, size, 'bilinear')
    return gaussian_blur(sobel_edges(gray), sigma)


def boundary(mask: Mask) -> np.ndarray:
    """
    Foreground pixels with at least one 4-neighbour in the background.

    Pixels outside of the canvas count as background.
    """
    cross = ndimage.generate_binary_structure(2, 1)
    interior = ndimage.binary_erosion(mask.cells.astype(bool),
                                      structure=cross, border_value=0)
    return mask.cells.astype(bool) & ~interior
