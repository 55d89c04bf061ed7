import logging

import numpy as np
import pytest
from scipy import ndimage

from bodyshape.imaging import (GrayImage, Mask, boundary, edge_features,
                               flip_horizontal, gaussian_blur,
                               gaussian_kernel, resize, rotate, sobel_edges)
from bodyshape.shapes import ParameterError, ShapeLabel
from bodyshape.silhouette import generate_silhouette

logger = logging.getLogger(__name__)


@pytest.fixture(scope='module')
def silhouette():
    mask, _ = generate_silhouette(ShapeLabel.RECTANGLE, seed=0)
    return mask


def test_mask_validation():
    logger.debug('test_mask_validation')
    with pytest.raises(ParameterError):
        Mask(np.zeros((0, 3)))
    with pytest.raises(ParameterError):
        Mask(np.array([[0, 2]]))
    mask = Mask.from_rows([[0, 1]])
    with pytest.raises(ValueError):
        mask.cells[0, 0] = 1


def test_gray_validation():
    logger.debug('test_gray_validation')
    with pytest.raises(ParameterError):
        GrayImage(np.array([[0.5, 1.5]]))
    with pytest.raises(ParameterError):
        GrayImage(np.array([[np.nan]]))


def test_rotate_identity(silhouette):
    logger.debug('test_rotate_identity')
    assert rotate(silhouette, 0) == silhouette
    assert rotate(rotate(silhouette, 0), 0) == silhouette


def test_rotate_area(silhouette):
    logger.debug('test_rotate_area')
    turned = rotate(silhouette, 10)
    assert set(np.unique(turned.cells).tolist()) <= {0, 1}
    assert (turned.width, turned.height) == (silhouette.width,
                                             silhouette.height)
    ratio = turned.foreground_count / silhouette.foreground_count
    assert 0.95 <= ratio <= 1.05
    assert turned != silhouette


def test_rotate_range(silhouette):
    logger.debug('test_rotate_range')
    with pytest.raises(ParameterError):
        rotate(silhouette, 45.5)
    with pytest.raises(ParameterError):
        rotate(silhouette, float('nan'))


def test_flip(silhouette):
    logger.debug('test_flip')
    assert flip_horizontal(flip_horizontal(silhouette)) == silhouette
    tiny = Mask.from_rows([[1]])
    assert flip_horizontal(tiny) == tiny
    assert flip_horizontal(Mask.from_rows([[1, 0, 0]])).cells.tolist() == [
        [0, 0, 1]]


def test_flip_symmetric_silhouette():
    logger.debug('test_flip_symmetric_silhouette')
    mask, _ = generate_silhouette(ShapeLabel.HOURGLASS, seed=0,
                                  noise_sigma=0.0)
    changed = np.count_nonzero(flip_horizontal(mask).cells != mask.cells)
    assert changed <= 0.01 * mask.foreground_count


def test_resize_nearest():
    logger.debug('test_resize_nearest')
    checker = Mask.from_rows([[1, 0], [0, 1]])
    assert resize(checker, 2, 2) == checker
    big = resize(checker, 4, 4, 'nearest')
    assert big.cells.tolist() == [[1, 1, 0, 0],
                                  [1, 1, 0, 0],
                                  [0, 0, 1, 1],
                                  [0, 0, 1, 1]]
    with pytest.raises(ParameterError):
        resize(checker, 0, 4)
    with pytest.raises(ParameterError):
        resize(checker, 4, 4, 'cubic')


def test_resize_bilinear_mean():
    logger.debug('test_resize_bilinear_mean')
    mask, _ = generate_silhouette(ShapeLabel.TRIANGLE, seed=0,
                                  canvas_width=600, canvas_height=600)
    gray = GrayImage.from_mask(mask)
    small = resize(gray, 300, 300, 'bilinear')
    assert (small.width, small.height) == (300, 300)
    assert abs(small.values.mean() - gray.values.mean()) \
        <= 0.01 * gray.values.mean()
    as_mask = resize(mask, 300, 300, 'bilinear')
    assert isinstance(as_mask, Mask)


def test_sobel_constant():
    logger.debug('test_sobel_constant')
    flat = GrayImage(np.full((5, 6), 0.3))
    assert not sobel_edges(flat).values.any()
    with pytest.raises(ParameterError):
        sobel_edges(GrayImage(np.zeros((2, 5))))


def test_sobel_step():
    logger.debug('test_sobel_step')
    values = np.zeros((7, 10))
    values[:, 4:] = 1.0
    edges = sobel_edges(GrayImage(values)).values
    assert edges.max() == 1.0
    assert set(np.flatnonzero(edges.max(axis=0)).tolist()) == {3, 4}


def test_sobel_near_boundary(silhouette):
    logger.debug('test_sobel_near_boundary')
    edges = sobel_edges(GrayImage.from_mask(silhouette)).values
    distance = ndimage.distance_transform_edt(~boundary(silhouette))
    assert (distance[edges > 0] <= 2).all()


def test_gaussian_kernel():
    logger.debug('test_gaussian_kernel')
    for sigma in (0.3, 0.5, 1.0, 2.5):
        kernel = gaussian_kernel(sigma)
        assert abs(kernel.sum() - 1) < 1e-12
        assert len(kernel) == 2 * int(np.ceil(3 * sigma)) + 1
    with pytest.raises(ParameterError):
        gaussian_kernel(0)


def test_gaussian_blur():
    logger.debug('test_gaussian_blur')
    flat = GrayImage(np.full((8, 8), 0.4))
    assert np.abs(gaussian_blur(flat, 1.5).values - 0.4).max() < 1e-12

    impulse = np.zeros((9, 9))
    impulse[4, 4] = 1.0
    kernel = gaussian_kernel(0.5)
    center = kernel[len(kernel) // 2]
    blurred = gaussian_blur(GrayImage(impulse), 0.5).values
    assert blurred[4, 4] == pytest.approx(center ** 2, abs=1e-15)

    blob = np.zeros((40, 40))
    blob[15:25, 15:25] = 1.0
    total = gaussian_blur(GrayImage(blob), 1.0).values.sum()
    assert abs(total - blob.sum()) <= 0.005 * blob.sum()


def test_edge_features(silhouette):
    logger.debug('test_edge_features')
    features = edge_features(silhouette, size=32)
    assert (features.width, features.height) == (32, 32)
    assert 0 <= features.values.min() and features.values.max() <= 1
    assert features.values.max() > 0


def test_boundary():
    logger.debug('test_boundary')
    block = Mask(np.pad(np.ones((3, 3), dtype=np.uint8), 1))
    ring = boundary(block)
    assert ring.sum() == 8
    assert not ring[2, 2]
