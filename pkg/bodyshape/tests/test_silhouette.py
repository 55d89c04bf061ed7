import logging

import numpy as np
import pytest

from bodyshape.imaging import Mask
from bodyshape.shapes import (EmptyBandError, EmptyMaskError,
                              MaskTooSmallError, ParameterError, ShapeLabel)
from bodyshape.silhouette import (SilhouetteParams, band_rows,
                                  extract_measurements, generate_silhouette,
                                  silhouette_is_consistent, width_profile)

logger = logging.getLogger(__name__)


def test_rectangle_band():
    logger.debug('test_rectangle_band')
    _, params = generate_silhouette(ShapeLabel.RECTANGLE, seed=1)
    trio = (params.bust_w, params.waist_w, params.hip_w)
    assert max(trio) / min(trio) <= 1.08


@pytest.mark.parametrize('label', list(ShapeLabel))
def test_defining_inequalities(label):
    logger.debug('test_defining_inequalities')
    for seed in range(40):
        mask, params = generate_silhouette(label, seed)
        assert silhouette_is_consistent(label, params)
        assert 4 <= min(params.bust_w, params.waist_w, params.hip_w,
                        params.shoulder_w)
        assert params.body_height <= params.canvas_height
        extract_measurements(mask)


def test_inverted_triangle_bust():
    logger.debug('test_inverted_triangle_bust')
    for seed in range(40):
        _, params = generate_silhouette(ShapeLabel.INVERTED_TRIANGLE, seed)
        assert params.bust_w > params.hip_w


def test_deterministic():
    logger.debug('test_deterministic')
    first, p1 = generate_silhouette(ShapeLabel.APPLE, seed=99)
    second, p2 = generate_silhouette(ShapeLabel.APPLE, seed=99)
    assert first == second
    assert p1 == p2
    other, _ = generate_silhouette(ShapeLabel.APPLE, seed=100)
    assert other != first


def test_vertically_connected():
    logger.debug('test_vertically_connected')
    mask, params = generate_silhouette(ShapeLabel.TRIANGLE, seed=3)
    rows = [width for _, width in width_profile(mask)]
    assert len(rows) == params.body_height
    assert all(width > 0 for width in rows)


def test_params_validation():
    logger.debug('test_params_validation')
    good = dict(canvas_width=64, canvas_height=64, bust_w=20, waist_w=15,
                hip_w=20, shoulder_w=18, body_height=60, noise_sigma=0.0,
                seed=0)
    SilhouetteParams(**good)
    for key, value in [('bust_w', 3), ('hip_w', 64), ('body_height', 65),
                       ('noise_sigma', -1)]:
        with pytest.raises(ParameterError):
            SilhouetteParams(**dict(good, **{key: value}))


def test_width_profile():
    logger.debug('test_width_profile')
    solid = Mask(np.ones((4, 6), dtype=np.uint8))
    assert width_profile(solid) == [(r, 6) for r in range(4)]
    dot = np.zeros((5, 5), dtype=np.uint8)
    dot[2, 3] = 1
    assert width_profile(Mask(dot)) == [(2, 1)]
    with pytest.raises(EmptyMaskError):
        width_profile(Mask(np.zeros((3, 3), dtype=np.uint8)))


def test_hourglass_waist():
    logger.debug('test_hourglass_waist')
    for seed in range(10):
        mask, _ = generate_silhouette(ShapeLabel.HOURGLASS, seed)
        m = extract_measurements(mask)
        assert m.waist < m.bust and m.waist < m.hip


def test_extract_solid_rectangle():
    logger.debug('test_extract_solid_rectangle')
    cells = np.zeros((80, 30), dtype=np.uint8)
    cells[5:75, 4:21] = 1
    m = extract_measurements(Mask(cells))
    assert (m.bust, m.waist, m.hip, m.shoulder) == (17, 17, 17, 17)
    assert m.stature == 70


def test_extract_round_trip():
    logger.debug('test_extract_round_trip')
    worst = 0.0
    for i in range(100):
        label = ShapeLabel(i % 5)
        mask, params = generate_silhouette(label, seed=i)
        m = extract_measurements(mask)
        truth = params.measurements()
        for name in ('bust', 'waist', 'hip', 'shoulder'):
            error = abs(getattr(m, name) - getattr(truth, name))
            worst = max(worst, error / getattr(truth, name))
        assert m.stature == truth.stature
    logger.debug('worst relative error %.4f', worst)
    assert worst <= 0.10


def test_extract_errors():
    logger.debug('test_extract_errors')
    cells = np.zeros((40, 10), dtype=np.uint8)
    cells[5:15, 2:8] = 1
    with pytest.raises(MaskTooSmallError, match='mask too small'):
        extract_measurements(Mask(cells))
    with pytest.raises(EmptyMaskError):
        extract_measurements(Mask(np.zeros((40, 10), dtype=np.uint8)))
    # head and feet only, nothing in between
    split = np.zeros((100, 10), dtype=np.uint8)
    split[0:5, 2:8] = 1
    split[95:100, 2:8] = 1
    with pytest.raises(EmptyBandError):
        extract_measurements(Mask(split))


def test_band_rows():
    logger.debug('test_band_rows')
    assert band_rows(100, 25, 40) == range(25, 40)
    assert band_rows(7, 0, 100) == range(0, 7)
    assert len(band_rows(200, 40, 55)) == 30
