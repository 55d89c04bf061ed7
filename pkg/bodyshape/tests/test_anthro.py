import logging
import math

import numpy as np
import pytest

from bodyshape.anthro import (DEFAULT_RATIOS, DatasetTable, PopulationStats,
                              DropStats, classify_drop, classify_table,
                              denormalize, drop_values, fit_population_stats,
                              normalize, ratio_features, ratio_table,
                              remove_outliers, resolve_ratio_names)
from bodyshape.dataset import generate_corpus, true_measurements
from bodyshape.shapes import (BodyMeasurements, NotFittedError,
                              ParameterError, SchemaError, ShapeLabel)
from bodyshape.silhouette import extract_measurements

from .conftest import random_measurements

logger = logging.getLogger(__name__)


def body(bust=100.0, waist=70.0, hip=100.0, shoulder=90.0, stature=170.0):
    return BodyMeasurements(bust=bust, waist=waist, hip=hip,
                            shoulder=shoulder, stature=stature)


def stats_for(hb=(2.0, 5.0, -20.0, 20.0), bw=(10.0, 3.0, -20.0, 30.0)):
    return PopulationStats(hip_minus_bust=DropStats(*hb),
                           bust_minus_waist=DropStats(*bw), n=100)


def test_drop_values():
    logger.debug('test_drop_values')
    drops = drop_values(body(bust=100, waist=70, hip=100))
    assert (drops.hip_minus_bust, drops.bust_minus_waist) == (0, 30)
    assert drop_values(body(bust=110, hip=95)).hip_minus_bust == -15
    same = drop_values(body(bust=80, waist=80, hip=80))
    assert (same.hip_minus_bust, same.bust_minus_waist) == (0, 0)


def test_fit_population_stats():
    logger.debug('test_fit_population_stats')
    rows = [body(hip=h) for h in (90, 100, 110)]
    stats = fit_population_stats(DatasetTable.from_measurements(rows))
    hb = stats.hip_minus_bust
    assert (hb.mean, hb.min, hb.max) == (0, -10, 10)
    assert hb.sd == pytest.approx(math.sqrt(200 / 3))
    assert stats.n == 3
    with pytest.raises(ParameterError):
        fit_population_stats(DatasetTable.from_measurements(rows[:1]))


def test_population_stats_json():
    logger.debug('test_population_stats_json')
    stats = stats_for()
    assert PopulationStats.from_json(stats.to_json()) == stats
    with pytest.raises(SchemaError):
        PopulationStats.from_json({'format_version': 1})
    with pytest.raises(SchemaError):
        PopulationStats.from_json(dict(stats.to_json(), format_version=9))


def test_classify_drop_rules():
    logger.debug('test_classify_drop_rules')
    stats = stats_for()
    assert classify_drop(body(hip=95, waist=200 / 3), stats) \
        is ShapeLabel.INVERTED_TRIANGLE
    assert classify_drop(body(hip=110), stats) is ShapeLabel.TRIANGLE
    # bust - waist intervals: (10, 30] / [1, 10] / [-20, 1)
    assert classify_drop(body(waist=75), stats) is ShapeLabel.HOURGLASS
    assert classify_drop(body(waist=95), stats) is ShapeLabel.RECTANGLE
    assert classify_drop(body(waist=115), stats) is ShapeLabel.APPLE
    assert classify_drop(body(waist=90), stats) is ShapeLabel.RECTANGLE
    assert classify_drop(body(waist=99), stats) is ShapeLabel.RECTANGLE


def test_classify_drop_fallthrough():
    logger.debug('test_classify_drop_fallthrough')
    stats = stats_for()
    # beyond max of the bust - waist drop
    assert classify_drop(body(waist=60), stats) is ShapeLabel.HOURGLASS
    # below min
    assert classify_drop(body(waist=130), stats) is ShapeLabel.APPLE
    # hip - bust beyond its max goes on to the bust - waist rules
    assert classify_drop(body(hip=125, waist=95), stats) \
        is ShapeLabel.RECTANGLE
    # a degenerate population still labels everything
    flat = stats_for(bw=(10.0, 0.0, 10.0, 10.0))
    assert classify_drop(body(waist=50), flat) is ShapeLabel.RECTANGLE
    with pytest.raises(NotFittedError):
        classify_drop(body(), None)


def test_classify_drop_scale_invariant():
    logger.debug('test_classify_drop_scale_invariant')
    rows = random_measurements(80, seed=8)
    table = DatasetTable.from_measurements(rows)
    scaled = DatasetTable.from_measurements([m.scaled(4.0) for m in rows])
    labels = classify_table(table, fit_population_stats(table))
    assert classify_table(scaled, fit_population_stats(scaled)) == labels
    assert len(set(labels)) > 1


def test_ratio_features():
    logger.debug('test_ratio_features')
    assert ratio_features(body(bust=100, waist=80),
                          ['bust/waist']).values.tolist() == [1.25]
    even = ratio_features(body(80, 80, 80, 80, 80))
    for name, value in even.as_dict().items():
        assert value == (0.0 if '-' in name else 1.0)

    golden = ratio_features(BodyMeasurements(bust=96, waist=72, hip=102,
                                             shoulder=40, stature=400))
    assert golden.names == DEFAULT_RATIOS
    expected = [96 / 72, 102 / 72, 102 / 96, 0.18, 0.24, 0.255, 40 / 96,
                40 / 102, 0.06, 0.075, 0.015, 0.75, 400 / 102]
    np.testing.assert_allclose(golden.values, expected, rtol=1e-12)
    assert round(golden.as_dict()['hip/waist'], 4) == 1.4167


def test_ratio_names():
    logger.debug('test_ratio_names')
    assert resolve_ratio_names('default') == DEFAULT_RATIOS
    assert resolve_ratio_names(None) == DEFAULT_RATIOS
    assert resolve_ratio_names('hip/waist, (hip - bust)/stature') == (
        'hip/waist', '(hip-bust)/stature')
    for bad in ('hip/elbow', 'hip*waist', ''):
        with pytest.raises(ParameterError):
            resolve_ratio_names(bad)


def test_ratio_table(measurement_table):
    logger.debug('test_ratio_table')
    ratios = ratio_table(measurement_table)
    assert ratios.columns == DEFAULT_RATIOS
    assert len(ratios) == len(measurement_table)
    assert ratios.labels == measurement_table.labels
    first = ratio_features(measurement_table.measurements()[0])
    np.testing.assert_array_equal(ratios.values[0], first.values)


def test_remove_outliers():
    logger.debug('test_remove_outliers')
    rows = random_measurements(50, seed=1)
    rows.append(body(bust=10_000))
    table = DatasetTable.from_measurements(rows)
    kept = remove_outliers(table, 3.0)
    assert len(kept) == 50
    assert 10_000 not in kept.column('bust')
    assert len(remove_outliers(table, math.inf)) == 51
    with pytest.raises(ParameterError):
        remove_outliers(table, 0)


def test_remove_outliers_converges():
    logger.debug('test_remove_outliers_converges')
    rng = np.random.default_rng(0)
    table = DatasetTable(('a', 'b'), rng.normal(size=(1000, 2)))
    once = remove_outliers(table)
    twice = remove_outliers(once)
    assert len(once) - len(twice) < 0.01 * len(once)


def test_normalize():
    logger.debug('test_normalize')
    table = DatasetTable(('x', 'flat'), [[1.0, 5.0], [3.0, 5.0]])
    normed, stats = normalize(table)
    assert normed.values.tolist() == [[-1.0, 0.0], [1.0, 0.0]]
    restored = denormalize(normed, stats)
    np.testing.assert_allclose(restored.values, table.values, atol=1e-9)
    with pytest.raises(ParameterError):
        normalize(table.select([0]))


def test_normalize_round_trip(measurement_table):
    logger.debug('test_normalize_round_trip')
    normed, stats = normalize(measurement_table)
    assert np.abs(normed.values.mean(axis=0)).max() < 1e-9
    restored = denormalize(normed, stats)
    np.testing.assert_allclose(restored.values, measurement_table.values,
                               atol=1e-9)


def test_dataset_table():
    logger.debug('test_dataset_table')
    with pytest.raises(SchemaError):
        DatasetTable(('a', 'b'), [[1.0, 2.0, 3.0]])
    with pytest.raises(ParameterError):
        DatasetTable(('a',), [[np.nan]])
    with pytest.raises(SchemaError):
        DatasetTable(('a',), [[1.0]], labels=[ShapeLabel.APPLE] * 2)
    table = DatasetTable(('a',), [[1.0], [2.0]],
                         labels=[ShapeLabel.APPLE, None])
    assert not table.has_labels
    with pytest.raises(SchemaError):
        table.label_array()
    with pytest.raises(SchemaError):
        table.column('b')
    picked = table.select([1])
    assert picked.values.tolist() == [[2.0]]
    assert picked.labels == (None,)


def drop_outcome(table):
    truth = table.label_array()
    predicted = np.array(
        [int(label) for label in
         classify_table(table, fit_population_stats(table))]
    )
    return truth, predicted


def recall(truth, predicted, label):
    rows = truth == int(label)
    return np.mean(predicted[rows] == int(label))


def test_drop_pipeline():
    logger.debug('test_drop_pipeline')
    truth, predicted = drop_outcome(true_measurements(1000, 42))
    assert recall(truth, predicted, ShapeLabel.INVERTED_TRIANGLE) == 1.0
    assert recall(truth, predicted, ShapeLabel.TRIANGLE) == 1.0
    # hip < bust for every Apple, so the first rule takes them all
    apples = predicted[truth == int(ShapeLabel.APPLE)]
    assert np.all(apples == int(ShapeLabel.INVERTED_TRIANGLE))
    assert np.mean(truth == predicted) == pytest.approx(0.4)


def test_drop_pipeline_on_masks():
    logger.debug('test_drop_pipeline_on_masks')
    samples = generate_corpus([40] * 5, seed=42)
    table = DatasetTable.from_measurements(
        [extract_measurements(sample.mask) for sample in samples],
        labels=[sample.label for sample in samples],
    )
    truth, predicted = drop_outcome(table)
    assert recall(truth, predicted, ShapeLabel.INVERTED_TRIANGLE) == 1.0
    assert recall(truth, predicted, ShapeLabel.TRIANGLE) == 1.0
    assert np.mean(truth == predicted) >= 0.4
