import logging

import numpy as np
import pytest

from bodyshape.anthro import DatasetTable, ratio_table
from bodyshape.decomposition import (LdaModel, PcaModel, lda_fit,
                                     lda_transform, loadings_table, pca_fit,
                                     pca_inverse_transform, pca_transform)
from bodyshape.shapes import (NotFittedError, ParameterError, SchemaError,
                              ShapeLabel, ShapeMismatchError)
from bodyshape.silhouette import sample_params

logger = logging.getLogger(__name__)


def latent_factor_matrix(n=400, seed=0):
    """24 columns driven by 3 independent factors plus 1% noise."""
    rng = np.random.default_rng(seed)
    factors = rng.normal(size=(n, 3))
    loadings = np.zeros((3, 24))
    for j in range(24):
        loadings[j // 8, j] = rng.uniform(0.5, 1.5)
    return factors @ loadings + 0.01 * rng.normal(size=(n, 24))


def true_width_ratios(n_per_class=100, seed=0):
    rows, labels = [], []
    for label in ShapeLabel:
        for i in range(n_per_class):
            params = sample_params(label, seed=seed + 1000 * label + i)
            rows.append(params.measurements())
            labels.append(label)
    table = DatasetTable.from_measurements(rows, labels=labels)
    return ratio_table(table)


def test_pca_rank_one():
    logger.debug('test_pca_rank_one')
    x = np.linspace(-1, 3, 20)
    model = pca_fit(np.column_stack([x, 2 * x]), theta=0.999)
    assert model.k == 1
    assert model.explained_variance_ratio[0] >= 0.999


def test_pca_latent_factors():
    logger.debug('test_pca_latent_factors')
    model = pca_fit(latent_factor_matrix(), theta=0.85)
    assert model.k == 3
    assert model.explained_variance_ratio.sum() >= 0.85


def test_pca_identical_rows():
    logger.debug('test_pca_identical_rows')
    model = pca_fit(np.ones((5, 3)), theta=0.9)
    assert model.k == 1
    assert not model.eigenvalues.any()
    assert model.total_variance == 0


def test_pca_properties():
    logger.debug('test_pca_properties')
    X = latent_factor_matrix(n=60, seed=4)[:, :6]
    model = pca_fit(X, k=6)
    gram = model.components.T @ model.components
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-8)
    assert (model.eigenvalues >= 0).all()
    assert (np.diff(model.eigenvalues) <= 0).all()
    for column in model.components.T:
        assert column[np.argmax(np.abs(column))] > 0
    scores = pca_transform(model, X)
    standardized = pca_inverse_transform(model, scores, standardized=True)
    np.testing.assert_allclose(standardized, model.standardize(X),
                               atol=1e-8)
    np.testing.assert_allclose(pca_inverse_transform(model, scores), X,
                               atol=1e-8)


def test_pca_errors():
    logger.debug('test_pca_errors')
    with pytest.raises(ParameterError):
        pca_fit(np.ones((1, 3)), k=1)
    with pytest.raises(ParameterError):
        pca_fit(np.eye(3), k=1, theta=0.5)
    with pytest.raises(ParameterError):
        pca_fit(np.eye(3), k=4)
    with pytest.raises(ParameterError):
        pca_fit(np.eye(3), theta=1.5)
    model = pca_fit(np.eye(3), k=2)
    with pytest.raises(ShapeMismatchError):
        model.transform(np.ones((2, 4)))


def test_pca_json_and_table():
    logger.debug('test_pca_json_and_table')
    table = DatasetTable(('a', 'b', 'c'), latent_factor_matrix(30)[:, 7:10])
    model = pca_fit(table, k=2)
    assert model.columns == ('a', 'b', 'c')
    restored = PcaModel.from_json(model.to_json())
    np.testing.assert_array_equal(restored.components, model.components)
    np.testing.assert_array_equal(restored.transform(table),
                                  model.transform(table))
    with pytest.raises(SchemaError):
        PcaModel.from_json({'format_version': 1, 'mean': [0.0]})
    text = loadings_table(model)
    assert 'PC2' in text and 'explained' in text


def test_lda_one_dimension():
    logger.debug('test_lda_one_dimension')
    X = np.array([-1.2, -1.0, -0.8, 0.8, 1.0, 1.2])
    labels = [0, 0, 0, 1, 1, 1]
    model = lda_fit(X, labels)
    assert model.basis.shape == (1, 1)
    assert model.basis[0, 0] > 0
    assert model.predict(X).tolist() == labels


def test_lda_axis_aligned():
    logger.debug('test_lda_axis_aligned')
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=20), rng.normal(size=20)
    first = np.column_stack([x - 3, y])
    second = np.column_stack([-x + 3, y])
    model = lda_fit(np.vstack([first, second]), [0] * 20 + [1] * 20)
    direction = model.basis[:, 0] / np.linalg.norm(model.basis[:, 0])
    angle = np.arccos(min(1.0, abs(direction[0])))
    assert angle < 1e-6


def test_lda_shape_classes():
    logger.debug('test_lda_shape_classes')
    ratios = true_width_ratios()
    labels = ratios.label_array()
    model = lda_fit(ratios.values, labels, k=4)
    assert model.k == 4
    accuracy = np.mean(model.predict(ratios.values) == labels)
    logger.debug('LDA accuracy %.4f', accuracy)
    assert accuracy >= 0.90

    scale = np.linspace(0.5, 4.0, ratios.values.shape[1])
    scaled = lda_fit(ratios.values * scale, labels, k=4)
    np.testing.assert_array_equal(scaled.predict(ratios.values * scale),
                                  model.predict(ratios.values))

    restored = LdaModel.from_json(model.to_json())
    np.testing.assert_array_equal(restored.predict(ratios.values),
                                  model.predict(ratios.values))
    assert lda_transform(model, ratios.values).shape == (len(ratios), 4)


def test_lda_errors():
    logger.debug('test_lda_errors')
    X = np.arange(12, dtype=float).reshape(6, 2)
    with pytest.raises(ParameterError):
        lda_fit(X, [0] * 6)
    with pytest.raises(ParameterError):
        lda_fit(X, [0, 0, 0, 0, 0, 1])
    with pytest.raises(ParameterError):
        lda_fit(X, [0, 0, 0, 1, 1, 1], k=2)
    with pytest.raises(ShapeMismatchError):
        lda_fit(X, [0, 1])
    with pytest.raises(NotFittedError):
        lda_transform(None, X)
