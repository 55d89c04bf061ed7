"""
Linear dimensionality reduction: principal components and Fisher's linear
discriminant.

Both models are immutable once fitted and can be exported to, and restored
from, ``format_version: 1`` JSON documents.
"""
from __future__ import annotations

import dataclasses
import logging
from typing import Optional, Sequence

import numpy as np
import prettytable
import scipy.linalg

from .constants import CLASS_NAMES, FORMAT_VERSION
from .shapes import (NotFittedError, ParameterError, SchemaError,
                     ShapeMismatchError, SingularScatterError)
from .utils import check_format_version

logger = logging.getLogger(__name__)

LDA_RIDGE = 1e-6


def as_matrix(X, min_rows: int = 1) -> np.ndarray:
    """
    Validate ``X`` as an ``n`` by ``d`` matrix of finite reals.

    Raises
    ------
    ParameterError
    """
    X = np.asarray(getattr(X, 'values', X), dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] < 1:
        raise ParameterError(f'expected a 2D data matrix, got {X.shape}')
    if X.shape[0] < min_rows:
        raise ParameterError(
            f'need at least {min_rows} rows, got {X.shape[0]}'
        )
    if not np.isfinite(X).all():
        raise ParameterError('data matrix has non-finite values')
    return X


def orient_columns(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    vectors = np.array(vectors, dtype=np.float64, copy=True)
    if vectors.size == 0:
        return vectors
    rows = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[rows, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


@dataclasses.dataclass(frozen=True, eq=False)
class PcaModel:
    """
    Principal components of standardised data.

    Attributes
    ----------
    mean, scale : numpy.ndarray
        Per-column standardisation; constant columns have scale 1.
    components : numpy.ndarray
        ``d`` by ``k`` orthonormal basis, one component per column.
    eigenvalues : numpy.ndarray
        The ``k`` retained variances, descending.
    total_variance : float
        Sum of all ``d`` eigenvalues.
    """
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    total_variance: float
    columns: Optional[tuple[str, ...]] = None

    @property
    def k(self) -> int:
        return self.components.shape[1]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0:
            return np.zeros(self.k)
        return self.eigenvalues / self.total_variance

    def standardize(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != len(self.mean):
            raise ShapeMismatchError(
                f'model has {len(self.mean)} columns, data has {X.shape[1]}'
            )
        return (X - self.mean) / self.scale

    def transform(self, X) -> np.ndarray:
        """Project rows of ``X`` onto the components."""
        return self.standardize(X) @ self.components

    def inverse_transform(self, scores,
                          standardized: bool = False) -> np.ndarray:
        """Map component scores back to data space."""
        scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
        if scores.shape[1] != self.k:
            raise ShapeMismatchError(
                f'expected {self.k} scores per row, got {scores.shape[1]}'
            )
        Z = scores @ self.components.T
        return Z if standardized else Z * self.scale + self.mean

    def to_json(self) -> dict:
        return {
            'format_version': FORMAT_VERSION,
            'kind': 'pca',
            'columns': list(self.columns) if self.columns else None,
            'mean': self.mean.tolist(),
            'scale': self.scale.tolist(),
            'components': self.components.tolist(),
            'eigenvalues': self.eigenvalues.tolist(),
            'total_variance': self.total_variance,
        }

    @classmethod
    def from_json(cls, document: dict) -> PcaModel:
        check_format_version(document, FORMAT_VERSION, 'PCA model')
        try:
            components = np.array(document['components'], dtype=np.float64)
            model = cls(
                mean=np.array(document['mean'], dtype=np.float64),
                scale=np.array(document['scale'], dtype=np.float64),
                components=components.reshape(len(document['mean']), -1),
                eigenvalues=np.array(document['eigenvalues'],
                                     dtype=np.float64),
                total_variance=float(document['total_variance']),
                columns=(tuple(document['columns'])
                         if document.get('columns') else None),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f'PCA model: {exc}') from exc
        if len(model.eigenvalues) != model.k:
            raise SchemaError('PCA model: eigenvalue count mismatch')
        return model


def pca_fit(X, k: Optional[int] = None, theta: Optional[float] = None,
            columns: Optional[Sequence[str]] = None) -> PcaModel:
    """
    Fit principal components on standardised columns.

    Columns are standardised with their population deviation (constant
    columns are only centred). The covariance of the standardised data is
    diagonalised with LAPACK's symmetric eigensolver.

    Parameters
    ----------
    X : array-like or DatasetTable
    k : int, optional
        Number of components to keep.
    theta : float, optional
        Keep the fewest components whose cumulative explained variance
        reaches ``theta``. Exactly one of ``k`` and ``theta`` is given.

    Raises
    ------
    ParameterError
        With fewer than two rows or an invalid selector.
    """
    if columns is None and hasattr(X, 'columns'):
        columns = X.columns
    X = as_matrix(X, min_rows=2)
    n, d = X.shape
    if (k is None) == (theta is None):
        raise ParameterError('give exactly one of k and theta')
    if k is not None and not 1 <= k <= d:
        raise ParameterError(f'k={k} outside of [1, {d}]')
    if theta is not None and not 0 < theta <= 1:
        raise ParameterError(f'theta={theta} outside of (0, 1]')

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    cov = Z.T @ Z / n
    eigenvalues, vectors = scipy.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    vectors = vectors[:, order]
    total = float(eigenvalues.sum())

    if k is None:
        if total <= 0:
            k = 1
        else:
            cumulative = np.cumsum(eigenvalues) / total
            k = int(np.searchsorted(cumulative, theta - 1e-12) + 1)
            k = min(k, d)
    model = PcaModel(
        mean=mean,
        scale=scale,
        components=orient_columns(vectors[:, :k]),
        eigenvalues=eigenvalues[:k],
        total_variance=total,
        columns=tuple(columns) if columns is not None else None,
    )
    logger.debug('PCA kept %d of %d components (%.4f of variance)', k, d,
                 model.explained_variance_ratio.sum())
    return model


def pca_transform(model: PcaModel, X) -> np.ndarray:
    return model.transform(X)


def pca_inverse_transform(model: PcaModel, scores,
                          standardized: bool = False) -> np.ndarray:
    return model.inverse_transform(scores, standardized=standardized)


def loadings_table(model: PcaModel) -> str:
    """Component loadings as a text table, one row per input column."""
    table = prettytable.PrettyTable()
    table.field_names = ['column'] + [f'PC{i + 1}' for i in range(model.k)]
    names = model.columns or tuple(f'x{i}' for i in range(len(model.mean)))
    for name, row in zip(names, model.components):
        table.add_row([name] + [f'{value:+.3f}' for value in row])
    table.add_row(['explained'] + [
        f'{ratio:.3f}' for ratio in model.explained_variance_ratio
    ])
    table.align = 'r'
    table.align['column'] = 'l'
    return table.get_string()


@dataclasses.dataclass(frozen=True, eq=False)
class LdaModel:
    """
    Fisher discriminant projection plus a nearest-class-mean classifier.

    Attributes
    ----------
    basis : numpy.ndarray
        ``d`` by ``k`` projection; the within-class scatter is the identity
        in the projected space.
    classes : numpy.ndarray
        Class ordinals in ascending order.
    class_means : numpy.ndarray
        Per-class means in data space, one row per class.
    """
    basis: np.ndarray
    classes: np.ndarray
    class_means: np.ndarray

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def projected_means(self) -> np.ndarray:
        return self.class_means @ self.basis

    def transform(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.basis.shape[0]:
            raise ShapeMismatchError(
                f'model has {self.basis.shape[0]} features, data has '
                f'{X.shape[1]}'
            )
        return X @ self.basis

    def predict(self, X) -> np.ndarray:
        """Ordinal of the nearest projected class mean, ties to the lowest."""
        projected = self.transform(X)
        means = self.projected_means
        d2 = ((projected[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        return self.classes[np.argmin(d2, axis=1)]

    def to_json(self) -> dict:
        return {
            'format_version': FORMAT_VERSION,
            'kind': 'lda',
            'class_names': list(CLASS_NAMES),
            'classes': self.classes.tolist(),
            'basis': self.basis.tolist(),
            'class_means': self.class_means.tolist(),
        }

    @classmethod
    def from_json(cls, document: dict) -> LdaModel:
        check_format_version(document, FORMAT_VERSION, 'LDA model')
        try:
            return cls(
                basis=np.array(document['basis'], dtype=np.float64),
                classes=np.array(document['classes'], dtype=np.int64),
                class_means=np.array(document['class_means'],
                                     dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f'LDA model: {exc}') from exc


def lda_fit(X, labels, k: Optional[int] = None) -> LdaModel:
    """
    Fit Fisher's linear discriminant.

    The within-class scatter gets a ridge of ``1e-6 * trace / d`` on its
    diagonal. The generalised eigenproblem is reduced to a symmetric one
    through the Cholesky factor of the within-class scatter.

    Parameters
    ----------
    X : array-like
    labels : array-like of int
    k : int, optional
        Number of discriminant axes; defaults to ``classes - 1``.

    Raises
    ------
    ParameterError
        With fewer than two classes, a class with fewer than two samples or
        ``k`` above ``classes - 1``.
    SingularScatterError
        If the regularised within-class scatter is still singular.
    """
    X = as_matrix(X)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (X.shape[0],):
        raise ShapeMismatchError('one label per row is required')
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise ParameterError('LDA needs at least two classes')
    if counts.min() < 2:
        raise ParameterError('every class needs at least two samples')
    d = X.shape[1]
    max_k = min(len(classes) - 1, d)
    k = max_k if k is None else k
    if not 1 <= k <= max_k:
        raise ParameterError(f'k={k} outside of [1, {max_k}]')

    overall = X.mean(axis=0)
    means = np.array([X[labels == c].mean(axis=0) for c in classes])
    within = np.zeros((d, d))
    between = np.zeros((d, d))
    for c, mean, count in zip(classes, means, counts):
        centered = X[labels == c] - mean
        within += centered.T @ centered
        offset = (mean - overall)[:, None]
        between += count * (offset @ offset.T)
    within += np.eye(d) * (LDA_RIDGE * np.trace(within) / d)

    try:
        lower = scipy.linalg.cholesky(within, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularScatterError(
            'within-class scatter is singular after regularization'
        ) from exc
    half = scipy.linalg.solve_triangular(lower, between, lower=True)
    whitened = scipy.linalg.solve_triangular(lower, half.T, lower=True)
    whitened = (whitened + whitened.T) / 2
    eigenvalues, vectors = scipy.linalg.eigh(whitened)
    order = np.argsort(eigenvalues)[::-1][:k]
    basis = scipy.linalg.solve_triangular(lower.T, vectors[:, order],
                                          lower=False)
    return LdaModel(basis=orient_columns(basis), classes=classes,
                    class_means=means)


def lda_transform(model: Optional[LdaModel], X) -> np.ndarray:
    if model is None:
        raise NotFittedError('LDA model is not fitted')
    return model.transform(X)
