"""
Hard and fuzzy clustering.

* :func:`kmeans_pp_init` seeds centroids with D^2 weighting.
* :func:`kmeans_fit` runs Lloyd iterations from several seeded starts, then
  refines each result with single-point transfers, and keeps the lowest
  inertia.
* :func:`select_k` sweeps the cluster count and scores each fit with a
  spherical-Gaussian BIC and the mean silhouette.
* :func:`fcm_fit` is fuzzy c-means.

Distances are squared Euclidean everywhere except in the silhouette, which
uses plain Euclidean distance.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .constants import FORMAT_VERSION
from .decomposition import as_matrix
from .rng import SplitMix64, derive_seed
from .shapes import ParameterError, SchemaError, ShapeMismatchError
from .utils import check_format_version

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 300
DEFAULT_RESTARTS = 8
DEFAULT_FUZZIFIER = 2.0
CRITERIA = ('bic', 'silhouette')

_SIGMA_FLOOR = 1e-12
_SILHOUETTE_CHUNK = 512


def kmeans_pp_init(X, k: int, seed: int) -> np.ndarray:
    """
    Pick ``k`` starting centroids among the rows of ``X``.

    The first row is uniform; each next row is drawn with probability
    proportional to its squared distance to the nearest chosen row. When
    every remaining row coincides with a chosen one, the pick is uniform over
    the rows not yet chosen.

    Raises
    ------
    ParameterError
        If ``k`` is not in ``[1, n]``.
    """
    X = as_matrix(X)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f'k={k} outside of [1, {n}]')
    rng = SplitMix64(seed)
    chosen = [rng.integers(n)]
    nearest = cdist(X, X[chosen], 'sqeuclidean')[:, 0]
    while len(chosen) < k:
        if nearest.sum() > 0:
            index = rng.choice(nearest)
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            index = int(free[rng.integers(len(free))])
        chosen.append(index)
        fresh = cdist(X, X[[index]], 'sqeuclidean')[:, 0]
        nearest = np.minimum(nearest, fresh)
    return X[chosen].copy()


@dataclasses.dataclass(frozen=True, eq=False)
class KMeansModel:
    """
    A fitted k-means clustering.

    ``history`` holds the inertia after every Lloyd update and every accepted
    transfer of the winning run.
    """
    centroids: np.ndarray
    inertia: float
    iterations: int
    seed: int
    labels: Optional[np.ndarray] = None
    history: tuple[float, ...] = ()

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def predict(self, X) -> np.ndarray:
        return assign(as_matrix(X), self.centroids)

    def to_json(self) -> dict:
        return {
            'format_version': FORMAT_VERSION,
            'kind': 'kmeans',
            'centroids': self.centroids.tolist(),
            'inertia': self.inertia,
            'iterations': self.iterations,
            'seed': self.seed,
        }

    @classmethod
    def from_json(cls, document: dict) -> KMeansModel:
        check_format_version(document, FORMAT_VERSION, 'k-means model')
        try:
            return cls(
                centroids=np.array(document['centroids'], dtype=np.float64),
                inertia=float(document['inertia']),
                iterations=int(document['iterations']),
                seed=int(document['seed']),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f'k-means model: {exc}') from exc


def assign(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per row, ties to the lowest index."""
    if X.shape[1] != centroids.shape[1]:
        raise ShapeMismatchError(
            f'centroids have {centroids.shape[1]} features, data has '
            f'{X.shape[1]}'
        )
    return np.argmin(cdist(X, centroids, 'sqeuclidean'), axis=1)


def inertia_of(X: np.ndarray, centroids: np.ndarray,
               labels: np.ndarray) -> float:
    return float(((X - centroids[labels]) ** 2).sum())


def _means(X: np.ndarray, labels: np.ndarray, k: int,
           fallback: np.ndarray) -> np.ndarray:
    centroids = fallback.copy()
    for j in range(k):
        members = X[labels == j]
        if len(members):
            centroids[j] = members.mean(axis=0)
    return centroids


def _reseed_empty(X, labels, centroids, k) -> np.ndarray:
    """Give every empty cluster the point farthest from its centroid."""
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    spread = ((X - centroids[labels]) ** 2).sum(axis=1)
    for j in np.flatnonzero(counts == 0):
        donors = counts[labels] > 1
        if not donors.any():
            break
        candidates = np.where(donors, spread, -np.inf)
        index = int(np.argmax(candidates))
        counts[labels[index]] -= 1
        counts[j] += 1
        labels[index] = j
        spread[index] = -np.inf
    return labels


def _lloyd(X, centroids, tol, max_iter):
    k = centroids.shape[0]
    labels = None
    history = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        fresh = assign(X, centroids)
        fresh = _reseed_empty(X, fresh, centroids, k)
        updated = _means(X, fresh, k, centroids)
        history.append(inertia_of(X, updated, fresh))
        shift = np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max()
        centroids = updated
        stable = labels is not None and np.array_equal(fresh, labels)
        labels = fresh
        if stable or shift < tol:
            break
    return centroids, labels, history, iterations


def _transfer_refine(X, centroids, labels, history, max_passes=100):
    """
    Move single points between clusters while that lowers the inertia.

    Moving ``x`` from ``A`` to ``B`` changes the inertia by
    ``nB/(nB+1)|x-cB|^2 - nA/(nA-1)|x-cA|^2``.
    """
    k = centroids.shape[0]
    centroids = centroids.copy()
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    inertia = history[-1] if history else inertia_of(X, centroids, labels)
    for _ in range(max_passes):
        moved = False
        for i, x in enumerate(X):
            a = labels[i]
            if counts[a] <= 1:
                continue
            d2 = ((centroids - x) ** 2).sum(axis=1)
            remove = counts[a] / (counts[a] - 1) * d2[a]
            add = counts / (counts + 1) * d2
            add[a] = np.inf
            b = int(np.argmin(add))
            if add[b] < remove * (1 - 1e-12) - 1e-300:
                centroids[a] = (counts[a] * centroids[a] - x) / (counts[a] - 1)
                centroids[b] = (counts[b] * centroids[b] + x) / (counts[b] + 1)
                counts[a] -= 1
                counts[b] += 1
                labels[i] = b
                inertia -= remove - add[b]
                history.append(inertia)
                moved = True
        if not moved:
            break
    # Exact centroids and inertia, free of incremental round-off
    centroids = _means(X, labels, k, centroids)
    final = assign(X, centroids)
    if not np.array_equal(final, labels) and np.bincount(
            final, minlength=k).min() > 0:
        labels = final
        centroids = _means(X, labels, k, centroids)
    return centroids, labels, inertia_of(X, centroids, labels)


def kmeans_fit(X, k: int, seed: int = 0, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER,
               restarts: int = DEFAULT_RESTARTS,
               refine: bool = True) -> KMeansModel:
    """
    Best-of-``restarts`` k-means.

    Each restart seeds with `kmeans_pp_init` from its own derived seed, runs
    Lloyd iterations until the assignment stops changing or the largest
    centroid shift drops below ``tol``, then applies single-point transfers.

    Raises
    ------
    ParameterError
        If ``k`` is not in ``[1, n]`` or ``restarts`` is below 1.
    """
    X = as_matrix(X)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f'k={k} outside of [1, {n}]')
    if restarts < 1:
        raise ParameterError('restarts must be at least 1')

    best = None
    for run in range(restarts):
        init = kmeans_pp_init(X, k, derive_seed(seed, run))
        centroids, labels, history, iterations = _lloyd(X, init, tol,
                                                        max_iter)
        if refine:
            centroids, labels, inertia = _transfer_refine(X, centroids,
                                                          labels, history)
        else:
            inertia = inertia_of(X, centroids, labels)
        logger.debug('k-means k=%d run %d: inertia %.6g after %d iterations',
                     k, run, inertia, iterations)
        if best is None or inertia < best.inertia:
            best = KMeansModel(
                centroids=centroids,
                inertia=inertia,
                iterations=iterations,
                seed=int(seed),
                labels=labels,
                history=tuple(history),
            )
    return best


def kmeans_predict(model: KMeansModel, X) -> np.ndarray:
    return model.predict(X)


def bic_score(X, model: KMeansModel) -> float:
    """
    BIC of a k-means fit under identical spherical Gaussians.

    Larger is better.
    """
    X = as_matrix(X)
    n, d = X.shape
    k = model.k
    labels = model.labels if model.labels is not None else model.predict(X)
    counts = np.bincount(labels, minlength=k)
    counts = counts[counts > 0]
    inertia = inertia_of(X, model.centroids, labels)
    dof = d * (n - k)
    variance = inertia / dof if dof > 0 else 0.0
    variance = max(variance, _SIGMA_FLOOR)
    log_likelihood = (
        float((counts * np.log(counts / n)).sum())
        - n * d / 2 * math.log(2 * math.pi * variance)
        - inertia / (2 * variance)
    )
    parameters = (k - 1) + k * d + 1
    return log_likelihood - parameters / 2 * math.log(n)


def silhouette_score(X, labels) -> float:
    """
    Mean silhouette over all samples, with Euclidean distances.

    Samples in singleton clusters score 0.

    Raises
    ------
    ParameterError
        Unless there are at least two and at most ``n - 1`` clusters.
    """
    X = as_matrix(X)
    labels = np.asarray(labels)
    clusters, inverse = np.unique(labels, return_inverse=True)
    n = X.shape[0]
    if not 2 <= len(clusters) <= n - 1:
        raise ParameterError(
            f'silhouette needs 2 to n-1 clusters, got {len(clusters)}'
        )
    counts = np.bincount(inverse).astype(np.float64)
    scores = np.zeros(n)
    for start in range(0, n, _SILHOUETTE_CHUNK):
        block = slice(start, min(start + _SILHOUETTE_CHUNK, n))
        distance = cdist(X[block], X, 'euclidean')
        sums = np.zeros((distance.shape[0], len(clusters)))
        for j in range(len(clusters)):
            sums[:, j] = distance[:, inverse == j].sum(axis=1)
        own = inverse[block]
        rows = np.arange(distance.shape[0])
        own_size = counts[own]
        a = np.where(own_size > 1,
                     sums[rows, own] / np.maximum(own_size - 1, 1), 0.0)
        others = sums / counts
        others[rows, own] = np.inf
        b = others.min(axis=1)
        denominator = np.maximum(a, b)
        s = np.where(denominator > 0,
                     (b - a) / np.where(denominator > 0, denominator, 1.0),
                     0.0)
        scores[block] = np.where(own_size > 1, s, 0.0)
    return float(scores.mean())


@dataclasses.dataclass(frozen=True)
class KSelection:
    """Result of `select_k`: the choice plus every per-k score."""
    k: int
    criterion: str
    bic: dict
    silhouette: dict
    degenerate: bool = False

    @property
    def scores(self) -> dict:
        return self.bic if self.criterion == 'bic' else self.silhouette

    @property
    def agree(self) -> bool:
        """Whether both criteria pick the same k."""
        if self.degenerate:
            return True
        return _argmax_k(self.bic) == _argmax_k(self.silhouette)


def _argmax_k(scores: dict) -> int:
    # Ties go to the smaller k
    best = max(scores.values())
    return min(k for k, value in scores.items() if value == best)


def select_k(X, k_min: int = 2, k_max: int = 5, criterion: str = 'bic',
             seed: int = 0, restarts: int = DEFAULT_RESTARTS) -> KSelection:
    """
    Choose the cluster count in ``[k_min, k_max]``.

    Both the BIC and the mean silhouette are computed for every k; the
    returned ``k`` maximises the requested ``criterion`` with ties going to
    the smaller k. If all rows coincide, ``k_min`` is returned with the
    ``degenerate`` flag set.

    Raises
    ------
    ParameterError
        If the range is empty, starts below 1 or ``k_max > n``.
    """
    X = as_matrix(X)
    n = X.shape[0]
    if criterion not in CRITERIA:
        raise ParameterError(f'unknown criterion {criterion!r}')
    if not 1 <= k_min <= k_max:
        raise ParameterError(f'invalid k range {k_min}..{k_max}')
    if k_max > n:
        raise ParameterError(f'k_max={k_max} exceeds n={n}')
    if np.all(X == X[0]):
        logger.warning('All %d rows are identical; using k=%d', n, k_min)
        return KSelection(k=k_min, criterion=criterion, bic={},
                          silhouette={}, degenerate=True)

    bic, silhouette = {}, {}
    for k in range(k_min, k_max + 1):
        model = kmeans_fit(X, k, seed=derive_seed(seed, k),
                           restarts=restarts)
        bic[k] = bic_score(X, model)
        if 2 <= len(np.unique(model.labels)) <= n - 1:
            silhouette[k] = silhouette_score(X, model.labels)
        else:
            silhouette[k] = -1.0
        logger.info('k=%d: BIC %.3f, silhouette %.4f', k, bic[k],
                    silhouette[k])
    chosen = _argmax_k(bic if criterion == 'bic' else silhouette)
    selection = KSelection(k=chosen, criterion=criterion, bic=bic,
                           silhouette=silhouette)
    if not selection.agree:
        logger.warning('BIC prefers k=%d, silhouette prefers k=%d',
                       _argmax_k(bic), _argmax_k(silhouette))
    return selection


@dataclasses.dataclass(frozen=True, eq=False)
class FuzzyModel:
    """
    A fitted fuzzy c-means clustering.

    ``history`` is the objective after every iteration.
    """
    centroids: np.ndarray
    memberships: np.ndarray
    fuzzifier: float
    objective: float
    iterations: int
    history: tuple[float, ...] = ()

    @property
    def c(self) -> int:
        return self.centroids.shape[0]

    def predict(self, X) -> np.ndarray:
        """Memberships of new rows in the fitted clusters."""
        X = as_matrix(X)
        if X.shape[1] != self.centroids.shape[1]:
            raise ShapeMismatchError('feature count does not match model')
        return memberships(cdist(X, self.centroids, 'sqeuclidean'),
                           self.fuzzifier)

    def hard_labels(self) -> np.ndarray:
        return np.argmax(self.memberships, axis=1)

    def to_json(self, include_memberships: bool = False) -> dict:
        document = {
            'format_version': FORMAT_VERSION,
            'kind': 'fcm',
            'centroids': self.centroids.tolist(),
            'fuzzifier': self.fuzzifier,
            'objective': self.objective,
            'iterations': self.iterations,
        }
        if include_memberships:
            document['memberships'] = self.memberships.tolist()
        return document

    @classmethod
    def from_json(cls, document: dict) -> FuzzyModel:
        check_format_version(document, FORMAT_VERSION, 'fuzzy model')
        try:
            centroids = np.array(document['centroids'], dtype=np.float64)
            return cls(
                centroids=centroids,
                memberships=np.array(document.get('memberships', []),
                                     dtype=np.float64
                                     ).reshape(-1, centroids.shape[0]),
                fuzzifier=float(document['fuzzifier']),
                objective=float(document['objective']),
                iterations=int(document['iterations']),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f'fuzzy model: {exc}') from exc


def memberships(sq_distances: np.ndarray, fuzzifier: float) -> np.ndarray:
    """
    Fuzzy c-means memberships from squared distances.

    ``u_ij = 1 / sum_l (d_ij / d_il) ** (2 / (m - 1))``, evaluated relative to
    each row's nearest centroid. A row that coincides with one or more
    centroids splits its membership evenly among them.
    """
    D = np.asarray(sq_distances, dtype=np.float64)
    U = np.empty_like(D)
    nearest = D.min(axis=1)
    coincident = nearest <= 0
    if coincident.any():
        hits = (D[coincident] <= 0).astype(np.float64)
        U[coincident] = hits / hits.sum(axis=1, keepdims=True)
    regular = ~coincident
    if regular.any():
        ratio = D[regular] / nearest[regular, None]
        weights = ratio ** (-1.0 / (fuzzifier - 1.0))
        U[regular] = weights / weights.sum(axis=1, keepdims=True)
    return U


def _fcm_centroids(X, U, fuzzifier):
    weights = U ** fuzzifier
    return (weights.T @ X) / weights.sum(axis=0)[:, None]


def fcm_fit(X, c: int, fuzzifier: float = DEFAULT_FUZZIFIER,
            tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
            seed: int = 0,
            callback: Optional[Callable] = None) -> FuzzyModel:
    """
    Fuzzy c-means by alternating centroid and membership updates.

    Iterates until the largest membership change is below ``tol``.

    Parameters
    ----------
    callback : callable, optional
        Called after every iteration as
        ``callback(iteration, memberships, centroids, objective)``.

    Raises
    ------
    ParameterError
        If ``c`` is not in ``[2, n]`` or ``fuzzifier <= 1``.
    """
    X = as_matrix(X)
    n = X.shape[0]
    if not 2 <= c <= n:
        raise ParameterError(f'c={c} outside of [2, {n}]')
    if not fuzzifier > 1:
        raise ParameterError(f'fuzzifier must exceed 1, got {fuzzifier}')

    rng = SplitMix64(seed)
    U = rng.random(n * c).reshape(n, c) + 1e-3
    U /= U.sum(axis=1, keepdims=True)
    history = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        centroids = _fcm_centroids(X, U, fuzzifier)
        D = cdist(X, centroids, 'sqeuclidean')
        objective = float(((U ** fuzzifier) * D).sum())
        history.append(objective)
        updated = memberships(D, fuzzifier)
        if callback is not None:
            callback(iterations, updated, centroids, objective)
        delta = np.abs(updated - U).max()
        U = updated
        if delta < tol:
            break
    centroids = _fcm_centroids(X, U, fuzzifier)
    objective = float(
        ((U ** fuzzifier) * cdist(X, centroids, 'sqeuclidean')).sum()
    )
    logger.debug('FCM c=%d converged after %d iterations, J=%.6g', c,
                 iterations, objective)
    return FuzzyModel(centroids=centroids, memberships=U,
                      fuzzifier=float(fuzzifier), objective=objective,
                      iterations=iterations, history=tuple(history))


def fcm_predict(model: FuzzyModel, X) -> np.ndarray:
    return model.predict(X)


def cluster_profiles(table, labels) -> list[dict]:
    """
    Size and per-column mean of the original table for every cluster.

    Parameters
    ----------
    table : DatasetTable
        Usually the measurement table before normalisation.
    labels : array-like of int
    """
    labels = np.asarray(labels)
    if len(labels) != len(table):
        raise ShapeMismatchError('one cluster label per row is required')
    profiles = []
    for cluster in np.unique(labels):
        rows = table.values[labels == cluster]
        profiles.append({
            'cluster': int(cluster),
            'size': int(len(rows)),
            'means': dict(zip(table.columns, rows.mean(axis=0).tolist())),
        })
    return profiles
