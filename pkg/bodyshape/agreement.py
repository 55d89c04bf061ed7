"""Agreement between two labelings of the same samples."""
import logging
from collections import Counter
from typing import Hashable, Sequence

import numpy as np

from .shapes import ParameterError, ShapeLabel, ShapeMismatchError

logger = logging.getLogger(__name__)


def cohen_kappa(labels_a: Sequence[Hashable],
                labels_b: Sequence[Hashable]) -> float:
    """
    Cohen's kappa, ``(po - pe) / (1 - pe)``.

    ``pe`` comes from the product of the two marginal distributions over the
    union of both label sets. When ``pe == 1`` (both labelings use one and
    the same single label) kappa is 1 if the labelings agree and 0 otherwise.

    Raises
    ------
    ShapeMismatchError
        If the labelings differ in length.
    ParameterError
        If they are empty.
    """
    a = list(labels_a)
    b = list(labels_b)
    if len(a) != len(b):
        raise ShapeMismatchError(
            f'labelings have {len(a)} and {len(b)} entries'
        )
    n = len(a)
    if n == 0:
        raise ParameterError('cannot compare empty labelings')
    observed = sum(x == y for x, y in zip(a, b)) / n
    count_a, count_b = Counter(a), Counter(b)
    expected = sum(count_a[label] * count_b[label]
                   for label in set(count_a) | set(count_b)) / n ** 2
    if expected >= 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1.0 - expected)


def majority_label_map(clusters: Sequence[int],
                       truth: Sequence[ShapeLabel]) -> dict[int, ShapeLabel]:
    """
    Map each cluster id to the most common true label among its members.

    Ties go to the lowest label ordinal.
    """
    clusters = np.asarray(clusters)
    if len(clusters) != len(truth):
        raise ShapeMismatchError('one true label per cluster id is required')
    mapping = {}
    for cluster in np.unique(clusters):
        members = Counter(int(truth[i])
                          for i in np.flatnonzero(clusters == cluster))
        best = max(members.values())
        mapping[int(cluster)] = ShapeLabel(min(
            label for label, count in members.items() if count == best
        ))
    logger.debug('Cluster to label map: %s', mapping)
    return mapping


def cluster_agreement(clusters: Sequence[int],
                      truth: Sequence[ShapeLabel]) -> dict:
    """
    Kappa between majority-mapped cluster labels and the truth.

    Returns
    -------
    summary : dict
        ``kappa``, ``accuracy`` and the ``mapping`` by canonical name.
    """
    mapping = majority_label_map(clusters, truth)
    mapped = [mapping[int(c)] for c in clusters]
    truth = [ShapeLabel(int(t)) for t in truth]
    return {
        'kappa': cohen_kappa(mapped, truth),
        'accuracy': float(np.mean([m == t for m, t in zip(mapped, truth)])),
        'mapping': {str(k): v.canonical for k, v in mapping.items()},
    }
