"""
Class balancing by geometric augmentation.

Minority classes are topped up to a common target with rotated and mirrored
copies of their existing members.
"""
from __future__ import annotations

import logging
from typing import Iterable, Sequence

from .constants import MAX_ROTATION
from .imaging import Mask, flip_horizontal, rotate
from .rng import SplitMix64
from .shapes import ParameterError, ShapeLabel

logger = logging.getLogger(__name__)

FLIP_PROBABILITY = 0.5


def augment_plan(class_counts: Iterable[tuple[ShapeLabel, int]],
                 target: int) -> list[tuple[ShapeLabel, int]]:
    """
    Number of augmented samples each class needs to reach ``target``.

    Parameters
    ----------
    class_counts : iterable of (ShapeLabel, int)
    target : int

    Returns
    -------
    plan : list of (ShapeLabel, int)
        ``target - count`` per class, in input order.

    Raises
    ------
    ParameterError
        If a count is below 1 or above ``target``.
    """
    plan = []
    for label, count in class_counts:
        label = ShapeLabel.parse(label)
        if count < 1:
            raise ParameterError(f'{label} has no samples to augment from')
        if count > target:
            raise ParameterError(
                f'target {target} is below the {count} samples of {label}'
            )
        plan.append((label, target - count))
    return plan


def augment_one(mask: Mask, rng: SplitMix64,
                max_degrees: float = MAX_ROTATION) -> Mask:
    """Rotate uniformly in ``[-max_degrees, max_degrees]``, maybe mirror."""
    degrees = rng.uniform(-max_degrees, max_degrees)
    flip = rng.random() < FLIP_PROBABILITY
    out = rotate(mask, degrees)
    return flip_horizontal(out) if flip else out


def augment_class(members: Sequence[Mask], needed: int,
                  seed: int) -> list[Mask]:
    """
    Produce ``needed`` augmented masks from ``members``.

    Each new mask picks a uniformly random source member, rotates it by a
    uniform angle within the augmentation range and mirrors it with
    probability one half.
    """
    if needed < 0:
        raise ParameterError('needed must be nonnegative')
    if needed and not members:
        raise ParameterError('cannot augment a class without members')
    rng = SplitMix64(seed)
    out = []
    for _ in range(needed):
        source = members[rng.integers(len(members))]
        out.append(augment_one(source, rng))
    logger.debug('Augmented %d members into %d new masks', len(members),
                 needed)
    return out
