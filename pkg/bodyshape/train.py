"""
Minibatch SGD with momentum for `Network` objects.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .network import Network, evaluate, loss_and_grad
from .rng import SplitMix64, derive_seed
from .shapes import EmptyClassError, ParameterError, ShapeMismatchError

logger = logging.getLogger(__name__)

# Keys mixed into the run seed, one stream per purpose
_SPLIT_KEY = 0x5B1
_SHUFFLE_KEY = 0x5F1


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0
    val_fraction: float = 0.2

    def __post_init__(self):
        if not self.lr >= 0:
            raise ParameterError(f'learning rate must be >= 0, got {self.lr}')
        if not 0 <= self.momentum < 1:
            raise ParameterError(
                f'momentum must be in [0, 1), got {self.momentum}'
            )
        if self.batch_size < 1:
            raise ParameterError('batch size must be at least 1')
        if self.epochs < 1:
            raise ParameterError('epochs must be at least 1')
        if not 0 < self.val_fraction < 1:
            raise ParameterError(
                f'validation fraction must be in (0, 1), got '
                f'{self.val_fraction}'
            )


@dataclass(frozen=True)
class LossCurve:
    """Per-epoch training loss, validation loss and validation accuracy."""
    train_loss: tuple[float, ...] = ()
    val_loss: tuple[float, ...] = ()
    val_accuracy: tuple[float, ...] = ()

    def __post_init__(self):
        lengths = {len(self.train_loss), len(self.val_loss),
                   len(self.val_accuracy)}
        if len(lengths) != 1:
            raise ShapeMismatchError('loss curve columns differ in length')

    def __len__(self) -> int:
        return len(self.train_loss)

    @property
    def epochs(self) -> int:
        return len(self)

    def rows(self):
        """``(epoch, train_loss, val_loss, val_accuracy)`` from epoch 1."""
        for i, row in enumerate(zip(self.train_loss, self.val_loss,
                                    self.val_accuracy)):
            yield (i + 1,) + row


@dataclass
class TrainResult:
    net: Network
    curve: LossCurve
    train_index: np.ndarray
    val_index: np.ndarray


def stratified_split(labels, fraction: float,
                     seed: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Split sample indices so each class keeps its share in validation.

    Each class sends ``round(fraction * size)`` of its members, chosen by a
    seeded shuffle, to validation.

    Returns
    -------
    train_index, val_index : numpy.ndarray
        Sorted sample indices.

    Raises
    ------
    EmptyClassError
        If a class would have no training or no validation samples.
    """
    labels = np.asarray(labels)
    if not 0 < fraction < 1:
        raise ParameterError(f'fraction must be in (0, 1), got {fraction}')
    rng = SplitMix64(derive_seed(seed, _SPLIT_KEY))
    train, val = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        n_val = int(round(fraction * len(members)))
        if n_val == 0 or n_val == len(members):
            raise EmptyClassError(
                f'class {cls} with {len(members)} samples leaves an empty '
                f'side at validation fraction {fraction}'
            )
        shuffled = members[rng.spawn(int(cls)).permutation(len(members))]
        val.append(shuffled[:n_val])
        train.append(shuffled[n_val:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


def train(net: Network, inputs, labels, cfg: Optional[TrainConfig] = None,
          split: Optional[tuple[np.ndarray, np.ndarray]] = None,
          callback: Optional[Callable[[int, float, float, float],
                                      None]] = None) -> TrainResult:
    """
    Train a copy of ``net``; the argument itself is left untouched.

    Parameters
    ----------
    net : Network
        Starting weights and frozen flags.

    inputs, labels : array
        The whole labeled dataset.

    cfg : TrainConfig, optional

    split : tuple of arrays, optional
        Precomputed ``(train_index, val_index)``; by default a
        `stratified_split` of ``labels``.

    callback : callable, optional
        Called as ``callback(epoch, train_loss, val_loss, val_accuracy)``.

    Returns
    -------
    result : TrainResult
        The trained network, its loss curve and the split used.
    """
    cfg = cfg or TrainConfig()
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(inputs) == 0:
        raise ParameterError('cannot train on an empty dataset')
    if len(inputs) != len(labels):
        raise ShapeMismatchError(f'{len(inputs)} inputs but {len(labels)} '
                                 'labels')
    if split is None:
        split = stratified_split(labels, cfg.val_fraction, cfg.seed)
    train_index, val_index = split
    x_train, y_train = inputs[train_index], labels[train_index]
    x_val, y_val = inputs[val_index], labels[val_index]

    model = net.copy()
    params = model.parameters()
    trainable = [not frozen for frozen in model.parameter_frozen()]
    velocity = [np.zeros_like(p) for p in params]
    logger.info('Training %s on %d samples (%d validation) for %d epochs',
                model.arch, len(x_train), len(x_val), cfg.epochs)
    train_curve, val_curve, acc_curve = [], [], []
    start = time.monotonic()
    for epoch in range(cfg.epochs):
        order = SplitMix64(derive_seed(cfg.seed, _SHUFFLE_KEY, epoch)
                           ).permutation(len(x_train))
        for first in range(0, len(order), cfg.batch_size):
            batch = order[first:first + cfg.batch_size]
            _, grads = loss_and_grad(model, x_train[batch], y_train[batch])
            for p, g, v, active in zip(params, grads, velocity, trainable):
                if not active:
                    continue
                v *= cfg.momentum
                v -= cfg.lr * g
                p += v
        train_loss, _ = evaluate(model, x_train, y_train)
        val_loss, val_acc = evaluate(model, x_val, y_val)
        train_curve.append(train_loss)
        val_curve.append(val_loss)
        acc_curve.append(val_acc)
        logger.debug('epoch %d: train %.5f, val %.5f, accuracy %.4f',
                     epoch + 1, train_loss, val_loss, val_acc)
        if callback is not None:
            callback(epoch + 1, train_loss, val_loss, val_acc)
    logger.info('Trained %s in %.1f s, final validation accuracy %.4f',
                model.arch, time.monotonic() - start, acc_curve[-1])
    curve = LossCurve(tuple(train_curve), tuple(val_curve), tuple(acc_curve))
    return TrainResult(model, curve, train_index, val_index)
