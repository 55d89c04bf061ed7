"""
The layer stack as a classifier: forward pass, softmax cross-entropy,
reference architectures, layer freezing and checkpoint files.
"""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp, softmax

from .constants import FORMAT_VERSION, N_CLASSES, NET_INPUT_SIZE
from .layers import (Conv2d, Dense, Flatten, InceptionBlock, Layer,
                     MaxPool2d, ReLU, ResidualBlock, chain_shape,
                     layer_from_json, layer_to_json, run_backward,
                     run_forward)
from .rng import SplitMix64
from .shapes import (CheckpointError, ParameterError, SchemaError,
                     ShapeLabel, ShapeMismatchError)
from .utils import PathLike, check_format_version, dump_json, load_json

logger = logging.getLogger(__name__)


class Network:
    """
    An ordered stack of layers ending in ``n_classes`` logits.

    Parameters
    ----------
    layers : list of Layer
        Top-level layers; freezing indexes into this list.

    input_shape : tuple of int
        Shape of one sample, without the batch axis.

    n_classes : int, optional
        Length of the output; 5 for body shapes.

    arch : str, optional
        Name recorded in checkpoints.

    preprocessing : dict, optional
        How raw inputs are turned into network inputs, kept with the weights.

    Raises
    ------
    ShapeMismatchError
        If consecutive layers do not compose or the output length is wrong.
    """

    def __init__(self, layers: Sequence[Layer], input_shape: Sequence[int],
                 n_classes: int = N_CLASSES, arch: str = 'custom',
                 preprocessing: Optional[dict] = None):
        self.layers = list(layers)
        self.input_shape = tuple(int(s) for s in input_shape)
        self.n_classes = int(n_classes)
        self.arch = arch
        self.preprocessing = preprocessing
        out = chain_shape(self.layers, self.input_shape)
        if out != (self.n_classes,):
            raise ShapeMismatchError(
                f'network output {out} is not ({self.n_classes},)'
            )

    def __repr__(self) -> str:
        return (f'Network(arch={self.arch!r}, input_shape={self.input_shape}'
                f', layers={len(self.layers)})')

    def __len__(self) -> int:
        return len(self.layers)

    def copy(self) -> Network:
        return copy.deepcopy(self)

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters()]

    def parameter_frozen(self) -> list[bool]:
        return [f for layer in self.layers for f in layer.parameter_frozen()]

    @property
    def frozen(self) -> list[bool]:
        return [layer.frozen for layer in self.layers]

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def initialize(self, seed: int) -> None:
        """Glorot-uniform weights and zero biases, drawn in layer order."""
        rng = SplitMix64(seed)
        for layer in self.layers:
            layer.initialize(rng)

    def check_input(self, x) -> tuple[np.ndarray, bool]:
        """
        Return ``x`` as a float batch and whether it was a single sample.

        Raises
        ------
        ShapeMismatchError
            If the sample shape is not ``input_shape``.

        ParameterError
            If the input holds NaN or infinity.
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.shape == self.input_shape
        if single:
            x = x[None, ...]
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatchError(
                f'input of shape {x.shape} does not match {self.input_shape}'
            )
        if not np.isfinite(x).all():
            raise ParameterError('network input contains NaN or infinity')
        return x, single


def forward(net: Network, x) -> np.ndarray:
    """
    Logits for one sample (shape ``(n_classes,)``) or a batch.

    Examples
    --------
    >>> logits = forward(net, np.zeros(net.input_shape))
    """
    batch, single = net.check_input(x)
    logits, _ = run_forward(net.layers, batch)
    return logits[0] if single else logits


def _check_labels(net: Network, labels, n: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeMismatchError(f'{labels.size} labels for {n} inputs')
    if labels.size and (not np.issubdtype(labels.dtype, np.integer)
                        or labels.min() < 0
                        or labels.max() >= net.n_classes):
        raise ParameterError(
            f'labels must be integers in [0, {net.n_classes})'
        )
    return labels.astype(np.int64)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy; stable for large logits."""
    rows = np.arange(len(labels))
    return float(np.mean(logsumexp(logits, axis=1) - logits[rows, labels]))


def loss_and_grad(net: Network, inputs, labels, input_grad: bool = False):
    """
    Mean cross-entropy over a batch and its parameter gradients.

    Gradients are listed in `Network.parameters` order. Entries of frozen
    layers are zero.

    Parameters
    ----------
    net : Network

    inputs : array
        Batch of shape ``(N, *input_shape)``.

    labels : array of int
        Class ordinals in ``[0, n_classes)``.

    input_grad : bool, optional
        Also return the gradient with respect to ``inputs``.

    Returns
    -------
    loss : float

    grads : list of numpy.ndarray

    dx : numpy.ndarray
        Only when ``input_grad`` is set.
    """
    batch, single = net.check_input(inputs)
    if single:
        raise ShapeMismatchError('loss_and_grad needs a batch of inputs')
    labels = _check_labels(net, labels, len(batch))
    if not len(batch):
        raise ParameterError('cannot compute a loss over an empty batch')
    logits, caches = run_forward(net.layers, batch)
    loss = cross_entropy(logits, labels)
    dlogits = softmax(logits, axis=1)
    dlogits[np.arange(len(labels)), labels] -= 1.0
    dlogits /= len(labels)
    dx, grads = run_backward(net.layers, caches, dlogits)
    grads = [np.zeros_like(g) if frozen else g
             for g, frozen in zip(grads, net.parameter_frozen())]
    if input_grad:
        return loss, grads, dx
    return loss, grads


def evaluate(net: Network, inputs, labels,
             batch_size: int = 256) -> tuple[float, float]:
    """Mean loss and accuracy over a dataset, in fixed batch order."""
    batch, _ = net.check_input(inputs)
    labels = _check_labels(net, labels, len(batch))
    if not len(batch):
        raise ParameterError('cannot evaluate an empty dataset')
    total_loss = 0.0
    correct = 0
    for start in range(0, len(batch), batch_size):
        chunk = slice(start, start + batch_size)
        logits, _ = run_forward(net.layers, batch[chunk])
        total_loss += cross_entropy(logits, labels[chunk]) * len(logits)
        correct += int(np.sum(np.argmax(logits, axis=1) == labels[chunk]))
    return total_loss / len(batch), correct / len(batch)


def label_from_logits(logits, n_classes: int = N_CLASSES):
    """
    Softmax probabilities and the winning class of one logit vector.

    Ties go to the lowest ordinal. The label is a `ShapeLabel` for
    five-class outputs and a plain int otherwise.
    """
    logits = np.asarray(logits, dtype=np.float64)
    probs = softmax(logits)
    winner = int(np.argmax(probs))
    label = ShapeLabel(winner) if n_classes == N_CLASSES else winner
    return label, probs


def predict(net: Network, x):
    """
    Predicted label and class probabilities for one sample.

    For a batch, a list of ``(label, probabilities)`` pairs is returned.
    """
    logits = forward(net, x)
    if logits.ndim == 1:
        return label_from_logits(logits, net.n_classes)
    return [label_from_logits(row, net.n_classes) for row in logits]


def predict_labels(net: Network, inputs, batch_size: int = 256) -> np.ndarray:
    """Class ordinals for a batch of inputs."""
    batch, _ = net.check_input(inputs)
    out = np.empty(len(batch), dtype=np.int64)
    for start in range(0, len(batch), batch_size):
        logits, _ = run_forward(net.layers, batch[start:start + batch_size])
        out[start:start + batch_size] = np.argmax(logits, axis=1)
    return out


@dataclass(frozen=True)
class FreezeSpec:
    """
    Which top-level layers to freeze.

    ``mode`` is one of ``none``, ``all``, ``first`` (freeze the first
    ``count`` layers), ``last`` (train only the last ``count`` layers) or
    ``indices``.
    """
    mode: str = 'none'
    count: int = 0
    indices: tuple[int, ...] = ()

    MODES = ('none', 'all', 'first', 'last', 'indices')

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ParameterError(f'unknown freeze mode {self.mode!r}, '
                                 f'expected one of {self.MODES}')
        if self.count < 0:
            raise ParameterError('freeze count must be nonnegative')

    @classmethod
    def parse(cls, text: Union[str, FreezeSpec, None]) -> FreezeSpec:
        """
        Read ``none``, ``all``, ``first:N``, ``last:N`` or ``indices:I,J``.
        """
        if isinstance(text, FreezeSpec):
            return text
        if text is None:
            return cls()
        mode, _, arg = str(text).strip().partition(':')
        mode = mode.strip().lower()
        try:
            if mode in ('first', 'last'):
                return cls(mode, count=int(arg))
            if mode == 'indices':
                return cls(mode, indices=tuple(
                    int(item) for item in arg.split(',') if item.strip()
                ))
        except ValueError as exc:
            raise ParameterError(f'bad freeze spec {text!r}') from exc
        if arg:
            raise ParameterError(f'bad freeze spec {text!r}')
        return cls(mode)

    def frozen_indices(self, n_layers: int) -> set[int]:
        if self.mode == 'none':
            return set()
        if self.mode == 'all':
            return set(range(n_layers))
        if self.mode in ('first', 'last'):
            if self.count > n_layers:
                raise ParameterError(
                    f'cannot select {self.count} of {n_layers} layers'
                )
            if self.mode == 'first':
                return set(range(self.count))
            return set(range(n_layers - self.count))
        bad = [i for i in self.indices if not 0 <= i < n_layers]
        if bad:
            raise ParameterError(
                f'layer indices {bad} out of range for {n_layers} layers'
            )
        return set(self.indices)

    def __str__(self):
        if self.mode in ('first', 'last'):
            return f'{self.mode}:{self.count}'
        if self.mode == 'indices':
            return 'indices:' + ','.join(str(i) for i in self.indices)
        return self.mode


def freeze_layers(net: Network, spec) -> Network:
    """
    Copy of ``net`` with frozen flags set from ``spec``.

    Every top-level layer not selected by ``spec`` is made trainable; block
    layers pass their flag to their inner layers.
    """
    spec = FreezeSpec.parse(spec)
    frozen = spec.frozen_indices(len(net.layers))
    out = net.copy()
    for index, layer in enumerate(out.layers):
        layer.set_frozen(index in frozen)
    logger.debug('Freeze %s: layers %s frozen', spec, sorted(frozen))
    return out


def _mlp13(n_features: int) -> list[Layer]:
    return [Dense(n_features, 32), ReLU(), Dense(32, N_CLASSES)]


def _rescnn() -> list[Layer]:
    def block():
        return ResidualBlock([Conv2d(8, 8, 3, 1, 1), ReLU(),
                              Conv2d(8, 8, 3, 1, 1)])
    return [Conv2d(1, 8, 3, 2, 1), ReLU(), block(), block(),
            MaxPool2d(2), Flatten(), Dense(8 * 8 * 8, N_CLASSES)]


def _incnn() -> list[Layer]:
    branches = [
        [Conv2d(8, 4, 1, 1, 0), ReLU()],
        [Conv2d(8, 4, 3, 1, 1), ReLU()],
        [Conv2d(8, 4, 5, 1, 2), ReLU()],
    ]
    return [Conv2d(1, 8, 3, 2, 1), ReLU(), InceptionBlock(branches),
            MaxPool2d(2), Flatten(), Dense(12 * 8 * 8, N_CLASSES)]


def _vggnet() -> list[Layer]:
    return [Conv2d(1, 8, 3, 2, 1), ReLU(),
            Conv2d(8, 8, 3, 1, 1), ReLU(), MaxPool2d(2),
            Conv2d(8, 16, 3, 1, 1), ReLU(), MaxPool2d(2),
            Flatten(), Dense(16 * 4 * 4, N_CLASSES)]


ARCHITECTURES = ('mlp13', 'rescnn', 'incnn', 'vggnet')


def build_network(arch: str, seed: int = 0, n_features: int = 13,
                  preprocessing: Optional[dict] = None) -> Network:
    """
    Build and initialize one of the reference architectures.

    Parameters
    ----------
    arch : str
        ``mlp13`` takes ``n_features`` ratio features; ``rescnn``,
        ``incnn`` and ``vggnet`` take single-channel 32x32 images.

    seed : int, optional
        Seed of the weight initialisation.
    """
    if arch == 'mlp13':
        layers, shape = _mlp13(n_features), (n_features,)
    elif arch in ARCHITECTURES:
        layers = {'rescnn': _rescnn, 'incnn': _incnn,
                  'vggnet': _vggnet}[arch]()
        shape = (1, NET_INPUT_SIZE, NET_INPUT_SIZE)
    else:
        raise ParameterError(f'unknown architecture {arch!r}, expected one '
                             f'of {ARCHITECTURES}')
    net = Network(layers, shape, arch=arch, preprocessing=preprocessing)
    net.initialize(seed)
    logger.debug('Built %s with %d parameters', net, net.n_parameters)
    return net


def kink_margin(net: Network, inputs) -> float:
    """
    Smallest distance from a ReLU input to zero or between the top two
    entries of a pooling window, over one forward pass.
    """
    batch, _ = net.check_input(inputs)
    _, caches = run_forward(net.layers, batch)
    return min((layer.kink_margin(cache)
                for layer, cache in zip(net.layers, caches)),
               default=math.inf)


def numerical_gradients(net: Network, inputs, labels,
                        eps: float = 1e-4) -> list[np.ndarray]:
    """
    Central-difference estimate of every parameter gradient.

    Frozen flags are ignored; the network is restored afterwards.
    """
    grads = []
    for param in net.parameters():
        grad = np.zeros_like(param)
        flat, out = param.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            plus = _plain_loss(net, inputs, labels)
            flat[i] = keep - eps
            minus = _plain_loss(net, inputs, labels)
            flat[i] = keep
            out[i] = (plus - minus) / (2 * eps)
        grads.append(grad)
    return grads


def numerical_input_gradient(net: Network, inputs, labels,
                             eps: float = 1e-4) -> np.ndarray:
    """Central-difference estimate of the loss gradient in the inputs."""
    x = np.array(inputs, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, out = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        plus = _plain_loss(net, x, labels)
        flat[i] = keep - eps
        minus = _plain_loss(net, x, labels)
        flat[i] = keep
        out[i] = (plus - minus) / (2 * eps)
    return grad


def _plain_loss(net: Network, inputs, labels) -> float:
    logits, _ = run_forward(net.layers, np.asarray(inputs, dtype=np.float64))
    return cross_entropy(logits, np.asarray(labels, dtype=np.int64))


def network_to_json(net: Network) -> dict:
    return {
        'format_version': FORMAT_VERSION,
        'kind': 'checkpoint',
        'arch': net.arch,
        'input_shape': list(net.input_shape),
        'n_classes': net.n_classes,
        'preprocessing': net.preprocessing,
        'layers': [layer_to_json(layer) for layer in net.layers],
    }


def network_from_json(document: dict) -> Network:
    """
    Rebuild a network from a checkpoint document.

    Raises
    ------
    CheckpointError
        On a version mismatch, inconsistent shapes or non-finite weights.
    """
    try:
        check_format_version(document, FORMAT_VERSION, 'checkpoint')
    except SchemaError as exc:
        raise CheckpointError(str(exc)) from exc
    try:
        layers = [layer_from_json(record) for record in document['layers']]
        return Network(layers, document['input_shape'],
                       n_classes=document.get('n_classes', N_CLASSES),
                       arch=document.get('arch', 'custom'),
                       preprocessing=document.get('preprocessing'))
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f'checkpoint is missing {exc}') from exc
    except ShapeMismatchError as exc:
        raise CheckpointError(f'shape/data mismatch: {exc}') from exc


def save_checkpoint(net: Network, path: PathLike):
    """Atomically write ``net`` as a JSON checkpoint."""
    path = dump_json(network_to_json(net), path)
    logger.info('Saved %s checkpoint to %s', net.arch, path)
    return path


def load_checkpoint(path: PathLike) -> Network:
    """Read a checkpoint written by `save_checkpoint`."""
    try:
        document = load_json(path)
    except SchemaError as exc:
        raise CheckpointError(str(exc)) from exc
    if not isinstance(document, dict):
        raise CheckpointError(f'{path}: not a checkpoint document')
    net = network_from_json(document)
    logger.debug('Loaded %s from %s', net, path)
    return net
