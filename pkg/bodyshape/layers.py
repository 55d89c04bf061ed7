"""
Layers of the from-scratch network, in float64 numpy with NCHW layout.

Every layer is functional with respect to activations: ``forward`` returns
the output and a cache, ``backward`` takes that cache and the output
gradient and returns the input gradient plus one gradient per parameter.
Layers hold no per-call state, so one network can serve inference from
several threads.

Parameters are listed by :meth:`Layer.parameters`; blocks list their inner
layers' parameters in order, and their gradients come back in the same
order.
"""
from __future__ import annotations

import logging
import math
from typing import Any, Iterator, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .rng import SplitMix64
from .shapes import CheckpointError, ParameterError, ShapeMismatchError

logger = logging.getLogger(__name__)

Shape = tuple[int, ...]


class Layer:
    """Base class. Parameterless layers only override the pass methods."""
    kind = 'Layer'

    def __init__(self):
        self.frozen = False

    def parameters(self) -> list[np.ndarray]:
        return []

    def parameter_frozen(self) -> list[bool]:
        """Frozen flag for each entry of `parameters`."""
        return [self.frozen] * len(self.parameters())

    def set_frozen(self, frozen: bool) -> None:
        self.frozen = bool(frozen)

    def output_shape(self, input_shape: Shape) -> Shape:
        return tuple(input_shape)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, cache: Any,
                 grad: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        raise NotImplementedError

    def kink_margin(self, cache: Any) -> float:
        """Distance of this call from a non-differentiable point."""
        return math.inf

    def initialize(self, rng: SplitMix64) -> None:
        """Draw initial weights; biases start at zero."""

    def describe(self) -> dict:
        """Shape-describing integers of this layer."""
        return {}

    def children(self) -> Iterator[Layer]:
        return iter(())

    def __repr__(self) -> str:
        args = ', '.join(f'{k}={v}' for k, v in self.describe().items())
        frozen = ', frozen' if self.frozen else ''
        return f'{self.kind}({args}{frozen})'


def _glorot(rng: SplitMix64, shape: Shape, fan_in: int,
            fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    size = int(np.prod(shape))
    return rng.uniform(-limit, limit, size=size).reshape(shape)


class Dense(Layer):
    """``x @ W + b`` with ``W`` of shape ``(in_features, out_features)``."""
    kind = 'Dense'

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        if in_features < 1 or out_features < 1:
            raise ParameterError('Dense needs positive feature counts')
        self.in_features = in_features
        self.out_features = out_features
        self.weight = np.zeros((in_features, out_features))
        self.bias = np.zeros(out_features)

    def parameters(self):
        return [self.weight, self.bias]

    def describe(self):
        return dict(in_features=self.in_features,
                    out_features=self.out_features)

    def output_shape(self, input_shape):
        if tuple(input_shape) != (self.in_features,):
            raise ShapeMismatchError(
                f'Dense expects ({self.in_features},), got {input_shape}'
            )
        return (self.out_features,)

    def initialize(self, rng):
        self.weight[...] = _glorot(rng, self.weight.shape, self.in_features,
                                   self.out_features)
        self.bias[...] = 0.0

    def forward(self, x):
        return x @ self.weight + self.bias, x

    def backward(self, cache, grad):
        x = cache
        return grad @ self.weight.T, [x.T @ grad, grad.sum(axis=0)]


class Conv2d(Layer):
    """
    2D cross-correlation over ``(N, C, H, W)`` input with zero padding.

    Implemented with an im2col view of the padded input.
    """
    kind = 'Conv2d'

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 stride: int = 1, pad: int = 0):
        super().__init__()
        if min(in_channels, out_channels, kernel, stride) < 1 or pad < 0:
            raise ParameterError('invalid Conv2d geometry')
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self.weight = np.zeros((out_channels, in_channels, kernel, kernel))
        self.bias = np.zeros(out_channels)

    def parameters(self):
        return [self.weight, self.bias]

    def describe(self):
        return dict(in_channels=self.in_channels,
                    out_channels=self.out_channels, kernel=self.kernel,
                    stride=self.stride, pad=self.pad)

    def _spatial(self, size: int) -> int:
        return (size + 2 * self.pad - self.kernel) // self.stride + 1

    def output_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise ShapeMismatchError(
                f'Conv2d expects ({self.in_channels}, H, W), got '
                f'{input_shape}'
            )
        height, width = (self._spatial(s) for s in input_shape[1:])
        if height < 1 or width < 1:
            raise ShapeMismatchError(f'input {input_shape} is smaller than '
                                     f'the {self.kernel}x{self.kernel} '
                                     'kernel')
        return (self.out_channels, height, width)

    def initialize(self, rng):
        area = self.kernel * self.kernel
        self.weight[...] = _glorot(rng, self.weight.shape,
                                   self.in_channels * area,
                                   self.out_channels * area)
        self.bias[...] = 0.0

    def forward(self, x):
        n = x.shape[0]
        p, k, s = self.pad, self.kernel, self.stride
        padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        windows = sliding_window_view(padded, (k, k), axis=(2, 3))
        windows = windows[:, :, ::s, ::s]
        out_h, out_w = windows.shape[2:4]
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(
            n * out_h * out_w, -1)
        flat = self.weight.reshape(self.out_channels, -1)
        out = cols @ flat.T + self.bias
        out = out.reshape(n, out_h, out_w, -1).transpose(0, 3, 1, 2)
        return out, (cols, x.shape, out_h, out_w)

    def backward(self, cache, grad):
        cols, in_shape, out_h, out_w = cache
        n, c, h, w = in_shape
        p, k, s = self.pad, self.kernel, self.stride
        g = grad.transpose(0, 2, 3, 1).reshape(-1, self.out_channels)
        flat = self.weight.reshape(self.out_channels, -1)
        grad_weight = (g.T @ cols).reshape(self.weight.shape)
        grad_bias = g.sum(axis=0)
        dcols = (g @ flat).reshape(n, out_h, out_w, c, k, k)
        dpadded = np.zeros((n, c, h + 2 * p, w + 2 * p))
        for i in range(k):
            for j in range(k):
                dpadded[:, :, i:i + s * out_h:s, j:j + s * out_w:s] += \
                    dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        dx = dpadded[:, :, p:p + h, p:p + w]
        return dx, [grad_weight, grad_bias]


class MaxPool2d(Layer):
    """Window maximum; the gradient goes to the first maximal entry."""
    kind = 'MaxPool2d'

    def __init__(self, size: int = 2, stride: Optional[int] = None):
        super().__init__()
        self.size = size
        self.stride = size if stride is None else stride
        if self.size < 1 or self.stride < 1:
            raise ParameterError('invalid MaxPool2d geometry')

    def describe(self):
        return dict(size=self.size, stride=self.stride)

    def output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeMismatchError(f'MaxPool2d expects (C, H, W), got '
                                     f'{input_shape}')
        c, h, w = input_shape
        out_h = (h - self.size) // self.stride + 1
        out_w = (w - self.size) // self.stride + 1
        if out_h < 1 or out_w < 1:
            raise ShapeMismatchError(f'input {input_shape} is smaller than '
                                     'the pooling window')
        return (c, out_h, out_w)

    def _windows(self, x):
        windows = sliding_window_view(x, (self.size, self.size), axis=(2, 3))
        windows = windows[:, :, ::self.stride, ::self.stride]
        return windows.reshape(windows.shape[:4] + (-1,))

    def forward(self, x):
        windows = self._windows(x)
        index = np.argmax(windows, axis=-1)
        out = np.take_along_axis(windows, index[..., None], axis=-1)[..., 0]
        return out, (x.shape, index, windows)

    def backward(self, cache, grad):
        in_shape, index, _ = cache
        n, c, out_h, out_w = index.shape
        rows = (np.arange(out_h)[:, None] * self.stride
                + index // self.size)
        cols = (np.arange(out_w)[None, :] * self.stride
                + index % self.size)
        nn, cc = np.meshgrid(np.arange(n), np.arange(c), indexing='ij')
        nn = np.broadcast_to(nn[:, :, None, None], index.shape)
        cc = np.broadcast_to(cc[:, :, None, None], index.shape)
        dx = np.zeros(in_shape)
        np.add.at(dx, (nn, cc, rows, cols), grad)
        return dx, []

    def kink_margin(self, cache):
        _, _, windows = cache
        if windows.shape[-1] < 2:
            return math.inf
        top = np.sort(windows, axis=-1)
        return float((top[..., -1] - top[..., -2]).min())


class ReLU(Layer):
    kind = 'ReLU'

    def forward(self, x):
        return np.maximum(x, 0.0), x

    def backward(self, cache, grad):
        return grad * (cache > 0), []

    def kink_margin(self, cache):
        return float(np.abs(cache).min()) if cache.size else math.inf


class Flatten(Layer):
    kind = 'Flatten'

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, grad):
        return grad.reshape(cache), []


def run_forward(layers: Sequence[Layer], x: np.ndarray):
    caches = []
    for layer in layers:
        x, cache = layer.forward(x)
        caches.append(cache)
    return x, caches


def run_backward(layers: Sequence[Layer], caches, grad: np.ndarray):
    """Backpropagate through ``layers``; gradients in parameter order."""
    grads_by_layer = []
    for layer, cache in zip(reversed(layers), reversed(caches)):
        grad, grads = layer.backward(cache, grad)
        grads_by_layer.append(grads)
    flat = []
    for grads in reversed(grads_by_layer):
        flat.extend(grads)
    return grad, flat


def chain_shape(layers: Sequence[Layer], input_shape: Shape) -> Shape:
    shape = tuple(input_shape)
    for layer in layers:
        shape = layer.output_shape(shape)
    return shape


class _Container(Layer):
    """A layer made of inner layers."""

    def inner_layers(self) -> list[Layer]:
        raise NotImplementedError

    def children(self):
        return iter(self.inner_layers())

    def parameters(self):
        return [p for layer in self.inner_layers()
                for p in layer.parameters()]

    def parameter_frozen(self):
        return [f for layer in self.inner_layers()
                for f in layer.parameter_frozen()]

    def set_frozen(self, frozen):
        super().set_frozen(frozen)
        for layer in self.inner_layers():
            layer.set_frozen(frozen)

    def initialize(self, rng):
        for layer in self.inner_layers():
            layer.initialize(rng)


class ResidualBlock(_Container):
    """``inner(x) + x``; the inner stack must preserve the shape."""
    kind = 'ResidualBlock'

    def __init__(self, layers: Sequence[Layer]):
        super().__init__()
        self.layers = list(layers)

    def inner_layers(self):
        return self.layers

    def output_shape(self, input_shape):
        shape = chain_shape(self.layers, input_shape)
        if shape != tuple(input_shape):
            raise ShapeMismatchError(
                f'residual inner output {shape} does not match input '
                f'{tuple(input_shape)}'
            )
        return shape

    def forward(self, x):
        out, caches = run_forward(self.layers, x)
        return out + x, caches

    def backward(self, cache, grad):
        dx, grads = run_backward(self.layers, cache, grad)
        return dx + grad, grads

    def kink_margin(self, cache):
        return min((layer.kink_margin(c)
                    for layer, c in zip(self.layers, cache)),
                   default=math.inf)


class InceptionBlock(_Container):
    """Parallel branches concatenated along the channel axis."""
    kind = 'InceptionBlock'

    def __init__(self, branches: Sequence[Sequence[Layer]]):
        super().__init__()
        if not branches:
            raise ParameterError('InceptionBlock needs at least one branch')
        self.branches = [list(branch) for branch in branches]

    def inner_layers(self):
        return [layer for branch in self.branches for layer in branch]

    def output_shape(self, input_shape):
        shapes = [chain_shape(branch, input_shape)
                  for branch in self.branches]
        spatial = {shape[1:] for shape in shapes}
        if any(len(shape) != 3 for shape in shapes) or len(spatial) != 1:
            raise ShapeMismatchError(
                f'inception branch outputs {shapes} cannot be concatenated'
            )
        return (sum(shape[0] for shape in shapes),) + shapes[0][1:]

    def forward(self, x):
        outs, caches = [], []
        for branch in self.branches:
            out, cache = run_forward(branch, x)
            outs.append(out)
            caches.append(cache)
        widths = [out.shape[1] for out in outs]
        return np.concatenate(outs, axis=1), (caches, widths)

    def backward(self, cache, grad):
        caches, widths = cache
        splits = np.cumsum(widths)[:-1]
        dx = 0.0
        grads = []
        for branch, branch_cache, piece in zip(
                self.branches, caches, np.split(grad, splits, axis=1)):
            branch_dx, branch_grads = run_backward(branch, branch_cache,
                                                   piece)
            dx = dx + branch_dx
            grads.extend(branch_grads)
        return dx, grads

    def kink_margin(self, cache):
        caches, _ = cache
        return min((layer.kink_margin(c)
                    for branch, branch_cache in zip(self.branches, caches)
                    for layer, c in zip(branch, branch_cache)),
                   default=math.inf)


SIMPLE_LAYERS = {
    cls.kind: cls for cls in (Dense, Conv2d, MaxPool2d, ReLU, Flatten)
}


def layer_to_json(layer: Layer) -> dict:
    """Checkpoint record of one layer, nested for blocks."""
    record = {
        'kind': layer.kind,
        'params': layer.describe(),
        'frozen': layer.frozen,
    }
    if isinstance(layer, (Dense, Conv2d)):
        record['weights'] = layer.weight.ravel().tolist()
        record['biases'] = layer.bias.ravel().tolist()
    elif isinstance(layer, ResidualBlock):
        record['layers'] = [layer_to_json(inner) for inner in layer.layers]
    elif isinstance(layer, InceptionBlock):
        record['branches'] = [[layer_to_json(inner) for inner in branch]
                              for branch in layer.branches]
    return record


def _fill(target: np.ndarray, values, what: str) -> None:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 1 or array.size != target.size:
        raise CheckpointError(
            f'shape/data mismatch: {what} has {array.size} values, '
            f'expected {target.size}'
        )
    if not np.isfinite(array).all():
        raise CheckpointError(f'non-finite value in {what}')
    target[...] = array.reshape(target.shape)


def layer_from_json(record: dict) -> Layer:
    """
    Rebuild a layer from its checkpoint record.

    Raises
    ------
    CheckpointError
        On an unknown kind, bad parameters or a weight count that does not
        match the described shape.
    """
    try:
        kind = record['kind']
        params = dict(record.get('params') or {})
        if kind == 'ResidualBlock':
            layer = ResidualBlock([layer_from_json(r)
                                   for r in record['layers']])
        elif kind == 'InceptionBlock':
            layer = InceptionBlock([[layer_from_json(r) for r in branch]
                                    for branch in record['branches']])
        elif kind in SIMPLE_LAYERS:
            layer = SIMPLE_LAYERS[kind](**params)
        else:
            raise CheckpointError(f'unknown layer kind {kind!r}')
        if isinstance(layer, (Dense, Conv2d)):
            _fill(layer.weight, record['weights'], f'{kind} weights')
            _fill(layer.bias, record['biases'], f'{kind} biases')
    except (KeyError, TypeError, ParameterError) as exc:
        raise CheckpointError(f'shape/data mismatch: {exc}') from exc
    # Blocks carry their own flag; inner records keep theirs
    layer.frozen = bool(record.get('frozen', False))
    return layer
