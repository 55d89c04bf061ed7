import logging
import math

import numpy as np
import pytest

from bodyshape.layers import Dense, ReLU
from bodyshape.network import (ARCHITECTURES, FreezeSpec, Network,
                               build_network, cross_entropy, evaluate,
                               forward, freeze_layers, label_from_logits,
                               load_checkpoint, loss_and_grad, predict,
                               predict_labels, save_checkpoint)
from bodyshape.shapes import (CheckpointError, ParameterError, ShapeLabel,
                              ShapeMismatchError)
from bodyshape.utils import dump_json, load_json

logger = logging.getLogger(__name__)


def bias_net(bias):
    """A one-input network whose logits are ``bias`` for zero input."""
    layer = Dense(1, 5)
    layer.bias[...] = bias
    return Network([layer], (1,))


def sixteen_layer_net():
    layers = []
    for _ in range(7):
        layers += [Dense(4, 4), ReLU()]
    layers += [Dense(4, 4), Dense(4, 5)]
    net = Network(layers, (4,))
    net.initialize(0)
    return net


@pytest.mark.parametrize('arch', ARCHITECTURES)
def test_build_network(arch):
    logger.debug('test_build_network')
    net = build_network(arch, seed=1)
    assert net.arch == arch
    x = np.zeros(net.input_shape)
    assert forward(net, x).shape == (5,)
    assert forward(net, x[None].repeat(3, axis=0)).shape == (3, 5)
    again = build_network(arch, seed=1)
    for a, b in zip(net.parameters(), again.parameters()):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ParameterError):
        build_network('resnet18')


def test_label_from_logits():
    logger.debug('test_label_from_logits')
    label, probs = label_from_logits([0, 0, 0, 0, 1])
    assert label is ShapeLabel.TRIANGLE
    assert probs[4] == pytest.approx(math.e / (4 + math.e))
    assert probs.sum() == pytest.approx(1.0)
    label, _ = label_from_logits([1, 1, 0, 0, 0])
    assert label is ShapeLabel.APPLE


def test_predict():
    logger.debug('test_predict')
    net = bias_net([0, 0, 0, 0, 1])
    label, probs = predict(net, np.zeros(1))
    assert int(label) == 4
    assert probs[4] == pytest.approx(0.4046, abs=1e-4)
    pairs = predict(net, np.zeros((2, 1)))
    assert [int(label) for label, _ in pairs] == [4, 4]
    assert predict_labels(net, np.zeros((3, 1))).tolist() == [4, 4, 4]


def test_losses():
    logger.debug('test_losses')
    uniform = bias_net(0.0)
    loss, grads = loss_and_grad(uniform, np.zeros((4, 1)), [0, 1, 2, 3])
    assert loss == pytest.approx(math.log(5))
    assert len(grads) == 2
    confident = bias_net([100, 0, 0, 0, 0])
    loss, _ = loss_and_grad(confident, np.zeros((2, 1)), [0, 0])
    assert loss < 1e-6
    huge = np.array([[1000.0, 0, 0, 0, 0]])
    assert np.isfinite(cross_entropy(huge, np.array([1])))
    loss, accuracy = evaluate(confident, np.zeros((3, 1)), [0, 0, 1])
    assert accuracy == pytest.approx(2 / 3)


def test_input_checks():
    logger.debug('test_input_checks')
    net = bias_net(0.0)
    with pytest.raises(ShapeMismatchError):
        forward(net, np.zeros((2, 3)))
    with pytest.raises(ParameterError):
        forward(net, np.array([np.nan]))
    with pytest.raises(ParameterError):
        loss_and_grad(net, np.zeros((2, 1)), [0, 5])
    with pytest.raises(ShapeMismatchError):
        loss_and_grad(net, np.zeros((2, 1)), [0])
    with pytest.raises(ShapeMismatchError):
        Network([Dense(3, 4)], (3,))


def test_freeze_spec_parse():
    logger.debug('test_freeze_spec_parse')
    assert FreezeSpec.parse(None) == FreezeSpec('none')
    assert FreezeSpec.parse('last:5') == FreezeSpec('last', count=5)
    assert FreezeSpec.parse('indices:0, 2') == FreezeSpec(
        'indices', indices=(0, 2))
    assert str(FreezeSpec.parse('first:3')) == 'first:3'
    for bad in ('sideways', 'first:x', 'all:3', 'last:-1'):
        with pytest.raises(ParameterError):
            FreezeSpec.parse(bad)


def test_freeze_last_five():
    logger.debug('test_freeze_last_five')
    net = sixteen_layer_net()
    assert len(net) == 16
    assert FreezeSpec.parse('last:5').frozen_indices(16) == set(range(11))
    frozen = freeze_layers(net, 'last:5')
    assert frozen.frozen == [True] * 11 + [False] * 5
    assert not any(net.frozen)
    assert freeze_layers(net, 'first:2').frozen[:3] == [True, True, False]
    assert freeze_layers(net, 'indices:15').frozen[-1]
    assert all(freeze_layers(net, 'all').frozen)
    with pytest.raises(ParameterError):
        freeze_layers(net, 'last:17')
    with pytest.raises(ParameterError):
        freeze_layers(net, 'indices:16')


def test_frozen_gradients_are_zero():
    logger.debug('test_frozen_gradients_are_zero')
    net = freeze_layers(sixteen_layer_net(), 'first:14')
    x = np.linspace(-1, 1, 12).reshape(3, 4)
    _, grads = loss_and_grad(net, x, [0, 1, 2])
    for grad, frozen in zip(grads, net.parameter_frozen()):
        if frozen:
            assert not grad.any()
    assert any(g.any() for g in grads[-2:])


def test_checkpoint_round_trip(tmp_path):
    logger.debug('test_checkpoint_round_trip')
    net = freeze_layers(build_network('incnn', seed=4), 'first:2')
    path = save_checkpoint(net, tmp_path / 'incnn.json')
    restored = load_checkpoint(path)
    assert restored.arch == 'incnn'
    assert restored.frozen == net.frozen
    x = np.linspace(0, 1, 32 * 32).reshape(1, 32, 32)
    assert forward(restored, x).tobytes() == forward(net, x).tobytes()


def test_checkpoint_corruption(tmp_path):
    logger.debug('test_checkpoint_corruption')
    path = save_checkpoint(build_network('mlp13'), tmp_path / 'mlp.json')
    document = load_json(path)
    document['layers'][0]['weights'].pop()
    dump_json(document, path)
    with pytest.raises(CheckpointError, match='shape/data mismatch'):
        load_checkpoint(path)

    document = load_json(path)
    document['format_version'] = 99
    dump_json(document, path)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)

    path.write_text('{not json')
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
