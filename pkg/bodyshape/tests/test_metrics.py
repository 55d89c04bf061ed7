import logging

import numpy as np
import pytest
import simplejson

from bodyshape.metrics import (ConfusionMatrix, compare_reports,
                               confusion_matrix, display_round,
                               export_curves, f1_score, load_curves,
                               plot_curves, render_report, report,
                               weighted_average)
from bodyshape.rng import SplitMix64
from bodyshape.shapes import ParameterError, SchemaError, ShapeMismatchError
from bodyshape.train import LossCurve

logger = logging.getLogger(__name__)

# Supports (17, 141, 59, 112, 19), trace 184
HELD_OUT = [
    [10, 7, 0, 0, 0],
    [0, 80, 61, 0, 0],
    [0, 0, 15, 44, 0],
    [2, 23, 5, 63, 19],
    [3, 0, 0, 0, 16],
]


def random_matrix(seed):
    rng = SplitMix64(seed)
    return ConfusionMatrix(rng.integers(20, size=25).reshape(5, 5) + 1)


def test_f1_score():
    logger.debug('test_f1_score')
    assert f1_score(0.19, 0.76) == pytest.approx(0.304)
    assert display_round(f1_score(0.19, 0.76)) == '0.30'
    assert f1_score(0.0, 0.0) == 0.0
    assert f1_score(1.0, 1.0) == 1.0


def test_weighted_average():
    logger.debug('test_weighted_average')
    value = weighted_average([0.63, 0.57, 0.25, 0.62, 0.35],
                             [17, 141, 59, 112, 19])
    assert value == pytest.approx(0.52276, abs=1e-5)
    with pytest.raises(ShapeMismatchError):
        weighted_average([1.0], [1, 2])
    with pytest.raises(ParameterError):
        weighted_average([1.0, 2.0], [0, 0])


@pytest.mark.parametrize('value,text', [(0.125, '0.13'), (0.5287, '0.53'),
                                        (0.304, '0.30'), (1.0, '1.00'),
                                        (0.0, '0.00')])
def test_display_round(value, text):
    logger.debug('test_display_round')
    assert display_round(value) == text


def test_confusion_matrix():
    logger.debug('test_confusion_matrix')
    cm = confusion_matrix([0, 0, 1, 4], [0, 1, 1, 4])
    assert cm.counts[0].tolist() == [1, 1, 0, 0, 0]
    assert cm.total == 4
    assert cm.classes[0] == 'Apple'
    assert cm == ConfusionMatrix(cm.counts)
    with pytest.raises(ShapeMismatchError):
        confusion_matrix([0, 1], [0])
    with pytest.raises(ParameterError):
        confusion_matrix([5], [0])
    with pytest.raises(ShapeMismatchError):
        ConfusionMatrix(np.zeros((2, 2)))
    small = confusion_matrix([0, 1], [1, 1], k=2)
    assert small.classes == ('0', '1')


def test_held_out_report():
    logger.debug('test_held_out_report')
    rep = report(ConfusionMatrix(HELD_OUT))
    assert rep.total == 348
    assert rep.accuracy == pytest.approx(184 / 348)
    assert rep.per_class[3].recall == pytest.approx(63 / 112)
    assert display_round(rep.per_class[3].recall) == '0.56'
    assert [m.support for m in rep.per_class] == [17, 141, 59, 112, 19]
    text = render_report(rep)
    accuracy_line = next(line for line in text.splitlines()
                         if line.strip().startswith('accuracy'))
    assert accuracy_line.split() == ['accuracy', '0.53', '348']
    assert 'weighted avg' in text
    assert 'Confusion matrix' in text


def test_perfect_report():
    logger.debug('test_perfect_report')
    rep = report(ConfusionMatrix(np.diag([3, 1, 4, 1, 5])))
    assert rep.accuracy == 1.0
    for metrics in rep.per_class + (rep.macro_avg, rep.weighted_avg):
        assert (metrics.precision, metrics.recall, metrics.f1) == (1, 1, 1)


def test_report_zero_division():
    logger.debug('test_report_zero_division')
    rep = report(confusion_matrix([0, 0, 1], [0, 0, 0]))
    assert rep.per_class[1].precision == 0.0
    assert rep.per_class[1].recall == 0.0
    assert rep.per_class[2].support == 0
    with pytest.raises(ParameterError):
        report(ConfusionMatrix(np.zeros((5, 5))))


@pytest.mark.parametrize('seed', range(10))
def test_report_identities(seed):
    logger.debug('test_report_identities')
    cm = random_matrix(seed)
    rep = report(cm)
    assert sum(m.support for m in rep.per_class) == rep.total
    assert rep.weighted_avg.recall == pytest.approx(rep.accuracy)
    for m in rep.per_class:
        assert 0 <= m.precision <= 1 and 0 <= m.recall <= 1
        assert min(m.precision, m.recall) <= m.f1 <= max(m.precision,
                                                         m.recall) + 1e-12


def test_json_report():
    logger.debug('test_json_report')
    rep = report(ConfusionMatrix(HELD_OUT))
    document = simplejson.loads(render_report(rep, style='json'))
    assert document['display']['accuracy'] == '0.53'
    assert document['confusion_matrix'] == HELD_OUT
    assert document['per_class'][3]['display']['recall'] == '0.56'
    assert 'generated' not in document
    stamped = simplejson.loads(render_report(rep, 'json', stamp=True))
    assert 'generated' in stamped
    with pytest.raises(ParameterError):
        render_report(rep, style='html')


def test_compare_reports():
    logger.debug('test_compare_reports')
    table = compare_reports({'rescnn': report(ConfusionMatrix(HELD_OUT)),
                             'lda': report(random_matrix(1))})
    assert 'Weighted F1' in table
    assert 'rescnn' in table and 'lda' in table
    assert '0.53' in table


def test_curves_file(tmp_path):
    logger.debug('test_curves_file')
    curve = LossCurve((1.5, 0.9, 0.1 + 0.2), (1.6, 1.0, 0.7),
                      (0.2, 0.5, 0.8))
    path = export_curves(curve, tmp_path / 'curves.csv')
    assert load_curves(path) == curve
    assert path.read_text().splitlines()[0] == \
        'epoch,train_loss,val_loss,val_accuracy'
    with pytest.raises(ParameterError):
        export_curves(LossCurve(), tmp_path / 'empty.csv')
    bad = tmp_path / 'bad.csv'
    bad.write_text('epoch,loss\n1,2\n')
    with pytest.raises(SchemaError):
        load_curves(bad)
    bad.write_text('epoch,train_loss,val_loss,val_accuracy\n1,x,1,1\n')
    with pytest.raises(SchemaError):
        load_curves(bad)


def test_plot_curves(tmp_path):
    logger.debug('test_plot_curves')
    curve = LossCurve((1.5, 0.9), (1.6, 1.0), (0.2, 0.5))
    path = plot_curves(curve, tmp_path / 'curves.png', title='mlp13')
    assert path.read_bytes().startswith(b'\x89PNG')
