"""
Confusion matrices, classification reports and loss-curve files.

Reports follow the usual precision / recall / f1-score / support layout with
accuracy, macro and support-weighted averages. Empty denominators give 0.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from datetime import datetime
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Optional, Sequence

import numpy as np
import prettytable
from jinja2 import Environment, PackageLoader

from .constants import CLASS_NAMES, N_CLASSES
from .shapes import ParameterError, SchemaError, ShapeMismatchError
from .train import LossCurve
from .utils import PathLike, atomic_write, dumps_json

logger = logging.getLogger(__name__)

CURVE_HEADER = ('epoch', 'train_loss', 'val_loss', 'val_accuracy')

_env = Environment(loader=PackageLoader('bodyshape'), trim_blocks=True,
                   lstrip_blocks=True, keep_trailing_newline=True)


def display_round(value: float) -> str:
    """Two decimals, rounding halves away from zero."""
    return str(Decimal(repr(float(value))).quantize(Decimal('0.01'),
                                                    rounding=ROUND_HALF_UP))


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    total = precision + recall
    return 0.0 if total == 0 else 2 * precision * recall / total


def weighted_average(values: Sequence[float],
                     supports: Sequence[int]) -> float:
    """
    Support-weighted mean of per-class values.

    Examples
    --------
    >>> round(weighted_average([0.63, 0.57, 0.25, 0.62, 0.35],
    ...                        [17, 141, 59, 112, 19]), 4)
    0.5228
    """
    values = np.asarray(values, dtype=np.float64)
    supports = np.asarray(supports, dtype=np.float64)
    if values.shape != supports.shape:
        raise ShapeMismatchError('one support per value is required')
    total = supports.sum()
    if total <= 0:
        raise ParameterError('supports sum to zero')
    return float(np.dot(values, supports) / total)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows for actual classes and columns for predictions."""
    counts: np.ndarray
    classes: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        k = len(self.classes)
        if counts.shape != (k, k):
            raise ShapeMismatchError(
                f'confusion matrix of shape {counts.shape} for {k} classes'
            )
        if (counts < 0).any():
            raise ParameterError('confusion counts must be nonnegative')
        counts.setflags(write=False)
        object.__setattr__(self, 'counts', counts)
        object.__setattr__(self, 'classes', tuple(self.classes))

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return (self.classes == other.classes
                and np.array_equal(self.counts, other.counts))

    __hash__ = None

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def supports(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def predicted(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def to_json(self) -> list[list[int]]:
        return self.counts.tolist()


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int],
                     k: int = N_CLASSES,
                     classes: Optional[Sequence[str]] = None
                     ) -> ConfusionMatrix:
    """
    Count (actual, predicted) pairs.

    Raises
    ------
    ShapeMismatchError
        If the sequences differ in length.

    ParameterError
        If a label is outside ``[0, k)``.
    """
    y_true = np.asarray([int(y) for y in y_true], dtype=np.int64)
    y_pred = np.asarray([int(y) for y in y_pred], dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ShapeMismatchError(f'{len(y_true)} true labels but '
                                 f'{len(y_pred)} predictions')
    for labels in (y_true, y_pred):
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise ParameterError(f'label out of range [0, {k})')
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    if classes is None:
        classes = CLASS_NAMES if k == N_CLASSES else tuple(
            str(i) for i in range(k))
    return ConfusionMatrix(counts, tuple(classes))


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int

    def to_json(self) -> dict:
        return {
            'precision': self.precision,
            'recall': self.recall,
            'f1': self.f1,
            'support': self.support,
            'display': {
                'precision': display_round(self.precision),
                'recall': display_round(self.recall),
                'f1': display_round(self.f1),
            },
        }


@dataclass(frozen=True)
class ClassificationReport:
    classes: tuple[str, ...]
    per_class: tuple[ClassMetrics, ...]
    accuracy: float
    macro_avg: ClassMetrics
    weighted_avg: ClassMetrics
    total: int
    matrix: Optional[ConfusionMatrix] = None

    def to_json(self, stamp: bool = False) -> dict:
        document = {
            'classes': list(self.classes),
            'per_class': [m.to_json() for m in self.per_class],
            'accuracy': self.accuracy,
            'macro_avg': self.macro_avg.to_json(),
            'weighted_avg': self.weighted_avg.to_json(),
            'total': self.total,
            'display': {'accuracy': display_round(self.accuracy)},
        }
        if self.matrix is not None:
            document['confusion_matrix'] = self.matrix.to_json()
        if stamp:
            document['generated'] = datetime.now().isoformat(
                timespec='seconds')
        return document


def report(cm: ConfusionMatrix) -> ClassificationReport:
    """
    Per-class and averaged metrics of a confusion matrix.

    Raises
    ------
    ParameterError
        If the matrix is empty.
    """
    total = cm.total
    if total == 0:
        raise ParameterError('cannot report on an empty confusion matrix')
    counts = cm.counts
    per_class = []
    for c in range(cm.k):
        hit = counts[c, c]
        column, row = counts[:, c].sum(), counts[c, :].sum()
        precision = float(hit / column) if column else 0.0
        recall = float(hit / row) if row else 0.0
        per_class.append(ClassMetrics(precision, recall,
                                      f1_score(precision, recall), int(row)))
    supports = [m.support for m in per_class]

    def average(weighted):
        fields = {}
        for name in ('precision', 'recall', 'f1'):
            values = [getattr(m, name) for m in per_class]
            fields[name] = (weighted_average(values, supports) if weighted
                            else float(np.mean(values)))
        return ClassMetrics(support=total, **fields)

    return ClassificationReport(
        classes=cm.classes,
        per_class=tuple(per_class),
        accuracy=float(np.trace(counts) / total),
        macro_avg=average(False),
        weighted_avg=average(True),
        total=total,
        matrix=cm,
    )


def _text_rows(rep: ClassificationReport) -> dict:
    width = max(len(name) for name in rep.classes + ('weighted avg',))

    def row(name, metrics):
        return dict(name=name.rjust(width),
                    precision=display_round(metrics.precision).rjust(9),
                    recall=display_round(metrics.recall).rjust(9),
                    f1=display_round(metrics.f1).rjust(9),
                    support=str(metrics.support).rjust(9))

    matrix = None
    if rep.matrix is not None:
        cell = max(len(str(rep.matrix.counts.max())), 3)
        matrix = dict(
            header=' '.join(str(i).rjust(cell) for i in range(rep.matrix.k)),
            rows=[dict(name=name.rjust(width),
                       cells=' '.join(str(n).rjust(cell) for n in counts))
                  for name, counts in zip(rep.classes,
                                          rep.matrix.counts.tolist())],
        )
    return dict(
        pad=''.rjust(width),
        header=''.join(h.rjust(10) for h in ('precision', 'recall',
                                              'f1-score', 'support')),
        rows=[row(name, m) for name, m in zip(rep.classes, rep.per_class)],
        accuracy=dict(name='accuracy'.rjust(width),
                      value=display_round(rep.accuracy).rjust(29),
                      support=str(rep.total).rjust(9)),
        macro=row('macro avg', rep.macro_avg),
        weighted=row('weighted avg', rep.weighted_avg),
        matrix=matrix,
    )


def render_report(rep: ClassificationReport, style: str = 'text',
                  stamp: bool = False) -> str:
    """
    Render a report as aligned text or as a JSON document.

    The text form rounds to two decimals; the JSON form keeps full
    precision next to the rounded display strings.
    """
    if style == 'json':
        return dumps_json(rep.to_json(stamp=stamp))
    if style != 'text':
        raise ParameterError(f'unknown report style {style!r}')
    template = _env.get_template('report.txt')
    return template.render(**_text_rows(rep))


def compare_reports(reports: Mapping[str, ClassificationReport]) -> str:
    """Side-by-side accuracy and f1 averages of several models."""
    table = prettytable.PrettyTable()
    table.field_names = ['Model', 'Accuracy', 'Macro F1', 'Weighted F1',
                         'Support']
    table.align['Model'] = 'l'
    for name, rep in reports.items():
        table.add_row([name, display_round(rep.accuracy),
                       display_round(rep.macro_avg.f1),
                       display_round(rep.weighted_avg.f1), rep.total])
    return table.get_string()


def export_curves(curve: LossCurve, path: PathLike):
    """Write a loss curve as CSV with full-precision floats."""
    if not len(curve):
        raise ParameterError('cannot export an empty loss curve')
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CURVE_HEADER)
    for epoch, train_loss, val_loss, val_acc in curve.rows():
        writer.writerow([epoch, repr(float(train_loss)),
                         repr(float(val_loss)), repr(float(val_acc))])
    return atomic_write(path, buffer.getvalue())


def load_curves(path: PathLike) -> LossCurve:
    """Read a loss curve written by `export_curves`."""
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != CURVE_HEADER:
            raise SchemaError(f'{path}: expected header '
                              f'{",".join(CURVE_HEADER)}')
        columns = ([], [], [])
        for lineno, row in enumerate(reader, start=2):
            try:
                values = [float(v) for v in row[1:]]
                if len(values) != 3 or int(row[0]) != lineno - 1:
                    raise ValueError(row)
            except ValueError as exc:
                raise SchemaError(f'{path}:{lineno}: bad curve row') from exc
            for column, value in zip(columns, values):
                column.append(value)
    return LossCurve(*(tuple(c) for c in columns))


def plot_curves(curve: LossCurve, path: PathLike, title: str = ''):
    """Save training and validation loss against epoch as a PNG."""
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6, 4))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(1, 1, 1)
    epochs = np.arange(1, len(curve) + 1)
    ax.plot(epochs, curve.train_loss, label='train loss')
    ax.plot(epochs, curve.val_loss, label='validation loss')
    ax.set_xlabel('Epoch')
    ax.set_ylabel('Loss')
    if title:
        ax.set_title(title)
    ax.legend()
    buffer = io.BytesIO()
    fig.savefig(buffer, format='png')
    return atomic_write(path, buffer.getvalue())
