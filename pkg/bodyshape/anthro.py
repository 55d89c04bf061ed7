"""
Measurement-space features and the rule-based drop-value classifier.

A *drop value* is a difference between two girth measurements. The rule
classifier compares a body's ``hip - bust`` and ``bust - waist`` drops against
intervals fitted on a reference population (mean, population standard
deviation, minimum and maximum).

Ratio features divide one measurement, or a difference of two, by another.
Names use the measurement column names, e.g. ``'bust/waist'`` or
``'(hip-bust)/stature'``.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import re
from typing import Optional, Sequence

import numpy as np

from .constants import FORMAT_VERSION, MEASUREMENT_COLUMNS
from .shapes import (BodyMeasurements, NotFittedError, ParameterError,
                     SchemaError, ShapeLabel)
from .utils import check_format_version

logger = logging.getLogger(__name__)

DEFAULT_RATIOS = (
    'bust/waist',
    'hip/waist',
    'hip/bust',
    'waist/stature',
    'bust/stature',
    'hip/stature',
    'shoulder/bust',
    'shoulder/hip',
    '(bust-waist)/stature',
    '(hip-waist)/stature',
    '(hip-bust)/stature',
    'waist/bust',
    'stature/hip',
)

UPPER_BODY_RATIOS = (
    'bust/waist',
    'shoulder/bust',
    'bust/stature',
    'waist/stature',
    '(bust-waist)/stature',
    'waist/bust',
)

LOWER_BODY_RATIOS = (
    'hip/waist',
    'hip/bust',
    'hip/stature',
    '(hip-waist)/stature',
    '(hip-bust)/stature',
    'stature/hip',
)

RATIO_PRESETS = dict(
    default=DEFAULT_RATIOS,
    upper=UPPER_BODY_RATIOS,
    lower=LOWER_BODY_RATIOS,
)

DEFAULT_Z_THRESHOLD = 3.0

_COLUMN = '|'.join(MEASUREMENT_COLUMNS)
_PURE = re.compile(rf'^({_COLUMN})/({_COLUMN})$')
_DIFFERENCE = re.compile(rf'^\(({_COLUMN})-({_COLUMN})\)/({_COLUMN})$')


@dataclasses.dataclass(frozen=True)
class DropValues:
    hip_minus_bust: float
    bust_minus_waist: float


@dataclasses.dataclass(frozen=True)
class DropStats:
    """Summary of one drop dimension over a population."""
    mean: float
    sd: float
    min: float
    max: float

    @classmethod
    def from_values(cls, values: np.ndarray) -> DropStats:
        return cls(
            mean=float(np.mean(values)),
            sd=float(np.std(values)),
            min=float(np.min(values)),
            max=float(np.max(values)),
        )


@dataclasses.dataclass(frozen=True)
class PopulationStats:
    """
    Drop-value statistics of a reference population.

    Standard deviations use the population divisor ``n``.
    """
    hip_minus_bust: DropStats
    bust_minus_waist: DropStats
    n: int

    def to_json(self) -> dict:
        return {
            'format_version': FORMAT_VERSION,
            'kind': 'population_stats',
            'n': self.n,
            'hip_minus_bust': dataclasses.asdict(self.hip_minus_bust),
            'bust_minus_waist': dataclasses.asdict(self.bust_minus_waist),
        }

    @classmethod
    def from_json(cls, document: dict) -> PopulationStats:
        check_format_version(document, FORMAT_VERSION, 'population stats')
        try:
            return cls(
                hip_minus_bust=DropStats(**document['hip_minus_bust']),
                bust_minus_waist=DropStats(**document['bust_minus_waist']),
                n=int(document['n']),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f'population stats: {exc}') from exc


@dataclasses.dataclass(frozen=True)
class RatioFeatures:
    names: tuple[str, ...]
    values: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


@dataclasses.dataclass(frozen=True, eq=False)
class DatasetTable:
    """
    A rectangular table of finite values with optional per-row labels.

    Measurement tables use the columns ``bust, waist, hip, shoulder,
    stature``; derived tables (ratios, normalised or projected values) carry
    their own column names.
    """
    columns: tuple[str, ...]
    values: np.ndarray
    labels: Optional[tuple[Optional[ShapeLabel], ...]] = None
    paths: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, len(self.columns))
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise SchemaError(
                f'table of shape {values.shape} does not match columns '
                f'{self.columns}'
            )
        if not np.isfinite(values).all():
            raise ParameterError('table values must be finite')
        values.setflags(write=False)
        object.__setattr__(self, 'columns', tuple(self.columns))
        object.__setattr__(self, 'values', values)
        for name in ('labels', 'paths'):
            extra = getattr(self, name)
            if extra is not None:
                extra = tuple(extra)
                if len(extra) != len(values):
                    raise SchemaError(f'{len(extra)} {name} for '
                                      f'{len(values)} rows')
                object.__setattr__(self, name, extra)

    @classmethod
    def from_measurements(cls, rows: Sequence[BodyMeasurements],
                          labels=None, paths=None) -> DatasetTable:
        values = np.array([m.as_tuple() for m in rows], dtype=np.float64)
        if not len(rows):
            values = values.reshape(0, len(MEASUREMENT_COLUMNS))
        return cls(MEASUREMENT_COLUMNS, values, labels=labels, paths=paths)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def has_labels(self) -> bool:
        return (self.labels is not None
                and all(label is not None for label in self.labels))

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise SchemaError(f'table has no column {name!r}') from None

    def label_array(self) -> np.ndarray:
        if not self.has_labels:
            raise SchemaError('table rows are not all labelled')
        return np.array([int(label) for label in self.labels], dtype=np.int64)

    def measurements(self) -> list[BodyMeasurements]:
        columns = [self.column(name) for name in MEASUREMENT_COLUMNS]
        return [BodyMeasurements(*(float(c[i]) for c in columns))
                for i in range(len(self))]

    def select(self, keep) -> DatasetTable:
        """Rows picked by a boolean mask or an index array, in order."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.flatnonzero(keep)
        return DatasetTable(
            self.columns,
            self.values[keep],
            labels=None if self.labels is None
            else tuple(self.labels[i] for i in keep),
            paths=None if self.paths is None
            else tuple(self.paths[i] for i in keep),
        )

    def with_values(self, columns, values) -> DatasetTable:
        """Same rows, labels and paths with new columns."""
        return DatasetTable(tuple(columns), values, labels=self.labels,
                            paths=self.paths)


def drop_values(m: BodyMeasurements) -> DropValues:
    return DropValues(hip_minus_bust=m.hip - m.bust,
                      bust_minus_waist=m.bust - m.waist)


def _drop_arrays(table: DatasetTable) -> tuple[np.ndarray, np.ndarray]:
    bust = table.column('bust')
    return table.column('hip') - bust, bust - table.column('waist')


def fit_population_stats(table: DatasetTable) -> PopulationStats:
    """
    Fit drop-value statistics on a measurement table.

    Raises
    ------
    ParameterError
        If the table has fewer than two rows.
    """
    if len(table) < 2:
        raise ParameterError(
            f'population stats need at least 2 rows, got {len(table)}'
        )
    hb, bw = _drop_arrays(table)
    stats = PopulationStats(
        hip_minus_bust=DropStats.from_values(hb),
        bust_minus_waist=DropStats.from_values(bw),
        n=len(table),
    )
    logger.debug('Fitted drop stats on %d rows: %s', len(table), stats)
    return stats


def _interval_distance(value: float, lo: float, hi: float) -> float:
    return max(lo - value, 0.0, value - hi)


def classify_drop(m: BodyMeasurements,
                  stats: Optional[PopulationStats]) -> ShapeLabel:
    """
    Label a body from its drop values and fitted population statistics.

    Rules, in order:

    1. ``hip - bust < 0``: InvertedTriangle.
    2. ``hip - bust`` in ``(mean, max]``: Triangle.
    3. ``d = bust - waist`` in ``(mean, max]``: Hourglass; in
       ``[mean - 3 sd, mean]``: Rectangle; in ``[min, mean - 3 sd)``: Apple.
    4. Otherwise the nearest of those (non-empty) intervals, ties going to
       Rectangle.

    Raises
    ------
    NotFittedError
        If ``stats`` is missing.
    """
    if stats is None:
        raise NotFittedError('classify_drop needs fitted population stats')
    drops = drop_values(m)
    hb = stats.hip_minus_bust
    if drops.hip_minus_bust < 0:
        return ShapeLabel.INVERTED_TRIANGLE
    if hb.mean < drops.hip_minus_bust <= hb.max:
        return ShapeLabel.TRIANGLE

    bw = stats.bust_minus_waist
    d = drops.bust_minus_waist
    floor = bw.mean - 3 * bw.sd
    if bw.mean < d <= bw.max:
        return ShapeLabel.HOURGLASS
    if floor <= d <= bw.mean:
        return ShapeLabel.RECTANGLE
    if bw.min <= d < floor:
        return ShapeLabel.APPLE

    # Candidates in tie-break order
    candidates = [(ShapeLabel.RECTANGLE, floor, bw.mean)]
    if bw.max > bw.mean:
        candidates.append((ShapeLabel.HOURGLASS, bw.mean, bw.max))
    if bw.min < floor:
        candidates.append((ShapeLabel.APPLE, bw.min, floor))
    best = min(candidates,
               key=lambda item: _interval_distance(d, item[1], item[2]))
    return best[0]


def classify_table(table: DatasetTable,
                   stats: PopulationStats) -> list[ShapeLabel]:
    return [classify_drop(m, stats) for m in table.measurements()]


def resolve_ratio_names(names) -> tuple[str, ...]:
    """Expand a preset name or validate an explicit ratio-name list."""
    if names is None:
        return DEFAULT_RATIOS
    if isinstance(names, str):
        if names in RATIO_PRESETS:
            return RATIO_PRESETS[names]
        names = [name for name in names.split(',') if name.strip()]
    names = tuple(name.replace(' ', '') for name in names)
    for name in names:
        _parse_ratio(name)
    if not names:
        raise ParameterError('ratio list is empty')
    return names


def _parse_ratio(name: str) -> tuple[str, Optional[str], str]:
    match = _PURE.match(name)
    if match:
        return match.group(1), None, match.group(2)
    match = _DIFFERENCE.match(name)
    if match:
        return match.group(1), match.group(2), match.group(3)
    raise ParameterError(f'cannot parse ratio {name!r}')


def _evaluate(name: str, columns: dict) -> np.ndarray:
    top, minus, bottom = _parse_ratio(name)
    numerator = columns[top]
    if minus is not None:
        numerator = numerator - columns[minus]
    denominator = columns[bottom]
    if np.any(denominator <= 0):
        raise ParameterError(f'zero or negative denominator in {name}')
    return numerator / denominator


def ratio_features(m: BodyMeasurements,
                   spec: Sequence[str] = DEFAULT_RATIOS) -> RatioFeatures:
    """
    Ratio features of one body, in ``spec`` order.

    Raises
    ------
    ParameterError
        On an unparsable name or a nonpositive denominator.
    """
    names = resolve_ratio_names(spec)
    columns = {name: np.float64(getattr(m, name))
               for name in MEASUREMENT_COLUMNS}
    values = np.array([_evaluate(name, columns) for name in names])
    return RatioFeatures(names, values)


def ratio_table(table: DatasetTable,
                spec: Sequence[str] = DEFAULT_RATIOS) -> DatasetTable:
    """Ratio features for every row of a measurement table."""
    names = resolve_ratio_names(spec)
    columns = {name: table.column(name) for name in MEASUREMENT_COLUMNS}
    if len(table):
        values = np.column_stack([_evaluate(name, columns)
                                  for name in names])
    else:
        values = np.zeros((0, len(names)))
    return table.with_values(names, values)


def remove_outliers(table: DatasetTable,
                    z_threshold: float = DEFAULT_Z_THRESHOLD
                    ) -> DatasetTable:
    """
    Drop rows with any column more than ``z_threshold`` deviations out.

    Means and population deviations come from the input table; constant
    columns are skipped.
    """
    if not z_threshold > 0:
        raise ParameterError(f'z_threshold must be positive, got '
                             f'{z_threshold}')
    if len(table) == 0 or math.isinf(z_threshold):
        return table.select(np.arange(len(table)))
    mean = table.values.mean(axis=0)
    sd = table.values.std(axis=0)
    varying = sd > 0
    z = np.abs(table.values[:, varying] - mean[varying]) / sd[varying]
    keep = (z <= z_threshold).all(axis=1)
    removed = int((~keep).sum())
    if removed:
        logger.info('Removed %d of %d rows beyond %.2f sd', removed,
                    len(table), z_threshold)
    return table.select(keep)


@dataclasses.dataclass(frozen=True)
class Normalization:
    """Per-column mean and population deviation used by `normalize`."""
    columns: tuple[str, ...]
    mean: np.ndarray
    sd: np.ndarray

    def to_json(self) -> dict:
        return {'columns': list(self.columns), 'mean': self.mean.tolist(),
                'sd': self.sd.tolist()}

    @classmethod
    def from_json(cls, document: dict) -> Normalization:
        try:
            return cls(tuple(document['columns']),
                       np.array(document['mean'], dtype=np.float64),
                       np.array(document['sd'], dtype=np.float64))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f'normalization: {exc}') from exc

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        safe = np.where(self.sd > 0, self.sd, 1.0)
        return np.where(self.sd > 0, (values - self.mean) / safe, 0.0)

    def invert(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.sd + self.mean


def normalize(table: DatasetTable) -> tuple[DatasetTable, Normalization]:
    """
    Standardise every column to zero mean and unit population deviation.

    Constant columns map to 0.

    Raises
    ------
    ParameterError
        If the table has fewer than two rows.
    """
    if len(table) < 2:
        raise ParameterError('normalize needs at least 2 rows')
    stats = Normalization(table.columns, table.values.mean(axis=0),
                          table.values.std(axis=0))
    return table.with_values(table.columns, stats.apply(table.values)), stats


def denormalize(table: DatasetTable, stats: Normalization) -> DatasetTable:
    """Inverse of `normalize`."""
    if table.values.shape[1] != len(stats.mean):
        raise SchemaError('normalization does not match the table columns')
    return table.with_values(stats.columns, stats.invert(table.values))
