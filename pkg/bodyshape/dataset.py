"""
Files that tie the pipeline together: mask manifests, measurement tables,
prediction tables, plus builders for synthetic corpora and network inputs.

A mask directory holds ``<name>.pgm`` files and a ``manifest.csv`` with the
columns ``path,label``; paths are relative to the manifest and the label may
be blank. Any segmenter that writes this layout can feed the pipeline.
"""
from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .anthro import DatasetTable
from .augment import augment_class
from .constants import (CLASS_NAMES, DEFAULT_CANVAS_HEIGHT,
                        DEFAULT_CANVAS_WIDTH, DEFAULT_NOISE_SIGMA,
                        MEASUREMENT_COLUMNS, NET_INPUT_SIZE)
from .imaging import GrayImage, Mask, edge_features, load_mask, resize
from .rng import derive_seed
from .shapes import (BodyShapeError, ParameterError, SchemaError,
                     ShapeLabel)
from .silhouette import extract_measurements, generate_silhouette, \
    sample_params
from .utils import PathLike, atomic_write

logger = logging.getLogger(__name__)

MANIFEST_HEADER = ('path', 'label')
MEASUREMENT_HEADER = MEASUREMENT_COLUMNS + ('label', 'path')
ERRORS_HEADER = ('path', 'error')
PREDICTION_HEADER = ('path', 'label', 'predicted')
PREPROCESS_MODES = ('mask', 'edges')

# Key of the augmentation stream under the run seed
_AUGMENT_KEY = 0xA06


@dataclass(frozen=True)
class ManifestRow:
    path: str
    label: Optional[ShapeLabel] = None


@dataclass(frozen=True)
class CorpusSample:
    """One generated or augmented mask and where it goes."""
    name: str
    label: ShapeLabel
    mask: Mask
    truth: Optional[tuple[float, ...]] = None


def _parse_label(text: str, where: str) -> Optional[ShapeLabel]:
    text = (text or '').strip()
    if not text:
        return None
    try:
        return ShapeLabel.parse(text)
    except SchemaError as exc:
        raise SchemaError(f'{where}: {exc}') from exc


def _label_text(label: Optional[ShapeLabel]) -> str:
    return '' if label is None else label.canonical


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_csv(path: PathLike, header: Sequence[str],
              rows: Iterable[Sequence]):
    """Atomically write a CSV file with ``\\n`` line endings."""
    return atomic_write(path, _csv_text(header, rows))


def _read_rows(path: PathLike, required: Sequence[str]):
    """Yield ``(line number, row dict)``; the header must hold ``required``."""
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        missing = [c for c in required if c not in (reader.fieldnames or ())]
        if missing:
            raise SchemaError(f'{path}: missing column(s) {missing}')
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def read_manifest(path: PathLike) -> list[ManifestRow]:
    """
    Read a ``path,label`` manifest.

    Raises
    ------
    SchemaError
        On a missing column or an unknown label.
    """
    rows = []
    for lineno, row in _read_rows(path, ('path',)):
        where = f'{path}:{lineno}'
        name = (row['path'] or '').strip()
        if not name:
            raise SchemaError(f'{where}: empty path')
        rows.append(ManifestRow(name, _parse_label(row.get('label'), where)))
    logger.debug('Read %d manifest rows from %s', len(rows), path)
    return rows


def write_manifest(rows: Iterable[ManifestRow], path: PathLike):
    return atomic_write(path, _csv_text(
        MANIFEST_HEADER, ((r.path, _label_text(r.label)) for r in rows)))


def resolve(manifest: PathLike, name: str) -> Path:
    """A manifest path, relative to the manifest's directory."""
    return Path(manifest).parent / name


def read_measurements(path: PathLike) -> DatasetTable:
    """
    Read a measurement table; ``label`` and ``path`` columns are optional.

    Raises
    ------
    SchemaError
        On a missing measurement column, a non-numeric value or an unknown
        label.
    """
    values, labels, paths = [], [], []
    for lineno, row in _read_rows(path, MEASUREMENT_COLUMNS):
        where = f'{path}:{lineno}'
        try:
            values.append([float(row[c]) for c in MEASUREMENT_COLUMNS])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f'{where}: non-numeric measurement') from exc
        labels.append(_parse_label(row.get('label'), where))
        paths.append((row.get('path') or '').strip())
    table = DatasetTable(
        MEASUREMENT_COLUMNS,
        np.array(values, dtype=np.float64).reshape(-1,
                                                   len(MEASUREMENT_COLUMNS)),
        labels=tuple(labels),
        paths=tuple(paths),
    )
    logger.debug('Read %d measurement rows from %s', len(table), path)
    return table


def write_measurements(table: DatasetTable, path: PathLike):
    """Write the measurement columns plus labels and paths, floats by repr."""
    columns = [table.column(c) for c in MEASUREMENT_COLUMNS]
    labels = table.labels or (None,) * len(table)
    paths = table.paths or ('',) * len(table)

    def rows():
        for i in range(len(table)):
            yield ([repr(float(c[i])) for c in columns]
                   + [_label_text(labels[i]), paths[i]])

    return atomic_write(path, _csv_text(MEASUREMENT_HEADER, rows()))


def write_errors(errors: Sequence[tuple[str, str]], path: PathLike):
    return atomic_write(path, _csv_text(ERRORS_HEADER, errors))


def write_predictions(path: PathLike, paths: Sequence[str],
                      predicted: Sequence[int],
                      truth: Optional[Sequence[Optional[ShapeLabel]]] = None,
                      probabilities: Optional[np.ndarray] = None,
                      names: Sequence[str] = CLASS_NAMES):
    """
    Write one prediction per row.

    ``probabilities`` adds one ``p_<class>`` column per class (network
    probabilities or fuzzy memberships).
    """
    header = list(PREDICTION_HEADER)
    if probabilities is not None:
        header += [f'p_{name}' for name in names]
    truth = truth if truth is not None else (None,) * len(predicted)

    def rows():
        for i, label in enumerate(predicted):
            row = [paths[i], _label_text(truth[i]), names[int(label)]]
            if probabilities is not None:
                row += [repr(float(p)) for p in probabilities[i]]
            yield row

    return atomic_write(path, _csv_text(header, rows()))


def read_predictions(path: PathLike):
    """
    Read a predictions table.

    Returns
    -------
    paths : list of str
    truth : list of ShapeLabel or None
    predicted : list of ShapeLabel
    """
    paths, truth, predicted = [], [], []
    for lineno, row in _read_rows(path, PREDICTION_HEADER):
        where = f'{path}:{lineno}'
        label = _parse_label(row['predicted'], where)
        if label is None:
            raise SchemaError(f'{where}: missing prediction')
        paths.append(row['path'])
        truth.append(_parse_label(row['label'], where))
        predicted.append(label)
    return paths, truth, predicted


def _measure_one(path: Path) -> BodyShapeError | OSError | tuple:
    try:
        return extract_measurements(load_mask(path)).as_tuple()
    except (BodyShapeError, OSError) as exc:
        return exc


def measure_files(manifest: PathLike, rows: Sequence[ManifestRow],
                  workers: int = 1):
    """
    Extract measurements from every manifest mask.

    Files are processed by a thread pool; results keep manifest order.

    Returns
    -------
    table : DatasetTable
        One row per successfully measured mask.

    errors : list of (str, str)
        Manifest path and message of each failure.
    """
    if workers < 1:
        raise ParameterError('workers must be at least 1')
    files = [resolve(manifest, row.path) for row in rows]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_measure_one, files))
    values, labels, paths, errors = [], [], [], []
    for row, result in zip(rows, results):
        if isinstance(result, Exception):
            logger.warning('Could not measure %s: %s', row.path, result)
            errors.append((row.path, str(result)))
            continue
        values.append(result)
        labels.append(row.label)
        paths.append(row.path)
    table = DatasetTable(
        MEASUREMENT_COLUMNS,
        np.array(values, dtype=np.float64).reshape(-1,
                                                   len(MEASUREMENT_COLUMNS)),
        labels=tuple(labels), paths=tuple(paths),
    )
    logger.info('Measured %d of %d masks', len(table), len(rows))
    return table, errors


def sample_seed(seed: int, label: ShapeLabel, index: int) -> int:
    """Seed of the ``index``-th generated sample of ``label``."""
    return derive_seed(seed, int(label), index)


def generate_corpus(counts: Sequence[int], seed: int,
                    canvas_width: int = DEFAULT_CANVAS_WIDTH,
                    canvas_height: int = DEFAULT_CANVAS_HEIGHT,
                    noise_sigma: float = DEFAULT_NOISE_SIGMA,
                    augment_to: Optional[int] = None) -> list[CorpusSample]:
    """
    Generate ``counts[c]`` silhouettes of each class in canonical order.

    With ``augment_to`` every class is then topped up to that many masks
    with rotated and mirrored copies; augmented samples have no true widths.
    """
    counts = list(counts)
    if len(counts) != len(ShapeLabel) or min(counts) < 0:
        raise ParameterError('one nonnegative count per class is required')
    samples = []
    for label, count in zip(ShapeLabel, counts):
        members = []
        for i in range(count):
            mask, params = generate_silhouette(
                label, sample_seed(seed, label, i),
                canvas_width=canvas_width, canvas_height=canvas_height,
                noise_sigma=noise_sigma,
            )
            members.append(mask)
            samples.append(CorpusSample(f'{label.canonical}_{i:04d}.pgm',
                                        label, mask,
                                        params.measurements().as_tuple()))
        if augment_to is not None:
            if count > augment_to:
                raise ParameterError(f'target {augment_to} is below the '
                                     f'{count} samples of {label}')
            extra = augment_class(members, augment_to - count,
                                  derive_seed(seed, _AUGMENT_KEY, int(label)))
            samples.extend(
                CorpusSample(f'{label.canonical}_{count + j:04d}.pgm', label,
                             mask)
                for j, mask in enumerate(extra)
            )
        logger.debug('Generated %s: %d samples', label, count)
    return samples


def true_measurements(n_per_class: int, seed: int,
                      canvas_width: int = DEFAULT_CANVAS_WIDTH,
                      canvas_height: int = DEFAULT_CANVAS_HEIGHT
                      ) -> DatasetTable:
    """
    Generator widths of a balanced corpus, without rendering any mask.

    Row ``i`` of class ``c`` matches the mask `generate_corpus` draws with
    the same seed.
    """
    rows, labels = [], []
    for label in ShapeLabel:
        for i in range(n_per_class):
            params = sample_params(label, sample_seed(seed, label, i),
                                   canvas_width=canvas_width,
                                   canvas_height=canvas_height)
            rows.append(params.measurements())
            labels.append(label)
    return DatasetTable.from_measurements(rows, labels=labels)


def image_tensor(mask: Mask, preprocess: str = 'mask',
                 size: int = NET_INPUT_SIZE) -> np.ndarray:
    """
    Network input of shape ``(1, size, size)`` from one mask.

    ``mask`` resizes the mask as a gray image with bilinear sampling;
    ``edges`` applies the Sobel and Gaussian edge preprocessing.
    """
    if preprocess == 'mask':
        image = resize(GrayImage.from_mask(mask), size, size, 'bilinear')
    elif preprocess == 'edges':
        image = edge_features(mask, size=size)
    else:
        raise ParameterError(f'unknown preprocessing {preprocess!r}, '
                             f'expected one of {PREPROCESS_MODES}')
    return image.values[None, :, :].astype(np.float64)


def image_batch(masks: Sequence[Mask], preprocess: str = 'mask',
                size: int = NET_INPUT_SIZE) -> np.ndarray:
    out = np.empty((len(masks), 1, size, size))
    for i, mask in enumerate(masks):
        out[i] = image_tensor(mask, preprocess, size)
    return out


def load_masks(manifest: PathLike, rows: Sequence[ManifestRow],
               workers: int = 1) -> list[Mask]:
    """Load every manifest mask, in manifest order."""
    files = [resolve(manifest, row.path) for row in rows]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(load_mask, files))


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))
