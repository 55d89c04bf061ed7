"""
Implementations of the ``bodyshape`` subcommands.

Each command takes the merged `RunConfig` plus its positional inputs,
writes its artifacts atomically under ``config.out_dir`` and returns a
summary ``dict``. Errors propagate as `BodyShapeError` or `OSError`; the
command line turns them into exit code 1.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import softmax

from .agreement import cluster_agreement
from .anthro import (DatasetTable, Normalization, PopulationStats,
                     classify_table, fit_population_stats, normalize,
                     ratio_table, remove_outliers, resolve_ratio_names)
from .clustering import (FuzzyModel, KMeansModel, cluster_profiles, fcm_fit,
                         kmeans_fit, select_k)
from .constants import (AGREEMENT_NAME, ASSIGNMENTS_NAME, CHECKPOINT_NAME,
                        CLASS_NAMES, CLUSTER_MODEL_NAME, COMPARISON_NAME,
                        CURVES_NAME, CURVES_PLOT_NAME, ERRORS_NAME,
                        FORMAT_VERSION, IMAGE_ARCHS, LDA_MODEL_NAME,
                        MANIFEST_NAME, MEASUREMENT_COLUMNS, MEASUREMENTS_NAME,
                        MEMBERSHIPS_NAME, NET_INPUT_SIZE, NEURAL_ARCHS,
                        PREDICTIONS_NAME, REPORT_JSON_NAME, REPORT_TEXT_NAME,
                        STATS_NAME, TRUTH_NAME)
from .dataset import (ManifestRow, generate_corpus, image_batch, load_masks,
                      measure_files, read_manifest, read_measurements,
                      read_predictions, write_csv, write_errors,
                      write_manifest, write_measurements,
                      write_predictions)
from .decomposition import LdaModel, PcaModel, lda_fit, pca_fit
from .imaging import save_mask
from .load_conf import RunConfig
from .metrics import (ClassificationReport, compare_reports,
                      confusion_matrix, export_curves, plot_curves,
                      render_report, report)
from .network import (Network, build_network, forward, freeze_layers,
                      load_checkpoint, predict_labels, save_checkpoint)
from .shapes import (BodyShapeError, ParameterError, SchemaError,
                     ShapeLabel)
from .train import TrainConfig, stratified_split, train
from .utils import atomic_write, dump_json, load_json, safe_load

logger = logging.getLogger(__name__)

MEASUREMENT_FEATURES = 'measurements'


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(rep: ClassificationReport, out: Path, stamp: bool,
                  name: str = '') -> str:
    prefix = f'{name}_' if name else ''
    text = render_report(rep, 'text')
    atomic_write(out / f'{prefix}{REPORT_TEXT_NAME}', text)
    atomic_write(out / f'{prefix}{REPORT_JSON_NAME}',
                 render_report(rep, 'json', stamp=stamp))
    return text


def cmd_gen(config: RunConfig) -> dict:
    """
    Generate a synthetic mask corpus with its manifest and true widths.

    Writes ``<Label>_<index>.pgm`` files, ``manifest.csv`` and ``truth.csv``
    (generator widths of the non-augmented masks).
    """
    out = _out_dir(config)
    with safe_load('synthetic corpus'):
        samples = generate_corpus(
            config.class_counts, config.seed,
            canvas_width=config.canvas_width,
            canvas_height=config.canvas_height,
            noise_sigma=config.noise_sigma,
            augment_to=config.augment_to,
        )
    for sample in samples:
        save_mask(sample.mask, out / sample.name)
    write_manifest((ManifestRow(s.name, s.label) for s in samples),
                   out / MANIFEST_NAME)
    originals = [s for s in samples if s.truth is not None]
    truth = DatasetTable(
        MEASUREMENT_COLUMNS,
        np.array([s.truth for s in originals]).reshape(
            -1, len(MEASUREMENT_COLUMNS)),
        labels=tuple(s.label for s in originals),
        paths=tuple(s.name for s in originals),
    )
    write_measurements(truth, out / TRUTH_NAME)
    print(f'Generated {len(samples)} masks in {out}')
    return {'masks': len(samples), 'generated': len(originals),
            'augmented': len(samples) - len(originals),
            'manifest': str(out / MANIFEST_NAME)}


def cmd_measure(config: RunConfig, manifest: str) -> dict:
    """
    Measure every mask of a manifest.

    Failures are listed in ``errors.csv``; it is an error if none of the
    masks could be measured.
    """
    out = _out_dir(config)
    rows = read_manifest(manifest)
    with safe_load('measurements'):
        table, errors = measure_files(manifest, rows, config.workers)
    write_measurements(table, out / MEASUREMENTS_NAME)
    write_errors(errors, out / ERRORS_NAME)
    if rows and not len(table):
        raise BodyShapeError(f'all {len(rows)} masks failed to measure')
    print(f'Measured {len(table)} of {len(rows)} masks, '
          f'{len(errors)} failed')
    return {'measured': len(table), 'failed': len(errors)}


def _ratio_inputs(table: DatasetTable, ratios,
                  normalization: Optional[Normalization] = None):
    features = ratio_table(table, ratios)
    if normalization is None:
        return normalize(features)
    if normalization.columns != features.columns:
        raise SchemaError('model ratios do not match the requested features')
    return (features.with_values(features.columns,
                                 normalization.apply(features.values)),
            normalization)


def _network_inputs(net: Network, table: Optional[DatasetTable] = None,
                    masks=None) -> np.ndarray:
    """Apply a checkpoint's preprocessing record to raw inputs."""
    record = net.preprocessing or {}
    kind = record.get('kind')
    if kind == 'ratios':
        if table is None:
            raise SchemaError(f'{net.arch} classifies measurement tables')
        normalization = Normalization.from_json(record['normalization'])
        inputs, _ = _ratio_inputs(table, record['ratios'], normalization)
        return inputs.values
    if kind == 'image':
        if masks is None:
            raise SchemaError(f'{net.arch} classifies mask manifests')
        return image_batch(masks, record.get('mode', 'mask'),
                           int(record.get('size', NET_INPUT_SIZE)))
    raise SchemaError(f'checkpoint has unknown preprocessing {kind!r}')


def _load_cluster_model(path) -> dict:
    document = load_json(path)
    if not isinstance(document, dict) or document.get(
            'kind') != 'cluster_pipeline':
        raise SchemaError(f'{path}: not a cluster model')
    if not document.get('mapping'):
        raise SchemaError(f'{path}: cluster model has no label mapping; '
                          'fit it on labelled data')
    return document


def _cluster_predict(document: dict, table: DatasetTable):
    """Cluster ids, mapped labels and fuzzy memberships of new rows."""
    features = document['features']
    if features == MEASUREMENT_FEATURES:
        data = table
    else:
        data = ratio_table(table, features)
    normalization = Normalization.from_json(document['normalization'])
    X = normalization.apply(data.values)
    if document.get('pca') is not None:
        X = PcaModel.from_json(document['pca']).transform(X)
    memberships = None
    model = document['model']
    if model['kind'] == 'fcm':
        memberships = FuzzyModel.from_json(model).predict(X)
        clusters = np.argmax(memberships, axis=1)
    else:
        clusters = KMeansModel.from_json(model).predict(X)
    mapping = document['mapping']
    try:
        labels = [ShapeLabel.parse(mapping[str(int(c))]) for c in clusters]
    except KeyError as exc:
        raise SchemaError(f'cluster {exc} has no mapped label') from exc
    return clusters, labels, memberships


def cmd_classify(config: RunConfig, source: str,
                 model: Optional[str] = None,
                 stats: Optional[str] = None) -> dict:
    """
    Classify a measurement table (or, for image networks, a manifest).

    ``drop`` uses ``stats`` when given and otherwise fits population
    statistics on the input itself. Every other method needs ``model``.
    A report is written only when every row is labelled.
    """
    out = _out_dir(config)
    method = config.method
    probabilities = None
    names = CLASS_NAMES
    if method in IMAGE_ARCHS:
        rows = read_manifest(source)
        paths = [row.path for row in rows]
        truth = [row.label for row in rows]
        masks = load_masks(source, rows, config.workers)
        table = None
    else:
        table = read_measurements(source)
        paths = list(table.paths or [''] * len(table))
        truth = list(table.labels or [None] * len(table))
        masks = None

    if method == 'drop':
        if stats is not None:
            population = PopulationStats.from_json(load_json(stats))
        else:
            logger.warning('No population stats given; fitting them on the '
                           'classified data')
            population = fit_population_stats(table)
            dump_json(population.to_json(), out / STATS_NAME)
        predicted = [int(label) for label in classify_table(table,
                                                            population)]
    elif model is None:
        raise ParameterError(f'method {method} needs a model file')
    elif method == 'lda-nm':
        document = load_json(model)
        if not isinstance(document, dict) or document.get(
                'kind') != 'lda_classifier':
            raise SchemaError(f'{model}: not an LDA classifier')
        normalization = Normalization.from_json(document['normalization'])
        inputs, _ = _ratio_inputs(table, document['ratios'], normalization)
        lda = LdaModel.from_json(document['lda'])
        predicted = [int(c) for c in lda.predict(inputs.values)]
    elif method in ('kmeans', 'fcm'):
        document = _load_cluster_model(model)
        _, labels, memberships = _cluster_predict(document, table)
        predicted = [int(label) for label in labels]
        if memberships is not None:
            probabilities = memberships
            names = tuple(str(c) for c in range(memberships.shape[1]))
    else:
        net = load_checkpoint(model)
        if net.arch != method:
            raise SchemaError(f'{model} holds a {net.arch} network, not '
                              f'{method}')
        inputs = _network_inputs(net, table=table, masks=masks)
        logits = forward(net, inputs)
        probabilities = softmax(np.atleast_2d(logits), axis=1)
        predicted = [int(c) for c in np.argmax(probabilities, axis=1)]

    _write_prediction_file(out, paths, predicted, truth, probabilities,
                           names)
    summary = {'method': method, 'predictions': len(predicted)}
    if predicted and all(label is not None for label in truth):
        rep = report(confusion_matrix([int(t) for t in truth], predicted))
        print(_write_report(rep, out, config.stamp), end='')
        summary['accuracy'] = rep.accuracy
    else:
        logger.info('Input is not fully labelled; writing predictions only')
    print(f'Classified {len(predicted)} samples with {method}')
    return summary


def _write_prediction_file(out, paths, predicted, truth, probabilities,
                           names):
    if probabilities is not None and names != CLASS_NAMES:
        # Fuzzy memberships are per cluster, not per class
        write_predictions(out / PREDICTIONS_NAME, paths, predicted, truth)
        write_csv(out / MEMBERSHIPS_NAME,
                  ['path'] + [f'm_{n}' for n in names],
                  ([path] + [repr(float(v)) for v in row]
                   for path, row in zip(paths, probabilities)))
        return
    write_predictions(out / PREDICTIONS_NAME, paths, predicted, truth,
                      probabilities=probabilities)


def _labelled_split(labels, config: RunConfig):
    return stratified_split(labels, config.val_fraction, config.seed)


def _train_lda(config: RunConfig, table: DatasetTable, out: Path):
    labels = table.label_array()
    train_index, val_index = _labelled_split(labels, config)
    names = resolve_ratio_names(config.ratios)
    train_inputs, normalization = _ratio_inputs(table.select(train_index),
                                                names)
    lda = lda_fit(train_inputs.values, labels[train_index])
    val_inputs, _ = _ratio_inputs(table.select(val_index), names,
                                  normalization)
    predicted = lda.predict(val_inputs.values)
    dump_json({
        'format_version': FORMAT_VERSION,
        'kind': 'lda_classifier',
        'ratios': list(names),
        'normalization': normalization.to_json(),
        'lda': lda.to_json(),
    }, out / LDA_MODEL_NAME)
    return labels[val_index], predicted


def _train_network(config: RunConfig, inputs: np.ndarray, labels,
                   preprocessing: dict, out: Path,
                   plot: Optional[str]):
    arch = config.arch
    n_features = inputs.shape[1] if arch == 'mlp13' else 13
    net = build_network(arch, seed=config.seed, n_features=n_features,
                        preprocessing=preprocessing)
    net = freeze_layers(net, config.freeze)
    cfg = TrainConfig(lr=config.lr, momentum=config.momentum,
                      batch_size=config.batch_size, epochs=config.epochs,
                      seed=config.seed, val_fraction=config.val_fraction)
    split = _labelled_split(labels, config)
    with safe_load(f'{arch} training'):
        result = train(net, inputs, labels, cfg, split=split)
    save_checkpoint(result.net, out / CHECKPOINT_NAME)
    export_curves(result.curve, out / CURVES_NAME)
    if plot is not None:
        plot_curves(result.curve, plot if plot else out / CURVES_PLOT_NAME,
                    title=arch)
    val_index = result.val_index
    predicted = predict_labels(result.net, inputs[val_index])
    return labels[val_index], predicted


def cmd_train(config: RunConfig, source: str,
              plot: Optional[str] = None) -> dict:
    """
    Train ``config.arch`` on labelled data and report on the validation
    split.

    ``lda-nm`` and ``mlp13`` read a measurement table; the image networks
    read a mask manifest.
    """
    out = _out_dir(config)
    arch = config.arch
    if arch in IMAGE_ARCHS:
        rows = read_manifest(source)
        if any(row.label is None for row in rows):
            raise SchemaError(f'{source}: training needs every mask labelled')
        masks = load_masks(source, rows, config.workers)
        inputs = image_batch(masks, config.preprocess)
        labels = np.array([int(row.label) for row in rows], dtype=np.int64)
        preprocessing = {'kind': 'image', 'mode': config.preprocess,
                         'size': NET_INPUT_SIZE}
        y_val, predicted = _train_network(config, inputs, labels,
                                          preprocessing, out, plot)
    else:
        table = read_measurements(source)
        if not table.has_labels:
            raise SchemaError(f'{source}: training needs every row labelled')
        if arch == 'lda-nm':
            y_val, predicted = _train_lda(config, table, out)
        elif arch in NEURAL_ARCHS:
            labels = table.label_array()
            names = resolve_ratio_names(config.ratios)
            train_index, _ = _labelled_split(labels, config)
            _, normalization = _ratio_inputs(table.select(train_index),
                                             names)
            inputs, _ = _ratio_inputs(table, names, normalization)
            preprocessing = {'kind': 'ratios', 'ratios': list(names),
                             'normalization': normalization.to_json()}
            y_val, predicted = _train_network(config, inputs.values, labels,
                                              preprocessing, out, plot)
        else:
            raise ParameterError(f'unknown architecture {arch!r}')
    rep = report(confusion_matrix(y_val, predicted))
    print(_write_report(rep, out, config.stamp), end='')
    print(f'Validation accuracy of {arch}: {rep.accuracy:.4f}')
    return {'arch': arch, 'val_accuracy': rep.accuracy}


def cmd_cluster(config: RunConfig, source: str) -> dict:
    """
    Outlier removal, normalisation, optional PCA, then k-means or fuzzy
    c-means; kappa against the truth when the table is labelled.
    """
    out = _out_dir(config)
    table = read_measurements(source)
    if config.z_threshold is not None:
        table = remove_outliers(table, config.z_threshold)
    if len(table) < 2:
        raise ParameterError('clustering needs at least 2 rows')
    if config.ratios == MEASUREMENT_FEATURES:
        features, feature_spec = table, MEASUREMENT_FEATURES
    else:
        names = resolve_ratio_names(config.ratios)
        features, feature_spec = ratio_table(table, names), list(names)
    normed, normalization = normalize(features)
    X = normed.values
    pca = None
    if config.pca_setting:
        pca = pca_fit(X, columns=normed.columns, **config.pca_setting)
        X = pca.transform(X)
        logger.info('PCA kept %d components', pca.k)

    selection = None
    memberships = None
    if config.fuzzy:
        fuzzy = fcm_fit(X, config.c, fuzzifier=config.fuzzifier,
                        seed=config.seed)
        clusters = fuzzy.hard_labels()
        memberships = fuzzy.memberships
        model_document = fuzzy.to_json()
    else:
        if config.select_k is not None:
            selection = select_k(X, *config.select_k,
                                 criterion=config.criterion,
                                 seed=config.seed)
            k = selection.k
            print(f'Selected k = {k} by {config.criterion}')
        else:
            k = config.k if config.k is not None else 4
        kmeans = kmeans_fit(X, k, seed=config.seed)
        clusters = kmeans.labels
        model_document = kmeans.to_json()

    paths = list(table.paths or [''] * len(table))
    header = ['path', 'label', 'cluster']
    if memberships is not None:
        header += [f'm_{c}' for c in range(memberships.shape[1])]
    labels = table.labels or (None,) * len(table)

    def assignment_rows():
        for i, cluster in enumerate(clusters):
            row = [paths[i],
                   '' if labels[i] is None else labels[i].canonical,
                   str(int(cluster))]
            if memberships is not None:
                row += [repr(float(v)) for v in memberships[i]]
            yield row

    write_csv(out / ASSIGNMENTS_NAME, header, assignment_rows())

    document = {
        'format_version': FORMAT_VERSION,
        'kind': 'cluster_pipeline',
        'features': feature_spec,
        'z_threshold': config.z_threshold,
        'normalization': normalization.to_json(),
        'pca': None if pca is None else pca.to_json(),
        'model': model_document,
        'profiles': cluster_profiles(table, clusters),
        'mapping': None,
    }
    if selection is not None:
        document['selection'] = {
            'k': selection.k, 'criterion': selection.criterion,
            'bic': {str(k): v for k, v in selection.bic.items()},
            'silhouette': {str(k): v
                           for k, v in selection.silhouette.items()},
        }
    summary = {'clusters': int(len(np.unique(clusters))), 'rows': len(table)}
    if table.has_labels:
        agreement = cluster_agreement(clusters, table.label_array())
        document['mapping'] = agreement['mapping']
        dump_json(agreement, out / AGREEMENT_NAME)
        print(f"Cohen's kappa against the labels: {agreement['kappa']:.4f}")
        summary['kappa'] = agreement['kappa']
    dump_json(document, out / CLUSTER_MODEL_NAME)
    print(f'Clustered {len(table)} rows into {summary["clusters"]} clusters')
    return summary


def cmd_eval(config: RunConfig, sources: Sequence[str],
             names: Optional[Sequence[str]] = None) -> dict:
    """
    Reports for one or more prediction files plus a comparison table.
    """
    out = _out_dir(config)
    if names is None:
        names = []
        for source in sources:
            stem = Path(source).stem
            if stem in names or stem == Path(PREDICTIONS_NAME).stem:
                stem = f'{Path(source).parent.name}_{stem}'
            names.append(stem)
    if len(names) != len(sources):
        raise ParameterError('one name per predictions file is required')
    reports = {}
    for name, source in zip(names, sources):
        _, truth, predicted = read_predictions(source)
        if not predicted or any(label is None for label in truth):
            raise SchemaError(f'{source}: every row needs a true label')
        rep = report(confusion_matrix([int(t) for t in truth],
                                      [int(p) for p in predicted]))
        _write_report(rep, out, config.stamp, name=name)
        reports[name] = rep
    table = compare_reports(reports)
    atomic_write(out / COMPARISON_NAME, table + '\n')
    print(table)
    return {name: rep.accuracy for name, rep in reports.items()}
