import dataclasses
import logging
import os.path

import pytest

from bodyshape.constants import VALID_KEYS
from bodyshape.load_conf import RunConfig, coerce, load, load_conf
from bodyshape.shapes import ConfigError

logger = logging.getLogger(__name__)

CFG = os.path.join(os.path.dirname(__file__), 'conf.yaml')


def test_file_load():
    logger.debug('test_file_load')
    config = load_conf(load(CFG))
    assert config.seed == 3
    assert config.class_counts == (4,) * 5
    assert config.select_k == (2, 5)
    assert config.ratios == ('bust/waist', 'hip/waist')
    assert config.freeze == 'last:2'
    assert config.epochs == RunConfig.epochs


def test_json_file(tmp_path):
    logger.debug('test_json_file')
    path = tmp_path / 'run.json'
    path.write_text('{"seed": 9, "counts": [1, 2, 3, 4, 5], "fuzzy": true}')
    config = load_conf(load(path))
    assert config.seed == 9
    assert config.class_counts == (1, 2, 3, 4, 5)
    assert config.fuzzy


def test_no_file():
    logger.debug('test_no_file')
    assert load() == {}
    assert load_conf({}) == RunConfig()


def test_empty_file(tmp_path):
    logger.debug('test_empty_file')
    path = tmp_path / 'empty.yaml'
    path.write_text('')
    assert load(path) == {}


def test_invalid_key(log_queue):
    logger.debug('test_invalid_key')
    config = load_conf({'seed': 1, 'palette': 'warm'})
    assert config.seed == 1
    messages = []
    while not log_queue.empty():
        record = log_queue.get()
        if record.levelno == logging.WARNING:
            messages.append(record.getMessage())
    assert any('palette' in msg and 'not a valid key' in msg
               for msg in messages)


def test_valid_keys_are_fields(log_queue):
    logger.debug('test_valid_keys_are_fields')
    fields = [field.name for field in dataclasses.fields(RunConfig)]
    assert list(VALID_KEYS) == fields
    config = load_conf({'data_dir': 'masks'})
    assert not hasattr(config, 'data_dir')
    warnings = [record.getMessage() for record in drain(log_queue)
                if record.levelno == logging.WARNING]
    assert any('data_dir' in msg for msg in warnings)


def drain(queue):
    records = []
    while not queue.empty():
        records.append(queue.get())
    return records


def test_overrides():
    logger.debug('test_overrides')
    config = load_conf(load(CFG), {'seed': 11, 'counts': '5,5,5,5,6',
                                   'stamp': True})
    assert config.seed == 11
    assert config.class_counts == (5, 5, 5, 5, 6)
    assert config.stamp
    assert config.method == 'kmeans'
    with pytest.raises(ConfigError):
        load_conf({}, {'colour': 'red'})


@pytest.mark.parametrize('text,expected', [('2..8', (2, 8)),
                                           ('3-4', (3, 4)), ('6', (2, 6)),
                                           ([2, 3], (2, 3)), (5, (2, 5))])
def test_k_range(text, expected):
    logger.debug('test_k_range')
    assert coerce('select_k', text) == expected


@pytest.mark.parametrize('key,value', [
    ('seed', 'x'), ('seed', 1.5), ('seed', True), ('counts', '1,2'),
    ('counts', [1, 2, 3, 4, -1]), ('select_k', '5..2'),
    ('select_k', '1..3'), ('method', 'svm'), ('fuzzy', 'maybe'),
    ('arch', 'resnet18'), ('preprocess', 'canny'), ('ratios', [None]),
])
def test_bad_values(key, value):
    logger.debug('test_bad_values')
    with pytest.raises(ConfigError):
        load_conf({key: value})


@pytest.mark.parametrize('settings', [{'workers': 0}, {'c': 1},
                                      {'pca': 0}, {'seed': -1},
                                      {'z_threshold': -2}])
def test_bad_ranges(settings):
    logger.debug('test_bad_ranges')
    with pytest.raises(ConfigError):
        load_conf(settings)


def test_bad_files(tmp_path):
    logger.debug('test_bad_files')
    path = tmp_path / 'list.yaml'
    path.write_text('- 1\n- 2\n')
    with pytest.raises(ConfigError):
        load(path)
    path.write_text('seed: [unclosed\n')
    with pytest.raises(ConfigError):
        load(path)
    with pytest.raises(OSError):
        load(tmp_path / 'missing.yaml')


def test_pca_setting():
    logger.debug('test_pca_setting')
    assert RunConfig().pca_setting == {}
    assert RunConfig(pca=0.85).pca_setting == {'theta': 0.85}
    assert RunConfig(pca=3).pca_setting == {'k': 3}
