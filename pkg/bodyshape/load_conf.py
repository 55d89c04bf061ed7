"""
Run configuration: dataclass defaults, overridden by a YAML or JSON config
file, overridden by flags given on the command line.

A config file is a mapping whose keys are `RunConfig` field names, e.g.::

    seed: 42
    counts: [50, 315, 166, 315, 95]
    augment_to: 1000
    arch: rescnn
    epochs: 50
    freeze: last:2
"""
from __future__ import annotations

import dataclasses
import logging
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import yaml

from .clustering import CRITERIA
from .constants import (DEFAULT_CANVAS_HEIGHT, DEFAULT_CANVAS_WIDTH,
                        DEFAULT_NOISE_SIGMA, METHODS, TRAIN_ARCHS,
                        VALID_KEYS)
from .dataset import PREPROCESS_MODES
from .shapes import ConfigError

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = '.'
    canvas_width: int = DEFAULT_CANVAS_WIDTH
    canvas_height: int = DEFAULT_CANVAS_HEIGHT
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    n_per_class: int = 100
    counts: Optional[tuple[int, ...]] = None
    augment_to: Optional[int] = None
    method: str = 'drop'
    ratios: Union[str, tuple[str, ...]] = 'default'
    z_threshold: Optional[float] = None
    k: Optional[int] = None
    select_k: Optional[tuple[int, int]] = None
    criterion: str = 'bic'
    fuzzy: bool = False
    c: int = 5
    fuzzifier: float = 2.0
    pca: Optional[float] = None
    arch: str = 'rescnn'
    epochs: int = 50
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    val_fraction: float = 0.2
    freeze: str = 'none'
    preprocess: str = 'mask'
    workers: int = 1
    stamp: bool = False

    @property
    def class_counts(self) -> tuple[int, ...]:
        """Per-class sample counts for corpus generation."""
        if self.counts is not None:
            return self.counts
        return (self.n_per_class,) * 5

    @property
    def pca_setting(self) -> dict:
        """``pca`` as keyword arguments of `pca_fit`, or empty for none."""
        if self.pca is None:
            return {}
        if self.pca >= 1:
            return {'k': int(self.pca)}
        return {'theta': float(self.pca)}


def _int(value) -> int:
    if isinstance(value, bool):
        raise ValueError('boolean is not an integer')
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f'{value} is not an integer')
    return int(value)


def _float(value) -> float:
    if isinstance(value, bool):
        raise ValueError('boolean is not a number')
    return float(value)


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ('true', 'yes', '1'):
        return True
    if isinstance(value, str) and value.lower() in ('false', 'no', '0'):
        return False
    raise ValueError(f'{value!r} is not a boolean')


def _str(value) -> str:
    if not isinstance(value, (str, int, float)) or isinstance(value, bool):
        raise ValueError(f'{value!r} is not a string')
    return str(value)


def _counts(value) -> tuple[int, ...]:
    if isinstance(value, str):
        value = [v for v in value.split(',') if v.strip()]
    counts = tuple(_int(v) for v in value)
    if len(counts) != 5 or min(counts) < 0:
        raise ValueError('five nonnegative class counts are required')
    return counts


def _k_range(value) -> tuple[int, int]:
    """``'2..5'``, ``'2-5'``, ``[2, 5]`` or a single ``5`` meaning 2..5."""
    if isinstance(value, str):
        for sep in ('..', '-', ':', ','):
            if sep in value:
                value = value.split(sep)
                break
        else:
            value = [2, value]
    elif isinstance(value, (int, float)):
        value = [2, value]
    lo, hi = (_int(v) for v in value)
    if not 2 <= lo <= hi:
        raise ValueError(f'bad k range {lo}..{hi}')
    return lo, hi


def _ratios(value) -> Union[str, tuple[str, ...]]:
    if isinstance(value, str):
        return value
    return tuple(_str(v) for v in value)


def _choice(options):
    def check(value):
        value = _str(value)
        if value not in options:
            raise ValueError(f'{value!r} is not one of {options}')
        return value
    return check


def _optional(convert):
    def check(value):
        return None if value is None else convert(value)
    return check


_CONVERTERS = dict(
    seed=_int,
    out_dir=_str,
    canvas_width=_int,
    canvas_height=_int,
    noise_sigma=_float,
    n_per_class=_int,
    counts=_optional(_counts),
    augment_to=_optional(_int),
    method=_choice(METHODS),
    ratios=_ratios,
    z_threshold=_optional(_float),
    k=_optional(_int),
    select_k=_optional(_k_range),
    criterion=_choice(CRITERIA),
    fuzzy=_bool,
    c=_int,
    fuzzifier=_float,
    pca=_optional(_float),
    arch=_choice(TRAIN_ARCHS),
    epochs=_int,
    lr=_float,
    momentum=_float,
    batch_size=_int,
    val_fraction=_float,
    freeze=_str,
    preprocess=_choice(PREPROCESS_MODES),
    workers=_int,
    stamp=_bool,
)


def coerce(key: str, value: Any) -> Any:
    """
    Convert one config value to its field type.

    Raises
    ------
    ConfigError
        If the value has the wrong type or is out of range.
    """
    try:
        return _CONVERTERS[key](value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f'bad value for {key}: {exc}') from exc


def load(cfg: Optional[Union[str, Path]] = None) -> dict:
    """
    Read a config file into a ``dict``.

    JSON documents are read by the same YAML loader. A missing ``cfg``
    gives an empty configuration.
    """
    if cfg is None:
        return {}
    with open(cfg) as f:
        try:
            conf = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigError(f'{cfg}: unreadable configuration ({exc})') \
                from exc
    if conf is None:
        return {}
    if not isinstance(conf, dict):
        raise ConfigError(f'{cfg}: expected a mapping of settings')
    logger.debug('Read configuration %s: %s', cfg, conf)
    return conf


def load_conf(conf: Mapping[str, Any],
              overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Merge a configuration and command-line overrides into a `RunConfig`.

    Keys that are not `RunConfig` fields are noted in a ``logger.warning``
    and ignored.

    Parameters
    ----------
    conf : dict
        Settings read by `load`.

    overrides : dict, optional
        Settings given explicitly on the command line; these win.
    """
    for key in conf:
        if key not in VALID_KEYS:
            txt = ('Found %s in configuration, but this is not a valid key. '
                   'The valid keys are %s')
            logger.warning(txt, key, VALID_KEYS)
    settings = {key: coerce(key, value) for key, value in conf.items()
                if key in VALID_KEYS}
    for key, value in (overrides or {}).items():
        if key not in VALID_KEYS:
            raise ConfigError(f'unknown setting {key!r}')
        settings[key] = coerce(key, value)
    config = RunConfig(**settings)
    _check_ranges(config)
    logger.debug('Run configuration: %s', config)
    return config


def _check_ranges(config: RunConfig) -> None:
    problems = []
    if config.seed < 0:
        problems.append('seed must be nonnegative')
    if config.n_per_class < 0:
        problems.append('n_per_class must be nonnegative')
    if config.workers < 1:
        problems.append('workers must be at least 1')
    if config.k is not None and config.k < 1:
        problems.append('k must be at least 1')
    if config.c < 2:
        problems.append('c must be at least 2')
    if config.pca is not None and not config.pca > 0:
        problems.append('pca must be a variance fraction or a count')
    if config.z_threshold is not None and not config.z_threshold > 0:
        problems.append('z_threshold must be positive')
    if problems:
        raise ConfigError('; '.join(problems))
