import logging
import sys
from contextlib import contextmanager
from copy import copy
from logging.handlers import QueueHandler
from queue import Queue

import numpy as np
import pytest

from bodyshape.anthro import DatasetTable
from bodyshape.rng import SplitMix64
from bodyshape.shapes import BodyMeasurements, ShapeLabel
from bodyshape.silhouette import generate_silhouette

skip_if_win32_generic = pytest.mark.skipif(
    sys.platform == 'win32',
    reason='Does not run on Windows',
)


@contextmanager
def cli_args(args):
    """
    Context manager for running a block of code with a specific set of
    command-line arguments.
    """
    prev_args = sys.argv
    sys.argv = args
    yield
    sys.argv = prev_args


@contextmanager
def restore_logging():
    """
    Context manager for reverting our logging config after testing a function
    that configures the logging.
    """
    prev_handlers = copy(logging.root.handlers)
    prev_level = logging.root.level
    yield
    logging.root.handlers = prev_handlers
    logging.root.level = prev_level


@pytest.fixture(scope='function')
def log_queue():
    with restore_logging():
        my_queue = Queue()
        handler = QueueHandler(my_queue)
        root_logger = logging.getLogger('')
        root_logger.addHandler(handler)
        root_logger.setLevel(5)
        yield my_queue


def blobs(centers, n_per, scale=0.1, seed=0):
    """Isotropic Gaussian clusters around ``centers``."""
    rng = SplitMix64(seed)
    centers = np.asarray(centers, dtype=np.float64)
    points = [c + scale * rng.normal(size=n_per * centers.shape[1])
              .reshape(n_per, centers.shape[1]) for c in centers]
    return np.vstack(points)


def random_measurements(n, seed=0):
    rng = SplitMix64(seed)
    rows = []
    for _ in range(n):
        waist = rng.uniform(60, 90)
        rows.append(BodyMeasurements(
            bust=rng.uniform(80, 110), waist=waist, hip=rng.uniform(85, 115),
            shoulder=rng.uniform(90, 120), stature=rng.uniform(150, 190),
        ))
    return rows


@pytest.fixture(scope='session')
def corpus_masks():
    """Eight clean masks of every class with their labels."""
    masks, labels = [], []
    for label in ShapeLabel:
        for i in range(8):
            mask, _ = generate_silhouette(label, seed=1000 * label + i,
                                          noise_sigma=0.0)
            masks.append(mask)
            labels.append(label)
    return masks, labels


@pytest.fixture(scope='function')
def measurement_table():
    rows = random_measurements(60, seed=3)
    labels = [ShapeLabel(i % 5) for i in range(60)]
    return DatasetTable.from_measurements(rows, labels=labels)
