import logging

from .shapes import BodyMeasurements, BodyShapeError, ShapeLabel  # noqa
from .version import __version__  # noqa: F401

logger = logging.getLogger(__name__)
