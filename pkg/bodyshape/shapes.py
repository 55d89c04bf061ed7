"""
Core value types shared by every part of ``bodyshape``: the five-class shape
taxonomy, body measurements and the exception hierarchy.
"""
from __future__ import annotations

import dataclasses
import enum
import math

from .constants import CLASS_NAMES, MEASUREMENT_COLUMNS


class BodyShapeError(Exception):
    """Base class for every error raised by ``bodyshape``."""


class ParameterError(BodyShapeError, ValueError):
    """An argument is outside of its documented range."""


class PgmError(BodyShapeError):
    ...


class EmptyMaskError(BodyShapeError):
    ...


class MaskTooSmallError(BodyShapeError):
    ...


class EmptyBandError(BodyShapeError):
    ...


class NotFittedError(BodyShapeError):
    ...


class SchemaError(BodyShapeError):
    """A CSV or JSON document does not have the expected layout."""


class SingularScatterError(BodyShapeError):
    ...


class ShapeMismatchError(BodyShapeError, ValueError):
    ...


class CheckpointError(BodyShapeError):
    ...


class EmptyClassError(BodyShapeError):
    ...


class ConfigError(BodyShapeError):
    ...


class ShapeLabel(enum.IntEnum):
    """
    The five body shape classes, in their canonical ordinal order.

    The ordinal is what networks predict and what every file format stores
    positionally; ``name`` in files is the canonical class name.
    """
    APPLE = 0
    HOURGLASS = 1
    INVERTED_TRIANGLE = 2
    RECTANGLE = 3
    TRIANGLE = 4

    @property
    def canonical(self) -> str:
        return CLASS_NAMES[self.value]

    @classmethod
    def parse(cls, text: str | int | ShapeLabel) -> ShapeLabel:
        """
        Interpret a canonical class name, an enum name or an ordinal.

        Raises
        ------
        SchemaError
            If ``text`` names no class.
        """
        if isinstance(text, ShapeLabel):
            return text
        if isinstance(text, int):
            try:
                return cls(text)
            except ValueError:
                raise SchemaError(f'No shape with ordinal {text}') from None
        key = text.strip()
        if key in CLASS_NAMES:
            return cls(CLASS_NAMES.index(key))
        normalized = key.upper().replace(' ', '_').replace('-', '_')
        if normalized == 'INVERTEDTRIANGLE':
            normalized = 'INVERTED_TRIANGLE'
        try:
            return cls[normalized]
        except KeyError:
            raise SchemaError(f'Unknown shape label {text!r}') from None

    def __str__(self) -> str:
        return self.canonical


@dataclasses.dataclass(frozen=True)
class BodyMeasurements:
    """
    Linear body measurements in one shared unit.

    Mask-derived values are pixel widths; CSV-loaded values may use any
    consistent unit.
    """
    bust: float
    waist: float
    hip: float
    shoulder: float
    stature: float

    def __post_init__(self):
        for name in MEASUREMENT_COLUMNS:
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ParameterError(
                    f'Measurement {name} must be finite and positive, '
                    f'got {value!r}'
                )

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in MEASUREMENT_COLUMNS)

    def scaled(self, factor: float) -> BodyMeasurements:
        return BodyMeasurements(*(value * factor for value in self.as_tuple()))
