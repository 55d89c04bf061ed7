"""
Synthetic silhouettes and measurements taken from a mask's width profile.

The generator draws a front-view body of one of the five shape classes: a
head, a neck, a torso whose shoulder, bust, waist and hip levels follow the
class definitions, and two legs. Measurement extraction reads the same
horizontal bands back from any mask, generated or segmented.

Bands are fixed percentages of stature measured from the top of the body.
The generator places every width transition so that a band's extreme (the
maximum for shoulder, bust and hip, the minimum for waist) is the true width
of that band.
"""
from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .constants import (BANDS, DEFAULT_CANVAS_HEIGHT, DEFAULT_CANVAS_WIDTH,
                        DEFAULT_NOISE_SIGMA, MIN_MEASURE_ROWS)
from .imaging import Mask
from .rng import SplitMix64, derive_seed
from .shapes import (BodyMeasurements, EmptyBandError, EmptyMaskError,
                     MaskTooSmallError, ParameterError, ShapeLabel)

logger = logging.getLogger(__name__)

_JITTER_STREAM = 0x6A17
_MAX_REJECTIONS = 10_000

# Non-band body segments, integer percentages of stature
_HEAD = (0, 11)
_NECK = (11, 15)
_LEGS = 70
_LEG_GAP = 74


@dataclasses.dataclass(frozen=True)
class SilhouetteParams:
    """
    Everything needed to render one synthetic silhouette.

    Widths are in pixels and may be fractional; ``body_height`` is the number
    of rows from the top of the head to the soles.
    """
    canvas_width: int
    canvas_height: int
    bust_w: float
    waist_w: float
    hip_w: float
    shoulder_w: float
    body_height: int
    noise_sigma: float
    seed: int

    def __post_init__(self):
        if self.canvas_width < 1 or self.canvas_height < 1:
            raise ParameterError('canvas dimensions must be positive')
        for name in ('bust_w', 'waist_w', 'hip_w', 'shoulder_w'):
            value = getattr(self, name)
            if not 4 <= value < self.canvas_width:
                raise ParameterError(
                    f'{name}={value:.2f} must lie in '
                    f'[4, {self.canvas_width})'
                )
        if not 1 <= self.body_height <= self.canvas_height:
            raise ParameterError(
                f'body_height={self.body_height} does not fit a canvas of '
                f'height {self.canvas_height}'
            )
        if not self.noise_sigma >= 0:
            raise ParameterError('noise_sigma must be nonnegative')

    def measurements(self) -> BodyMeasurements:
        """The generator's true widths as `BodyMeasurements`."""
        return BodyMeasurements(
            bust=self.bust_w,
            waist=self.waist_w,
            hip=self.hip_w,
            shoulder=self.shoulder_w,
            stature=float(self.body_height),
        )


def band_rows(stature: int, lo: int, hi: int) -> range:
    """
    Rows of the half-open band ``[lo, hi)`` percent of ``stature``.

    Row indices are relative to the top of the body. Integer arithmetic keeps
    the generator and the extractor in exact agreement.
    """
    start = -(-lo * stature // 100)
    stop = -(-hi * stature // 100)
    return range(start, min(stop, stature))


def sample_params(label: ShapeLabel, seed: int,
                  canvas_width: int = DEFAULT_CANVAS_WIDTH,
                  canvas_height: int = DEFAULT_CANVAS_HEIGHT,
                  noise_sigma: float = DEFAULT_NOISE_SIGMA
                  ) -> SilhouetteParams:
    """
    Draw the widths of one silhouette of class ``label``.

    Every width is a fraction of a base width ``B`` drawn from
    ``[0.45, 0.60]`` of the canvas width.
    """
    label = ShapeLabel.parse(label)
    rng = SplitMix64(derive_seed(seed, label.value))
    base = rng.uniform(0.45, 0.60) * canvas_width
    body_height = int(round(rng.uniform(0.80, 0.92) * canvas_height))
    bust = rng.uniform(0.9, 1.0) * base

    if label is ShapeLabel.HOURGLASS:
        hip = rng.uniform(0.95, 1.05) * bust
        waist = rng.uniform(0.65, 0.75) * bust
    elif label is ShapeLabel.RECTANGLE:
        for _ in range(_MAX_REJECTIONS):
            waist = rng.uniform(0.92, 1.0) * bust
            hip = rng.uniform(0.95, 1.05) * bust
            trio = (bust, waist, hip)
            if max(trio) / min(trio) <= 1.08:
                break
        else:
            raise RuntimeError('rectangle sampling did not converge')
    elif label is ShapeLabel.APPLE:
        waist = rng.uniform(1.05, 1.20) * bust
        hip = rng.uniform(0.85, 0.95) * bust
    elif label is ShapeLabel.TRIANGLE:
        hip = rng.uniform(1.15, 1.35) * bust
        waist = rng.uniform(0.80, 0.90) * bust
    else:
        hip = bust / rng.uniform(1.15, 1.35)
        waist = rng.uniform(0.80, 0.90) * hip

    if label is ShapeLabel.INVERTED_TRIANGLE:
        shoulder = rng.uniform(1.0, 1.1) * bust
    else:
        shoulder = rng.uniform(0.85, 0.95) * bust

    return SilhouetteParams(
        canvas_width=canvas_width,
        canvas_height=canvas_height,
        bust_w=bust,
        waist_w=waist,
        hip_w=hip,
        shoulder_w=shoulder,
        body_height=body_height,
        noise_sigma=noise_sigma,
        seed=int(seed),
    )


def _ramp(start: float, end: float, n: int) -> np.ndarray:
    # Values strictly between the two levels
    return start + (end - start) * np.arange(1, n + 1) / (n + 1)


def _profiles(params: SilhouetteParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-row outer width and leg-gap width, before jitter."""
    stature = params.body_height
    rows = np.arange(stature)
    outer = np.zeros(stature)
    gap = np.zeros(stature)

    bust, waist, hip = params.bust_w, params.waist_w, params.hip_w
    shoulder = params.shoulder_w
    head_w = 0.45 * bust
    neck_w = 0.30 * bust

    head = band_rows(stature, *_HEAD)
    if len(head):
        u = (rows[head.start:head.stop] - head.start + 0.5) / len(head)
        outer[head.start:head.stop] = head_w * np.sqrt(1 - (2 * u - 1) ** 2)
    neck = band_rows(stature, *_NECK)
    outer[neck.start:neck.stop] = neck_w

    bands = {name: band_rows(stature, *BANDS[name]) for name in BANDS}
    levels = dict(shoulder=shoulder, bust=bust, waist=waist, hip=hip)
    for name, span in bands.items():
        outer[span.start:span.stop] = levels[name]

    shortest = min(len(span) for span in bands.values())
    n_ramp = max(1, min(round(0.03 * stature), shortest // 3))

    def ramp_at_start(span, start, end):
        n = min(n_ramp, len(span))
        outer[span.start:span.start + n] = _ramp(start, end, n)

    def ramp_at_end(span, start, end):
        n = min(n_ramp, len(span))
        outer[span.stop - n:span.stop] = _ramp(start, end, n)

    ramp_at_start(bands['shoulder'], neck_w, shoulder)
    # Between two max bands the ramp goes in the band of the larger level
    if shoulder > bust:
        ramp_at_end(bands['shoulder'], shoulder, bust)
    else:
        ramp_at_start(bands['bust'], shoulder, bust)
    # A waist wider than bust or hip is a step so neither extreme moves
    if waist <= bust:
        ramp_at_start(bands['waist'], bust, waist)
    if hip >= waist:
        ramp_at_start(bands['hip'], waist, hip)

    legs_start = band_rows(stature, _LEGS, 100).start
    n_legs = stature - legs_start
    if n_legs > 0:
        v = (rows[legs_start:] - legs_start + 0.5) / n_legs
        outer[legs_start:] = hip * (1 - 0.45 * v)
    gap_start = band_rows(stature, _LEG_GAP, 100).start
    if gap_start < stature:
        grow = max(1.0, 0.1 * stature)
        k = rows[gap_start:] - gap_start + 1
        gap[gap_start:] = 0.18 * hip * np.minimum(1.0, k / grow)
    return outer, gap


def render_silhouette(params: SilhouetteParams) -> Mask:
    """
    Draw the silhouette described by ``params``.

    Each row is centred on the canvas; both edges get independent Gaussian
    jitter of ``noise_sigma`` pixels.
    """
    outer, gap = _profiles(params)
    stature = params.body_height
    width = params.canvas_width
    center = width / 2

    if params.noise_sigma > 0:
        rng = SplitMix64(derive_seed(params.seed, _JITTER_STREAM))
        jitter = rng.normal(0.0, params.noise_sigma,
                            size=2 * stature).reshape(stature, 2)
    else:
        jitter = np.zeros((stature, 2))
    left = center - outer / 2 + jitter[:, 0]
    right = center + outer / 2 + jitter[:, 1]
    # Every row keeps at least one pixel so the body stays connected
    narrow = right - left < 2
    left[narrow] = center - 1
    right[narrow] = center + 1

    centers = np.arange(width) + 0.5
    body = ((centers[None, :] > left[:, None])
            & (centers[None, :] < right[:, None])
            & ~(np.abs(centers - center)[None, :] < gap[:, None] / 2))

    cells = np.zeros((params.canvas_height, width), dtype=np.uint8)
    top = (params.canvas_height - stature) // 2
    cells[top:top + stature] = body
    return Mask(cells)


def generate_silhouette(label: ShapeLabel, seed: int,
                        canvas_width: int = DEFAULT_CANVAS_WIDTH,
                        canvas_height: int = DEFAULT_CANVAS_HEIGHT,
                        noise_sigma: float = DEFAULT_NOISE_SIGMA
                        ) -> tuple[Mask, SilhouetteParams]:
    """
    Generate one silhouette of class ``label``.

    The result is a pure function of ``(label, seed)`` and the canvas
    settings.

    Returns
    -------
    mask : Mask
    params : SilhouetteParams
        The true widths the mask was drawn from.
    """
    params = sample_params(label, seed, canvas_width=canvas_width,
                           canvas_height=canvas_height,
                           noise_sigma=noise_sigma)
    return render_silhouette(params), params


def _row_extents(mask: Mask) -> tuple[int, np.ndarray]:
    if not mask.usable:
        raise EmptyMaskError('mask has no foreground pixels')
    cells = mask.cells.astype(bool)
    filled = cells.any(axis=1)
    rows = np.flatnonzero(filled)
    top, bottom = int(rows[0]), int(rows[-1])
    body = cells[top:bottom + 1]
    present = body.any(axis=1)
    leftmost = np.argmax(body, axis=1)
    rightmost = body.shape[1] - 1 - np.argmax(body[:, ::-1], axis=1)
    widths = np.where(present, rightmost - leftmost + 1, 0)
    return top, widths


def width_profile(mask: Mask) -> list[tuple[int, int]]:
    """
    Per-row foreground extent between the top and bottom of the body.

    Returns
    -------
    profile : list of (row, width)
        ``width`` spans the leftmost to the rightmost foreground pixel of the
        row, or 0 for an empty row.

    Raises
    ------
    EmptyMaskError
    """
    top, widths = _row_extents(mask)
    return [(top + i, int(w)) for i, w in enumerate(widths)]


def extract_measurements(mask: Mask) -> BodyMeasurements:
    """
    Read shoulder, bust, waist and hip widths and stature off of ``mask``.

    Shoulder, bust and hip are the widest row of their band and waist the
    narrowest; empty rows inside a band are ignored.

    Raises
    ------
    EmptyMaskError
        If the mask has no foreground.
    MaskTooSmallError
        If the body spans fewer than 32 rows.
    EmptyBandError
        If a band holds no foreground row.
    """
    _, widths = _row_extents(mask)
    stature = len(widths)
    if stature < MIN_MEASURE_ROWS:
        raise MaskTooSmallError(
            f'mask too small: {stature} rows, need {MIN_MEASURE_ROWS}'
        )
    values = {}
    for name, (lo, hi) in BANDS.items():
        span = band_rows(stature, lo, hi)
        band = widths[span.start:span.stop]
        band = band[band > 0]
        if band.size == 0:
            raise EmptyBandError(f'{name} band has no foreground rows')
        values[name] = float(band.min() if name == 'waist' else band.max())
    return BodyMeasurements(stature=float(stature), **values)


def silhouette_is_consistent(label: ShapeLabel,
                             params: SilhouetteParams) -> bool:
    """Whether the true widths satisfy the defining inequality of ``label``."""
    bust, waist, hip = params.bust_w, params.waist_w, params.hip_w
    label = ShapeLabel.parse(label)
    if label is ShapeLabel.TRIANGLE:
        return hip > bust
    if label is ShapeLabel.INVERTED_TRIANGLE:
        return bust > hip
    if label is ShapeLabel.APPLE:
        return waist > bust and waist > hip
    if label is ShapeLabel.HOURGLASS:
        return abs(bust - hip) / bust <= 0.08 and waist <= 0.80 * bust
    trio = (bust, waist, hip)
    return max(trio) / min(trio) <= 1.08

