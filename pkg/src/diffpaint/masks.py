"""
Generators for the six evaluation mask families.

Wide and Narrow masks are free-form occlusions drawn with OpenCV and
rejection-resampled until their missing fraction falls inside a range.
"""

import logging
import math

import cv2
import numpy as np

from .exceptions import MaskError
from .types import MaskField, MaskKind, Rng

logger = logging.getLogger(__name__)

WIDE_MISSING_RANGE = (0.3, 0.6)
NARROW_MISSING_RANGE = (0.05, 0.2)
MAX_ATTEMPTS = 2000


def _half(h: int, w: int) -> MaskField:
    m = np.zeros((h, w), dtype=np.bool_)
    m[:, : w // 2] = True
    return m


def _expand(h: int, w: int) -> MaskField:
    m = np.zeros((h, w), dtype=np.bool_)
    top, left = h // 4, w // 4
    m[top : top + h // 2, left : left + w // 2] = True
    return m


def _alt_lines(h: int, w: int) -> MaskField:
    m = np.zeros((h, w), dtype=np.bool_)
    m[0::2, :] = True
    return m


def _super_res_2x(h: int, w: int) -> MaskField:
    m = np.zeros((h, w), dtype=np.bool_)
    m[0::2, 0::2] = True
    return m


def _draw_stroke(
    canvas: np.ndarray,
    rng: Rng,
    thickness: int,
    vertices: int,
    max_len: float,
) -> None:
    h, w = canvas.shape
    x, y = int(rng.integers(0, w)), int(rng.integers(0, h))
    for _ in range(vertices):
        angle = rng.uniform(0.0, 2.0 * math.pi)
        length = rng.uniform(max_len / 3.0, max_len)
        nx = int(np.clip(x + length * math.cos(angle), 0, w - 1))
        ny = int(np.clip(y + length * math.sin(angle), 0, h - 1))
        cv2.line(canvas, (x, y), (nx, ny), 1, thickness)
        x, y = nx, ny


def _draw_wide(h: int, w: int, rng: Rng) -> np.ndarray:
    canvas = np.zeros((h, w), dtype=np.uint8)
    for _ in range(int(rng.integers(1, 5))):
        rh = int(rng.integers(max(1, h // 6), max(2, h // 2) + 1))
        rw = int(rng.integers(max(1, w // 6), max(2, w // 2) + 1))
        top, left = int(rng.integers(0, h - rh + 1)), int(rng.integers(0, w - rw + 1))
        cv2.rectangle(canvas, (left, top), (left + rw - 1, top + rh - 1), 1, -1)
    for _ in range(int(rng.integers(1, 4))):
        thickness = max(1, round(rng.uniform(w / 8, w / 4)))
        _draw_stroke(canvas, rng, thickness, int(rng.integers(1, 4)), w / 3)
    return canvas


def _draw_narrow(h: int, w: int, rng: Rng) -> np.ndarray:
    canvas = np.zeros((h, w), dtype=np.uint8)
    for _ in range(int(rng.integers(4, 11))):
        thickness = max(1, round(rng.uniform(w / 64, w / 32)))
        _draw_stroke(canvas, rng, thickness, int(rng.integers(2, 6)), w / 5)
    return canvas


def _rejection_sample(
    kind: MaskKind,
    h: int,
    w: int,
    rng: Rng,
    missing_range: tuple[float, float],
) -> MaskField:
    lo, hi = missing_range
    draw = _draw_wide if kind is MaskKind.WIDE else _draw_narrow
    for attempt in range(1, MAX_ATTEMPTS + 1):
        missing = draw(h, w, rng).astype(np.bool_)
        fraction = float(missing.mean())
        if lo <= fraction <= hi and 0 < missing.sum() < missing.size:
            logger.debug("%s mask accepted after %d attempt(s)", kind, attempt)
            return ~missing
    raise MaskError(
        f"No {kind} mask with missing fraction in [{lo}, {hi}] after "
        f"{MAX_ATTEMPTS} attempts at {h}x{w}",
        str(kind),
    )


def generate_mask(
    kind: MaskKind | str,
    h: int,
    w: int,
    rng: Rng,
    *,
    missing_range: tuple[float, float] | None = None,
) -> MaskField:
    """
    Generate a mask of the given family (True = known pixel).

    Args:
        kind: Mask family
        h: Height (at least 8 for wide/narrow, 2 otherwise)
        w: Width (same bounds as h)
        rng: Generator used by the free-form families (ignored by the others)
        missing_range: Override of the accepted missing fraction for wide/narrow

    Returns:
        MaskField: The generated mask

    Raises:
        MaskError: On bad dimensions or parity, or if rejection sampling fails
    """
    try:
        kind = MaskKind(kind)
    except ValueError as e:
        raise MaskError(f"Unknown mask kind: {kind!r}") from e

    min_side = 8 if kind in (MaskKind.WIDE, MaskKind.NARROW) else 2
    if h < min_side or w < min_side:
        raise MaskError(f"{kind} masks need h, w >= {min_side}, got {h}x{w}", str(kind))
    if kind in (MaskKind.ALT_LINES, MaskKind.SUPER_RES_2X) and (h % 2 or w % 2):
        raise MaskError(f"{kind} masks need even dimensions, got {h}x{w}", str(kind))

    if kind is MaskKind.HALF:
        return _half(h, w)
    if kind is MaskKind.EXPAND:
        return _expand(h, w)
    if kind is MaskKind.ALT_LINES:
        return _alt_lines(h, w)
    if kind is MaskKind.SUPER_RES_2X:
        return _super_res_2x(h, w)

    default = WIDE_MISSING_RANGE if kind is MaskKind.WIDE else NARROW_MISSING_RANGE
    return _rejection_sample(kind, h, w, rng, missing_range or default)
