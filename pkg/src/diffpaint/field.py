"""
Dense fields, binary masks, resampling and seeded Gaussian sampling.

Fields are float64 arrays of shape (height, width, channels); masks are bool
arrays of shape (height, width) with True marking known pixels.
"""

import numpy as np

from .exceptions import FieldError
from .types import Field, MaskField, Rng


def make_rng(seed: int) -> Rng:
    """Create a PCG64 generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(seed))


def fork_rng(seed: int, index: int) -> Rng:
    """Derive an independent substream for work item ``index`` of a run."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def as_field(data: np.ndarray) -> Field:
    """Coerce an array to a (h, w, c) float64 field."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise FieldError("Field must be a non-empty (h, w, c) array", actual=arr.shape)
    return arr


def as_mask(bits: np.ndarray) -> MaskField:
    """Coerce an array of 0/1 values to a (h, w) boolean mask."""
    arr = np.asarray(bits)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise FieldError("Mask must be a non-empty (h, w) array", actual=arr.shape)
    if arr.dtype != np.bool_:
        if not np.isin(arr, (0, 1)).all():
            raise FieldError("Mask values must be 0 or 1")
        arr = arr.astype(np.bool_)
    return arr


def check_same_shape(a: Field, b: Field) -> None:
    """Raise FieldError unless two fields have identical shapes."""
    if a.shape != b.shape:
        raise FieldError("Field shapes differ", expected=a.shape, actual=b.shape)


def check_mask_matches(x: Field, m: MaskField) -> None:
    """Raise FieldError unless the mask covers the field's pixel grid."""
    if m.shape != x.shape[:2]:
        raise FieldError(
            "Mask does not match field dimensions", expected=x.shape[:2], actual=m.shape
        )


def gaussian_field(rng: Rng, h: int, w: int, c: int) -> Field:
    """Draw an (h, w, c) field of i.i.d. standard normal values."""
    if h < 1 or w < 1 or c < 1:
        raise FieldError("Field dimensions must be >= 1", actual=(h, w, c))
    return rng.standard_normal((h, w, c))


def _axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel centers, clamped to the edge samples.
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def bilinear_resize(x: Field, out_h: int, out_w: int) -> Field:
    """
    Resize a field with bilinear interpolation and half-pixel centers.

    Channels are interpolated independently; every output value is a convex
    combination of input values, so the output range stays within the input's.

    Raises:
        FieldError: If an output dimension is < 1
    """
    if out_h < 1 or out_w < 1:
        raise FieldError("Output dimensions must be >= 1", actual=(out_h, out_w))
    h, w, _ = x.shape
    if (h, w) == (out_h, out_w):
        return x.copy()

    y0, y1, wy = _axis_weights(h, out_h)
    x0, x1, wx = _axis_weights(w, out_w)

    wy = wy[:, None, None]
    wx = wx[None, :, None]
    top = x[y0][:, x0] * (1.0 - wx) + x[y0][:, x1] * wx
    bottom = x[y1][:, x0] * (1.0 - wx) + x[y1][:, x1] * wx
    return top * (1.0 - wy) + bottom * wy


def mask_downsample(m: MaskField, factor: int) -> MaskField:
    """
    Downsample a mask by an integer factor.

    A coarse pixel is known only if every fine pixel in its footprint is known.

    Raises:
        FieldError: If factor < 1 or does not divide both dimensions
    """
    h, w = m.shape
    if factor < 1 or h % factor or w % factor:
        raise FieldError(f"Factor {factor} does not divide mask of shape {m.shape}")
    if factor == 1:
        return m.copy()
    blocks = m.reshape(h // factor, factor, w // factor, factor)
    return blocks.all(axis=(1, 3))


def composite(known: Field, unknown: Field, m: MaskField) -> Field:
    """Take known values where the mask is set and unknown values elsewhere."""
    check_same_shape(known, unknown)
    check_mask_matches(known, m)
    return np.where(m[:, :, None], known, unknown)
