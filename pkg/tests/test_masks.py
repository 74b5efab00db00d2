"""
Tests for the masks module.
"""

import numpy as np
import pytest

from diffpaint.exceptions import MaskError
from diffpaint.field import make_rng
from diffpaint.masks import NARROW_MISSING_RANGE, WIDE_MISSING_RANGE, generate_mask
from diffpaint.types import MaskKind


class TestDeterministicKinds:
    """Test cases for Half, Expand, AltLines and SuperRes2x."""

    def test_half(self):
        """Test that the left half is known."""
        m = generate_mask(MaskKind.HALF, 8, 8, make_rng(0))
        assert m[:, :4].all()
        assert not m[:, 4:].any()

    def test_expand(self):
        """Test that the centered h/2 x w/2 window is known."""
        m = generate_mask(MaskKind.EXPAND, 8, 12, make_rng(0))
        assert m[2:6, 3:9].all()
        assert m.sum() == 4 * 6

    def test_alt_lines(self):
        """Test that even rows are known and half the pixels are known."""
        m = generate_mask(MaskKind.ALT_LINES, 4, 4, make_rng(0))
        assert m.mean() == 0.5
        assert m[0].all() and not m[1].any()

    def test_super_res(self):
        """Test that even (y, x) pixels are known."""
        m = generate_mask(MaskKind.SUPER_RES_2X, 4, 4, make_rng(0))
        assert m.mean() == 0.25
        assert m[0, 0] and m[2, 2] and not m[0, 1] and not m[1, 0]

    @pytest.mark.parametrize(
        "kind",
        [MaskKind.HALF, MaskKind.EXPAND, MaskKind.ALT_LINES, MaskKind.SUPER_RES_2X],
    )
    def test_ignores_rng(self, kind):
        """Test that different seeds give identical masks."""
        a = generate_mask(kind, 16, 16, make_rng(1))
        b = generate_mask(kind, 16, 16, make_rng(2))
        assert np.array_equal(a, b)

    def test_accepts_string_kind(self):
        """Test that kinds can be given by their CLI names."""
        m = generate_mask("sr2x", 4, 4, make_rng(0))
        assert m.mean() == 0.25


class TestFreeFormKinds:
    """Test cases for Wide and Narrow masks."""

    def test_wide_fraction(self):
        """Test the Wide missing fraction at 256x256."""
        m = generate_mask(MaskKind.WIDE, 256, 256, make_rng(7))
        lo, hi = WIDE_MISSING_RANGE
        assert lo <= 1.0 - m.mean() <= hi

    def test_narrow_fraction(self):
        """Test the Narrow missing fraction at 256x256."""
        m = generate_mask(MaskKind.NARROW, 256, 256, make_rng(7))
        lo, hi = NARROW_MISSING_RANGE
        assert lo <= 1.0 - m.mean() <= hi

    @pytest.mark.parametrize("kind", [MaskKind.WIDE, MaskKind.NARROW])
    def test_reproducible(self, kind):
        """Test that a fixed seed reproduces the mask."""
        a = generate_mask(kind, 64, 64, make_rng(3))
        b = generate_mask(kind, 64, 64, make_rng(3))
        assert np.array_equal(a, b)

    def test_custom_range(self):
        """Test overriding the accepted missing fraction."""
        m = generate_mask(
            MaskKind.WIDE, 64, 64, make_rng(1), missing_range=(0.1, 0.9)
        )
        assert 0.1 <= 1.0 - m.mean() <= 0.9

    def test_impossible_range(self):
        """Test that exhausting rejection sampling raises MaskError."""
        with pytest.raises(MaskError) as exc_info:
            generate_mask(
                MaskKind.NARROW, 32, 32, make_rng(0), missing_range=(0.99, 1.0)
            )
        assert exc_info.value.kind == "narrow"


class TestMaskInvariants:
    """Properties shared by every mask kind."""

    @pytest.mark.parametrize("kind", list(MaskKind))
    def test_known_and_missing_present(self, kind):
        """Test that every mask has known and missing pixels."""
        m = generate_mask(kind, 64, 64, make_rng(11))
        assert m.dtype == np.bool_
        assert m.shape == (64, 64)
        assert 0 < m.sum() < m.size

    def test_odd_dimensions_rejected(self):
        """Test the parity requirement of AltLines and SuperRes2x."""
        with pytest.raises(MaskError):
            generate_mask(MaskKind.ALT_LINES, 5, 4, make_rng(0))
        with pytest.raises(MaskError):
            generate_mask(MaskKind.SUPER_RES_2X, 4, 7, make_rng(0))

    def test_too_small_for_free_form(self):
        """Test the minimum size of free-form masks."""
        with pytest.raises(MaskError):
            generate_mask(MaskKind.WIDE, 4, 4, make_rng(0))

    def test_unknown_kind(self):
        """Test that unknown kind names raise MaskError."""
        with pytest.raises(MaskError):
            generate_mask("triangle", 8, 8, make_rng(0))
