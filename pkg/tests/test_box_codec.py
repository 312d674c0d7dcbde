"""Tests for boxes, anchors and residual encoding."""

import logging
import math

import numpy as np
import pytest

from src.boxes.anchors import ANCHOR_SIZES, generate_anchors
from src.boxes.box import Box7, Residual7, boxes_to_array, normalize_angle
from src.boxes.codec import BoxCodec, decode, decode_boxes, encode, encode_boxes
from src.core.errors import ConfigurationError, GeometryError


def _random_pairs(rng: np.random.Generator, n: int):
    """Anchors and boxes whose heading difference stays within (-pi/2, pi/2)."""
    anchors = np.column_stack(
        [
            rng.uniform(0.0, 70.0, n),
            rng.uniform(-40.0, 40.0, n),
            rng.uniform(-2.0, 0.0, n),
            rng.uniform(0.5, 5.0, n),
            rng.uniform(0.5, 2.0, n),
            rng.uniform(1.0, 2.0, n),
            rng.choice([0.0, math.pi / 2], n),
        ]
    )
    boxes = anchors.copy()
    boxes[:, :3] += rng.normal(0.0, 1.0, (n, 3))
    boxes[:, 3:6] *= rng.uniform(0.5, 2.0, (n, 3))
    boxes[:, 6] = normalize_angle(anchors[:, 6] + rng.uniform(-1.5, 1.5, n))
    return anchors, boxes


class TestBox7:
    """Field validation and heading normalization."""

    def test_heading_wrapped(self):
        """Headings land in (-pi, pi]; -pi maps to pi."""
        assert Box7(0, 0, 0, 1, 1, 1, 3 * math.pi / 2).theta == pytest.approx(-math.pi / 2)
        assert Box7(0, 0, 0, 1, 1, 1, -math.pi).theta == pytest.approx(math.pi)

    @pytest.mark.parametrize("values", [(0, 0, 0, 0, 1, 1, 0), (0, 0, 0, 1, -1, 1, 0), (math.nan, 0, 0, 1, 1, 1, 0)])
    def test_invalid(self, values):
        with pytest.raises(GeometryError):
            Box7(*values)

    def test_array_helpers(self):
        box = Box7(1, 2, 3, 4, 5, 6, 0.5)
        assert Box7.from_array(box.to_array()) == box
        assert boxes_to_array([]).shape == (0, 7)
        assert box.volume == 120.0
        assert (box.bottom, box.top) == (0.0, 6.0)


class TestCodec:
    """encode/decode round trips."""

    def test_round_trip_random(self):
        """1000 random pairs decode back to the encoded box."""
        anchors, boxes = _random_pairs(np.random.default_rng(0), 1000)
        decoded, n_clamped = decode_boxes(encode_boxes(boxes, anchors), anchors)
        assert n_clamped == 0
        np.testing.assert_allclose(decoded[:, :6], boxes[:, :6], atol=1e-9)
        np.testing.assert_allclose(np.sin(decoded[:, 6] - boxes[:, 6]), 0.0, atol=1e-9)
        np.testing.assert_allclose(np.cos(decoded[:, 6] - boxes[:, 6]), 1.0, atol=1e-9)

    def test_identity_residual_is_zero(self):
        """A box equal to its anchor encodes to all zeros."""
        anchor = Box7(10.0, 0.0, -1.0, 3.9, 1.6, 1.56, 0.0)
        assert encode(anchor, anchor).to_array().tolist() == [0.0] * 7
        assert decode(Residual7(0, 0, 0, 0, 0, 0, 0), anchor) == anchor

    def test_known_residual(self):
        """Offsets scale by the anchor diagonal and height; sizes are log ratios."""
        anchor = Box7(0.0, 0.0, 0.0, 4.0, 3.0, 2.0, 0.0)
        box = Box7(5.0, -2.5, 1.0, 8.0, 3.0, 1.0, math.pi / 6)
        residual = encode(box, anchor)
        assert residual.dx == pytest.approx(1.0)
        assert residual.dy == pytest.approx(-0.5)
        assert residual.dz == pytest.approx(0.5)
        assert residual.dw == pytest.approx(0.0)
        assert residual.dl == pytest.approx(math.log(2.0))
        assert residual.dh == pytest.approx(math.log(0.5))
        assert residual.dtheta == pytest.approx(0.5)

    def test_heading_ambiguous_beyond_quarter_turn(self):
        """Headings mirrored about pi/2 share a residual; decoding returns the one near the anchor."""
        anchor = Box7(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0)
        forward = Box7(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.3)
        backward = Box7(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, math.pi - 0.3)
        assert encode(backward, anchor).dtheta == pytest.approx(encode(forward, anchor).dtheta)
        assert decode(encode(backward, anchor), anchor).theta == pytest.approx(0.3)

    def test_out_of_range_dtheta_clamped_and_counted(self, caplog):
        """|dtheta| > 1 decodes as +-pi/2 and is logged."""
        codec = BoxCodec()
        anchor = Box7(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0)
        with caplog.at_level(logging.WARNING):
            box = codec.decode(Residual7(0, 0, 0, 0, 0, 0, 1.7), anchor)
            codec.decode(Residual7(0, 0, 0, 0, 0, 0, -3.0), anchor)
        assert box.theta == pytest.approx(math.pi / 2)
        assert codec.clamp_count == 2
        assert "Clamped 1 heading residuals" in caplog.text

    def test_huge_size_residuals_stay_finite(self):
        """Log-size residuals are bounded before exp()."""
        anchors = np.array([[0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.0]])
        decoded, _ = decode_boxes(np.array([[0.0, 0.0, 0.0, 800.0, 800.0, -800.0, 0.0]]), anchors)
        assert np.all(np.isfinite(decoded))
        assert decoded[0, 5] > 0.0


class TestAnchors:
    """Anchor grid layout."""

    def test_count_and_layout(self):
        """(H1 * W1 * A) anchors; slot a = class * n_headings + heading."""
        grid = generate_anchors((0.0, 8.0, -4.0, 4.0), (4, 4), ("Pedestrian", "Cyclist"), (0.0, math.pi / 2))
        assert len(grid) == 4 * 4 * 4
        assert grid.anchors_per_cell == 4
        index = grid.flat_index(1, 2, 3)
        assert index == (1 * 4 + 2) * 4 + 3
        x, y, z, l, w, h, theta = grid.boxes[index]
        assert (x, y) == (5.0, -1.0)
        assert grid.classes[grid.class_ids[index]] == "Cyclist"
        size = ANCHOR_SIZES["Cyclist"]
        assert (l, w, h, z) == (size.length, size.width, size.height, size.z_center)
        assert theta == pytest.approx(math.pi / 2)

    def test_half_resolution_centers(self):
        """A 100x88 head over the car extent puts anchors every 0.8 m, offset by half a cell."""
        grid = generate_anchors((0.0, 70.4, -40.0, 40.0), (100, 88), ("Car",), (0.0, math.pi / 2))
        assert grid.boxes[0, 0] == pytest.approx(0.4)
        assert grid.boxes[0, 1] == pytest.approx(-39.6)
        assert grid.boxes[grid.flat_index(0, 1, 0), 0] == pytest.approx(1.2)

    def test_unknown_class(self):
        with pytest.raises(ConfigurationError):
            generate_anchors((0.0, 8.0, -4.0, 4.0), (4, 4), ("Bus",), (0.0,))

    def test_empty_headings(self):
        with pytest.raises(ConfigurationError):
            generate_anchors((0.0, 8.0, -4.0, 4.0), (4, 4), ("Car",), ())
