import numpy as np
import pytest

from diffcurve.curves import BOUNDARY, circle_curve, rect_boundary_curve
from diffcurve.doc import DiffusionCurveDoc, DocCurve
from diffcurve.errors import DimensionMismatch
from diffcurve.render import (
    complexity,
    render,
    render_doc,
    resolution_shape,
    rmse,
    variable_blur,
)


def boundary_doc_curve(color_fn, bbox=(0, 0, 1, 1), h=1 / 16):
    c = rect_boundary_curve(bbox, h=h)
    col = np.asarray(color_fn(c.vertices), float)
    return DocCurve(c, col, col, role=BOUNDARY)


def const_colors(color):
    return lambda v: np.tile(color, (len(v), 1))


class TestMetrics:
    def test_rmse_identical(self):
        a = np.random.default_rng(0).uniform(0, 1, (8, 8, 3))
        assert rmse(a, a) == 0.0

    def test_rmse_opposite(self):
        assert rmse(np.zeros((4, 4, 3)), np.ones((4, 4, 3))) == 1.0

    def test_rmse_checkerboard(self):
        a = np.zeros((2, 2, 3))
        b = np.zeros((2, 2, 3))
        b[0, 0] = b[1, 1] = 1.0
        assert rmse(a, b) == pytest.approx(np.sqrt(0.5))

    def test_rmse_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            rmse(np.zeros((4, 4, 3)), np.zeros((5, 4, 3)))

    def test_complexity(self):
        doc = DiffusionCurveDoc((0, 0, 1, 1), [boundary_doc_curve(const_colors((0, 0, 0)))])
        assert complexity(doc) == 0.0
        ring = circle_curve((0.5, 0.5), 0.1, 64, id="r")
        n = len(ring.vertices)
        doc.curves.append(DocCurve(ring, np.zeros((n, 3)), np.zeros((n, 3))))
        assert complexity(doc) == pytest.approx(2 * np.pi * 0.1, rel=1e-3)


class TestResolutionShape:
    def test_square(self):
        assert resolution_shape((0, 0, 1, 1), 256) == (256, 256)

    def test_landscape(self):
        assert resolution_shape((0, 0, 1, 0.5), 256) == (256, 128)

    def test_tuple_passthrough(self):
        assert resolution_shape((0, 0, 1, 1), (100, 40)) == (100, 40)


class TestRender:
    def test_constant_reproduction(self):
        doc = DiffusionCurveDoc((0, 0, 1, 1), [boundary_doc_curve(const_colors((0.3, 0.6, 0.9)))])
        img = render(doc, 32, h_ref=1 / 24)
        assert img.shape == (32, 32, 3)
        assert np.abs(img - [0.3, 0.6, 0.9]).max() < 1e-6

    def test_linear_reproduction(self):
        doc = DiffusionCurveDoc(
            (0, 0, 1, 1),
            [boundary_doc_curve(lambda v: np.column_stack([v[:, 0]] * 3), h=1 / 32)],
        )
        img = render(doc, 64, h_ref=1 / 32)
        xs = (np.arange(64) + 0.5) / 64
        assert np.abs(img[:, :, 0] - xs[None, :]).max() < 0.02

    def test_interior_curve_two_tone(self):
        bb = boundary_doc_curve(const_colors((0.1, 0.1, 0.1)))
        ring = circle_curve((0.5, 0.5), 0.25, 48, id="r")
        n = len(ring.vertices)
        inner = DocCurve(ring, np.full((n, 3), 0.9), np.full((n, 3), 0.1))
        doc = DiffusionCurveDoc((0, 0, 1, 1), [bb, inner])
        img = render(doc, 64, h_ref=1 / 32)
        # CCW ring: left side is inside -> bright center, dark corner
        assert img[32, 32, 0] > 0.85
        assert img[2, 2, 0] < 0.15

    def test_blur_zero_identity(self):
        bb = boundary_doc_curve(lambda v: np.column_stack([v[:, 0], v[:, 1], v[:, 0]]))
        doc = DiffusionCurveDoc((0, 0, 1, 1), [bb])
        a = render(doc, 32, h_ref=1 / 16, blur=True)
        b = render(doc, 32, h_ref=1 / 16, blur=False)
        assert np.array_equal(a, b)

    def test_determinism(self):
        bb = boundary_doc_curve(lambda v: np.column_stack([v[:, 0], v[:, 1], v[:, 0]]))
        ring = circle_curve((0.4, 0.6), 0.2, 32, id="r")
        n = len(ring.vertices)
        doc = DiffusionCurveDoc(
            (0, 0, 1, 1),
            [bb, DocCurve(ring, np.full((n, 3), 0.7), np.full((n, 3), 0.3))],
        )
        a = render(doc, 48, h_ref=1 / 24)
        b = render(doc, 48, h_ref=1 / 24)
        assert np.array_equal(a, b)

    def test_resolution_refinement_consistent(self):
        doc = DiffusionCurveDoc(
            (0, 0, 1, 1),
            [boundary_doc_curve(lambda v: np.column_stack([v[:, 0]] * 3), h=1 / 32)],
        )
        lo = render(doc, 32, h_ref=1 / 32)
        hi = render(doc, 64, h_ref=1 / 32)
        down = hi.reshape(32, 2, 32, 2, 3).mean(axis=(1, 3))
        assert rmse(lo, down) < 1e-3

    def test_values_clipped(self):
        doc = DiffusionCurveDoc((0, 0, 1, 1), [boundary_doc_curve(const_colors((1, 0, 1)))])
        img = render_doc(doc, resolution=24, h_ref=1 / 16)
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_blur_softens_edge(self):
        bb = boundary_doc_curve(const_colors((0.5, 0.5, 0.5)))
        ring = circle_curve((0.5, 0.5), 0.25, 64, id="r")
        n = len(ring.vertices)
        sharp = DocCurve(ring, np.ones((n, 3)), np.zeros((n, 3)))
        soft = DocCurve(ring, np.ones((n, 3)), np.zeros((n, 3)), blur=np.full(n, 0.1))
        base = render(DiffusionCurveDoc((0, 0, 1, 1), [bb, sharp]), 64, h_ref=1 / 32)
        blurred = render(DiffusionCurveDoc((0, 0, 1, 1), [bb, soft]), 64, h_ref=1 / 32)
        gb = np.abs(np.diff(blurred[32, :, 0])).max()
        gs = np.abs(np.diff(base[32, :, 0])).max()
        assert gb < 0.8 * gs


class TestVariableBlur:
    def test_tiny_sigma_identity(self):
        img = np.random.default_rng(1).uniform(0, 1, (16, 16, 3))
        out = variable_blur(img, np.full((16, 16), 0.01))
        assert out is img

    def test_uniform_matches_gaussian(self):
        from scipy.ndimage import gaussian_filter

        img = np.zeros((33, 33, 3))
        img[16, 16] = 1.0
        out = variable_blur(img, np.full((33, 33), 2.0), levels=8)
        ref = gaussian_filter(img, sigma=(2, 2, 0), truncate=3.0)
        assert np.abs(out - ref).max() < 1e-6

    def test_zero_region_untouched(self):
        img = np.random.default_rng(2).uniform(0, 1, (16, 16, 3))
        sig = np.zeros((16, 16))
        sig[:, 12:] = 3.0
        out = variable_blur(img, sig)
        assert np.array_equal(out[:, :4], img[:, :4])
