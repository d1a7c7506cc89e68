import json

import numpy as np
import pytest
from scipy import ndimage

from diffcurve import boundary as bd
from diffcurve.curves import BOUNDARY, curves_intersect
from diffcurve.fields import CoonsMeshField, CoonsPatch


def straight_edge(p0, p1):
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    return np.array([p0, p0 + (p1 - p0) / 3, p0 + 2 * (p1 - p0) / 3, p1])


def straight_patch(x0, y0, x1, y1, colors=None):
    if colors is None:
        colors = [[0.2, 0.2, 0.2]] * 4
    return CoonsPatch(
        bottom=straight_edge((x0, y0), (x1, y0)),
        top=straight_edge((x0, y1), (x1, y1)),
        left=straight_edge((x0, y0), (x0, y1)),
        right=straight_edge((x1, y0), (x1, y1)),
        corner_colors=colors,
    )


class TestCanny:
    def test_constant_image_bbox_only(self):
        img = np.full((32, 48, 3), 0.6)
        out = bd.canny_boundaries(img)
        assert len(out.curves) == 1
        assert out.curves[0].id == "bbox"
        assert out.roles == [BOUNDARY]
        # longest axis normalized to 1
        x0, y0, x1, y1 = out.curves[0].vertices.min(0).tolist() + out.curves[
            0
        ].vertices.max(0).tolist()
        assert (x1 - x0, y1 - y0) == pytest.approx((1.0, 32 / 48))

    def test_vertical_step_edge(self):
        img = np.zeros((48, 48, 3))
        img[:, 24:] = 1.0
        out = bd.canny_boundaries(img)
        edges = out.curves[1:]
        assert len(edges) >= 1
        longest = max(edges, key=lambda c: c.length())
        # edge pixels sit at the step, x ~ 24/48 = 0.5, within ~1.5 px
        assert np.abs(longest.vertices[:, 0] - 0.5).max() < 1.5 / 48
        assert longest.length() > 0.6

    def test_invalid_thresholds(self):
        img = np.zeros((8, 8, 3))
        with pytest.raises(ValueError):
            bd.canny_boundaries(img, low=0.3, high=0.2)

    def test_hysteresis_subset(self, rng):
        img = rng.uniform(0, 1, (40, 40, 3))
        img = ndimage.gaussian_filter(img, (2, 2, 0))
        hi = bd.canny_edge_mask(img, 0.1, 0.2)
        lo = bd.canny_edge_mask(img, 0.05, 0.1)
        # every strict-threshold edge pixel lies on (or next to) a loose one
        grown = ndimage.binary_dilation(lo, np.ones((3, 3), bool))
        assert (hi & ~grown).sum() == 0

    def test_no_crossings_in_output(self, rng):
        img = ndimage.gaussian_filter(rng.uniform(0, 1, (48, 48, 3)), (1.5, 1.5, 0))
        out = bd.canny_boundaries(img, 0.05, 0.15)
        cs = out.curves[1:]
        for i in range(len(cs)):
            for j in range(i + 1, len(cs)):
                assert not curves_intersect(cs[i], cs[j])


class TestMeshBoundaries:
    def test_single_patch_rectangle(self):
        f = CoonsMeshField([straight_patch(0, 0, 1, 0.5)])
        out = bd.mesh_boundaries(f)
        assert len(out.curves) == 1
        c = out.curves[0]
        assert c.closed
        assert c.length() == pytest.approx(3.0, abs=1e-9)
        # all four corners present
        for corner in [(0, 0), (1, 0), (1, 0.5), (0, 0.5)]:
            d = np.linalg.norm(c.vertices - corner, axis=1).min()
            assert d < 1e-9

    def test_two_by_two_grid_single_loop(self):
        patches = [
            straight_patch(i * 0.5, j * 0.5, (i + 1) * 0.5, (j + 1) * 0.5)
            for i in range(2)
            for j in range(2)
        ]
        out = bd.mesh_boundaries(CoonsMeshField(patches))
        assert len(out.curves) == 1
        assert out.curves[0].closed
        assert out.curves[0].length() == pytest.approx(4.0, abs=1e-9)

    def test_curved_edge_sampled_on_cubic(self):
        bottom = np.array([[0, 0], [0.33, -0.1], [0.66, -0.1], [1, 0]], float)
        patch = CoonsPatch(
            bottom=bottom,
            top=straight_edge((0, 1), (1, 1)),
            left=straight_edge((0, 0), (0, 1)),
            right=straight_edge((1, 0), (1, 1)),
            corner_colors=[[0.5, 0.5, 0.5]] * 4,
        )
        out = bd.mesh_boundaries(CoonsMeshField([patch]), samples_per_edge=8)
        c = out.curves[0]
        # vertices below the baseline must be exact cubic samples
        dense = bd._bezier_eval(bottom, np.linspace(0, 1, 9))
        lower = c.vertices[c.vertices[:, 1] < -1e-6]
        assert len(lower) >= 5
        for p in lower:
            assert np.linalg.norm(dense - p, axis=1).min() < 1e-9


class TestLoadCurveFile:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "curves.json"
        path.write_text(
            json.dumps(
                {
                    "curves": [
                        {"points": [[0.1, 0.1], [0.9, 0.2]], "closed": False, "id": "a"},
                        {"points": [[0.3, 0.3], [0.7, 0.3], [0.5, 0.8]], "closed": True},
                    ]
                }
            )
        )
        out = bd.load_curve_file(path)
        assert [c.id for c in out.curves] == ["a", "user1"]
        assert out.curves[1].closed
        assert out.roles == [BOUNDARY, BOUNDARY]
