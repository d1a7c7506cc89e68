import numpy as np
import pytest

from diffcurve import DiffusionCurveVectorizer
from diffcurve.doc import DiffusionCurveDoc
from diffcurve.fields import make_analytic


class TestParams:
    def test_get_set_roundtrip(self):
        est = DiffusionCurveVectorizer(alpha=3e-4, threads=4)
        params = est.get_params()
        assert params["alpha"] == 3e-4
        assert params["threads"] == 4
        clone = DiffusionCurveVectorizer().set_params(**params)
        assert clone.get_params() == params

    def test_unknown_param_rejected(self):
        with pytest.raises(ValueError, match="unknown parameter"):
            DiffusionCurveVectorizer().set_params(gamma=1.0)

    def test_defaults_match_cli(self):
        p = DiffusionCurveVectorizer().get_params()
        assert p["alpha"] == 1e-4
        assert p["dn_threshold"] == 0.05
        assert p["blur_a"] == 0.2 and p["blur_b"] == 0.05


class TestFit:
    def test_not_fitted_errors(self):
        est = DiffusionCurveVectorizer()
        with pytest.raises(RuntimeError, match="fit"):
            est.transform()

    def test_bad_input_shape(self):
        with pytest.raises(ValueError, match="ColorField"):
            DiffusionCurveVectorizer().fit(np.zeros((8, 8)))

    def test_fit_constant_field(self):
        est = DiffusionCurveVectorizer(h_ref=1 / 24, max_iters=5, max_passes=1)
        est.fit(make_analytic("constant", {"color": (0.3, 0.5, 0.7)}))
        assert isinstance(est.doc_, DiffusionCurveDoc)
        assert est.doc_.interior() == []
        img = est.transform(resolution=24)
        assert img.shape == (24, 24, 3)
        assert np.abs(img - [0.3, 0.5, 0.7]).max() < 1e-6

    def test_fit_image_array(self):
        img = np.tile([0.6, 0.6, 0.6], (24, 24, 1))
        est = DiffusionCurveVectorizer(h_ref=1 / 24, max_iters=5, max_passes=1)
        out = est.fit_transform(img, resolution=24)
        assert out.shape == (24, 24, 3)
        score = est.score(img, resolution=24)
        assert score == pytest.approx(0.0, abs=1e-4)
