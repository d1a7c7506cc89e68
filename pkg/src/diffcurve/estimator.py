"""Estimator-style facade over the vectorization pipeline.

Follows the scikit-learn convention (constructor stores hyperparameters,
``fit`` computes, fitted attributes end in an underscore, ``get_params`` /
``set_params`` round-trip) without depending on scikit-learn itself.
"""

from __future__ import annotations

import numpy as np

from . import boundary as bnd
from .render import complexity as doc_complexity
from .render import render as render_image
from .render import rmse as image_rmse
from . import pipeline
from .curves import BOUNDARY, CurveSet, rect_boundary_curve
from .fields import ColorField, PixelImageField
from .optimizer import OptimizerConfig


class DiffusionCurveVectorizer:
    """Fit diffusion-curve geometry to a color field; transform renders it.

    Parameters mirror the CLI flags; see the pipeline and optimizer configs
    for semantics and defaults.
    """

    def __init__(
        self,
        alpha=1e-4,
        epsilon=1e-3,
        epsilon0=None,
        m=2,
        canny_low=0.1,
        canny_high=0.2,
        delta=None,
        dn_threshold=0.05,
        blur_a=0.2,
        blur_b=0.05,
        max_passes=6,
        max_iters=300,
        h_ref=1.0 / 64,
        threads=1,
    ):
        self.alpha = alpha
        self.epsilon = epsilon
        self.epsilon0 = epsilon0
        self.m = m
        self.canny_low = canny_low
        self.canny_high = canny_high
        self.delta = delta
        self.dn_threshold = dn_threshold
        self.blur_a = blur_a
        self.blur_b = blur_b
        self.max_passes = max_passes
        self.max_iters = max_iters
        self.h_ref = h_ref
        self.threads = threads

    _PARAM_NAMES = (
        "alpha",
        "epsilon",
        "epsilon0",
        "m",
        "canny_low",
        "canny_high",
        "delta",
        "dn_threshold",
        "blur_a",
        "blur_b",
        "max_passes",
        "max_iters",
        "h_ref",
        "threads",
    )

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._PARAM_NAMES}

    def set_params(self, **params):
        for key, value in params.items():
            if key not in self._PARAM_NAMES:
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def _as_field(self, X):
        if isinstance(X, ColorField):
            return X
        arr = np.asarray(X, float)
        if arr.ndim == 3 and arr.shape[2] == 3:
            return PixelImageField(arr)
        raise ValueError("X must be a ColorField or an (H, W, 3) array in [0, 1]")

    def _config(self):
        return pipeline.PipelineConfig(
            epsilon0=self.epsilon0,
            max_passes=self.max_passes,
            optimizer=OptimizerConfig(
                alpha=self.alpha,
                epsilon=self.epsilon,
                max_iters=self.max_iters,
                h_ref=self.h_ref,
            ),
            delta=self.delta,
            dn_threshold=self.dn_threshold,
            blur_a=self.blur_a,
            blur_b=self.blur_b,
            m=self.m,
        )

    def fit(self, X, y=None, boundary=None):
        """Vectorize a color field (or image array); returns self."""
        field = self._as_field(X)
        if boundary is None:
            if isinstance(field, PixelImageField):
                boundary = bnd.canny_boundaries(
                    field.data, self.canny_low, self.canny_high, boundary_h=self.h_ref
                )
            else:
                boundary = CurveSet(
                    [rect_boundary_curve(field.bbox, h=self.h_ref)], [BOUNDARY]
                )
        self.doc_, self.reports_ = pipeline.vectorize(
            field, boundary, self._config(), threads=self.threads
        )
        self.rmse_ = None
        return self

    def transform(self, X=None, resolution=256):
        """Render the fitted document; X is ignored (interface parity)."""
        self._check_fitted()
        return render_image(self.doc_, resolution)

    def fit_transform(self, X, y=None, resolution=256, **fit_kw):
        return self.fit(X, y, **fit_kw).transform(resolution=resolution)

    def score(self, X, resolution=256):
        """Negative RMSE against the input field (higher is better)."""
        self._check_fitted()
        from .fields import rasterize_field

        field = self._as_field(X)
        return -image_rmse(
            self.transform(resolution=resolution), rasterize_field(field, resolution)
        )

    def _check_fitted(self):
        if not hasattr(self, "doc_"):
            raise RuntimeError("not fitted; call fit first")
