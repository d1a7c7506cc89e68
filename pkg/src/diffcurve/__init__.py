"""Diffusion-curve vectorization: inverse modeling of diffusion-curve images.

Given a 2D color field, the package finds curve geometry by adjoint-based
shape optimization of a Laplace forward model, then colors, prunes, and blurs
the curves into a compact vector document that re-renders close to the input.
"""

from .curves import Curve, CurveSet
from .doc import DiffusionCurveDoc, DocCurve
from .errors import DiffCurveError
from .estimator import DiffusionCurveVectorizer
from .fields import (
    AnalyticField,
    CoonsMeshField,
    DcBackedField,
    PixelImageField,
    load_coons_mesh,
    load_image,
    make_analytic,
    rasterize_field,
)
from .optimizer import OptimizerConfig, curve_opt, validate_shape_derivative
from .pipeline import PipelineConfig, vectorize
from .render import complexity, render, rmse

__version__ = "0.1.0"

__all__ = [
    "AnalyticField",
    "CoonsMeshField",
    "Curve",
    "CurveSet",
    "DcBackedField",
    "DiffCurveError",
    "DiffusionCurveDoc",
    "DiffusionCurveVectorizer",
    "DocCurve",
    "OptimizerConfig",
    "PipelineConfig",
    "PixelImageField",
    "complexity",
    "curve_opt",
    "load_coons_mesh",
    "load_image",
    "make_analytic",
    "rasterize_field",
    "render",
    "rmse",
    "validate_shape_derivative",
    "vectorize",
]
