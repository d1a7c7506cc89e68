"""Diffusion-curve document: geometry + per-vertex colors and blur, JSON I/O.

Schema v1: ``{version: 1, bbox: [x0, y0, x1, y1], curves: [{id, closed, role,
points: [[x, y]...], left: [[r, g, b]...], right: [[r, g, b]...],
blur: [s...]}]}``.  Coordinates are normalized (longest canvas axis = 1),
colors linear in [0, 1].
"""

from __future__ import annotations

import json

import numpy as np

from .curves import BOUNDARY, INTERIOR, Curve

SCHEMA_VERSION = 1


class DocCurve:
    """One curve with aligned per-vertex attributes."""

    def __init__(self, curve, left, right, blur=None, role=INTERIOR):
        self.curve = curve
        n = len(curve.vertices)
        self.left = np.asarray(left, float).reshape(n, 3)
        self.right = np.asarray(right, float).reshape(n, 3)
        self.blur = (
            np.zeros(n) if blur is None else np.asarray(blur, float).reshape(n)
        )
        self.role = role

    @property
    def id(self):
        return self.curve.id

    def validate(self):
        n = len(self.curve.vertices)
        if self.left.shape != (n, 3):
            raise ValueError(f"curve {self.id!r}: field 'left' misaligned")
        if self.right.shape != (n, 3):
            raise ValueError(f"curve {self.id!r}: field 'right' misaligned")
        if self.blur.shape != (n,):
            raise ValueError(f"curve {self.id!r}: field 'blur' misaligned")
        if (self.blur < 0).any():
            raise ValueError(f"curve {self.id!r}: field 'blur' must be >= 0")
        if self.role not in (BOUNDARY, INTERIOR):
            raise ValueError(f"curve {self.id!r}: field 'role' invalid")
        if self.role == BOUNDARY and (self.blur != 0).any():
            raise ValueError(f"curve {self.id!r}: field 'blur' must be 0 on boundary")
        self.curve.validate()


class DiffusionCurveDoc:
    """A canvas bbox plus a list of colored curves."""

    def __init__(self, bbox, curves=()):
        self.bbox = tuple(float(v) for v in bbox)
        self.curves = list(curves)

    def boundary(self):
        return [c for c in self.curves if c.role == BOUNDARY]

    def interior(self):
        return [c for c in self.curves if c.role == INTERIOR]

    def validate(self):
        x0, y0, x1, y1 = self.bbox
        if not (x1 > x0 and y1 > y0):
            raise ValueError("field 'bbox' is degenerate")
        for c in self.curves:
            c.validate()

    def to_json(self):
        payload = {
            "version": SCHEMA_VERSION,
            "bbox": list(self.bbox),
            "curves": [
                {
                    "id": c.id,
                    "closed": c.curve.closed,
                    "role": c.role,
                    "points": c.curve.vertices.tolist(),
                    "left": c.left.tolist(),
                    "right": c.right.tolist(),
                    "blur": c.blur.tolist(),
                }
                for c in self.curves
            ],
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if data.get("version") != SCHEMA_VERSION:
            raise ValueError("field 'version' must be 1")
        if "bbox" not in data or len(data["bbox"]) != 4:
            raise ValueError("field 'bbox' missing or malformed")
        curves = []
        for k, entry in enumerate(data.get("curves", [])):
            for key in ("points", "left", "right", "blur"):
                if key not in entry:
                    raise ValueError(f"curve #{k}: field {key!r} missing")
            curve = Curve(
                np.asarray(entry["points"], float),
                closed=bool(entry.get("closed", False)),
                id=str(entry.get("id", f"curve{k}")),
            )
            curves.append(
                DocCurve(
                    curve,
                    entry["left"],
                    entry["right"],
                    entry["blur"],
                    role=entry.get("role", INTERIOR),
                )
            )
        doc = cls(tuple(data["bbox"]), curves)
        doc.validate()
        return doc

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())
