"""Forward rendering of diffusion-curve documents and quality metrics.

Rendering solves the color Laplace problem per component with the document's
per-vertex left/right colors as Dirichlet data, rasterizes the quadratic
interpolant at pixel centers, then solves a second Laplace problem for the
blur-kernel field and applies a variable Gaussian blur.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from . import fem
from .curves import BOUNDARY, Curve, CurveSet
from .errors import DimensionMismatch, UnrenderableDoc
from .meshing import partition_components, triangulate

RENDER_H_REF = 1.0 / 96
MIN_SIGMA_PX = 0.05  # blur below this is treated as the identity


def _arclengths(pts, closed):
    d = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(d)])
    total = s[-1] + (np.linalg.norm(pts[0] - pts[-1]) if closed else 0.0)
    return s, total


def _interp_attr(curve, values, sample_s, total):
    """Interpolate per-vertex values (N, C) at arclength positions."""
    sv, tv = _arclengths(curve.vertices, curve.closed)
    values = np.atleast_2d(np.asarray(values, float))
    if values.shape[0] != len(curve.vertices):
        values = values.T
    if curve.closed:
        xs = np.append(sv, tv)
        ys = np.vstack([values, values[:1]])
    else:
        xs, ys = sv, values
    sample = np.clip(sample_s, xs[0], xs[-1])
    out = np.empty((len(sample), ys.shape[1]))
    for c in range(ys.shape[1]):
        out[:, c] = np.interp(sample, xs, ys[:, c])
    return out


def _chain_sample_arclengths(chain):
    pts = chain.points
    s, total = _arclengths(pts, chain.closed)
    if chain.closed:
        mids = 0.5 * (np.append(s, total)[:-1] + np.append(s, total)[1:])
        seg = np.append(np.diff(s), total - s[-1])
        mids = s + 0.5 * seg
    else:
        mids = 0.5 * (s[:-1] + s[1:])
    return s, mids


def solve_doc_component(component, doc_curves, h_ref=RENDER_H_REF, attr="color"):
    """Mesh a component and solve Laplace with document attributes as bc.

    ``attr`` is "color" (3 channels, left/right) or "blur" (1 channel,
    side-symmetric).  Returns (mesh, solution FemField).
    """
    by_id = {dc.id: dc for dc in doc_curves}
    interior = [dc.curve for dc in doc_curves if dc.role != BOUNDARY]
    try:
        mesh = triangulate(component, interior, h_ref=h_ref)
    except Exception as exc:
        raise UnrenderableDoc(str(exc)) from exc

    channels = 3 if attr == "color" else 1
    bc = np.zeros((mesh.n_nodes, channels))
    for chain in mesh.chains:
        dc = by_id.get(chain.curve.id)
        if dc is None:
            continue  # synthesized bbox chain keeps zero bc unless in doc
        s_nodes, s_mids = _chain_sample_arclengths(chain)

        def vals(side_attr):
            if attr == "blur":
                data = dc.blur[:, None]
            else:
                data = getattr(dc, side_attr)
            node_v = _interp_attr(dc.curve, data, s_nodes, None)
            mid_v = _interp_attr(dc.curve, data, s_mids, None)
            return node_v, mid_v

        if chain.role == "outer":
            side = "left" if chain.side == "left" else "right"
            nv, mv = vals(side)
            bc[chain.nodes] = nv
            bc[chain.mid_nodes] = mv
        else:
            nv, mv = vals("left")
            bc[chain.nodes] = nv
            bc[chain.mid_nodes] = mv
            nv, mv = vals("right")
            bc[chain.nodes_right] = nv
            bc[chain.mid_nodes_right] = mv
    sol = fem.solve_laplace(mesh, bc)
    return mesh, sol


def _assign_components(doc, components):
    """Map each interior doc curve to the component containing it."""
    buckets = [[] for _ in components]
    for dc in doc.interior():
        votes = [comp.contains(dc.curve.vertices).mean() for comp in components]
        best = int(np.argmax(votes))
        if votes[best] > 0.5:
            buckets[best].append(dc)
    return buckets


def _doc_boundary_set(doc):
    cs = CurveSet()
    for dc in doc.boundary():
        cs.add(dc.curve, BOUNDARY)
    return cs


def _raster_grid(bbox, width, height):
    x0, y0, x1, y1 = bbox
    xs = x0 + (np.arange(width) + 0.5) * (x1 - x0) / width
    ys = y0 + (np.arange(height) + 0.5) * (y1 - y0) / height
    xx, yy = np.meshgrid(xs, ys)
    return np.column_stack([xx.ravel(), yy.ravel()])


def resolution_shape(bbox, resolution):
    """(width, height) for an int resolution along the longest bbox axis."""
    if isinstance(resolution, (tuple, list)):
        return int(resolution[0]), int(resolution[1])
    x0, y0, x1, y1 = bbox
    w, h = x1 - x0, y1 - y0
    if w >= h:
        return int(resolution), max(2, round(resolution * h / w))
    return max(2, round(resolution * w / h)), int(resolution)


def render(doc, resolution, h_ref=RENDER_H_REF, blur=True):
    """Render a document to an (H, W, 3) raster in [0, 1]."""
    doc.validate()
    width, height = resolution_shape(doc.bbox, resolution)
    if width < 2 or height < 2:
        raise ValueError("resolution must be at least 2x2")
    try:
        components = partition_components(doc.bbox, _doc_boundary_set(doc))
    except Exception as exc:
        raise UnrenderableDoc(str(exc)) from exc
    buckets = _assign_components(doc, components)

    pts = _raster_grid(doc.bbox, width, height)
    img = np.zeros((height * width, 3))
    kfield = np.zeros(height * width)
    covered = np.zeros(height * width, bool)
    any_blur = any((dc.blur > 0).any() for dc in doc.curves)

    for comp, bucket in zip(components, buckets):
        curves = bucket + [
            dc for dc in doc.boundary() if _curve_on_component(dc, comp)
        ]
        mesh, u = solve_doc_component(comp, curves, h_ref, attr="color")
        tri_ids, bary = fem.locate_points(mesh, pts)
        hit = tri_ids >= 0
        sel = hit & ~covered
        if sel.any():
            vals = u.evaluate(tri_ids[sel], bary[sel])
            lo = u.coeffs.min(axis=0)
            hi = u.coeffs.max(axis=0)
            img[sel] = np.clip(vals, lo, hi)
            if any_blur and blur:
                _, ksol = solve_doc_component(comp, curves, h_ref, attr="blur")
                kv = ksol.evaluate(tri_ids[sel], bary[sel])[:, 0]
                kfield[sel] = np.clip(kv, 0.0, None)
            covered |= hit

    img = img.reshape(height, width, 3)
    covered = covered.reshape(height, width)
    if not covered.all():
        img = _fill_uncovered(img, covered)
    img = np.clip(img, 0.0, 1.0)
    if blur and any_blur:
        # the blur field is a kernel *size* in normalized units; with 3-sigma
        # truncation a kernel of diameter K spans 6 sigma
        img = variable_blur(img, kfield.reshape(height, width) * max(width, height) / 6.0)
    return img


def _curve_on_component(dc, comp, tol=1e-7):
    """Whether a boundary doc curve coincides with part of this component."""
    v = dc.curve.vertices
    inside = comp.contains(v)
    if inside.any():
        return True
    # border curves: vertices lie on the outer/hole polygons
    from .initializer import _dist_to_curves

    d = _dist_to_curves(v, [Curve(comp.outer, closed=True)])
    for h in comp.holes:
        d = np.minimum(d, _dist_to_curves(v, [Curve(h, closed=True)]))
    return bool((d <= tol).mean() > 0.5)


def _fill_uncovered(img, covered):
    idx = ndimage.distance_transform_edt(
        ~covered, return_distances=False, return_indices=True
    )
    return img[idx[0], idx[1]]


def variable_blur(img, sigma_px, levels=8):
    """Per-pixel Gaussian blur with spatially varying sigma (in pixels).

    Approximated by blending a small stack of uniformly blurred images,
    interpolated linearly in sigma; exact where sigma is 0.
    """
    smax = float(sigma_px.max())
    if smax < MIN_SIGMA_PX:
        return img
    sigmas = np.linspace(0.0, smax, levels + 1)
    stack = [img]
    for s in sigmas[1:]:
        stack.append(ndimage.gaussian_filter(img, sigma=(s, s, 0), truncate=3.0))
    s = np.clip(sigma_px, 0.0, smax)
    pos = s / smax * levels
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, levels)
    w = (pos - lo)[..., None]
    stack = np.stack(stack)
    out = (1 - w) * stack[lo, np.arange(img.shape[0])[:, None], np.arange(img.shape[1])[None, :]]
    out += w * stack[hi, np.arange(img.shape[0])[:, None], np.arange(img.shape[1])[None, :]]
    return out


def render_doc(doc, resolution=512, **kw):
    return render(doc, resolution, **kw)


def rmse(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def complexity(doc):
    """Total length of interior curves (normalized units)."""
    return float(sum(dc.curve.length() for dc in doc.interior()))
