"""Placement of new curves from residual iso-contours.

The squared pointwise error of the current diffusion solve is rasterized on a
coarse grid; iso-contours of that raster seed new curves.  The "global" scheme
picks several iso-values by an optimal piecewise-linear fit of the sorted
residual profile, the "local" scheme takes a single high iso-value near the
residual peak.
"""

from __future__ import annotations

import numpy as np

from . import fem
from .curves import (
    Curve,
    curves_intersect,
    extract_isocontours,
    remesh_curve,
)
from .errors import InsufficientSamples, NoCurvesFound
from .meshing import triangulate

RESIDUAL_TOL = 1e-12  # max squared error below which a region counts as solved
MIN_ISO_FRACTION = 1e-6  # iso values are clamped to this fraction of the peak
LOCAL_ISO_FRACTION = 0.9


def residual_field(curves, field, component, h_ref=1.0 / 64, grid_res=64):
    """Raster of the squared diffusion error over the component's bbox.

    Returns (grid, extent): ``grid[j, i]`` is the channel-summed squared
    error at grid position (j, i); points outside the component are 0.
    """
    mesh = triangulate(component, list(curves), h_ref=h_ref)
    bc = fem.dirichlet_from_field(mesh, field)
    u = fem.solve_laplace(mesh, bc)

    x0, y0, x1, y1 = component.bbox()
    xs = np.linspace(x0, x1, grid_res)
    ys = np.linspace(y0, y1, grid_res)
    xx, yy = np.meshgrid(xs, ys)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    uvals, inside = fem.evaluate_at_points(u, pts)

    fx0, fy0, fx1, fy1 = field.bbox
    cl = np.column_stack([np.clip(pts[:, 0], fx0, fx1), np.clip(pts[:, 1], fy0, fy1)])
    ivals = field.sample(cl)
    err = ((uvals - ivals) ** 2).sum(axis=1)
    err[~inside] = 0.0
    return err.reshape(grid_res, grid_res), (x0, y0, x1, y1)


def _segment_error_table(y):
    """err[i, j] = squared L2 error of the chord from (i, y_i) to (j, y_j).

    Uses prefix sums so each entry is O(1).
    """
    n = len(y)
    k = np.arange(n, dtype=float)
    ps_y = np.concatenate([[0.0], np.cumsum(y)])
    ps_ky = np.concatenate([[0.0], np.cumsum(k * y)])
    ps_y2 = np.concatenate([[0.0], np.cumsum(y * y)])
    ps_k = np.concatenate([[0.0], np.cumsum(k)])
    ps_k2 = np.concatenate([[0.0], np.cumsum(k * k)])

    i = np.arange(n)[:, None].astype(float)
    j = np.arange(n)[None, :].astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = (y[None, :] - y[:, None]) / (j - i)
    slope = np.where(j > i, slope, 0.0)
    intercept = y[:, None] - slope * i

    ii = np.arange(n)
    jj = np.arange(n)
    s_y = ps_y[jj + 1][None, :] - ps_y[ii][:, None]
    s_ky = ps_ky[jj + 1][None, :] - ps_ky[ii][:, None]
    s_y2 = ps_y2[jj + 1][None, :] - ps_y2[ii][:, None]
    s_k = ps_k[jj + 1][None, :] - ps_k[ii][:, None]
    s_k2 = ps_k2[jj + 1][None, :] - ps_k2[ii][:, None]
    cnt = jj[None, :] - ii[:, None] + 1.0

    # sum over k in [i, j] of (y_k - slope*k - intercept)^2
    err = (
        s_y2
        + slope**2 * s_k2
        + intercept**2 * cnt
        - 2 * slope * s_ky
        - 2 * intercept * s_y
        + 2 * slope * intercept * s_k
    )
    err = np.where(jj[None, :] > ii[:, None], np.maximum(err, 0.0), np.inf)
    np.fill_diagonal(err, 0.0)
    return err


def fit_piecewise_linear(r0, m):
    """Optimal continuous piecewise-linear fit of a sorted residual profile.

    ``r0`` is treated as the polyline (index, value); the fit interpolates
    ``m + 1`` chords whose breakpoints lie on the polyline, chosen by dynamic
    programming to minimize the squared L2 error.  Returns (iso_values,
    break_indices, error): the fitted values at the m interior breakpoints
    (clamped away from zero) and the total fit error.
    """
    y = np.asarray(r0, float)
    n = len(y)
    if m < 1:
        raise ValueError("m must be >= 1")
    if n < m + 2:
        raise InsufficientSamples(f"need at least m + 2 = {m + 2} samples, got {n}")
    err = _segment_error_table(y)

    pieces = m + 1
    # dp[p, j]: best error covering samples [0, j] with p chords ending at j
    dp = np.full((pieces + 1, n), np.inf)
    prev = np.full((pieces + 1, n), -1, dtype=int)
    dp[1] = err[0]
    for p in range(2, pieces + 1):
        cand = dp[p - 1][:, None] + err  # (start, end)
        best = cand.argmin(axis=0)
        dp[p] = cand[best, np.arange(n)]
        prev[p] = best
    j = n - 1
    breaks = []
    for p in range(pieces, 1, -1):
        j = int(prev[p, j])
        breaks.append(j)
    breaks.reverse()
    peak = float(y.max())
    iso = np.maximum(y[breaks], MIN_ISO_FRACTION * peak)
    return iso, np.asarray(breaks), float(dp[pieces, n - 1])


def _dist_to_curves(pts, curves):
    """Min distance from each point to any segment of the given curves."""
    pts = np.atleast_2d(pts)
    best = np.full(len(pts), np.inf)
    for c in curves:
        seg = c.segments()
        a = seg[:, 0][None]
        b = seg[:, 1][None]
        d = b - a
        p = pts[:, None, :]
        denom = np.maximum((d * d).sum(axis=2), 1e-30)
        t = np.clip(((p - a) * d).sum(axis=2) / denom, 0.0, 1.0)
        proj = a + t[..., None] * d
        dist = np.linalg.norm(p - proj, axis=2)
        best = np.minimum(best, dist.min(axis=1))
    return best


def _clip_contour(curve, component, existing, margin):
    """Keep the parts of a contour inside the component and off other curves.

    Returns a list of (possibly shorter, open) curves.
    """
    ok = component.contains(curve.vertices)
    if existing:
        ok &= _dist_to_curves(curve.vertices, existing) >= margin
    ok &= _dist_to_curves(curve.vertices, [Curve(component.outer, closed=True)]) >= margin
    for h in component.holes:
        ok &= _dist_to_curves(curve.vertices, [Curve(h, closed=True)]) >= margin
    if ok.all():
        return [curve]
    if not ok.any():
        return []
    # split into maximal runs of kept vertices
    idx = np.nonzero(ok)[0]
    if curve.closed:
        # rotate so a removed vertex comes first, then treat as open
        start = int(np.nonzero(~ok)[0][0])
        order = np.roll(np.arange(len(ok)), -start)
        verts = curve.vertices[order]
        ok = ok[order]
        idx = np.nonzero(ok)[0]
    else:
        verts = curve.vertices
    runs = np.split(idx, np.nonzero(np.diff(idx) > 1)[0] + 1)
    return [
        Curve(verts[r], closed=False, id=curve.id)
        for r in runs
        if len(r) >= 2
    ]


def curve_init(
    scheme,
    curves,
    field,
    component,
    m=2,
    h_ref=1.0 / 64,
    grid_res=64,
    id_prefix="curve",
    id_start=0,
):
    """Propose new curves along residual iso-contours.

    ``scheme`` is "global" (m iso-values from the piecewise-linear fit of the
    sorted residual) or "local" (single iso at 90% of the residual peak).
    ``curves`` are the already-placed curves the proposals must not touch.
    Raises NoCurvesFound when the residual is already at machine tolerance or
    no proposal survives filtering.
    """
    if scheme not in ("global", "local"):
        raise ValueError("scheme must be 'global' or 'local'")
    grid, extent = residual_field(curves, field, component, h_ref, grid_res)
    peak = float(grid.max())
    if peak <= RESIDUAL_TOL:
        raise NoCurvesFound("residual is already at tolerance")

    if scheme == "global":
        r0 = np.sort(grid.ravel())
        isos, _, _ = fit_piecewise_linear(r0, m)
        isos = sorted(set(float(v) for v in isos))
    else:
        isos = [LOCAL_ISO_FRACTION * peak]

    margin = 0.5 * h_ref
    min_length = 4.0 * h_ref
    proposals = []
    for iso in isos:
        if iso >= peak or iso <= 0:
            continue
        for contour in extract_isocontours(grid, iso, extent):
            for piece in _clip_contour(contour, component, list(curves), margin):
                if piece.length() < min_length:
                    continue
                piece = remesh_curve(piece, 0.25 * h_ref, 2.0 * h_ref)
                if piece is None:
                    continue
                try:
                    piece.validate()
                except ValueError:
                    continue
                proposals.append(piece)

    # drop proposals that collide with each other (earlier ones win)
    accepted = []
    for c in proposals:
        if any(curves_intersect(c, other) for other in accepted):
            continue
        if accepted and _dist_to_curves(c.vertices, accepted).min() < margin:
            continue
        accepted.append(c)
    for k, c in enumerate(accepted):
        c.id = f"{id_prefix}{id_start + k}"
    if not accepted:
        raise NoCurvesFound("no iso-contour survived filtering")
    return accepted
