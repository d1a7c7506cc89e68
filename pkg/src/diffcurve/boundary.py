"""Boundary-curve extraction: Canny edges for rasters, patch borders for meshes.

Boundary curves mark the canvas edge and hard color discontinuities; they are
held fixed during optimization.
"""

from __future__ import annotations

import json

import numpy as np
from scipy import ndimage

from .curves import (
    BOUNDARY,
    Curve,
    CurveSet,
    _segments_cross,
    curve_self_intersects,
    curves_intersect,
    rect_boundary_curve,
    simplify_polyline,
)

CANNY_SIGMA_PX = 1.2
SIMPLIFY_TOL_PX = 0.75
CLOSE_TOL_PX = 1.5
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
EDGE_SAMPLES_PER_CUBIC = 16


def canny_boundaries(img, low=0.1, high=0.2, boundary_h=None):
    """Edge curves of a pixel image plus the canvas rectangle.

    ``img`` is an (H, W, 3) array in [0, 1].  Thresholds apply to the
    luminance-gradient magnitude normalized to max 1.  Coordinates are
    normalized so the longest image axis spans 1.
    """
    if not (0 <= low < high <= 1):
        raise ValueError("need 0 <= low < high <= 1")
    img = np.asarray(img, float)
    h, w = img.shape[:2]
    scale = float(max(w, h))
    edges = canny_edge_mask(img, low, high)
    chains = _link_edge_pixels(edges)

    tol = SIMPLIFY_TOL_PX / scale
    close_tol = CLOSE_TOL_PX / scale
    curves = []
    for chain in chains:
        pts = (np.asarray(chain, float)[:, ::-1] + 0.5) / scale  # (row, col) -> (x, y)
        pts = simplify_polyline(pts, tol)
        closed = False
        if len(pts) >= 4 and np.linalg.norm(pts[0] - pts[-1]) <= close_tol:
            pts = pts[:-1]
            closed = True
        if len(pts) < (3 if closed else 2):
            continue
        curves.append(Curve(pts, closed=closed))

    out = CurveSet()
    bbox = (0.0, 0.0, w / scale, h / scale)
    out.add(rect_boundary_curve(bbox, h=boundary_h), BOUNDARY)
    for c in _resolve_crossings(curves, min_length=4.0 / scale):
        out.add(c, BOUNDARY)
    for k, c in enumerate(out.curves):
        if c.id in ("", None) or (k > 0 and c.id == "bbox"):
            c.id = f"edge{k}" if k > 0 else c.id
    return out


def canny_edge_mask(img, low, high):
    """Boolean edge-pixel mask via the classic Canny stages."""
    luma = np.tensordot(np.atleast_3d(img)[..., :3], LUMA_WEIGHTS, axes=([2], [0]))
    smooth = ndimage.gaussian_filter(luma, CANNY_SIGMA_PX)
    gx = ndimage.sobel(smooth, axis=1)
    gy = ndimage.sobel(smooth, axis=0)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0:
        return np.zeros(luma.shape, bool)
    mag = mag / peak

    # non-maximum suppression along the quantized gradient direction
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    sector = ((angle + np.pi / 8) // (np.pi / 4)).astype(int) % 4
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}  # (drow, dcol)
    nms = np.zeros_like(mag, bool)
    hgt, wid = mag.shape
    pad = np.pad(mag, 1, mode="constant")
    rr, cc = np.mgrid[0:hgt, 0:wid]
    for s, (dr, dc) in offsets.items():
        sel = sector == s
        fwd = pad[rr + 1 + dr, cc + 1 + dc]
        bwd = pad[rr + 1 - dr, cc + 1 - dc]
        nms |= sel & (mag >= fwd) & (mag >= bwd)
    nms &= mag > 0

    strong = nms & (mag >= high)
    weak = nms & (mag >= low)
    eight = np.ones((3, 3), bool)
    return ndimage.binary_propagation(strong, structure=eight, mask=weak)


_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def _link_edge_pixels(mask):
    """Chain 8-connected edge pixels into polylines of (row, col) tuples."""
    pixels = set(zip(*np.nonzero(mask)))
    chains = []

    def neighbors(p, avail):
        r, c = p
        return [(r + dr, c + dc) for dr, dc in _NEIGHBORS if (r + dr, c + dc) in avail]

    while pixels:
        # prefer starting at an endpoint (one available neighbor)
        start = None
        for p in sorted(pixels):
            if len(neighbors(p, pixels)) <= 1:
                start = p
                break
        if start is None:
            start = min(pixels)
        chain = [start]
        pixels.discard(start)
        # walk both directions from the start
        for _ in range(2):
            cur = chain[-1]
            prev_dir = None
            while True:
                cands = neighbors(cur, pixels)
                if not cands:
                    break
                if prev_dir is None:
                    nxt = cands[0]
                else:
                    # prefer continuing straight
                    nxt = min(
                        cands,
                        key=lambda q: -(
                            (q[0] - cur[0]) * prev_dir[0] + (q[1] - cur[1]) * prev_dir[1]
                        ),
                    )
                prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
                chain.append(nxt)
                pixels.discard(nxt)
                cur = nxt
            chain.reverse()
        if len(chain) >= 2:
            chains.append(chain)
    return chains


def _split_at_crossings(curve, others):
    """Split a curve wherever its segments cross segments of ``others``."""
    seg = curve.segments()
    bad = np.zeros(len(seg), bool)
    if curve_self_intersects(curve):
        hits = _segments_cross(seg, seg)
        np.fill_diagonal(hits, False)
        bad |= hits.any(axis=1)
    for other in others:
        bad |= _segments_cross(seg, other.segments()).any(axis=1)
    if not bad.any():
        return [curve]
    v = curve.vertices
    if curve.closed:
        start = int(np.nonzero(bad)[0][0]) + 1
        order = np.roll(np.arange(len(v)), -start)
        v = v[order]
        bad = np.roll(bad, -start)
        curve = Curve(v, closed=False, id=curve.id)
        seg_keep = ~bad[:-1] if len(bad) > len(v) - 1 else ~bad[: len(v) - 1]
    else:
        seg_keep = ~bad
    pieces = []
    run = [v[0]]
    for i, keep in enumerate(seg_keep):
        if keep:
            run.append(v[i + 1])
        else:
            if len(run) >= 2:
                pieces.append(np.asarray(run))
            run = [v[i + 1]]
    if len(run) >= 2:
        pieces.append(np.asarray(run))
    return [Curve(p, closed=False, id=curve.id) for p in pieces]


def _resolve_crossings(curves, min_length=0.0):
    """Trim chains at intersections so the final set is crossing-free."""
    accepted = []
    for c in sorted(curves, key=lambda c: -c.length()):
        for piece in _split_at_crossings(c, accepted):
            if piece.length() < min_length:
                continue
            if any(curves_intersect(piece, a) for a in accepted):
                continue
            try:
                piece.validate()
            except ValueError:
                continue
            accepted.append(piece)
    return accepted


def mesh_boundaries(mesh_field, samples_per_edge=EDGE_SAMPLES_PER_CUBIC):
    """Outer border polylines of a Coons patch grid.

    Patch edges shared between two patches are interior and skipped; the
    remaining cubic edges are sampled and chained into closed loops.
    """
    edge_lists = {}
    for patch in mesh_field.patches:
        # CCW around the patch: bottom, right, reversed top, reversed left
        for ctrl in (
            patch.bottom,
            patch.right,
            patch.top[::-1],
            patch.left[::-1],
        ):
            key = _edge_key(ctrl)
            edge_lists.setdefault(key, []).append(np.asarray(ctrl, float))
    boundary_edges = [lst[0] for lst in edge_lists.values() if len(lst) == 1]

    polylines = []
    t = np.linspace(0, 1, samples_per_edge + 1)
    for ctrl in boundary_edges:
        b = _bezier_eval(ctrl, t)
        polylines.append(b)

    out = CurveSet()
    for k, loop in enumerate(_chain_polylines(polylines)):
        closed = np.linalg.norm(loop[0] - loop[-1]) <= 1e-9
        pts = loop[:-1] if closed else loop
        out.add(Curve(pts, closed=closed, id=f"border{k}"), BOUNDARY)
    return out


def _edge_key(ctrl, decimals=9):
    a = np.round(np.asarray(ctrl, float), decimals)
    fwd = tuple(map(tuple, a))
    rev = tuple(map(tuple, a[::-1]))
    return min(fwd, rev)


def _bezier_eval(ctrl, t):
    c = np.asarray(ctrl, float)
    mt = 1 - t
    return (
        (mt**3)[:, None] * c[0]
        + (3 * mt**2 * t)[:, None] * c[1]
        + (3 * mt * t**2)[:, None] * c[2]
        + (t**3)[:, None] * c[3]
    )


def _chain_polylines(polylines, tol=1e-7):
    """Join directed polylines end-to-start into loops/runs."""
    remaining = [np.asarray(p) for p in polylines]
    chains = []
    while remaining:
        cur = remaining.pop(0)
        extended = True
        while extended:
            extended = False
            for i, p in enumerate(remaining):
                if np.linalg.norm(cur[-1] - p[0]) <= tol:
                    cur = np.vstack([cur, p[1:]])
                    remaining.pop(i)
                    extended = True
                    break
                if np.linalg.norm(p[-1] - cur[0]) <= tol:
                    cur = np.vstack([p, cur[1:]])
                    remaining.pop(i)
                    extended = True
                    break
        # drop duplicate consecutive points
        keep = np.ones(len(cur), bool)
        keep[1:] = np.linalg.norm(np.diff(cur, axis=0), axis=1) > 1e-12
        chains.append(cur[keep])
    return chains


def load_curve_file(path):
    """Read a geometry-only curve document into a boundary CurveSet."""
    with open(path) as fh:
        data = json.load(fh)
    out = CurveSet()
    for k, entry in enumerate(data.get("curves", [])):
        pts = np.asarray(entry["points"], float)
        out.add(
            Curve(pts, closed=bool(entry.get("closed", False)), id=entry.get("id", f"user{k}")),
            BOUNDARY,
        )
    return out
