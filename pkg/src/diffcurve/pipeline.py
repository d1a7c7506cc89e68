"""End-to-end curve placement and post-processing.

Places curves per component (global initialization, then local refinement
passes while the residual is above tolerance, then a final joint
optimization), samples left/right colors, removes redundant segments, and
assigns blur weights.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import fem, render
from .curves import BOUNDARY, INTERIOR, Curve, CurveSet
from .doc import DiffusionCurveDoc, DocCurve
from .errors import NoCurvesFound
from .initializer import curve_init
from .meshing import partition_components
from .optimizer import OptimizerConfig, curve_opt

EPSILON0_AREA_FACTOR = 1e-4


@dataclass
class PipelineConfig:
    epsilon0: float = None  # per-component residual tolerance; default area-scaled
    max_passes: int = 6
    optimizer: OptimizerConfig = dc_field(default_factory=OptimizerConfig)
    delta: float = None  # color-sampling offset; default pixel size or 1/256
    dn_threshold: float = 0.05
    blur_a: float = 0.2
    blur_b: float = 0.05
    m: int = 2  # iso-value count for global initialization
    grid_res: int = 64
    warm_start: CurveSet = None

    def __post_init__(self):
        if self.epsilon0 is not None and self.epsilon0 <= 0:
            raise ValueError("epsilon0 must be > 0")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.blur_a <= 0 or self.blur_b < 0:
            raise ValueError("need blur_a > 0 and blur_b >= 0")

    def component_epsilon0(self, component):
        if self.epsilon0 is not None:
            return self.epsilon0
        return EPSILON0_AREA_FACTOR * component.area()


def default_delta(field, cfg):
    if cfg.delta is not None:
        return cfg.delta
    pixel = getattr(field, "pixel_size", None)
    return float(pixel) if pixel else 1.0 / 256


def _place_component(ci, component, field, cfg, telemetry):
    """Run the per-component pass schedule; returns (curves, report)."""
    ocfg = cfg.optimizer
    eps0 = cfg.component_epsilon0(component)
    fixed = list(component.fixed_curves)
    prefix = f"c{ci}_"
    report = {"component": ci, "passes": 0, "residual": None, "stalled": False}

    def run_opt(new_curves, held, tag):
        return curve_opt(
            new_curves, held, field, component, ocfg,
            telemetry=telemetry, telemetry_tag=tag,
        )

    # pass 1: warm start or global initialization
    warm = []
    if cfg.warm_start is not None:
        for c in cfg.warm_start.interior_curves():
            if component.contains(c.vertices).mean() > 0.5:
                warm.append(c.copy())
    try:
        if warm:
            init = warm
        else:
            init = curve_init(
                "global", fixed, field, component,
                m=cfg.m, h_ref=ocfg.h_ref, grid_res=cfg.grid_res,
                id_prefix=prefix, id_start=0,
            )
    except NoCurvesFound:
        report["residual"] = _component_residual(component, fixed, [], field, ocfg)
        return [], report

    res = run_opt(init, fixed, f"c{ci}:pass1")
    curves = res.curves
    residual = res.residual_history[-1][0]
    report["passes"] = 1
    next_id = len(curves)

    # local refinement passes
    while residual > eps0 and report["passes"] < cfg.max_passes:
        try:
            new = curve_init(
                "local", fixed + curves, field, component,
                h_ref=ocfg.h_ref, grid_res=cfg.grid_res,
                id_prefix=prefix, id_start=next_id,
            )
        except NoCurvesFound:
            break
        next_id += len(new)
        res = run_opt(new, fixed + curves, f"c{ci}:pass{report['passes'] + 1}")
        curves = curves + res.curves
        residual = _component_residual(component, fixed, curves, field, ocfg)
        report["passes"] += 1

    # final joint pass over all accumulated curves
    if curves:
        res = run_opt(curves, fixed, f"c{ci}:final")
        curves = res.curves
        residual = res.residual_history[-1][0]

    report["residual"] = residual
    report["stalled"] = bool(residual > eps0)
    return curves, report


def _component_residual(component, fixed, curves, field, ocfg):
    from .optimizer import solve_forward

    _, _, r = solve_forward(component, fixed + curves, field, ocfg.h_ref)
    return r


def curve_placement(boundary, field, cfg=None, threads=1, telemetry=None):
    """Place diffusion curves for a whole canvas.

    Returns (CurveSet including the boundary curves, list of per-component
    reports with final residuals and stalled flags).
    """
    cfg = cfg or PipelineConfig()
    components = partition_components(field.bbox, boundary)
    results = [None] * len(components)
    if threads > 1 and len(components) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {
                pool.submit(_place_component, ci, comp, field, cfg, telemetry): ci
                for ci, comp in enumerate(components)
            }
            for fut, ci in futs.items():
                results[ci] = fut.result()
    else:
        for ci, comp in enumerate(components):
            results[ci] = _place_component(ci, comp, field, cfg, telemetry)

    out = boundary.copy()
    reports = []
    for curves, report in results:
        for c in curves:
            out.add(c, INTERIOR)
        reports.append(report)
    return out, reports


def color_curves(cset, field, delta):
    """Sample per-vertex left/right colors at offset delta along the normals."""
    x0, y0, x1, y1 = field.bbox
    curves = []
    for curve, role in zip(cset.curves, cset.roles):
        n = curve.normals()
        left_pts = curve.vertices + delta * n
        right_pts = curve.vertices - delta * n
        for pts in (left_pts, right_pts):
            np.clip(pts[:, 0], x0, x1, out=pts[:, 0])
            np.clip(pts[:, 1], y0, y1, out=pts[:, 1])
        curves.append(
            DocCurve(
                curve.copy(),
                field.sample(left_pts),
                field.sample(right_pts),
                role=BOUNDARY if role == BOUNDARY else INTERIOR,
            )
        )
    return DiffusionCurveDoc(field.bbox, curves)


def _curve_dn(mesh, u, curve):
    """Channel-max |gradient jump| per chain corner node along a slit curve."""
    chain = fem.chain_for_curve(mesh, curve.id)
    dl = fem.normal_derivative(u, chain, "left")
    dr = fem.normal_derivative(u, chain, "right")
    dn = dl + dr  # each side uses its own outward normal: this is the jump
    return np.abs(dn).max(axis=1), chain


def compute_dn(doc, h_ref=render.RENDER_H_REF):
    """Per-vertex channel-max |d_n| for every interior curve, keyed by id."""
    components = partition_components(doc.bbox, _boundary_set(doc))
    buckets = render._assign_components(doc, components)
    out = {}
    for comp, bucket in zip(components, buckets):
        if not bucket:
            continue
        curves = bucket + [
            dc for dc in doc.boundary() if render._curve_on_component(dc, comp)
        ]
        mesh, u = render.solve_doc_component(comp, curves, h_ref, attr="color")
        for dc in bucket:
            dn_chain, chain = _curve_dn(mesh, u, dc.curve)
            out[dc.id] = dn_chain[chain.orig_idx]
    return out


def _boundary_set(doc):
    cs = CurveSet()
    for dc in doc.boundary():
        cs.add(dc.curve, BOUNDARY)
    return cs


def remove_redundant(doc, dn_threshold=0.05, h_ref=render.RENDER_H_REF):
    """Drop, per curve, the largest connected run of redundant segments.

    A segment is redundant when the channel-max gradient jump |d_n| at both
    endpoints is below the threshold.  Vertex-aligned d_n values are stored on
    the result (``dn`` attribute) for the blur stage.
    """
    dn_map = compute_dn(doc, h_ref)
    curves = []
    for dc in doc.curves:
        if dc.role == BOUNDARY or dc.id not in dn_map:
            dc.dn = np.zeros(len(dc.curve.vertices))
            curves.append(dc)
            continue
        dn = dn_map[dc.id]
        dc.dn = dn
        nseg = len(dc.curve.vertices) if dc.curve.closed else len(dc.curve.vertices) - 1
        seg_dn = np.array(
            [
                0.5 * (dn[i] + dn[(i + 1) % len(dn)])
                for i in range(nseg)
            ]
        )
        marked = seg_dn < dn_threshold
        run = _largest_run(marked, dc.curve.closed)
        if run is None:
            curves.append(dc)
            continue
        curves.extend(_drop_segments(dc, run))
    return DiffusionCurveDoc(doc.bbox, curves)


def _largest_run(marked, closed):
    """(start, length) of the longest run of True entries, or None."""
    n = len(marked)
    if not marked.any():
        return None
    if marked.all():
        return (0, n)
    ext = np.concatenate([marked, marked]) if closed else marked
    best_len = 0
    best_start = 0
    run = 0
    for i, m in enumerate(ext):
        if m:
            run += 1
            if run > best_len and (i - run + 1) < n:
                best_len = run
                best_start = i - run + 1
        else:
            run = 0
    best_len = min(best_len, n)
    return (best_start % n, best_len)


def _drop_segments(dc, run):
    """Remove a connected run of segments from a doc curve; keep attributes."""
    start, length = run
    curve = dc.curve
    n = len(curve.vertices)
    nseg = n if curve.closed else n - 1
    if length >= nseg:
        return []  # whole curve redundant

    keep_seg = np.ones(nseg, bool)
    for k in range(length):
        keep_seg[(start + k) % nseg] = False

    def slice_piece(v_idx):
        sub = Curve(curve.vertices[v_idx], closed=False, id=f"{dc.id}")
        piece = DocCurve(sub, dc.left[v_idx], dc.right[v_idx], dc.blur[v_idx], dc.role)
        piece.dn = dc.dn[v_idx]
        return piece

    pieces = []
    if curve.closed:
        # one run removed from a loop leaves a single open arc
        first = (start + length) % nseg
        idx = [(first + k) % n for k in range(n - length)]
        if len(idx) >= 2:
            pieces.append(slice_piece(idx))
    else:
        # removal may split an open curve in two
        runs = []
        cur = []
        for i in range(nseg):
            if keep_seg[i]:
                if not cur:
                    cur = [i]
                cur.append(i + 1)
            else:
                if cur:
                    runs.append(cur)
                    cur = []
        if cur:
            runs.append(cur)
        for r in runs:
            if len(r) >= 2:
                pieces.append(slice_piece(r))
    for k, piece in enumerate(pieces):
        if len(pieces) > 1:
            piece.curve.id = f"{dc.id}_{k}"
    return pieces


def compute_blur(doc, a=0.2, b=0.05):
    """Assign per-vertex blur K0 = b * |d_n|^a on interior curves."""
    for dc in doc.curves:
        if dc.role == BOUNDARY:
            dc.blur = np.zeros(len(dc.curve.vertices))
            continue
        dn = getattr(dc, "dn", None)
        if dn is None:
            raise ValueError(f"curve {dc.id!r}: d_n unavailable; run remove_redundant first")
        dc.blur = b * np.abs(dn) ** a
    return doc


def vectorize(field, boundary, cfg=None, threads=1, telemetry=None, blur=True):
    """Full pipeline: placement, coloring, pruning, blur.  Returns (doc, reports)."""
    cfg = cfg or PipelineConfig()
    cset, reports = curve_placement(boundary, field, cfg, threads, telemetry)
    doc = color_curves(cset, field, default_delta(field, cfg))
    doc = remove_redundant(doc, cfg.dn_threshold, h_ref=cfg.optimizer.h_ref)
    if blur:
        doc = compute_blur(doc, cfg.blur_a, cfg.blur_b)
    else:
        for dc in doc.curves:
            dc.blur = np.zeros(len(dc.curve.vertices))
    return doc, reports
