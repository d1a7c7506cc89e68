"""Constrained triangulation with slit curves and component partitioning.

Interior curves are realized as slits: their nodes are duplicated so the two
sides are topologically disconnected while coinciding geometrically.  Elements
are 6-node quadratic triangles (corner nodes followed by edge midpoints).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .curves import (
    Curve,
    CurveSet,
    curves_intersect,
    point_in_polygon,
    polygon_area,
    rect_boundary_curve,
)
from .errors import ArrangementFailure, MeshingFailure

TAG_FREE = 0
TAG_OUTER = 1
TAG_SLIT = 2


class Chain:
    """A constrained polyline realized in the mesh.

    ``nodes`` are corner-node ids in order along the chain (including
    subdivision points), ``mid_nodes`` the midpoint node between consecutive
    corners, and ``orig_idx`` maps each original curve vertex to its position
    in ``nodes``.
    """

    def __init__(self, curve, role, side=None):
        self.curve = curve
        self.role = role  # "outer" or "slit"
        self.side = side  # for outer chains: curve side facing the component
        self.points = None  # (K, 2) subdivided positions
        self.orig_idx = None
        self.closed = curve.closed
        self.nodes = None  # corner node ids (left side for slits)
        self.nodes_right = None  # right-side ids for slits
        self.mid_nodes = None
        self.mid_nodes_right = None

    def all_node_positions(self):
        """Positions for [n0, m01, n1, ...] interleaved corner/midpoints."""
        p = self.points
        if self.closed:
            mids = 0.5 * (p + np.roll(p, -1, axis=0))
        else:
            mids = 0.5 * (p[:-1] + p[1:])
        return p, mids


class Component:
    """One connected region of the domain with its bounding chains."""

    def __init__(self, outer_poly, outer_ref, holes=None, hole_refs=None, fixed_curves=None):
        self.outer = np.asarray(outer_poly, float)
        if polygon_area(self.outer) < 0:
            self.outer = self.outer[::-1]
        self.outer_ref = outer_ref  # (curve, side)
        self.holes = [np.asarray(h, float) for h in (holes or [])]
        self.hole_refs = list(hole_refs or [])
        self.fixed_curves = list(fixed_curves or [])

    def area(self):
        return abs(polygon_area(self.outer)) - sum(abs(polygon_area(h)) for h in self.holes)

    def bbox(self):
        lo = self.outer.min(axis=0)
        hi = self.outer.max(axis=0)
        return (lo[0], lo[1], hi[0], hi[1])

    def contains(self, pts):
        inside = point_in_polygon(pts, self.outer)
        for h in self.holes:
            inside &= ~point_in_polygon(pts, h)
        return inside


def _is_bbox_curve(curve, bbox, tol=1e-9):
    x0, y0, x1, y1 = bbox
    v = curve.vertices
    on = (
        (np.abs(v[:, 0] - x0) < tol)
        | (np.abs(v[:, 0] - x1) < tol)
        | (np.abs(v[:, 1] - y0) < tol)
        | (np.abs(v[:, 1] - y1) < tol)
    )
    return bool(on.all())


def partition_components(domain_bbox, boundary):
    """Partition the domain into components bounded by closed boundary chains.

    Closed curves form a nesting forest (curves may not cross); each closed
    curve bounds one component whose holes are its direct children.  Open
    (dangling) curves are attached to their containing component as fixed
    interior curves.
    """
    closed = []
    open_curves = []
    root_curve = None
    for c in boundary:
        if c.closed and _is_bbox_curve(c, domain_bbox):
            root_curve = c
        elif c.closed:
            closed.append(c)
        else:
            open_curves.append(c)
    if root_curve is None:
        root_curve = rect_boundary_curve(domain_bbox)

    for i in range(len(closed)):
        for j in range(i + 1, len(closed)):
            if curves_intersect(closed[i], closed[j]):
                raise ArrangementFailure(
                    f"closed boundary curves {closed[i].id!r} and {closed[j].id!r} intersect"
                )

    polys = [c.vertices for c in closed]
    n = len(closed)
    # parent[i] = index of smallest closed curve containing curve i, or -1 (root)
    contains = np.zeros((n, n), bool)
    for i in range(n):
        for j in range(n):
            if i != j:
                contains[i, j] = bool(point_in_polygon(polys[j][:1], polys[i])[0])
    areas = [abs(polygon_area(p)) for p in polys]
    parent = []
    for j in range(n):
        anc = [i for i in range(n) if contains[i, j]]
        parent.append(min(anc, key=lambda i: areas[i]) if anc else -1)

    def side_facing_inside(curve):
        return "left" if polygon_area(curve.vertices) > 0 else "right"

    def side_facing_outside(curve):
        return "right" if polygon_area(curve.vertices) > 0 else "left"

    components = []
    # root component: inside bbox, holes = top-level closed curves
    top = [j for j in range(n) if parent[j] == -1]
    components.append(
        Component(
            root_curve.vertices,
            (root_curve, side_facing_inside(root_curve)),
            holes=[polys[j] for j in top],
            hole_refs=[(closed[j], side_facing_outside(closed[j])) for j in top],
        )
    )
    for i in range(n):
        kids = [j for j in range(n) if parent[j] == i]
        components.append(
            Component(
                polys[i],
                (closed[i], side_facing_inside(closed[i])),
                holes=[polys[j] for j in kids],
                hole_refs=[(closed[j], side_facing_outside(closed[j])) for j in kids],
            )
        )
    # attach dangling curves
    for c in open_curves:
        probe = c.vertices[:1]
        hit = None
        for comp in components:
            if comp.contains(probe)[0]:
                hit = comp
                break
        if hit is None:
            raise ArrangementFailure(f"open curve {c.id!r} lies outside every component")
        hit.fixed_curves.append(c)
    return components


# ---------------------------------------------------------------------------
# Triangulation internals


def _subdivide_chain(curve, h_ref):
    """Insert points so segment lengths are <= h_ref; track original vertices."""
    v = curve.vertices
    pts = []
    orig_idx = []
    m = len(v)
    segs = range(m) if curve.closed else range(m - 1)
    for i in segs:
        a = v[i]
        b = v[(i + 1) % m]
        orig_idx.append(len(pts))
        pts.append(a)
        ln = np.linalg.norm(b - a)
        k = int(np.ceil(ln / h_ref))
        for s in range(1, k):
            pts.append(a + (b - a) * (s / k))
    if not curve.closed:
        orig_idx.append(len(pts))
        pts.append(v[-1])
    return np.asarray(pts), np.asarray(orig_idx, int)


def _dist_point_segments(pts, seg_a, seg_b):
    """Min distance from each point to any of the segments."""
    d = seg_b - seg_a  # (M, 2)
    dd = (d * d).sum(axis=1)
    dd = np.maximum(dd, 1e-30)
    best = np.full(len(pts), np.inf)
    chunk = 2048
    for s in range(0, len(pts), chunk):
        p = pts[s : s + chunk]
        ap = p[:, None, :] - seg_a[None, :, :]
        t = np.clip((ap * d[None]).sum(axis=2) / dd[None], 0.0, 1.0)
        proj = seg_a[None] + t[:, :, None] * d[None]
        dist = np.linalg.norm(p[:, None, :] - proj, axis=2)
        best[s : s + chunk] = dist.min(axis=1)
    return best


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _seg_crosses(a, b, c, d, eps=1e-13):
    """Proper crossing of open segments ab and cd."""
    d1 = _orient(a, b, c)
    d2 = _orient(a, b, d)
    d3 = _orient(c, d, a)
    d4 = _orient(c, d, b)
    return (d1 * d2 < -eps) and (d3 * d4 < -eps)


class _Triangulation:
    """Edge-flippable triangle soup used for constraint recovery."""

    def __init__(self, points, triangles):
        self.points = points
        self.tris = [tuple(t) for t in triangles]
        self.alive = [True] * len(self.tris)
        self.edge_map = {}
        for ti, t in enumerate(self.tris):
            self._register(ti)

    def _register(self, ti):
        t = self.tris[ti]
        for k in range(3):
            e = tuple(sorted((t[k], t[(k + 1) % 3])))
            self.edge_map.setdefault(e, set()).add(ti)

    def _unregister(self, ti):
        t = self.tris[ti]
        for k in range(3):
            e = tuple(sorted((t[k], t[(k + 1) % 3])))
            s = self.edge_map.get(e)
            if s is not None:
                s.discard(ti)
                if not s:
                    del self.edge_map[e]

    def has_edge(self, a, b):
        return tuple(sorted((a, b))) in self.edge_map

    def add_triangle(self, a, b, c):
        ti = len(self.tris)
        self.tris.append((a, b, c))
        self.alive.append(True)
        self._register(ti)
        return ti

    def remove_triangle(self, ti):
        self._unregister(ti)
        self.alive[ti] = False

    def insert_constraint(self, a, b):
        """Force edge (a, b) by cavity retriangulation."""
        if self.has_edge(a, b):
            return
        pa = self.points[a]
        pb = self.points[b]
        crossed = []
        for ti in self._tris_crossing(a, b):
            crossed.append(ti)
        if not crossed:
            raise MeshingFailure(f"cannot recover constraint edge {a}-{b}")
        left = []
        right = []
        verts_seen = set()
        for ti in crossed:
            for v in self.tris[ti]:
                if v in (a, b) or v in verts_seen:
                    continue
                verts_seen.add(v)
                side = _orient(pa, pb, self.points[v])
                (left if side > 0 else right).append(v)
        for ti in crossed:
            self.remove_triangle(ti)

        def order_along(vs):
            return sorted(vs, key=lambda v: np.dot(self.points[v] - pa, pb - pa))

        for vs, sgn in ((order_along(left), 1), (order_along(right), -1)):
            self._fill_side(a, b, vs, sgn)

    def _fill_side(self, a, b, vs, sgn):
        """Triangulate the polygon a, vs..., b on one side of edge ab."""
        poly = [a] + vs + [b]

        def recurse(i, j):
            if j - i < 2:
                return
            # pick the vertex whose circumcircle with (poly[i], poly[j]) is Delaunay
            best = i + 1
            for k in range(i + 1, j):
                if _in_circle(
                    self.points[poly[i]],
                    self.points[poly[j]],
                    self.points[poly[best]],
                    self.points[poly[k]],
                ):
                    best = k
            tri = (poly[i], poly[best], poly[j])
            p0, p1, p2 = (self.points[v] for v in tri)
            if abs(_orient(p0, p1, p2)) > 1e-16:
                if _orient(p0, p1, p2) < 0:
                    tri = (tri[0], tri[2], tri[1])
                self.add_triangle(*tri)
            recurse(i, best)
            recurse(best, j)

        recurse(0, len(poly) - 1)

    def _tris_crossing(self, a, b):
        pa = self.points[a]
        pb = self.points[b]
        out = []
        # candidate triangles: those within the segment's bbox neighborhood
        lo = np.minimum(pa, pb)
        hi = np.maximum(pa, pb)
        for ti, t in enumerate(self.tris):
            if not self.alive[ti]:
                continue
            P = self.points[list(t)]
            if (P.max(axis=0) < lo - 1e-12).any() or (P.min(axis=0) > hi + 1e-12).any():
                continue
            if a in t or b in t:
                # crossed if the segment exits through the opposite edge
                others = [v for v in t if v not in (a, b)]
                if len(others) == 2 and (a in t) != (b in t):
                    c, d = others
                    if _seg_crosses(pa, pb, self.points[c], self.points[d]):
                        out.append(ti)
                continue
            hit = False
            for k in range(3):
                c, d = t[k], t[(k + 1) % 3]
                if _seg_crosses(pa, pb, self.points[c], self.points[d]):
                    hit = True
                    break
            if hit:
                out.append(ti)
        return out

    def triangles(self):
        return np.array([t for ti, t in enumerate(self.tris) if self.alive[ti]], dtype=int)


def _in_circle(a, b, c, d):
    """True if d is inside the circumcircle of (a, b, c)."""
    m = np.array(
        [
            [a[0] - d[0], a[1] - d[1], (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2],
            [b[0] - d[0], b[1] - d[1], (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2],
            [c[0] - d[0], c[1] - d[1], (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2],
        ]
    )
    sign = 1.0 if _orient(a, b, c) > 0 else -1.0
    return sign * np.linalg.det(m) > 0


class SlitMesh:
    """Quadratic triangle mesh with duplicated nodes along interior curves."""

    def __init__(self, nodes, triangles, corner_count, chains, node_tags):
        self.nodes = nodes  # (N, 2)
        self.triangles = triangles  # (T, 6): corners then midpoints (01, 12, 20)
        self.corner_count = corner_count
        self.chains = chains  # list of Chain
        self.node_tags = node_tags  # (N,) in {TAG_FREE, TAG_OUTER, TAG_SLIT}

    @property
    def n_nodes(self):
        return len(self.nodes)

    def corner_triangles(self):
        return self.triangles[:, :3]

    def triangle_areas(self):
        p = self.nodes[self.triangles[:, :3]]
        return 0.5 * np.abs(
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        )

    def dirichlet_nodes(self):
        return np.nonzero(self.node_tags != TAG_FREE)[0]

    def min_angle(self):
        p = self.nodes[self.triangles[:, :3]]
        angles = []
        for k in range(3):
            a = p[:, k]
            b = p[:, (k + 1) % 3]
            c = p[:, (k + 2) % 3]
            u = b - a
            v = c - a
            cosang = (u * v).sum(axis=1) / (
                np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
            )
            angles.append(np.degrees(np.arccos(np.clip(cosang, -1, 1))))
        return float(np.min(np.stack(angles)))

    def dump_off(self, path):
        with open(path, "w") as f:
            f.write("OFF\n")
            f.write(f"{self.corner_count} {len(self.triangles)} 0\n")
            for p in self.nodes[: self.corner_count]:
                f.write(f"{p[0]} {p[1]} 0\n")
            for t in self.triangles:
                f.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def triangulate(component, interior_curves=None, h_ref=1.0 / 64, min_angle=20.0, max_refine=4):
    """Mesh one component with all curves as constrained (slit) edges.

    ``interior_curves`` is a CurveSet (or list of Curve) of slit curves; the
    component's own fixed curves are added automatically.
    """
    slit_list = list(interior_curves) if interior_curves is not None else []
    slit_list = list(component.fixed_curves) + [c for c in slit_list if c not in component.fixed_curves]

    chains = []
    outer_curve, outer_side = component.outer_ref
    chains.append(Chain(Curve(component.outer, closed=True, id=outer_curve.id), "outer", outer_side))
    for hole, ref in zip(component.holes, component.hole_refs):
        chains.append(Chain(Curve(hole, closed=True, id=ref[0].id), "outer", ref[1]))
    for c in slit_list:
        chains.append(Chain(c, "slit"))

    for ch in chains:
        ch.points, ch.orig_idx = _subdivide_chain(ch.curve, h_ref)

    # unique corner points for all chains
    all_pts = []
    chain_node_ids = []
    key_map = {}
    for ch in chains:
        ids = []
        for p in ch.points:
            key = (round(p[0] / 1e-9), round(p[1] / 1e-9))
            if key in key_map:
                ids.append(key_map[key])
            else:
                key_map[key] = len(all_pts)
                ids.append(len(all_pts))
                all_pts.append(p)
        chain_node_ids.append(np.asarray(ids, int))
    constraint_pts = np.asarray(all_pts)
    n_constraint = len(constraint_pts)

    # constraint segment list
    seg_a = []
    seg_b = []
    for ch, ids in zip(chains, chain_node_ids):
        m = len(ids)
        rng = range(m) if ch.closed else range(m - 1)
        for i in rng:
            seg_a.append(constraint_pts[ids[i]])
            seg_b.append(constraint_pts[ids[(i + 1) % m]])
    seg_a = np.asarray(seg_a)
    seg_b = np.asarray(seg_b)

    # background grid
    x0, y0, x1, y1 = component.bbox()
    xs = np.arange(x0 + 0.5 * h_ref, x1, h_ref)
    ys = np.arange(y0 + 0.5 * h_ref, y1, h_ref)
    if len(xs) and len(ys):
        gx, gy = np.meshgrid(xs, ys)
        bg = np.column_stack([gx.ravel(), gy.ravel()])
        # stagger alternate rows for better-shaped triangles
        rows = ((bg[:, 1] - ys[0]) / h_ref + 0.5).astype(int)
        bg[:, 0] += (rows % 2) * 0.5 * h_ref
        bg = bg[(bg[:, 0] > x0) & (bg[:, 0] < x1)]
        inside = component.contains(bg)
        bg = bg[inside]
        if len(bg) and len(seg_a):
            d = _dist_point_segments(bg, seg_a, seg_b)
            bg = bg[d >= 0.55 * h_ref]
    else:
        bg = np.empty((0, 2))

    extra = np.empty((0, 2))
    for _ in range(max_refine + 1):
        pts = np.vstack([constraint_pts, bg, extra])
        mesh_data = _mesh_once(pts, chains, chain_node_ids, component)
        tris, points = mesh_data
        bad_centers = _bad_triangle_circumcenters(points, tris, min_angle)
        if len(bad_centers) == 0:
            break
        keep = component.contains(bad_centers)
        bad_centers = bad_centers[keep]
        if len(bad_centers) and len(seg_a):
            d = _dist_point_segments(bad_centers, seg_a, seg_b)
            bad_centers = bad_centers[d >= 0.5 * h_ref]
        if len(bad_centers) == 0:
            break
        if len(extra):
            tree = cKDTree(np.vstack([bg, extra]) if len(bg) else extra)
            d, _ = tree.query(bad_centers)
            bad_centers = bad_centers[d > 0.3 * h_ref]
        if len(bad_centers) == 0:
            break
        extra = np.vstack([extra, bad_centers])

    return _finalize_mesh(points, tris, chains, chain_node_ids, n_constraint)


def _mesh_once(pts, chains, chain_node_ids, component):
    if len(pts) < 3:
        raise MeshingFailure("not enough points to triangulate")
    try:
        dt = Delaunay(pts)
    except Exception as exc:  # qhull failures on degenerate input
        raise MeshingFailure(str(exc)) from exc
    tri = _Triangulation(pts, dt.simplices)
    # recover constrained edges
    for ch, ids in zip(chains, chain_node_ids):
        m = len(ids)
        rng = range(m) if ch.closed else range(m - 1)
        for i in rng:
            a = int(ids[i])
            b = int(ids[(i + 1) % m])
            if a != b:
                tri.insert_constraint(a, b)
    tris = tri.triangles()
    if len(tris) == 0:
        raise MeshingFailure("empty triangulation")
    # carve: keep triangles whose centroid is inside the component
    cent = pts[tris].mean(axis=1)
    keep = component.contains(cent)
    tris = tris[keep]
    if len(tris) == 0:
        raise MeshingFailure("all triangles carved away")
    # enforce CCW orientation
    p = pts[tris]
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    flip = det < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris, pts


def _bad_triangle_circumcenters(points, tris, min_angle):
    p = points[tris]
    angles = np.full(len(tris), np.inf)
    for k in range(3):
        a = p[:, k]
        b = p[:, (k + 1) % 3]
        c = p[:, (k + 2) % 3]
        u = b - a
        v = c - a
        cosang = (u * v).sum(axis=1) / np.maximum(
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1), 1e-30
        )
        angles = np.minimum(angles, np.degrees(np.arccos(np.clip(cosang, -1, 1))))
    bad = angles < min_angle
    if not bad.any():
        return np.empty((0, 2))
    # circumcenters of bad triangles
    a = p[bad, 0]
    b = p[bad, 1]
    c = p[bad, 2]
    ab = b - a
    ac = c - a
    d = 2 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
    d = np.where(np.abs(d) < 1e-30, 1e-30, d)
    ab2 = (ab * ab).sum(axis=1)
    ac2 = (ac * ac).sum(axis=1)
    ux = (ac[:, 1] * ab2 - ab[:, 1] * ac2) / d
    uy = (ab[:, 0] * ac2 - ac[:, 0] * ab2) / d
    return a + np.column_stack([ux, uy])


def _finalize_mesh(points, tris, chains, chain_node_ids, n_constraint):
    """Slit duplication, node tags, quadratic midpoints, chain bookkeeping."""
    nodes = [p for p in points]
    tris = [list(t) for t in tris]
    # vertex -> incident triangle ids
    incident = {}
    for ti, t in enumerate(tris):
        for v in t:
            incident.setdefault(v, []).append(ti)

    n_initial = len(nodes)
    tags = np.zeros(n_initial, dtype=int)
    for ch, ids in zip(chains, chain_node_ids):
        tags_val = TAG_OUTER if ch.role == "outer" else TAG_SLIT
        for v in ids:
            tags[v] = max(tags[v], tags_val)
    tags = list(tags)

    for ch, ids in zip(chains, chain_node_ids):
        ch.nodes = np.asarray(ids, int).copy()
        if ch.role != "slit":
            ch.nodes_right = None
            continue
        right_ids = ch.nodes.copy()
        m = len(ids)
        for k in range(m):
            if not ch.closed and (k == 0 or k == m - 1):
                continue  # open-curve tips stay shared
            v = int(ids[k])
            p_prev = points[ids[(k - 1) % m]]
            p_next = points[ids[(k + 1) % m]]
            pv = points[v]
            d_next = p_next - pv
            d_prev = p_prev - pv
            ang_next = np.arctan2(d_next[1], d_next[0])
            ang_prev = np.arctan2(d_prev[1], d_prev[0])
            span = (ang_prev - ang_next) % (2 * np.pi)
            right_tris = []
            for ti in incident.get(v, []):
                cent = points[tris[ti]].mean(axis=0) if max(tris[ti]) < len(points) else np.mean(
                    [nodes[w] for w in tris[ti]], axis=0
                )
                dc = cent - pv
                ang = (np.arctan2(dc[1], dc[0]) - ang_next) % (2 * np.pi)
                if not (0 < ang < span):
                    right_tris.append(ti)
            if right_tris:
                new_id = len(nodes)
                nodes.append(pv.copy())
                tags.append(TAG_SLIT)
                for ti in right_tris:
                    tris[ti] = [new_id if w == v else w for w in tris[ti]]
                    incident.setdefault(new_id, []).append(ti)
                incident[v] = [ti for ti in incident[v] if ti not in right_tris]
                right_ids[k] = new_id
        ch.nodes_right = right_ids

    nodes = np.asarray(nodes)
    tris = np.asarray(tris, int)
    tags = np.asarray(tags, int)
    corner_count = len(nodes)

    # quadratic midpoints (per corner-node edge, after slit duplication)
    edge_mid = {}
    mids = []
    mid_cols = np.empty((len(tris), 3), dtype=int)
    for ti, t in enumerate(tris):
        for k in range(3):
            a, b = t[k], t[(k + 1) % 3]
            e = (a, b) if a < b else (b, a)
            if e not in edge_mid:
                edge_mid[e] = corner_count + len(mids)
                mids.append(0.5 * (nodes[a] + nodes[b]))
            mid_cols[ti, k] = edge_mid[e]
    all_nodes = np.vstack([nodes, np.asarray(mids).reshape(-1, 2)])
    tri6 = np.hstack([tris, mid_cols])

    mid_tags = np.zeros(len(mids), dtype=int)
    tags = np.concatenate([tags, mid_tags])

    # chain midpoints: tag and record
    for ch in chains:
        for side_nodes, attr in ((ch.nodes, "mid_nodes"), (ch.nodes_right, "mid_nodes_right")):
            if side_nodes is None:
                setattr(ch, attr, None)
                continue
            m = len(side_nodes)
            rng = range(m) if ch.closed else range(m - 1)
            mlist = []
            for i in rng:
                a = int(side_nodes[i])
                b = int(side_nodes[(i + 1) % m])
                e = (a, b) if a < b else (b, a)
                mid = edge_mid.get(e)
                if mid is None:
                    raise MeshingFailure(
                        f"constraint edge missing after finalization on chain {ch.curve.id!r}"
                    )
                tags[mid] = TAG_OUTER if ch.role == "outer" else TAG_SLIT
                mlist.append(mid)
            setattr(ch, attr, np.asarray(mlist, int))

    return SlitMesh(all_nodes, tri6, corner_count, chains, tags)
