"""Polyline curves: normals, curvature, iso-contours, remeshing, advancement.

Orientation convention: the left normal of a segment with tangent T is the
CCW rotation (-T.y, T.x).  Curvature is signed positive when the polyline
turns toward its left normal.
"""

from __future__ import annotations

import numpy as np

from .errors import CollisionUnresolvable, DegenerateSegment

MIN_SEPARATION = 1e-9

BOUNDARY = "boundary"
INTERIOR = "interior"


class Curve:
    """Open or closed polyline with a stable identifier."""

    def __init__(self, vertices, closed=False, id=None):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("vertices must be (N, 2)")
        self.vertices = v
        self.closed = bool(closed)
        self.id = id if id is not None else ""

    def __len__(self):
        return len(self.vertices)

    def copy(self):
        return Curve(self.vertices.copy(), self.closed, self.id)

    def validate(self):
        n = len(self.vertices)
        if n < (3 if self.closed else 2):
            raise ValueError(f"curve {self.id}: too few vertices ({n})")
        seg = self.segment_lengths()
        if (seg <= MIN_SEPARATION).any():
            raise ValueError(f"curve {self.id}: coincident consecutive vertices")
        if curve_self_intersects(self):
            raise ValueError(f"curve {self.id}: self-intersection")

    def segments(self):
        """(M, 2, 2) array of segment endpoints."""
        v = self.vertices
        if self.closed:
            return np.stack([v, np.roll(v, -1, axis=0)], axis=1)
        return np.stack([v[:-1], v[1:]], axis=1)

    def segment_lengths(self):
        s = self.segments()
        return np.linalg.norm(s[:, 1] - s[:, 0], axis=1)

    def length(self):
        return float(self.segment_lengths().sum())

    def normals(self):
        """Per-vertex unit left normals (angle-bisector; segment normal at tips)."""
        v = self.vertices
        seg = self.segments()
        d = seg[:, 1] - seg[:, 0]
        ln = np.linalg.norm(d, axis=1)
        if (ln <= MIN_SEPARATION).any():
            raise DegenerateSegment(f"curve {self.id}")
        t = d / ln[:, None]
        sn = np.column_stack([-t[:, 1], t[:, 0]])  # left normal per segment
        n = len(v)
        out = np.empty((n, 2))
        if self.closed:
            prev = np.roll(sn, 1, axis=0)
            bis = prev + sn
        else:
            bis = np.empty((n, 2))
            bis[0] = sn[0]
            bis[-1] = sn[-1]
            bis[1:-1] = sn[:-1] + sn[1:]
        norms = np.linalg.norm(bis, axis=1)
        # straight-through fallback for near-reversing corners
        bad = norms <= 1e-12
        if bad.any():
            # use the tangent of the incoming segment rotated left
            idx = np.nonzero(bad)[0]
            for i in idx:
                k = i if self.closed else max(i - 1, 0)
                bis[i] = sn[k % len(sn)]
            norms = np.linalg.norm(bis, axis=1)
        out = bis / norms[:, None]
        return out

    def curvatures(self):
        """Per-vertex signed discrete curvature (turning angle over mean length)."""
        v = self.vertices
        seg = self.segments()
        d = seg[:, 1] - seg[:, 0]
        ln = np.linalg.norm(d, axis=1)
        if (ln <= MIN_SEPARATION).any():
            raise DegenerateSegment(f"curve {self.id}")
        t = d / ln[:, None]
        n = len(v)
        kappa = np.zeros(n)
        if self.closed:
            tp = np.roll(t, 1, axis=0)
            lp = np.roll(ln, 1)
            cross = tp[:, 0] * t[:, 1] - tp[:, 1] * t[:, 0]
            dot = np.clip((tp * t).sum(axis=1), -1.0, 1.0)
            theta = np.arctan2(cross, dot)
            kappa = theta / (0.5 * (lp + ln))
        else:
            tp = t[:-1]
            tn = t[1:]
            cross = tp[:, 0] * tn[:, 1] - tp[:, 1] * tn[:, 0]
            dot = np.clip((tp * tn).sum(axis=1), -1.0, 1.0)
            theta = np.arctan2(cross, dot)
            kappa[1:-1] = theta / (0.5 * (ln[:-1] + ln[1:]))
        return kappa


def vertex_normal(curve, i):
    return curve.normals()[i]


def vertex_curvature(curve, i):
    return float(curve.curvatures()[i])


class CurveSet:
    """Curves with role tags; boundary curves are immobile."""

    def __init__(self, curves=(), roles=()):
        self.curves = list(curves)
        self.roles = list(roles) if roles else [INTERIOR] * len(self.curves)
        if len(self.roles) != len(self.curves):
            raise ValueError("roles must align with curves")

    def __len__(self):
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)

    def copy(self):
        return CurveSet([c.copy() for c in self.curves], list(self.roles))

    def add(self, curve, role=INTERIOR):
        self.curves.append(curve)
        self.roles.append(role)

    def boundary_curves(self):
        return [c for c, r in zip(self.curves, self.roles) if r == BOUNDARY]

    def interior_curves(self):
        return [c for c, r in zip(self.curves, self.roles) if r == INTERIOR]

    def interior_indices(self):
        return [i for i, r in enumerate(self.roles) if r == INTERIOR]

    def total_interior_length(self):
        return sum(c.length() for c in self.interior_curves())

    def extend(self, other):
        for c, r in zip(other.curves, other.roles):
            self.add(c, r)


# ---------------------------------------------------------------------------
# Intersection predicates


def _segments_cross(a, b, tol=1e-12):
    """Pairwise crossing test between segment arrays a (N,2,2) and b (M,2,2).

    Returns an (N, M) boolean matrix.  Touching exactly at shared endpoints
    is not counted; a genuine overlap or interior touch is.
    """
    p = a[:, 0][:, None, :]
    r = (a[:, 1] - a[:, 0])[:, None, :]
    q = b[None, :, 0, :]
    s = (b[:, 1] - b[:, 0])[None, :, :]
    rxs = r[..., 0] * s[..., 1] - r[..., 1] * s[..., 0]
    qp = q - p
    qpxr = qp[..., 0] * r[..., 1] - qp[..., 1] * r[..., 0]
    qpxs = qp[..., 0] * s[..., 1] - qp[..., 1] * s[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = qpxs / rxs
        u = qpxr / rxs
    eps = 1e-9
    proper = (np.abs(rxs) > tol) & (t > eps) & (t < 1 - eps) & (u > eps) & (u < 1 - eps)
    # collinear overlap: rxs == 0 and qpxr == 0 and projections overlap
    coll = (np.abs(rxs) <= tol) & (np.abs(qpxr) <= tol)
    if coll.any():
        rr = (r * r).sum(axis=-1)
        t0 = (qp * r).sum(axis=-1) / np.maximum(rr, tol)
        t1 = t0 + (s * r).sum(axis=-1) / np.maximum(rr, tol)
        lo = np.minimum(t0, t1)
        hi = np.maximum(t0, t1)
        overlap = (hi > eps) & (lo < 1 - eps)
        proper |= coll & overlap
    return proper


def curve_self_intersects(curve):
    seg = curve.segments()
    m = len(seg)
    if m < 2:
        return False
    hits = _segments_cross(seg, seg)
    np.fill_diagonal(hits, False)
    return bool(hits.any())


def curves_intersect(c1, c2):
    return bool(_segments_cross(c1.segments(), c2.segments()).any())


def curveset_has_collisions(cset):
    curves = cset.curves
    for c in curves:
        if curve_self_intersects(c):
            return True
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            if curves_intersect(curves[i], curves[j]):
                return True
    return False


def point_in_polygon(pts, poly):
    """Even-odd rule point-in-polygon for (N,2) pts against closed poly (M,2)."""
    pts = np.atleast_2d(np.asarray(pts, float))
    x = pts[:, 0][:, None]
    y = pts[:, 1][:, None]
    x0 = poly[:, 0][None, :]
    y0 = poly[:, 1][None, :]
    x1 = np.roll(poly[:, 0], -1)[None, :]
    y1 = np.roll(poly[:, 1], -1)[None, :]
    cond = (y0 <= y) != (y1 <= y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    crossings = (cond & (x < xint)).sum(axis=1)
    return (crossings % 2) == 1


def polygon_area(poly):
    """Signed shoelace area; positive for CCW."""
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


# ---------------------------------------------------------------------------
# Iso-contour extraction (marching squares)


def extract_isocontours(grid, iso, extent=(0.0, 0.0, 1.0, 1.0)):
    """Marching-squares contours of a scalar raster at level ``iso``.

    ``grid[j, i]`` sits at position (x0 + i*dx, y0 + j*dy).  Saddle cells are
    disambiguated with the cell-average rule.  Returns a list of Curve objects
    (closed when the contour loops).
    """
    g = np.asarray(grid, dtype=float)
    ny, nx = g.shape
    if nx < 2 or ny < 2:
        raise ValueError("grid must be at least 2x2")
    x0, y0, x1, y1 = extent
    dx = (x1 - x0) / (nx - 1)
    dy = (y1 - y0) / (ny - 1)

    above = g > iso
    segments = []  # list of (key_a, key_b)
    points = {}

    def hkey(j, i):
        return ("H", j, i)

    def vkey(j, i):
        return ("V", j, i)

    def interp_h(j, i):
        f0, f1 = g[j, i], g[j, i + 1]
        t = 0.5 if f1 == f0 else (iso - f0) / (f1 - f0)
        return (x0 + (i + t) * dx, y0 + j * dy)

    def interp_v(j, i):
        f0, f1 = g[j, i], g[j + 1, i]
        t = 0.5 if f1 == f0 else (iso - f0) / (f1 - f0)
        return (x0 + i * dx, y0 + (j + t) * dy)

    for j in range(ny - 1):
        for i in range(nx - 1):
            b00 = above[j, i]
            b10 = above[j, i + 1]
            b01 = above[j + 1, i]
            b11 = above[j + 1, i + 1]
            case = (b00 << 0) | (b10 << 1) | (b01 << 2) | (b11 << 3)
            if case in (0, 15):
                continue
            top = hkey(j, i)
            bot = hkey(j + 1, i)
            left = vkey(j, i)
            right = vkey(j, i + 1)
            if top not in points and b00 != b10:
                points[top] = interp_h(j, i)
            if bot not in points and b01 != b11:
                points[bot] = interp_h(j + 1, i)
            if left not in points and b00 != b01:
                points[left] = interp_v(j, i)
            if right not in points and b10 != b11:
                points[right] = interp_v(j, i + 1)

            if case in (1, 14):
                segments.append((top, left))
            elif case in (2, 13):
                segments.append((top, right))
            elif case in (4, 11):
                segments.append((left, bot))
            elif case in (8, 7):
                segments.append((right, bot))
            elif case in (3, 12):
                segments.append((left, right))
            elif case in (5, 10):
                segments.append((top, bot))
            elif case in (6, 9):
                center_above = 0.25 * (g[j, i] + g[j, i + 1] + g[j + 1, i] + g[j + 1, i + 1]) > iso
                # case 6: b10 and b01 above; case 9: b00 and b11 above
                if (case == 6) == center_above:
                    segments.append((top, right))
                    segments.append((left, bot))
                else:
                    segments.append((top, left))
                    segments.append((right, bot))

    # chain segments into polylines
    adjacency = {}
    for si, (a, b) in enumerate(segments):
        adjacency.setdefault(a, []).append((si, b))
        adjacency.setdefault(b, []).append((si, a))

    used = np.zeros(len(segments), bool)
    curves = []

    def walk(start_key):
        chain = [start_key]
        cur = start_key
        while True:
            nxt = None
            for si, other in adjacency[cur]:
                if not used[si]:
                    used[si] = True
                    nxt = other
                    break
            if nxt is None:
                break
            chain.append(nxt)
            cur = nxt
        return chain

    # open chains first (endpoints of degree 1)
    endpoints = sorted(k for k, lst in adjacency.items() if len(lst) == 1)
    for key in endpoints:
        if all(used[si] for si, _ in adjacency[key]):
            continue
        chain = walk(key)
        if len(chain) >= 2:
            curves.append((chain, False))
    # remaining loops
    for key in sorted(adjacency.keys()):
        if all(used[si] for si, _ in adjacency[key]):
            continue
        chain = walk(key)
        if len(chain) >= 3 and chain[0] == chain[-1]:
            curves.append((chain[:-1], True))
        elif len(chain) >= 3:
            curves.append((chain, True))

    out = []
    for chain, closed in curves:
        verts = np.array([points[k] for k in chain])
        keep = np.ones(len(verts), bool)
        keep[1:] = np.linalg.norm(np.diff(verts, axis=0), axis=1) > MIN_SEPARATION
        verts = verts[keep]
        if closed and len(verts) >= 3 and np.linalg.norm(verts[0] - verts[-1]) <= MIN_SEPARATION:
            verts = verts[:-1]
        if len(verts) >= (3 if closed else 2):
            out.append(Curve(verts, closed=closed))
    return out


# ---------------------------------------------------------------------------
# Remeshing and advancement


def remesh_curve(curve, h_min, h_max):
    """Split segments longer than h_max, collapse shorter than h_min.

    Returns a new Curve, or None if the curve degenerates below the minimum
    vertex count.
    """
    v = [p for p in curve.vertices]
    closed = curve.closed
    for _ in range(32):
        changed = False
        # split pass
        out = []
        m = len(v)
        rng = range(m) if closed else range(m - 1)
        for i in rng:
            a = v[i]
            b = v[(i + 1) % m]
            out.append(a)
            if np.linalg.norm(b - a) > h_max:
                out.append(0.5 * (a + b))
                changed = True
        if not closed:
            out.append(v[-1])
        v = out
        # collapse pass
        m = len(v)
        if m > (3 if closed else 2):
            out = []
            i = 0
            if closed:
                keep = [True] * m
                for i in range(m):
                    j = (i + 1) % m
                    if keep[i] and keep[j] and len(v) - keep.count(False) > 3:
                        if np.linalg.norm(v[j] - v[i]) < h_min:
                            keep[j] = False
                            changed = True
                v = [p for p, k in zip(v, keep) if k]
            else:
                out = [v[0]]
                for i in range(1, m - 1):
                    if np.linalg.norm(v[i] - out[-1]) < h_min:
                        changed = True
                        continue
                    out.append(v[i])
                if np.linalg.norm(v[-1] - out[-1]) < h_min and len(out) > 1:
                    out.pop()
                    changed = True
                out.append(v[-1])
                v = out
        if not changed:
            break
    if len(v) < (3 if closed else 2):
        return None
    arr = np.asarray(v)
    seg = np.linalg.norm(np.diff(arr, axis=0), axis=1)
    if (seg <= MIN_SEPARATION).any():
        keep = np.ones(len(arr), bool)
        keep[1:] = seg > MIN_SEPARATION
        arr = arr[keep]
        if len(arr) < (3 if closed else 2):
            return None
    return Curve(arr, closed, curve.id)


def advance_curves(cset, velocities, t, h_min, h_max, max_halvings=20):
    """Move interior vertices by v_n * t along left normals, collision-safely.

    ``velocities`` maps curve index -> per-vertex normal speed array.  The
    time step is halved (up to ``max_halvings``) until the remeshed result is
    free of self-intersections and pairwise collisions.  Boundary curves are
    returned untouched.  Raises CollisionUnresolvable if no step works.
    """
    interior = cset.interior_indices()
    if not interior or all(np.abs(velocities.get(i, 0)).max() == 0 for i in interior if i in velocities):
        moved = _apply_motion(cset, velocities, t, h_min, h_max)
        if moved is not None:
            return moved
    for k in range(max_halvings + 1):
        tk = t / (2**k)
        moved = _apply_motion(cset, velocities, tk, h_min, h_max)
        if moved is not None:
            return moved
    raise CollisionUnresolvable("no collision-free step found")


def _apply_motion(cset, velocities, t, h_min, h_max):
    out = CurveSet()
    for idx, (curve, role) in enumerate(zip(cset.curves, cset.roles)):
        if role == BOUNDARY or idx not in velocities:
            out.add(curve, role)
            continue
        vn = np.asarray(velocities[idx], float)
        normals = curve.normals()
        new_v = curve.vertices + (vn * t)[:, None] * normals
        c = Curve(new_v, curve.closed, curve.id)
        c = remesh_curve(c, h_min, h_max)
        if c is None:
            continue  # curve collapsed away
        out.add(c, role)
    if curveset_has_collisions(out):
        return None
    return out


def simplify_polyline(pts, tol):
    """Douglas-Peucker simplification."""
    pts = np.asarray(pts, float)
    if len(pts) <= 2:
        return pts
    keep = np.zeros(len(pts), bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        seg = pts[b] - pts[a]
        ln = np.linalg.norm(seg)
        mid = pts[a + 1 : b]
        if ln < MIN_SEPARATION:
            d = np.linalg.norm(mid - pts[a], axis=1)
        else:
            u = seg / ln
            rel = mid - pts[a]
            d = np.abs(u[0] * rel[:, 1] - u[1] * rel[:, 0])
        i = int(np.argmax(d))
        if d[i] > tol:
            keep[a + 1 + i] = True
            stack.append((a, a + 1 + i))
            stack.append((a + 1 + i, b))
    return pts[keep]


def circle_curve(center, radius, n=64, id=None):
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    pts = np.column_stack(
        [center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)]
    )
    return Curve(pts, closed=True, id=id)


def rect_boundary_curve(bbox, h=None, id="bbox"):
    """Closed CCW rectangle polyline along a bbox, optionally subdivided."""
    x0, y0, x1, y1 = bbox
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    pts = []
    for k in range(4):
        a = np.asarray(corners[k], float)
        b = np.asarray(corners[(k + 1) % 4], float)
        n = 1 if h is None else max(1, int(np.ceil(np.linalg.norm(b - a) / h)))
        for i in range(n):
            pts.append(a + (b - a) * (i / n))
    return Curve(np.asarray(pts), closed=True, id=id)
