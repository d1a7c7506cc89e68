"""Quadratic (P2) finite elements on slit meshes.

Solves the color-diffusion Laplace problem and the adjoint Poisson problem
with Dirichlet data on all constrained chains, and extracts one-sided normal
derivatives along curves.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .curves import Curve
from .errors import SideUnavailable, SingularSystem
from .meshing import TAG_FREE

# barycentric quadrature rules (weights include the 1/2 reference area)
_QUAD_MID = (
    np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    np.array([1.0 / 6, 1.0 / 6, 1.0 / 6]),
)

_a1, _b1 = 0.445948490915965, 0.108103018168070
_a2, _b2 = 0.091576213509771, 0.816847572980459
_QUAD_D4 = (
    np.array(
        [
            [_b1, _a1, _a1],
            [_a1, _b1, _a1],
            [_a1, _a1, _b1],
            [_b2, _a2, _a2],
            [_a2, _b2, _a2],
            [_a2, _a2, _b2],
        ]
    ),
    0.5
    * np.array(
        [
            0.223381589678011,
            0.223381589678011,
            0.223381589678011,
            0.109951743655322,
            0.109951743655322,
            0.109951743655322,
        ]
    ),
)


def p2_basis(bary):
    """Values of the 6 quadratic basis functions at barycentric points (Q, 3)."""
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    return np.stack(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l0 * l1,
            4 * l1 * l2,
            4 * l2 * l0,
        ],
        axis=1,
    )


def p2_basis_grad(bary):
    """Reference-space gradients, shape (Q, 6, 2) with xi = l1, eta = l2."""
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    dl0 = np.array([-1.0, -1.0])
    dl1 = np.array([1.0, 0.0])
    dl2 = np.array([0.0, 1.0])
    q = len(bary)
    g = np.empty((q, 6, 2))
    g[:, 0] = (4 * l0 - 1)[:, None] * dl0
    g[:, 1] = (4 * l1 - 1)[:, None] * dl1
    g[:, 2] = (4 * l2 - 1)[:, None] * dl2
    g[:, 3] = 4 * (l0[:, None] * dl1 + l1[:, None] * dl0)
    g[:, 4] = 4 * (l1[:, None] * dl2 + l2[:, None] * dl1)
    g[:, 5] = 4 * (l2[:, None] * dl0 + l0[:, None] * dl2)
    return g


class FemField:
    """Per-channel nodal coefficients of a P2 field on a SlitMesh."""

    def __init__(self, mesh, coeffs):
        self.mesh = mesh
        self.coeffs = np.asarray(coeffs, float)
        if self.coeffs.ndim == 1:
            self.coeffs = self.coeffs[:, None]
        if len(self.coeffs) != mesh.n_nodes:
            raise ValueError("coefficient length must match node count")

    @property
    def n_channels(self):
        return self.coeffs.shape[1]

    def evaluate(self, tri_ids, bary):
        """Field values at barycentric points inside given triangles."""
        basis = p2_basis(np.atleast_2d(bary))
        conn = self.mesh.triangles[tri_ids]
        vals = self.coeffs[conn]  # (N, 6, C)
        return np.einsum("nk,nkc->nc", basis, vals)


def _tri_locator(mesh):
    """KD-tree over triangle centroids plus cached corner geometry."""
    cache = getattr(mesh, "_fem_locator", None)
    if cache is not None:
        return cache
    from scipy.spatial import cKDTree

    conn = mesh.triangles[:, :3]
    a = mesh.nodes[conn[:, 0]]
    b = mesh.nodes[conn[:, 1]]
    c = mesh.nodes[conn[:, 2]]
    centroids = (a + b + c) / 3.0
    cache = (cKDTree(centroids), a, b - a, c - a)
    mesh._fem_locator = cache
    return cache


def _bary_of(pts, a, v0, v1):
    """Barycentrics of pts within triangles given by corner a and edges v0, v1."""
    v2 = pts - a
    den = v0[..., 0] * v1[..., 1] - v0[..., 1] * v1[..., 0]
    l1 = (v2[..., 0] * v1[..., 1] - v2[..., 1] * v1[..., 0]) / den
    l2 = (v0[..., 0] * v2[..., 1] - v0[..., 1] * v2[..., 0]) / den
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def locate_points(mesh, pts, tol=1e-9):
    """Containing corner triangle per point (-1 outside) plus barycentrics."""
    pts = np.atleast_2d(np.asarray(pts, float))
    tree, a, v0, v1 = _tri_locator(mesh)
    n = len(pts)
    tri_ids = np.full(n, -1, dtype=np.int64)
    bary = np.zeros((n, 3))
    best_deficit = np.full(n, np.inf)
    pending = np.arange(n)
    for k in (8, 64):
        if not len(pending):
            break
        kk = min(k, len(a))
        _, cand = tree.query(pts[pending], k=kk)
        cand = np.atleast_2d(cand.reshape(len(pending), kk))
        with np.errstate(divide="ignore", invalid="ignore"):
            b = _bary_of(pts[pending][:, None, :], a[cand], v0[cand], v1[cand])
        deficit = -b.min(axis=2)  # <= 0 inside
        # degenerate candidate triangles yield NaN barycentrics; reject them
        deficit = np.where(np.isnan(deficit), np.inf, deficit)
        pick = deficit.argmin(axis=1)
        rows = np.arange(len(pending))
        dmin = deficit[rows, pick]
        tri_ids[pending] = cand[rows, pick]
        bary[pending] = b[rows, pick]
        best_deficit[pending] = dmin
        pending = pending[dmin > tol]
        if kk == len(a):
            break
    miss = best_deficit > tol
    tri_ids[miss] = -1
    bary[miss] = 0.0
    hit = ~miss
    if hit.any():
        bh = np.clip(bary[hit], 0.0, 1.0)
        bary[hit] = bh / bh.sum(axis=1, keepdims=True)
    return tri_ids, bary


def evaluate_at_points(field, pts, fill=0.0):
    """Evaluate a FemField at arbitrary points; ``fill`` outside the mesh."""
    pts = np.atleast_2d(np.asarray(pts, float))
    tri_ids, bary = locate_points(field.mesh, pts)
    out = np.full((len(pts), field.n_channels), float(fill))
    inside = tri_ids >= 0
    if inside.any():
        out[inside] = field.evaluate(tri_ids[inside], bary[inside])
    return out, inside


def _geometry(mesh):
    cache = getattr(mesh, "_fem_geom", None)
    if cache is not None:
        return cache
    p = mesh.nodes[mesh.triangles[:, :3]]
    j = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns
    det = j[:, 0, 0] * j[:, 1, 1] - j[:, 0, 1] * j[:, 1, 0]
    inv = np.empty_like(j)
    inv[:, 0, 0] = j[:, 1, 1]
    inv[:, 0, 1] = -j[:, 0, 1]
    inv[:, 1, 0] = -j[:, 1, 0]
    inv[:, 1, 1] = j[:, 0, 0]
    # degenerate (zero-area) triangles get a zero inverse so they contribute
    # nothing to stiffness or gradients instead of NaNs
    degenerate = np.abs(det) < 1e-16
    inv /= np.where(degenerate, 1.0, det)[:, None, None]
    inv[degenerate] = 0.0
    cache = {"p0": p[:, 0], "J": j, "invJ": inv, "det": det}
    mesh._fem_geom = cache
    return cache


def _stiffness(mesh):
    cache = getattr(mesh, "_fem_stiff", None)
    if cache is not None:
        return cache
    geom = _geometry(mesh)
    invJ = geom["invJ"]
    det = np.abs(geom["det"])
    bary, w = _QUAD_MID
    gref = p2_basis_grad(bary)  # (3, 6, 2)
    nt = len(mesh.triangles)
    ke = np.zeros((nt, 6, 6))
    for q in range(len(w)):
        # physical gradients: g_phys = invJ^T applied to reference gradient
        gp = np.einsum("tab,ka->tkb", invJ, gref[q])  # (T, 6, 2)
        ke += w[q] * det[:, None, None] * np.einsum("tkb,tlb->tkl", gp, gp)
    conn = mesh.triangles
    rows = np.repeat(conn, 6, axis=1).ravel()
    cols = np.tile(conn, (1, 6)).ravel()
    k = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    mesh._fem_stiff = k
    return k


def _factorization(mesh):
    cache = getattr(mesh, "_fem_lu", None)
    if cache is not None:
        return cache
    k = _stiffness(mesh)
    free = np.nonzero(mesh.node_tags == TAG_FREE)[0]
    fixed = np.nonzero(mesh.node_tags != TAG_FREE)[0]
    # nodes referenced by no triangle (possible after carving near the domain
    # boundary) have empty stiffness rows; leave them out of the solve
    diag = k.diagonal()
    free = free[diag[free] > 0.0]
    kff = k[free][:, free].tocsc()
    kfd = k[free][:, fixed].tocsr()
    lu = None
    if len(free):
        try:
            lu = spla.splu(kff)
        except RuntimeError as exc:
            raise SingularSystem(str(exc)) from exc
    cache = {"free": free, "fixed": fixed, "kfd": kfd, "lu": lu}
    mesh._fem_lu = cache
    return cache


def solve_laplace(mesh, bc_values):
    """Harmonic extension of Dirichlet data given per node (N, C) on tagged nodes."""
    bc = np.asarray(bc_values, float)
    if bc.ndim == 1:
        bc = bc[:, None]
    fac = _factorization(mesh)
    coeffs = bc.copy()
    if len(fac["free"]):
        rhs = -fac["kfd"] @ bc[fac["fixed"]]
        coeffs[fac["free"]] = fac["lu"].solve(rhs)
    return FemField(mesh, coeffs)


def solve_poisson(mesh, rhs_nodal):
    """Solve lap(p) = f with p = 0 on all constrained chains.

    ``rhs_nodal`` holds f at the mesh nodes (interpolated as a P2 field); the
    load uses the 3-point degree-2 rule.
    """
    f = np.asarray(rhs_nodal, float)
    if f.ndim == 1:
        f = f[:, None]
    geom = _geometry(mesh)
    det = np.abs(geom["det"])
    bary, w = _QUAD_MID
    basis = p2_basis(bary)  # (3, 6)
    conn = mesh.triangles
    fval = f[conn]  # (T, 6, C)
    load = np.zeros_like(f)
    for q in range(len(w)):
        fq = np.einsum("k,tkc->tc", basis[q], fval)  # f at quad point
        contrib = w[q] * det[:, None, None] * basis[q][None, :, None] * fq[:, None, :]
        np.add.at(load, conn, contrib)
    fac = _factorization(mesh)
    coeffs = np.zeros_like(f)
    if len(fac["free"]):
        # weak form: -int grad p . grad phi = int f phi  =>  K p = -F
        coeffs[fac["free"]] = fac["lu"].solve(-load[fac["free"]])
    return FemField(mesh, coeffs)


def dirichlet_from_field(mesh, field):
    """Dirichlet data sampled from a color field at every constrained node."""
    vals = np.zeros((mesh.n_nodes, 3))
    idx = mesh.dirichlet_nodes()
    pts = mesh.nodes[idx]
    x0, y0, x1, y1 = field.bbox
    pts = np.column_stack(
        [np.clip(pts[:, 0], x0, x1), np.clip(pts[:, 1], y0, y1)]
    )
    vals[idx] = field.sample(pts)
    return vals


def integrate_residual(mesh, u, field):
    """0.5 * sum_channels int (u - I)^2 over the mesh, degree-4 quadrature."""
    geom = _geometry(mesh)
    det = np.abs(geom["det"])
    p0 = geom["p0"]
    J = geom["J"]
    bary, w = _QUAD_D4
    basis = p2_basis(bary)
    conn = mesh.triangles
    uval = u.coeffs[conn]
    total = 0.0
    x0, y0, x1, y1 = field.bbox
    for q in range(len(w)):
        xi = bary[q, 1]
        eta = bary[q, 2]
        pts = p0 + J[:, :, 0] * xi + J[:, :, 1] * eta
        pts = np.column_stack(
            [np.clip(pts[:, 0], x0, x1), np.clip(pts[:, 1], y0, y1)]
        )
        ival = field.sample(pts)
        uq = np.einsum("k,tkc->tc", basis[q], uval)
        d2 = ((uq - ival) ** 2).sum(axis=1)
        total += float((w[q] * det * d2).sum())
    return 0.5 * total


def _node_incidence(mesh):
    cache = getattr(mesh, "_fem_incidence", None)
    if cache is not None:
        return cache
    conn = mesh.triangles[:, :3]
    incidence = {}
    for ti, tri in enumerate(conn):
        for v in tri:
            incidence.setdefault(int(v), []).append(ti)
    mesh._fem_incidence = incidence
    return incidence


def _node_gradient(field, node_id, tri_subset=None):
    """Area-weighted one-sided gradient of the field at a corner node."""
    mesh = field.mesh
    geom = _geometry(mesh)
    incidence = _node_incidence(mesh)
    tris = incidence.get(int(node_id), [])
    if tri_subset is not None:
        tris = [t for t in tris if t in tri_subset]
    if not tris:
        raise SideUnavailable(f"node {node_id} has no incident triangles on this side")
    total_w = 0.0
    acc = np.zeros((2, field.n_channels))
    ref_corners = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
    for ti in tris:
        conn = mesh.triangles[ti]
        local = int(np.nonzero(conn[:3] == node_id)[0][0])
        gref = p2_basis_grad(ref_corners[local : local + 1])[0]  # (6, 2)
        invJ = geom["invJ"][ti]
        gphys = gref @ invJ  # (6, 2): rows basis, cols x/y
        grad = gphys.T @ field.coeffs[conn]  # (2, C)
        w = 0.5 * abs(geom["det"][ti])
        acc += w * grad
        total_w += w
    return acc / total_w


def chain_for_curve(mesh, curve_id):
    for ch in mesh.chains:
        if ch.curve.id == curve_id:
            return ch
    raise KeyError(f"curve {curve_id!r} is not constrained in this mesh")


def chain_normals(chain):
    """Left normals at the chain's corner points."""
    c = Curve(chain.points, closed=chain.closed, id=chain.curve.id)
    return c.normals()


def normal_derivative(field, chain, side):
    """One-sided normal derivative along a chain, per corner node and channel.

    The derivative is the one-sided gradient on the requested side dotted
    with that side's outward-from-curve normal (n_left for "left",
    -n_left for "right").  For outer chains only the component-facing side
    exists.
    """
    mesh = field.mesh
    normals = chain_normals(chain)
    if chain.role == "outer":
        if side != chain.side:
            raise SideUnavailable(
                f"chain {chain.curve.id!r}: only side {chain.side!r} faces the domain"
            )
        node_ids = chain.nodes
    else:
        if side == "left":
            node_ids = chain.nodes
        elif side == "right":
            node_ids = chain.nodes_right
        else:
            raise ValueError("side must be 'left' or 'right'")
    sign = 1.0 if side == "left" else -1.0
    m = len(node_ids)
    out = np.empty((m, field.n_channels))
    incidence = _node_incidence(mesh)
    for k in range(m):
        nid = int(node_ids[k])
        tri_subset = None
        if chain.role == "slit" and not chain.closed and (k == 0 or k == m - 1):
            tri_subset = _tip_side_triangles(mesh, chain, k, side, incidence)
        grad = _node_gradient(field, nid, tri_subset)
        n = sign * normals[k]
        out[k] = grad[0] * n[0] + grad[1] * n[1]
    return out


def _tip_side_triangles(mesh, chain, k, side, incidence):
    """Triangles on one side of an open slit's shared tip node."""
    pts = chain.points
    nid = int(chain.nodes[k])
    p = pts[k]
    d = (pts[1] - pts[0]) if k == 0 else (pts[-2] - pts[-1]) * -1.0
    subset = set()
    for ti in incidence.get(nid, []):
        cent = mesh.nodes[mesh.triangles[ti, :3]].mean(axis=0)
        cr = d[0] * (cent[1] - p[1]) - d[1] * (cent[0] - p[0])
        if (cr > 0) == (side == "left"):
            subset.add(ti)
    return subset or None
