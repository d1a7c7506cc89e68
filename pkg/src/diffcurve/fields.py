"""Color field backends: pixel images, analytic closures, Coons-patch grids.

All fields share one convention: the domain is an axis-aligned rectangle whose
longest axis has length 1, colors are RGB triples in [0, 1], and both values
and spatial gradients can be queried at arbitrary points.  Query points are
(N, 2) arrays or single (2,) points; the y axis increases with pixel row.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import OutOfDomain

_EPS = 1e-9


def _as_points(x):
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


class ColorField:
    """Base sampler for a 2D RGB color field on a normalized rectangle."""

    def __init__(self, bbox):
        self.bbox = tuple(float(v) for v in bbox)  # (x0, y0, x1, y1)

    def _check_inside(self, pts):
        x0, y0, x1, y1 = self.bbox
        ok = (
            (pts[:, 0] >= x0 - _EPS)
            & (pts[:, 0] <= x1 + _EPS)
            & (pts[:, 1] >= y0 - _EPS)
            & (pts[:, 1] <= y1 + _EPS)
        )
        if not ok.all():
            bad = pts[~ok][0]
            raise OutOfDomain(f"point {tuple(bad)} outside bbox {self.bbox}")

    def sample(self, x):
        """RGB value(s) at point(s) x; raises OutOfDomain outside bbox."""
        pts, single = _as_points(x)
        self._check_inside(pts)
        vals = self._sample(pts)
        return vals[0] if single else vals

    def gradient(self, x):
        """Spatial gradient(s), shape (2, 3) per point: d(rgb)/d(x, y)."""
        pts, single = _as_points(x)
        self._check_inside(pts)
        grads = self._gradient(pts)
        return grads[0] if single else grads

    def _sample(self, pts):
        raise NotImplementedError

    def _gradient(self, pts):
        raise NotImplementedError


class PixelImageField(ColorField):
    """Bilinearly interpolated pixel image, pixel centers at (i+0.5)/s."""

    def __init__(self, data):
        data = np.asarray(data, dtype=float)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError("expected (H, W, 3) image data")
        if not np.isfinite(data).all():
            raise ValueError("image contains non-finite values")
        self.data = data
        h, w = data.shape[:2]
        self.width, self.height = w, h
        s = float(max(w, h))
        self.scale = s
        super().__init__((0.0, 0.0, w / s, h / s))

    @property
    def pixel_size(self):
        return 1.0 / self.scale

    def _pixel_coords(self, pts):
        # continuous pixel index of the lower interpolation corner
        fx = pts[:, 0] * self.scale - 0.5
        fy = pts[:, 1] * self.scale - 0.5
        fx = np.clip(fx, 0.0, self.width - 1.0)
        fy = np.clip(fy, 0.0, self.height - 1.0)
        return fx, fy

    def _sample(self, pts):
        fx, fy = self._pixel_coords(pts)
        i0 = np.clip(np.floor(fx).astype(int), 0, self.width - 2) if self.width > 1 else np.zeros(len(fx), int)
        j0 = np.clip(np.floor(fy).astype(int), 0, self.height - 2) if self.height > 1 else np.zeros(len(fy), int)
        tx = fx - i0
        ty = fy - j0
        d = self.data
        v00 = d[j0, i0]
        v10 = d[j0, np.minimum(i0 + 1, self.width - 1)]
        v01 = d[np.minimum(j0 + 1, self.height - 1), i0]
        v11 = d[np.minimum(j0 + 1, self.height - 1), np.minimum(i0 + 1, self.width - 1)]
        tx = tx[:, None]
        ty = ty[:, None]
        return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11)

    def _gradient(self, pts):
        # central differences with step = one pixel; one-sided at the rim
        h = self.pixel_size
        x0, y0, x1, y1 = self.bbox
        n = len(pts)
        out = np.empty((n, 2, 3))
        for axis in range(2):
            lo = pts.copy()
            hi = pts.copy()
            lo[:, axis] -= h
            hi[:, axis] += h
            lim_lo = (x0, y0)[axis]
            lim_hi = (x1, y1)[axis]
            lo[:, axis] = np.maximum(lo[:, axis], lim_lo)
            hi[:, axis] = np.minimum(hi[:, axis], lim_hi)
            dv = self._sample(hi) - self._sample(lo)
            dx = (hi[:, axis] - lo[:, axis])[:, None]
            out[:, axis, :] = dv / np.maximum(dx, _EPS)
        return out


class AnalyticField(ColorField):
    """Field defined by a vectorized closure (N,2) -> (N,3), optional gradient."""

    def __init__(self, fn, grad_fn=None, bbox=(0.0, 0.0, 1.0, 1.0), fd_step=1e-6):
        super().__init__(bbox)
        self.fn = fn
        self.grad_fn = grad_fn
        self.fd_step = fd_step

    def _sample(self, pts):
        return np.clip(np.asarray(self.fn(pts), dtype=float), 0.0, 1.0)

    def _gradient(self, pts):
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(pts), dtype=float)
        h = self.fd_step
        x0, y0, x1, y1 = self.bbox
        out = np.empty((len(pts), 2, 3))
        for axis in range(2):
            lo = pts.copy()
            hi = pts.copy()
            lo[:, axis] = np.maximum(lo[:, axis] - h, (x0, y0)[axis])
            hi[:, axis] = np.minimum(hi[:, axis] + h, (x1, y1)[axis])
            dv = np.asarray(self.fn(hi), float) - np.asarray(self.fn(lo), float)
            out[:, axis, :] = dv / np.maximum((hi[:, axis] - lo[:, axis])[:, None], _EPS)
        return out


# ---------------------------------------------------------------------------
# Coons patch grids


def _bezier(ctrl, t):
    """Cubic Bezier point; ctrl (4, 2), t (N,)."""
    t = np.asarray(t, float)[:, None]
    mt = 1 - t
    return (
        mt**3 * ctrl[0]
        + 3 * mt**2 * t * ctrl[1]
        + 3 * mt * t**2 * ctrl[2]
        + t**3 * ctrl[3]
    )


def _bezier_deriv(ctrl, t):
    t = np.asarray(t, float)[:, None]
    mt = 1 - t
    return 3 * (
        mt**2 * (ctrl[1] - ctrl[0])
        + 2 * mt * t * (ctrl[2] - ctrl[1])
        + t**2 * (ctrl[3] - ctrl[2])
    )


class CoonsPatch:
    """One bilinearly blended Coons patch with bilinear corner colors.

    Edges are cubic Beziers: bottom b(s), top t(s), left l(t), right r(t),
    with b(0)=l(0), b(1)=r(0), t(0)=l(1), t(1)=r(1).
    """

    def __init__(self, bottom, top, left, right, corner_colors):
        self.bottom = np.asarray(bottom, float)
        self.top = np.asarray(top, float)
        self.left = np.asarray(left, float)
        self.right = np.asarray(right, float)
        # corner_colors: [c00, c10, c01, c11] at (s,t) = (0,0),(1,0),(0,1),(1,1)
        self.corner_colors = np.asarray(corner_colors, float)
        samples = self.position(*np.meshgrid(np.linspace(0, 1, 9), np.linspace(0, 1, 9), indexing="ij"))
        flat = samples.reshape(-1, 2)
        self.bbox = (flat[:, 0].min(), flat[:, 1].min(), flat[:, 0].max(), flat[:, 1].max())

    def position(self, s, t):
        s = np.asarray(s, float).ravel()
        t = np.asarray(t, float).ravel()
        b = _bezier(self.bottom, s)
        tp = _bezier(self.top, s)
        l = _bezier(self.left, t)
        r = _bezier(self.right, t)
        c00 = self.bottom[0]
        c10 = self.bottom[3]
        c01 = self.top[0]
        c11 = self.top[3]
        s_ = s[:, None]
        t_ = t[:, None]
        blend = (
            (1 - t_) * b + t_ * tp + (1 - s_) * l + s_ * r
            - ((1 - s_) * (1 - t_) * c00 + s_ * (1 - t_) * c10 + (1 - s_) * t_ * c01 + s_ * t_ * c11)
        )
        return blend

    def jacobian(self, s, t):
        s = np.asarray(s, float).ravel()
        t = np.asarray(t, float).ravel()
        db = _bezier_deriv(self.bottom, s)
        dtp = _bezier_deriv(self.top, s)
        l = _bezier(self.left, t)
        r = _bezier(self.right, t)
        dl = _bezier_deriv(self.left, t)
        dr = _bezier_deriv(self.right, t)
        b = _bezier(self.bottom, s)
        tp = _bezier(self.top, s)
        c00, c10 = self.bottom[0], self.bottom[3]
        c01, c11 = self.top[0], self.top[3]
        s_ = s[:, None]
        t_ = t[:, None]
        dP_ds = (1 - t_) * db + t_ * dtp - l + r - (-(1 - t_) * c00 + (1 - t_) * c10 - t_ * c01 + t_ * c11)
        dP_dt = -b + tp + (1 - s_) * dl + s_ * dr - (-(1 - s_) * c00 - s_ * c10 + (1 - s_) * c01 + s_ * c11)
        return dP_ds, dP_dt

    def color(self, s, t):
        s = np.asarray(s, float).ravel()[:, None]
        t = np.asarray(t, float).ravel()[:, None]
        c00, c10, c01, c11 = self.corner_colors
        return (1 - s) * (1 - t) * c00 + s * (1 - t) * c10 + (1 - s) * t * c01 + s * t * c11

    def color_uv_grad(self, s, t):
        s = np.asarray(s, float).ravel()[:, None]
        t = np.asarray(t, float).ravel()[:, None]
        c00, c10, c01, c11 = self.corner_colors
        dc_ds = (1 - t) * (c10 - c00) + t * (c11 - c01)
        dc_dt = (1 - s) * (c01 - c00) + s * (c11 - c10)
        return dc_ds, dc_dt

    def invert(self, p, tol=1e-12, max_iter=30):
        """Newton inversion of the position map; returns (s, t) or None."""
        st = np.array([0.5, 0.5])
        for _ in range(max_iter):
            pos = self.position(st[0], st[1])[0]
            r = pos - p
            if r @ r < tol:
                break
            ds, dt = self.jacobian(st[0], st[1])
            J = np.column_stack([ds[0], dt[0]])
            try:
                step = np.linalg.solve(J, r)
            except np.linalg.LinAlgError:
                return None
            st = st - step
            st = np.clip(st, -0.25, 1.25)
        pos = self.position(st[0], st[1])[0]
        if (pos - p) @ (pos - p) > 1e-16 + tol:
            return None
        if -1e-9 <= st[0] <= 1 + 1e-9 and -1e-9 <= st[1] <= 1 + 1e-9:
            return np.clip(st, 0.0, 1.0)
        return None


class CoonsMeshField(ColorField):
    """Color field backed by a grid of Coons patches."""

    def __init__(self, patches, bbox=None):
        self.patches = list(patches)
        if bbox is None:
            xs0 = min(p.bbox[0] for p in self.patches)
            ys0 = min(p.bbox[1] for p in self.patches)
            xs1 = max(p.bbox[2] for p in self.patches)
            ys1 = max(p.bbox[3] for p in self.patches)
            bbox = (xs0, ys0, xs1, ys1)
        super().__init__(bbox)

    def _locate(self, p):
        for patch in self.patches:
            bx0, by0, bx1, by1 = patch.bbox
            pad = 1e-7
            if not (bx0 - pad <= p[0] <= bx1 + pad and by0 - pad <= p[1] <= by1 + pad):
                continue
            st = patch.invert(p)
            if st is not None:
                return patch, st
        raise OutOfDomain(f"point {tuple(p)} not covered by any Coons patch")

    def _sample(self, pts):
        out = np.empty((len(pts), 3))
        for k, p in enumerate(pts):
            patch, st = self._locate(p)
            out[k] = np.clip(patch.color(st[0], st[1])[0], 0.0, 1.0)
        return out

    def _gradient(self, pts):
        out = np.empty((len(pts), 2, 3))
        for k, p in enumerate(pts):
            patch, st = self._locate(p)
            ds, dt = patch.jacobian(st[0], st[1])
            J = np.column_stack([ds[0], dt[0]])  # d(x,y)/d(s,t)
            dc_ds, dc_dt = patch.color_uv_grad(st[0], st[1])
            dc_duv = np.stack([dc_ds[0], dc_dt[0]])  # (2, 3)
            out[k] = np.linalg.solve(J.T, dc_duv)
        return out


class DcBackedField(ColorField):
    """Field sampled from a precomputed forward render of a curve document."""

    def __init__(self, raster_field, doc=None):
        self.raster = raster_field
        self.doc = doc
        super().__init__(raster_field.bbox)

    @classmethod
    def from_doc(cls, doc, resolution=512):
        from .render import render_doc

        img = render_doc(doc, resolution=resolution)
        return cls(PixelImageField(img), doc=doc)

    def _sample(self, pts):
        return self.raster._sample(pts)

    def _gradient(self, pts):
        return self.raster._gradient(pts)


# ---------------------------------------------------------------------------
# I/O and the analytic-field registry


def load_image(path):
    """Load a PNG (via Pillow) or binary PPM (P6) as a PixelImageField."""
    path = str(path)
    if path.endswith(".ppm"):
        return PixelImageField(_read_ppm(path))
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=float) / 255.0
    return PixelImageField(arr)


def _read_ppm(path):
    with open(path, "rb") as f:
        data = f.read()
    tokens = []
    i = 0
    while len(tokens) < 4:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    if tokens[0] != b"P6":
        raise ValueError("only binary PPM (P6) is supported")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    i += 1
    pix = np.frombuffer(data[i : i + w * h * 3], dtype=np.uint8)
    return pix.reshape(h, w, 3).astype(float) / maxval


def write_ppm(path, img):
    arr = np.clip(np.asarray(img, float), 0, 1)
    data = (arr * 255 + 0.5).astype(np.uint8)
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(data.tobytes())


def write_png(path, img):
    from PIL import Image

    arr = (np.clip(np.asarray(img, float), 0, 1) * 255 + 0.5).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(str(path))


def load_coons_mesh(path):
    """Load a Coons patch grid from the documented JSON schema.

    Schema: {"patches": [{"bottom": [[x,y]*4], "top": ..., "left": ...,
    "right": ..., "colors": [[r,g,b]*4]}]}. Colors are ordered
    (s,t) = (0,0), (1,0), (0,1), (1,1).
    """
    with open(path) as f:
        spec = json.load(f)
    patches = [
        CoonsPatch(p["bottom"], p["top"], p["left"], p["right"], p["colors"])
        for p in spec["patches"]
    ]
    return CoonsMeshField(patches)


def _radial_bump(params):
    cx = params.get("cx", 0.5)
    cy = params.get("cy", 0.5)
    sigma = params.get("sigma", 0.15)
    base = np.asarray(params.get("base", (0.2, 0.25, 0.35)), float)
    amp = np.asarray(params.get("amp", (0.6, 0.5, 0.3)), float)

    def fn(pts):
        r2 = (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2
        g = np.exp(-r2 / sigma**2)[:, None]
        return base + g * amp

    def grad(pts):
        dx = pts[:, 0] - cx
        dy = pts[:, 1] - cy
        g = np.exp(-(dx**2 + dy**2) / sigma**2)
        f = -2.0 / sigma**2 * g
        out = np.empty((len(pts), 2, 3))
        out[:, 0, :] = (f * dx)[:, None] * amp
        out[:, 1, :] = (f * dy)[:, None] * amp
        return out

    return AnalyticField(fn, grad)


def _two_bump(params):
    p1 = dict(params.get("bump1", {"cx": 0.3, "cy": 0.35, "sigma": 0.12, "amp": (0.55, 0.2, 0.1)}))
    p2 = dict(params.get("bump2", {"cx": 0.7, "cy": 0.65, "sigma": 0.14, "amp": (0.1, 0.3, 0.55)}))
    base = np.asarray(params.get("base", (0.15, 0.2, 0.25)), float)

    def one(pts, p):
        r2 = (pts[:, 0] - p["cx"]) ** 2 + (pts[:, 1] - p["cy"]) ** 2
        return np.exp(-r2 / p["sigma"] ** 2)[:, None] * np.asarray(p["amp"], float)

    def fn(pts):
        return base + one(pts, p1) + one(pts, p2)

    def grad(pts):
        out = np.zeros((len(pts), 2, 3))
        for p in (p1, p2):
            dx = pts[:, 0] - p["cx"]
            dy = pts[:, 1] - p["cy"]
            g = np.exp(-(dx**2 + dy**2) / p["sigma"] ** 2)
            f = -2.0 / p["sigma"] ** 2 * g
            amp = np.asarray(p["amp"], float)
            out[:, 0, :] += (f * dx)[:, None] * amp
            out[:, 1, :] += (f * dy)[:, None] * amp
        return out

    return AnalyticField(fn, grad)


def _shaded_torus(params):
    cx = params.get("cx", 0.5)
    cy = params.get("cy", 0.5)
    ring = params.get("ring", 0.3)
    width = params.get("width", 0.12)
    base = np.asarray(params.get("base", (0.12, 0.14, 0.2)), float)

    def fn(pts):
        dx = pts[:, 0] - cx
        dy = pts[:, 1] - cy
        r = np.sqrt(dx**2 + dy**2)
        q = (r - ring) / width
        h = np.maximum(0.0, 1.0 - q**2)
        theta = np.arctan2(dy, dx)
        shade = 0.45 + 0.45 * np.cos(theta - 0.8)
        v = (h * (0.25 + 0.65 * shade))[:, None]
        tint = np.array([0.9, 0.65, 0.35])
        return base + v * tint

    return AnalyticField(fn)


_ANALYTIC_REGISTRY = {
    "constant": lambda p: AnalyticField(
        lambda pts, c=np.asarray(
            p.get("color", (p.get("r", 0.5), p.get("g", 0.5), p.get("b", 0.5))), float
        ): np.broadcast_to(c, (len(pts), 3)).copy(),
        lambda pts: np.zeros((len(pts), 2, 3)),
    ),
    "linear": lambda p: AnalyticField(
        lambda pts: np.stack([pts[:, 0], pts[:, 1], np.zeros(len(pts))], axis=1),
        lambda pts: np.broadcast_to(np.array([[[1.0, 0, 0], [0, 1.0, 0]]]), (len(pts), 2, 3)).copy(),
    ),
    "radial_bump": _radial_bump,
    "two_bump": _two_bump,
    "shaded_torus": _shaded_torus,
}


def make_analytic(name, params=None):
    """Construct a registered analytic field by name."""
    if name not in _ANALYTIC_REGISTRY:
        raise ValueError(f"unknown analytic field {name!r}; known: {sorted(_ANALYTIC_REGISTRY)}")
    return _ANALYTIC_REGISTRY[name](params or {})


def rasterize_field(field, resolution):
    """Sample a field on a pixel grid covering its bbox; returns (H, W, 3)."""
    x0, y0, x1, y1 = field.bbox
    s = resolution / max(x1 - x0, y1 - y0)
    w = max(2, int(round((x1 - x0) * s)))
    h = max(2, int(round((y1 - y0) * s)))
    xs = x0 + (np.arange(w) + 0.5) * (x1 - x0) / w
    ys = y0 + (np.arange(h) + 0.5) * (y1 - y0) / h
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return field.sample(pts).reshape(h, w, 3)
