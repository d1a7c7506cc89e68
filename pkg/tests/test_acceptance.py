"""Acceptance suite: ten end-to-end quality gates at stated tolerances.

Heavy scenario runs are shared through module-scoped fixtures; every
curve-evolution run feeds a common telemetry log that the monotone-descent
gate (test 04) checks across all of them.
"""

import json
import time

import numpy as np
import pytest
from click.testing import CliRunner

from diffcurve import fem, optimizer as opt, pipeline
from diffcurve.cli import main as cli_main
from diffcurve.curves import (
    BOUNDARY,
    Curve,
    CurveSet,
    circle_curve,
    rect_boundary_curve,
)
from diffcurve.doc import DiffusionCurveDoc, DocCurve
from diffcurve.fields import (
    AnalyticField,
    PixelImageField,
    make_analytic,
    rasterize_field,
    write_png,
)
from diffcurve.meshing import partition_components, triangulate
from diffcurve.render import complexity, render, rmse

TELEMETRY = []  # every accepted iteration of every acceptance run lands here


def _report(n, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {n}: {status} ({detail})")
    assert ok, f"acceptance criterion {n} failed: {detail}"


def hausdorff(a, b):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


# ---------------------------------------------------------------- scenes

# closed synthetic scene: constant inside a circle, log potential outside
CLOSED_CENTER, CLOSED_R, LOG_B = np.array([0.5, 0.5]), 0.25, 0.3


def closed_scene_fn(p):
    r = np.linalg.norm(p - CLOSED_CENTER, axis=1)
    g = 0.4 + LOG_B * np.log(np.maximum(r, CLOSED_R) / CLOSED_R)
    return np.column_stack([g, g, g])


# open synthetic scene: capacity potential of a horizontal segment
SEG_CX, SEG_CY, SEG_HALF = 0.5, 0.5, 0.2


def open_scene_fn(p):
    z = (p[:, 0] - SEG_CX) + 1j * (p[:, 1] - SEG_CY)
    s = np.sqrt(z * z - SEG_HALF * SEG_HALF)
    aw = np.maximum(np.abs(z + s), np.abs(z - s))  # branch with |w| >= half-length
    g = 0.9 - LOG_B * np.log(np.maximum(aw, SEG_HALF) / SEG_HALF)
    return np.column_stack([g, g, g])


def closed_scene():
    field = AnalyticField(closed_scene_fn)
    truth = circle_curve(tuple(CLOSED_CENTER), CLOSED_R, 512).vertices
    init = circle_curve((0.56, 0.46), 0.31, 64, id="t")
    return field, truth, init


def open_scene():
    field = AnalyticField(open_scene_fn)
    truth = np.column_stack(
        [np.linspace(SEG_CX - SEG_HALF, SEG_CX + SEG_HALF, 512), np.full(512, SEG_CY)]
    )
    xs = np.linspace(SEG_CX - SEG_HALF, SEG_CX + SEG_HALF, 33)
    bow = 0.08 * np.sin(np.pi * (xs - xs[0]) / (2 * SEG_HALF))
    init = Curve(np.column_stack([xs, SEG_CY + bow]), id="t")
    return field, truth, init


@pytest.fixture(scope="module")
def square_component():
    boundary = CurveSet([rect_boundary_curve((0, 0, 1, 1), h=1 / 16)], [BOUNDARY])
    return partition_components((0, 0, 1, 1), boundary)[0]


@pytest.fixture(scope="module")
def recovery_runs(square_component):
    """Criterion 3 runs (also feed criteria 2 context and 4 telemetry)."""
    cfg = opt.OptimizerConfig(h_ref=1 / 64, max_iters=300, epsilon=1e-4)
    out = {}
    for name, scene in (("closed", closed_scene()), ("open", open_scene())):
        field, truth, init = scene
        t0 = time.monotonic()
        res = opt.curve_opt(
            [init], [], field, square_component, cfg,
            telemetry=TELEMETRY.append, telemetry_tag=f"recovery:{name}",
        )
        out[name] = {
            "result": res,
            "truth": truth,
            "seconds": time.monotonic() - t0,
        }
    return out


@pytest.fixture(scope="module")
def flow_run(square_component):
    """Criterion 5 run (also feeds criterion 4 telemetry)."""
    cfg = opt.OptimizerConfig(
        alpha=0.01, h_ref=1 / 32, max_iters=60, epsilon=1e-14, max_halvings=30
    )
    res = opt.curve_opt(
        [circle_curve((0.5, 0.5), 0.3, 64, id="c")], [], make_analytic("constant"),
        square_component, cfg, telemetry=TELEMETRY.append, telemetry_tag="flow",
    )
    return res


@pytest.fixture(scope="module")
def scene_rasters(tmp_path_factory):
    root = tmp_path_factory.mktemp("scenes")
    paths = {}
    for name in ("radial_bump", "two_bump", "shaded_torus"):
        p = root / f"{name}.png"
        write_png(str(p), rasterize_field(make_analytic(name), 256))
        paths[name] = str(p)
    return paths


def run_cli(args):
    t0 = time.monotonic()
    res = CliRunner().invoke(cli_main, args)
    return res, time.monotonic() - t0


@pytest.fixture(scope="module")
def pipeline_runs(scene_rasters, tmp_path_factory):
    """Criterion 7 CLI runs at default flags (shared with criterion 8)."""
    root = tmp_path_factory.mktemp("out")
    out = {}
    for name, path in scene_rasters.items():
        prefix = str(root / name)
        res, secs = run_cli(["vectorize", path, "-o", prefix])
        metrics = None
        if res.exit_code in (0, 2):
            with open(prefix + ".metrics.json") as fh:
                metrics = json.load(fh)
        out[name] = {"exit": res.exit_code, "metrics": metrics, "seconds": secs,
                     "prefix": prefix, "output": res.output}
    return out


@pytest.fixture(scope="module")
def tradeoff_runs(scene_rasters):
    """Criterion 6: library runs so their telemetry feeds criterion 4."""
    from diffcurve.fields import load_image

    field = load_image(scene_rasters["radial_bump"])
    from diffcurve.boundary import canny_boundaries

    out = {}
    for alpha in (1e-3, 1e-5):
        cfg = pipeline.PipelineConfig(
            optimizer=opt.OptimizerConfig(alpha=alpha, h_ref=1 / 64, max_iters=300)
        )
        boundary = canny_boundaries(field.data, 0.1, 0.2, boundary_h=1 / 64)
        tele = lambda rec: TELEMETRY.append({**rec, "tag": f"alpha{alpha}:{rec['tag']}"})
        doc, _ = pipeline.vectorize(field, boundary, cfg, telemetry=tele)
        img = render(doc, 256)
        out[alpha] = {
            "complexity": complexity(doc),
            "rmse": rmse(img, rasterize_field(field, 256)),
        }
    return out


# ---------------------------------------------------------------- criteria


class TestAcceptance:
    def test_01_fem_correctness(self, square_component):
        t0 = time.monotonic()
        mesh = triangulate(square_component, [], h_ref=1 / 32)
        idx = mesh.dirichlet_nodes()

        def solve(fn):
            bc = np.zeros((mesh.n_nodes, 1))
            bc[idx, 0] = fn(mesh.nodes[idx])
            u = fem.solve_laplace(mesh, bc)
            return np.abs(u.coeffs[:, 0] - fn(mesh.nodes)).max()

        err_lin = solve(lambda p: 0.25 + 0.5 * p[:, 0])
        err_quad = solve(lambda p: p[:, 0] ** 2 - p[:, 1] ** 2)

        exact = lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
        errs = []
        for h in (1 / 32, 1 / 64, 1 / 128):
            m = triangulate(square_component, [], h_ref=h)
            rhs = -2 * np.pi**2 * exact(m.nodes)
            p = fem.solve_poisson(m, rhs[:, None])
            errs.append(np.sqrt(np.mean((p.coeffs[:, 0] - exact(m.nodes)) ** 2)))
        order = min(np.log2(errs[i] / errs[i + 1]) for i in range(2))
        secs = time.monotonic() - t0

        ok = err_lin < 1e-8 and err_quad < 1e-8 and order >= 2.7 and secs < 30
        _report(1, ok, f"lin={err_lin:.2e} quad={err_quad:.2e} order={order:.2f} "
                       f"time={secs:.1f}s")

    @pytest.mark.slow
    def test_02_adjoint_validation(self, square_component):
        t0 = time.monotonic()
        errors = []
        for seed, scene in ((0, closed_scene()), (1, open_scene())):
            field, _, init = scene
            rep = opt.validate_shape_derivative(
                field, [init], square_component,
                trials=10, seed=seed, h_ref=1 / 128, t_fd=1e-3,
            )
            errors += [t["rel_error"] for t in rep["trials"]]
        med = float(np.median(errors))
        secs = time.monotonic() - t0
        ok = len(errors) == 20 and med < 0.05 and secs < 300
        _report(2, ok, f"median={med:.3%} over {len(errors)} trials, time={secs:.0f}s")

    @pytest.mark.slow
    def test_03_synthetic_recovery(self, recovery_runs):
        details = []
        ok = True
        for name, run in recovery_runs.items():
            res = run["result"]
            r0 = res.residual_history[0][0]
            rf = res.residual_history[-1][0]
            haus = hausdorff(res.curves[0].vertices, run["truth"])
            good = (haus < 0.02 and rf < 0.01 * r0 and res.iterations <= 300
                    and run["seconds"] < 600)
            ok &= good
            details.append(
                f"{name}: haus={haus:.4f} R={rf:.2e}/{r0:.2e} "
                f"iters={res.iterations} time={run['seconds']:.0f}s"
            )
        _report(3, ok, "; ".join(details))

    @pytest.mark.slow
    def test_04_monotone_descent(self, recovery_runs, flow_run, tradeoff_runs):
        by_tag = {}
        for rec in TELEMETRY:
            by_tag.setdefault(rec["tag"], []).append(rec)
        violations = 0
        total = 0
        for tag, recs in by_tag.items():
            recs = sorted(recs, key=lambda r: r["iter"])
            for a, b in zip(recs, recs[1:]):
                total += 1
                if not b["R_tilde"] < a["R_tilde"]:
                    violations += 1
        ok = violations == 0 and total > 100
        _report(4, ok, f"{violations} violations over {total} accepted steps "
                       f"in {len(by_tag)} runs")

    @pytest.mark.slow
    def test_05_curvature_flow_limit(self, flow_run):
        r0, alpha = 0.3, 0.01
        recs = flow_run.telemetry
        elapsed = 0.0
        worst = 0.0
        for rec in recs[:50]:
            elapsed += rec["t"]
            r_ode = np.sqrt(max(r0**2 - 2 * alpha * elapsed, 0.0))
            r_disc = rec["length"] / (2 * np.pi)
            worst = max(worst, abs(r_disc - r_ode) / r_ode)
        ok = len(recs) >= 50 and worst <= 0.10
        _report(5, ok, f"worst rel deviation {worst:.3f} over first "
                       f"{min(len(recs), 50)} accepted steps")

    @pytest.mark.slow
    def test_06_regularization_tradeoff(self, tradeoff_runs):
        hi, lo = tradeoff_runs[1e-3], tradeoff_runs[1e-5]
        ok = hi["complexity"] < lo["complexity"] and lo["rmse"] < hi["rmse"]
        _report(
            6, ok,
            f"alpha=1e-3: cx={hi['complexity']:.2f} rmse={hi['rmse']:.4f}; "
            f"alpha=1e-5: cx={lo['complexity']:.2f} rmse={lo['rmse']:.4f}",
        )

    @pytest.mark.slow
    def test_07_end_to_end_pipeline(self, pipeline_runs):
        details = []
        ok = True
        for name, run in pipeline_runs.items():
            m = run["metrics"]
            good = (run["exit"] in (0, 2) and m is not None and m["rmse"] < 0.02
                    and m["complexity"] < 25 and run["seconds"] < 300)
            ok &= good
            if m:
                details.append(f"{name}: rmse={m['rmse']:.4f} cx={m['complexity']:.1f} "
                               f"time={run['seconds']:.0f}s exit={run['exit']}")
            else:
                details.append(f"{name}: exit={run['exit']} {run['output'][:120]}")
        _report(7, ok, "; ".join(details))

    @pytest.mark.slow
    def test_08_canny_threshold_insensitivity(
        self, pipeline_runs, scene_rasters, tmp_path_factory
    ):
        r1 = pipeline_runs["shaded_torus"]["metrics"]["rmse"]  # thresholds 0.1/0.2
        prefix = str(tmp_path_factory.mktemp("canny") / "torus2")
        res, secs = run_cli(
            ["vectorize", scene_rasters["shaded_torus"], "-o", prefix,
             "--canny-low", "0.2", "--canny-high", "0.4"]
        )
        ok = res.exit_code in (0, 2)
        r2 = None
        if ok:
            with open(prefix + ".metrics.json") as fh:
                r2 = json.load(fh)["rmse"]
            ok = abs(r1 - r2) / min(r1, r2) < 0.30
        _report(8, ok, f"rmse@0.1={r1:.4f} rmse@0.2={r2 if r2 is None else round(r2, 4)} "
                       f"time={secs:.0f}s")

    def test_09_redundancy_removal(self):
        # field harmonic on each side of x = 0.5 and value-continuous across it;
        # the normal-gradient jump is 3*exp(k*(y-1)), crossing the 0.05 pruning
        # threshold at y* = 1 + ln(0.05/3)/10
        k = 10.0

        def fn(v):
            x, y = v[:, 0], v[:, 1]
            f = np.where(x > 0.5, 0.3 * np.exp(k * (y - 1)) * np.sin(k * (x - 0.5)), 0.0)
            g = 0.2 + 0.5 * x + f
            return np.column_stack([g, g, g])

        bb = rect_boundary_curve((0, 0, 1, 1), h=1 / 32)
        col = fn(bb.vertices)
        n = 17
        seg = Curve(
            np.column_stack([np.full(n, 0.5), np.linspace(0.1, 0.9, n)]), id="seg"
        )
        c = fn(seg.vertices)
        doc = DiffusionCurveDoc(
            (0, 0, 1, 1),
            [DocCurve(bb, col, col, role=BOUNDARY), DocCurve(seg, c, c)],
        )
        out = pipeline.remove_redundant(doc, dn_threshold=0.05, h_ref=1 / 48)
        inner = out.interior()
        seg_len = 0.8 / (n - 1)
        y_star = 1 + np.log(0.05 / 3) / k
        y_cut = inner[0].curve.vertices[:, 1].min() if inner else np.inf
        delta = rmse(
            render(doc, 64, h_ref=1 / 48, blur=False),
            render(out, 64, h_ref=1 / 48, blur=False),
        )
        ok = (len(inner) == 1 and abs(y_cut - y_star) <= seg_len + 1e-9
              and delta < 1e-3)
        _report(9, ok, f"cut at y={y_cut:.3f} vs y*={y_star:.3f} "
                       f"(segment {seg_len:.3f}), render rmse delta={delta:.2e}")

    @pytest.mark.slow
    def test_10_thread_determinism(self, tmp_path_factory):
        # two-component scene: a sharp disk makes Canny emit a closed curve
        root = tmp_path_factory.mktemp("threads")
        xs = (np.arange(128) + 0.5) / 128
        xx, yy = np.meshgrid(xs, xs)
        rr = np.hypot(xx - 0.5, yy - 0.5)
        img = np.empty((128, 128, 3))
        img[..., 0] = np.where(rr < 0.27, 0.8, 0.25) + 0.1 * xx
        img[..., 1] = np.where(rr < 0.27, 0.7, 0.3)
        img[..., 2] = np.where(rr < 0.27, 0.2, 0.6) - 0.1 * yy
        img = np.clip(img, 0, 1)
        path = str(root / "disk.png")
        write_png(path, img)

        blobs = []
        exits = []
        for tag, threads in (("one", "1"), ("eight", "8")):
            prefix = str(root / tag)
            res, _ = run_cli(
                ["vectorize", path, "-o", prefix, "--threads", threads,
                 "--h-ref", str(1 / 48), "--max-iters", "60", "--max-passes", "2"]
            )
            exits.append(res.exit_code)
            blobs.append(open(prefix + ".dc.json", "rb").read())
        doc = DiffusionCurveDoc.from_json(blobs[0].decode())
        n_comp = len(partition_components(
            doc.bbox, pipeline._boundary_set(doc)))
        ok = blobs[0] == blobs[1] and all(e in (0, 2) for e in exits)
        _report(10, ok, f"{len(blobs[0])} bytes, exits={exits}, "
                        f"{n_comp} components, identical={blobs[0] == blobs[1]}")
