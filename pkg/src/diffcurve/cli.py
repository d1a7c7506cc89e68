"""Command-line interface: vectorize, render, validate, metrics."""

from __future__ import annotations

import json
import sys
import time

import click
import numpy as np

from . import boundary as bnd
from .render import complexity as doc_complexity
from .render import render as render_image
from .render import rmse as image_rmse
from . import pipeline
from .curves import BOUNDARY, Curve, CurveSet, circle_curve, rect_boundary_curve
from .doc import DiffusionCurveDoc
from .errors import DiffCurveError
from .fields import load_coons_mesh, load_image, make_analytic, write_png
from .meshing import partition_components
from .optimizer import OptimizerConfig, validate_shape_derivative


def _fail(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _load_field(spec):
    """Resolve an input spec to (ColorField, kind)."""
    if spec.startswith("analytic:"):
        name, _, params = spec[len("analytic:") :].partition("?")
        kv = {}
        if params:
            for pair in params.split(","):
                k, _, v = pair.partition("=")
                kv[k] = float(v)
        return make_analytic(name, kv), "analytic"
    low = spec.lower()
    if low.endswith((".png", ".ppm")):
        return load_image(spec), "pixel"
    if low.endswith(".json"):
        with open(spec) as fh:
            data = json.load(fh)
        if "patches" in data:
            return load_coons_mesh(spec), "coons"
        if "field" in data:
            return _field_from_config(data["field"]), "scene"
        raise ValueError(f"{spec}: JSON is neither a patch mesh nor a scene config")
    raise ValueError(f"{spec}: unsupported input (use .png, .ppm, .json, or analytic:<name>)")


def _field_from_config(cfg):
    if "analytic" in cfg:
        return make_analytic(cfg["analytic"], cfg.get("params", {}))
    if "image" in cfg:
        return load_image(cfg["image"])
    if "doc" in cfg:
        from .fields import DcBackedField

        return DcBackedField.from_doc(
            DiffusionCurveDoc.load(cfg["doc"]), resolution=cfg.get("resolution", 512)
        )
    raise ValueError("scene field must specify 'analytic', 'image', or 'doc'")


def _curves_from_config(entries):
    out = []
    for k, entry in enumerate(entries):
        if "circle" in entry:
            c = entry["circle"]
            out.append(
                circle_curve(
                    tuple(c["center"]), c["radius"], int(c.get("n", 48)), id=entry.get("id", f"s{k}")
                )
            )
        elif "points" in entry:
            out.append(
                Curve(
                    np.asarray(entry["points"], float),
                    closed=bool(entry.get("closed", False)),
                    id=entry.get("id", f"s{k}"),
                )
            )
        else:
            raise ValueError(f"curve #{k}: need 'circle' or 'points'")
    return out


def _default_boundary(field, kind, canny_low, canny_high, h_ref):
    if kind == "pixel":
        return bnd.canny_boundaries(field.data, canny_low, canny_high, boundary_h=h_ref)
    if kind == "coons":
        return bnd.mesh_boundaries(field)
    return CurveSet([rect_boundary_curve(field.bbox, h=h_ref)], [BOUNDARY])


@click.group()
def main():
    """Diffusion-curve vectorization toolkit."""


_common = [
    click.option("--alpha", type=float, default=1e-4, show_default=True),
    click.option("--epsilon", type=float, default=1e-3, show_default=True),
    click.option("--epsilon0", type=float, default=None),
    click.option("--m", type=int, default=2, show_default=True),
    click.option("--canny-low", type=float, default=0.1, show_default=True),
    click.option("--canny-high", type=float, default=0.2, show_default=True),
    click.option("--delta", type=float, default=None),
    click.option("--dn-threshold", type=float, default=0.05, show_default=True),
    click.option("--blur-a", type=float, default=0.2, show_default=True),
    click.option("--blur-b", type=float, default=0.05, show_default=True),
    click.option("--max-passes", type=int, default=6, show_default=True),
    click.option("--h-ref", type=float, default=1.0 / 64, show_default=True),
    click.option("--threads", type=int, default=1, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--warm-start", type=click.Path(exists=True), default=None),
    click.option("--boundary", "boundary_file", type=click.Path(exists=True), default=None),
    click.option("--no-blur", is_flag=True, default=False),
    click.option("--verbose", is_flag=True, default=False),
    click.option("--max-iters", type=int, default=300, show_default=True),
]


def _with_common(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@main.command()
@click.argument("input_path")
@click.option("-o", "--out", required=True, help="output prefix")
@click.option("--resolution", type=int, default=None, help="render resolution (default: input size)")
@_with_common
def vectorize(input_path, out, resolution, **flags):
    """Vectorize an input color field into a diffusion-curve document."""
    t0 = time.time()
    try:
        field, kind = _load_field(input_path)
    except (OSError, ValueError, KeyError) as exc:
        _fail(exc)
    try:
        ocfg = OptimizerConfig(
            alpha=flags["alpha"],
            epsilon=flags["epsilon"],
            h_ref=flags["h_ref"],
            max_iters=flags["max_iters"],
        )
        cfg = pipeline.PipelineConfig(
            epsilon0=flags["epsilon0"],
            max_passes=flags["max_passes"],
            optimizer=ocfg,
            delta=flags["delta"],
            dn_threshold=flags["dn_threshold"],
            blur_a=flags["blur_a"],
            blur_b=flags["blur_b"],
            m=flags["m"],
        )
        if flags["warm_start"]:
            warm_doc = DiffusionCurveDoc.load(flags["warm_start"])
            ws = CurveSet()
            for dc in warm_doc.interior():
                ws.add(dc.curve)
            cfg.warm_start = ws
        if flags["boundary_file"]:
            boundary = bnd.load_curve_file(flags["boundary_file"])
        else:
            boundary = _default_boundary(
                field, kind, flags["canny_low"], flags["canny_high"], flags["h_ref"]
            )
        telemetry = None
        if flags["verbose"]:
            telemetry = lambda rec: click.echo(json.dumps(rec), err=True)

        doc, reports = pipeline.vectorize(
            field,
            boundary,
            cfg,
            threads=flags["threads"],
            telemetry=telemetry,
            blur=not flags["no_blur"],
        )
    except DiffCurveError as exc:
        _fail(exc)

    if resolution is None:
        if hasattr(field, "width"):
            resolution = max(field.width, field.height)
        else:
            resolution = 512
    raster = render_image(doc, resolution, blur=not flags["no_blur"])

    doc.save(f"{out}.dc.json")
    write_png(f"{out}.png", raster)
    from .fields import rasterize_field

    ref = rasterize_field(field, resolution)
    metrics = {
        "rmse": image_rmse(raster, ref),
        "complexity": doc_complexity(doc),
        "residuals": [rep["residual"] for rep in reports],
        "stalled": [rep["component"] for rep in reports if rep["stalled"]],
        "wall_time": time.time() - t0,
        "config": {k: v for k, v in flags.items() if not callable(v)},
    }
    with open(f"{out}.metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=1)
    if flags["verbose"]:
        click.echo(json.dumps({k: metrics[k] for k in ("rmse", "complexity", "wall_time")}), err=True)
    sys.exit(2 if metrics["stalled"] else 0)


@main.command("render")
@click.argument("doc_path")
@click.option("-o", "--out", required=True)
@click.option("--resolution", type=int, default=512, show_default=True)
@click.option("--no-blur", is_flag=True, default=False)
def render_cmd(doc_path, out, resolution, no_blur):
    """Render a .dc.json document to a PNG."""
    try:
        doc = DiffusionCurveDoc.load(doc_path)
        img = render_image(doc, resolution, blur=not no_blur)
        write_png(out, img)
    except (OSError, ValueError, DiffCurveError) as exc:
        _fail(exc)


@main.command()
@click.argument("scene_path")
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--h-ref", type=float, default=1.0 / 128, show_default=True)
@click.option("--t-fd", type=float, default=1e-3, show_default=True)
def validate(scene_path, trials, seed, h_ref, t_fd):
    """Check the adjoint shape derivative against finite differences."""
    if trials < 1:
        _fail("trials must be >= 1")
    try:
        with open(scene_path) as fh:
            scene = json.load(fh)
        field = _field_from_config(scene["field"])
        curves = _curves_from_config(scene["curves"])
        boundary = CurveSet([rect_boundary_curve(field.bbox, h=h_ref * 4)], [BOUNDARY])
        comp = partition_components(field.bbox, boundary)[0]
    except (OSError, ValueError, KeyError) as exc:
        _fail(exc)
    report = validate_shape_derivative(
        field, curves, comp, trials=trials, seed=seed, h_ref=h_ref, t_fd=t_fd
    )
    for t in report["trials"]:
        click.echo(
            f"trial {t['trial']:2d}  adjoint {t['adjoint']:+.6e}  "
            f"fd {t['fd']:+.6e}  rel {t['rel_error']:.3%}"
        )
    click.echo(
        f"median {report['median_rel_error']:.3%}  max {report['max_rel_error']:.3%}"
    )
    sys.exit(0 if report["median_rel_error"] < 0.05 else 1)


@main.command()
@click.argument("doc_path")
@click.option("--against", default=None, help="reference input to compare with")
@click.option("--resolution", type=int, default=256, show_default=True)
def metrics(doc_path, against, resolution):
    """Print RMSE (against a reference) and complexity of a document."""
    try:
        doc = DiffusionCurveDoc.load(doc_path)
        out = {"complexity": doc_complexity(doc)}
        if against:
            from .fields import rasterize_field

            field, _ = _load_field(against)
            img = render_image(doc, resolution)
            out["rmse"] = image_rmse(img, rasterize_field(field, resolution))
        click.echo(json.dumps(out, indent=1))
    except (OSError, ValueError, DiffCurveError) as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
