"""Command-line pipeline: estimate, render, relight, fit, eval, serve."""

from __future__ import annotations

import csv
import json
import logging
import os
import sys
from pathlib import Path

import click

from .coarse import CoarseConfig, coarse_pipeline
from .fileio import (
    FileFormatError,
    load_image_png,
    load_mask_png,
    load_pfm,
    save_image_png,
    save_pfm,
)
from .fit import FitConfig, fit_decomposition
from .losses import LossWeights, metric_report
from .manifest import ManifestError, load_coarse, load_decomposition, save_coarse, save_decomposition
from .raster import RasterError
from .rendering import LightParams, RenderConfig, RenderError, render

log = logging.getLogger("derender")


def _setup_logging() -> None:
    level = os.environ.get("DERENDER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def parse_light_spec(spec: str, default_alpha: float | None = None, default_a_spec: float | None = None):
    """Parse a light flag: either a JSON object or inline "x,y,s_amb,s_dir"."""
    spec = spec.strip()
    if spec.startswith("{"):
        data = json.loads(spec)
    elif os.path.isfile(spec):
        data = json.loads(Path(spec).read_text(encoding="utf-8"))
    else:
        parts = spec.split(",")
        if len(parts) != 4:
            raise ValueError('inline light must be "x,y,s_amb,s_dir"')
        x, y, s_amb, s_dir = (float(p) for p in parts)
        data = {"x": x, "y": y, "s_amb": s_amb, "s_dir": s_dir}
    light = LightParams.from_xy(data["x"], data["y"], data["s_amb"], data["s_dir"])
    alpha = data.get("alpha", default_alpha)
    a_spec = data.get("a_spec", default_a_spec)
    return light, alpha, a_spec


@click.group()
def main() -> None:
    """De-render, re-render and relight images of objects."""
    _setup_logging()


@main.command("estimate")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--depth", "depth_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--normals", "normals_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--iters", default=100, show_default=True)
@click.option("--lr-light", default=0.01, show_default=True)
@click.option("--lr-albedo", default=None, type=float)
@click.option("--lambda-tv", default=None, type=float)
@click.option("--preset", type=click.Choice(["face", "object"]), default="face", show_default=True)
@click.option("--id", "est_id", default=None, help="Manifest id (defaults to the output directory name).")
def cmd_estimate(image_path, depth_path, normals_path, mask_path, out_dir, iters, lr_light, lr_albedo, lambda_tv, preset, est_id):
    """Precompute a coarse light/albedo estimate from an image and geometry."""
    if (depth_path is None) == (normals_path is None):
        raise click.UsageError("exactly one of --depth or --normals is required")
    base = CoarseConfig.face() if preset == "face" else CoarseConfig.object()
    cfg = CoarseConfig(
        iters=iters,
        lr_light=lr_light,
        lr_albedo=lr_albedo if lr_albedo is not None else base.lr_albedo,
        lambda_tv=lambda_tv if lambda_tv is not None else base.lambda_tv,
    )
    try:
        img = load_image_png(image_path)
        geometry = load_pfm(depth_path) if depth_path else load_pfm(normals_path, reject_nan=True)
        valid = load_mask_png(mask_path) if mask_path else None
        est = coarse_pipeline(img, geometry, valid, cfg)
        cfg_dict = {"iters": cfg.iters, "lr_light": cfg.lr_light, "lr_albedo": cfg.lr_albedo, "lambda_tv": cfg.lambda_tv, "preset": preset}
        save_coarse(out_dir, est_id or Path(out_dir).name, est, cfg_dict)
    except (FileFormatError, RasterError, RenderError, ManifestError) as e:
        _fail(str(e))
    if est.degenerate_light:
        log.warning("ambient/directional split under-determined (flat coarse normals)")
    click.echo(f"wrote coarse estimate to {out_dir}")


def _render_command(manifest_path, light_spec, out, out_diff, out_spec):
    try:
        dec, cfg, _ = load_decomposition(manifest_path)
        if light_spec is None:
            light = dec.light
        else:
            light, alpha, a_spec = parse_light_spec(light_spec, dec.material.alpha, dec.material.a_spec)
            if alpha is not None:
                dec.material.alpha = float(alpha)
            if a_spec is not None:
                dec.material.a_spec = float(a_spec)
        image, i_diff, i_spec = render(dec, light, cfg)
        save_image_png(out, image)
        if out_diff:
            save_pfm(out_diff, i_diff)
        if out_spec:
            save_pfm(out_spec, i_spec)
    except (FileFormatError, RasterError, RenderError, ManifestError, ValueError) as e:
        _fail(str(e))
    click.echo(f"wrote {out}")


@main.command("render")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--out-diff", type=click.Path(dir_okay=False))
@click.option("--out-spec", type=click.Path(dir_okay=False))
def cmd_render(manifest_path, out, out_diff, out_spec):
    """Render a decomposition under its stored light."""
    _render_command(manifest_path, None, out, out_diff, out_spec)


@main.command("relight")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--light", "light_spec", required=True, help='JSON (inline or file) or "x,y,s_amb,s_dir".')
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--out-diff", type=click.Path(dir_okay=False))
@click.option("--out-spec", type=click.Path(dir_okay=False))
def cmd_relight(manifest_path, light_spec, out, out_diff, out_spec):
    """Render a decomposition under a new light."""
    _render_command(manifest_path, light_spec, out, out_diff, out_spec)


@main.command("fit")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--coarse-dir", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--iters", default=500, show_default=True)
@click.option("--lr", default=0.01, show_default=True)
@click.option("--lambda-rec", default=0.5, show_default=True)
@click.option("--lambda-l", default=1.0, show_default=True)
@click.option("--a-spec-min", default=0.0, show_default=True)
@click.option("--a-spec-max", default=0.5, show_default=True)
@click.option("--id", "dec_id", default=None)
def cmd_fit(image_path, coarse_dir, out_dir, iters, lr, lambda_rec, lambda_l, a_spec_min, a_spec_max, dec_id):
    """Fit a full decomposition of one image against its coarse estimate."""
    try:
        img = load_image_png(image_path)
        coarse, _ = load_coarse(coarse_dir)
        weights = LossWeights(lambda_rec=lambda_rec, lambda_l=lambda_l)
        rcfg = RenderConfig(a_spec_min=a_spec_min, a_spec_max=a_spec_max)
        cfg = FitConfig(iters=iters, lr=lr, weights=weights, render=rcfg)
        dec, report = fit_decomposition(img, coarse, cfg)
        out = Path(out_dir)
        save_decomposition(out, dec_id or out.name, dec, rcfg)
        with open(out / "trace.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iteration", "total", "coarse", "rec"])
            for i, (total, coarse_v, rec) in enumerate(report.components):
                writer.writerow([i, repr(total), repr(coarse_v), repr(rec)])
    except (FileFormatError, RasterError, RenderError, ManifestError) as e:
        _fail(str(e))
    click.echo(f"wrote fitted decomposition to {out_dir}")


@main.command("eval")
@click.option("--pred-albedo", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gt-albedo", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pred-normals", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gt-normals", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_eval(pred_albedo, gt_albedo, pred_normals, gt_normals, mask_path, out):
    """Evaluate predicted albedo and normals against ground truth."""
    try:
        report = metric_report(
            load_pfm(pred_albedo),
            load_pfm(gt_albedo),
            load_pfm(pred_normals, reject_nan=True),
            load_pfm(gt_normals, reject_nan=True),
            load_mask_png(mask_path) if mask_path else None,
        )
        Path(out).write_text(json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except (FileFormatError, RasterError, RenderError) as e:
        _fail(str(e))
    click.echo(f"wrote {out}")


@main.command("serve")
@click.option("--dir", "root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def cmd_serve(root, port, host):
    """Serve decompositions and relighting over HTTP."""
    import uvicorn

    from .service import create_app

    try:
        uvicorn.run(create_app(root), host=host, port=port, log_level="warning")
    except SystemExit:
        raise
    except OSError as e:
        _fail(f"could not start the service: {e}")


if __name__ == "__main__":
    main()
