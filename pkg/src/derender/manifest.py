"""On-disk layout for decompositions and coarse estimates.

A manifest directory holds the float maps (PFM), preview images (PNG), and a
``manifest.json`` tying them together with the light/material parameters and
a provenance block.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import os
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .coarse import CoarseEstimate
from .fileio import (
    load_mask_png,
    load_pfm,
    save_image_png,
    save_mask_png,
    save_pfm,
)
from .rendering import Decomposition, LightParams, MaterialParams, RenderConfig

TOOL_VERSION = "0.1.0"


class ManifestError(ValueError):
    pass


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode("utf-8")).hexdigest()


def _timestamp() -> str:
    # Honors SOURCE_DATE_EPOCH so identical runs can produce identical bytes.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        dt = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        dt = datetime.datetime.now(tz=datetime.timezone.utc)
    return dt.replace(microsecond=0).isoformat()


def _provenance(cfg: dict) -> dict:
    return {"tool_version": TOOL_VERSION, "config_hash": config_hash(cfg), "created": _timestamp()}


def light_material_json(light: LightParams, material: MaterialParams | None = None) -> dict:
    out = {"s_amb": light.s_amb, "s_dir": light.s_dir, "l": list(light.l)}
    if material is not None:
        out["alpha"] = material.alpha
        out["a_spec"] = material.a_spec
    return out


def _write_manifest(path: Path, manifest: dict) -> None:
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def save_decomposition(out_dir, dec_id: str, dec: Decomposition, cfg: RenderConfig) -> dict:
    """Write a fitted decomposition plus its manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_pfm(out / "albedo.pfm", dec.material.albedo)
    save_image_png(out / "albedo.png", np.clip(dec.material.albedo, 0, 1))
    save_pfm(out / "normals.pfm", dec.normals)
    save_pfm(out / "n_refine.pfm", dec.n_refine)
    save_pfm(out / "depth.pfm", dec.depth)
    mask = np.ones(np.asarray(dec.depth).shape, dtype=bool)
    save_mask_png(out / "mask.png", mask)
    files = {
        "albedo_pfm": "albedo.pfm",
        "albedo_png": "albedo.png",
        "normals_pfm": "normals.pfm",
        "n_refine_pfm": "n_refine.pfm",
        "depth_pfm": "depth.pfm",
        "mask_png": "mask.png",
    }
    if dec.spec_refine is not None:
        save_pfm(out / "spec_refine.pfm", dec.spec_refine)
        files["spec_refine_pfm"] = "spec_refine.pfm"
    cfg_dict = asdict(cfg)
    manifest = {
        "id": dec_id,
        "kind": "decomposition",
        "files": files,
        "light_material": light_material_json(dec.light, dec.material),
        "render_config": cfg_dict,
        "provenance": _provenance(cfg_dict),
    }
    _write_manifest(out / "manifest.json", manifest)
    return manifest


def save_coarse(out_dir, est_id: str, est: CoarseEstimate, cfg: dict) -> dict:
    """Write a coarse estimate plus its manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_pfm(out / "n_c.pfm", est.n_c)
    save_mask_png(out / "mask.png", est.valid)
    files = {"n_c_pfm": "n_c.pfm", "mask_png": "mask.png"}
    if est.a_c is not None:
        save_pfm(out / "a_c.pfm", est.a_c)
        save_image_png(out / "a_c.png", np.clip(est.a_c, 0, 1))
        files["a_c_pfm"] = "a_c.pfm"
        files["a_c_png"] = "a_c.png"
    if est.a_tilde is not None:
        save_pfm(out / "a_tilde.pfm", est.a_tilde)
        files["a_tilde_pfm"] = "a_tilde.pfm"
    if est.d_c is not None:
        save_pfm(out / "d_c.pfm", est.d_c)
        files["d_c_pfm"] = "d_c.pfm"
    manifest = {
        "id": est_id,
        "kind": "coarse",
        "files": files,
        "light": None if est.l_c is None else light_material_json(est.l_c),
        "degenerate_light": bool(est.degenerate_light),
        "provenance": _provenance(cfg),
    }
    _write_manifest(out / "manifest.json", manifest)
    return manifest


def _manifest_dir(path) -> tuple[Path, dict]:
    p = Path(path)
    mpath = p / "manifest.json" if p.is_dir() else p
    if not mpath.exists():
        raise ManifestError(f"no manifest at {mpath}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"invalid manifest JSON: {e}") from e
    return mpath.parent, manifest


def _file(base: Path, manifest: dict, key: str) -> Path:
    try:
        rel = manifest["files"][key]
    except KeyError:
        raise ManifestError(f"manifest is missing the {key} entry") from None
    path = base / rel
    if not path.exists():
        raise ManifestError(f"referenced file does not exist: {path}")
    return path


def load_decomposition(path) -> tuple[Decomposition, RenderConfig, dict]:
    """Load a decomposition manifest; returns (dec, render config, manifest)."""
    base, manifest = _manifest_dir(path)
    if manifest.get("kind") != "decomposition":
        raise ManifestError(f"expected a decomposition manifest, got kind {manifest.get('kind')!r}")
    cfg = RenderConfig(**{**manifest["render_config"], "view_dir": tuple(manifest["render_config"]["view_dir"])})
    lm = manifest["light_material"]
    light = LightParams(s_amb=lm["s_amb"], s_dir=lm["s_dir"], l=tuple(lm["l"]))
    material = MaterialParams(
        albedo=load_pfm(_file(base, manifest, "albedo_pfm")),
        alpha=lm["alpha"],
        a_spec=lm["a_spec"],
    )
    spec_refine = None
    if "spec_refine_pfm" in manifest["files"]:
        spec_refine = load_pfm(_file(base, manifest, "spec_refine_pfm"))
    # Depth is stored as float32; values at the range bounds can round just
    # past them, so snap back before validating.
    depth = load_pfm(_file(base, manifest, "depth_pfm"))
    depth = np.clip(depth, cfg.d_min, cfg.d_max)
    dec = Decomposition(
        depth=depth,
        normals=load_pfm(_file(base, manifest, "normals_pfm"), reject_nan=True),
        n_refine=load_pfm(_file(base, manifest, "n_refine_pfm"), reject_nan=True),
        material=material,
        light=light,
        spec_refine=spec_refine,
    )
    dec.validate(cfg)
    return dec, cfg, manifest


def load_coarse(path) -> tuple[CoarseEstimate, dict]:
    """Load a coarse-estimate manifest; returns (estimate, manifest)."""
    base, manifest = _manifest_dir(path)
    if manifest.get("kind") != "coarse":
        raise ManifestError(f"expected a coarse manifest, got kind {manifest.get('kind')!r}")
    light = None
    if manifest.get("light") is not None:
        lm = manifest["light"]
        light = LightParams(s_amb=lm["s_amb"], s_dir=lm["s_dir"], l=tuple(lm["l"]))
    est = CoarseEstimate(
        n_c=load_pfm(_file(base, manifest, "n_c_pfm"), reject_nan=True),
        a_c=load_pfm(_file(base, manifest, "a_c_pfm")) if "a_c_pfm" in manifest["files"] else None,
        a_tilde=load_pfm(_file(base, manifest, "a_tilde_pfm")) if "a_tilde_pfm" in manifest["files"] else None,
        l_c=light,
        d_c=load_pfm(_file(base, manifest, "d_c_pfm")) if "d_c_pfm" in manifest["files"] else None,
        valid=load_mask_png(_file(base, manifest, "mask_png")),
        degenerate_light=bool(manifest.get("degenerate_light", False)),
    )
    return est, manifest


def discover_decompositions(root) -> dict[str, Path]:
    """Map decomposition ids to manifest directories beneath ``root``."""
    root = Path(root)
    found: dict[str, Path] = {}
    candidates = [root] + sorted(p for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
    for d in candidates:
        mpath = d / "manifest.json"
        if not mpath.exists():
            continue
        try:
            manifest = json.loads(mpath.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            continue
        if manifest.get("kind") == "decomposition" and "id" in manifest:
            found[manifest["id"]] = d
    return found
