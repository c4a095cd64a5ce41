"""HTTP service exposing decompositions and server-side relighting."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .fileio import png_bytes
from .manifest import discover_decompositions, load_decomposition
from .rendering import LightParams, render

IMAGE_KINDS = ("albedo", "normals", "diffuse", "specular", "recon")


class RelightRequest(BaseModel):
    x: float = Field(ge=-1.0, le=1.0)
    y: float = Field(ge=-1.0, le=1.0)
    s_amb: float = Field(ge=0.0, le=1.0, description="ambient strength in [0, 1]")
    s_dir: float = Field(ge=0.0, le=1.0, description="directional strength in [0, 1]")
    alpha: float | None = Field(default=None, ge=1.0)
    a_spec: float | None = Field(default=None, ge=0.0)


def _field_errors(exc: RequestValidationError) -> list[dict]:
    out = []
    for err in exc.errors():
        loc = [str(p) for p in err.get("loc", []) if p != "body"]
        out.append({"field": ".".join(loc) or "body", "message": err.get("msg", "invalid value")})
    return out


def create_app(root) -> FastAPI:
    """Build the service over a read-only directory of manifests."""
    root = Path(root)
    app = FastAPI(title="derender service")
    cache: dict[str, tuple] = {}

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request, exc):
        return JSONResponse(status_code=400, content={"errors": _field_errors(exc)})

    def ids() -> dict[str, Path]:
        return discover_decompositions(root)

    def get_dec(dec_id: str):
        found = ids()
        if dec_id not in found:
            return None
        key = str(found[dec_id])
        if key not in cache:
            cache[key] = load_decomposition(found[dec_id])
        return cache[key]

    @app.get("/api/decompositions")
    def list_decompositions():
        return sorted(ids().keys())

    @app.get("/api/decompositions/{dec_id}")
    def get_manifest(dec_id: str):
        entry = get_dec(dec_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"error": f"unknown decomposition {dec_id!r}"})
        return entry[2]

    @app.get("/api/decompositions/{dec_id}/image/{kind}")
    def get_image(dec_id: str, kind: str):
        entry = get_dec(dec_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"error": f"unknown decomposition {dec_id!r}"})
        if kind not in IMAGE_KINDS:
            return JSONResponse(status_code=404, content={"error": f"unknown image kind {kind!r}"})
        dec, cfg, _ = entry
        if kind == "albedo":
            data = png_bytes(np.clip(dec.material.albedo, 0.0, 1.0))
        elif kind == "normals":
            data = png_bytes((np.asarray(dec.normals) + 1.0) / 2.0)
        else:
            image, i_diff, i_spec = render(dec, dec.light, cfg)
            if kind == "recon":
                data = png_bytes(image)
            elif kind == "diffuse":
                data = png_bytes(np.clip(i_diff, 0.0, 1.0))
            else:
                data = png_bytes(np.clip(i_spec, 0.0, 1.0))
        return Response(content=data, media_type="image/png")

    @app.post("/api/decompositions/{dec_id}/relight")
    def relight_endpoint(dec_id: str, body: RelightRequest):
        entry = get_dec(dec_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"error": f"unknown decomposition {dec_id!r}"})
        dec, cfg, _ = entry
        alpha_max_sq = cfg.alpha_max**2
        if body.alpha is not None and body.alpha > alpha_max_sq:
            return JSONResponse(
                status_code=400,
                content={"errors": [{"field": "alpha", "message": f"alpha must lie in [1, {alpha_max_sq}]"}]},
            )
        a_spec = dec.material.a_spec if body.a_spec is None else body.a_spec
        if not (cfg.a_spec_min <= a_spec <= cfg.a_spec_max):
            return JSONResponse(
                status_code=400,
                content={"errors": [{"field": "a_spec", "message": f"a_spec must lie in [{cfg.a_spec_min}, {cfg.a_spec_max}]"}]},
            )
        light = LightParams.from_xy(body.x, body.y, body.s_amb, body.s_dir)
        material = dec.material
        orig = (material.alpha, material.a_spec)
        try:
            if body.alpha is not None:
                material.alpha = body.alpha
            material.a_spec = a_spec
            image, _, _ = render(dec, light, cfg)
        finally:
            material.alpha, material.a_spec = orig
        return Response(content=png_bytes(image), media_type="image/png")

    @app.get("/api/config/{dec_id}")
    def get_config(dec_id: str):
        entry = get_dec(dec_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"error": f"unknown decomposition {dec_id!r}"})
        _, cfg, _ = entry
        return {
            "alpha_range": [1.0, cfg.alpha_max**2],
            "a_spec_range": [cfg.a_spec_min, cfg.a_spec_max],
        }

    return app
