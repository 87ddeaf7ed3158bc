"""HTTP service backing the interactive style explorer.

All state is loaded once at startup and never mutated; every request is a
pure function of the snapshot, so any request ordering yields identical
per-request responses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .mesh import marching_cubes, mesh_to_blob, save_obj
from .models import Generator, StyleCodebook
from .stylespace import StyleEmbedding, interpolate_code
from .training import detailize
from .voxel import CONTINUOUS, VoxelGrid

DEFAULT_MAX_CONTENT_DIM = 64


@dataclass(frozen=True)
class ServiceState:
    generator: Generator
    codebook: StyleCodebook
    embedding: StyleEmbedding
    contents: dict  # id -> binary VoxelGrid
    max_content_dim: int = DEFAULT_MAX_CONTENT_DIM
    iso_level: float = 0.5


class StyleRef(BaseModel):
    id: str | None = None
    point: list[float] | None = None


class DetailizeRequest(BaseModel):
    content_id: str
    style: StyleRef
    postprocess: str = "none"


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _obj_text(mesh) -> str:
    import io
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as td:
        p = Path(td) / "m.obj"
        save_obj(mesh, p)
        return p.read_text()


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="voxdetail", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error(400, f"malformed request: {exc.errors()[:1]}")

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/styles")
    def styles():
        return [
            {"id": sid, "point": [float(x) for x in state.embedding.points[i]]}
            for i, sid in enumerate(state.embedding.ids)
        ]

    @app.get("/api/embedding")
    def embedding():
        return json.loads(state.embedding.to_json())

    @app.get("/api/contents")
    def contents():
        return [
            {"id": cid, "dims": list(grid.dims)} for cid, grid in sorted(state.contents.items())
        ]

    @app.post("/api/detailize")
    def run_detailize(req: DetailizeRequest, request: Request):
        grid = state.contents.get(req.content_id)
        if grid is None:
            return _error(404, f"unknown content id {req.content_id!r}")
        if max(grid.dims) > state.max_content_dim:
            return _error(413, f"content dims {grid.dims} exceed limit {state.max_content_dim}")
        if req.postprocess not in ("none", "components"):
            return _error(400, f"unknown postprocess {req.postprocess!r}")
        style = req.style
        if style.id is not None:
            if style.id not in state.codebook.ids:
                return _error(404, f"unknown style id {style.id!r}")
            code = state.codebook.code_value(state.codebook.index_of(style.id))
        elif style.point is not None and len(style.point) == 2:
            code = interpolate_code(state.embedding, style.point)
        else:
            return _error(400, "style must carry an id or a 2-D point")

        binary, fld = detailize(state.generator, grid, code, postprocess=req.postprocess)
        if req.postprocess == "components":
            fld = VoxelGrid(binary.values.astype(np.float32), CONTINUOUS)
        mesh = marching_cubes(fld, state.iso_level)
        echo = json.dumps(req.model_dump(), sort_keys=True)
        accept = request.headers.get("accept", "")
        if "model/obj" in accept or "text/plain" in accept:
            return Response(
                content=_obj_text(mesh),
                media_type="text/plain",
                headers={"X-Detailize-Request": echo},
            )
        return Response(
            content=mesh_to_blob(mesh),
            media_type="application/octet-stream",
            headers={"X-Detailize-Request": echo},
        )

    return app
