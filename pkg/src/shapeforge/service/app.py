"""HTTP service over a loaded bundle: generation, interpolation, health."""

import base64
import time

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..pipeline.generate import DEFAULT_THRESHOLD, GenerationRequest
from ..synthshape.dataset import pack_grid


class GenerateBody(BaseModel):
    prompt: str
    n_samples: int = 1
    mean: bool = False
    threshold: float = DEFAULT_THRESHOLD
    resolution: int = 32
    seed: int = 0
    bundle_hash: str | None = None


class InterpolateBody(BaseModel):
    prompt_a: str
    prompt_b: str
    steps: int = 5
    mode: str = "slerp"
    threshold: float = DEFAULT_THRESHOLD
    resolution: int = 32
    bundle_hash: str | None = None


def _field_error(field, message, status=400):
    return JSONResponse(status_code=status,
                        content={"error": {"field": field, "message": message}})


def _encode_grids(shapes):
    return [base64.b64encode(pack_grid(s.grid)).decode("ascii") for s in shapes]


def create_app(bundle):
    app = FastAPI(title="shapeforge", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        err = exc.errors()[0]
        path = ".".join(str(p) for p in err["loc"] if p != "body")
        return _field_error(path or "body", err["msg"])

    @app.exception_handler(Exception)
    async def internal_handler(request: Request, exc: Exception):
        return JSONResponse(status_code=500,
                            content={"error": {"message": "internal error"}})

    def check_hash(body):
        if body.bundle_hash is not None and body.bundle_hash != bundle.bundle_hash:
            return JSONResponse(
                status_code=409,
                content={"error": {"message": "bundle mismatch",
                                   "loaded": bundle.bundle_hash,
                                   "requested": body.bundle_hash}})
        return None

    @app.get("/health")
    def health():
        return {"status": "ok", "bundle_hash": bundle.bundle_hash}

    @app.get("/config")
    def config():
        return bundle.manifest["config"]

    @app.post("/generate")
    def generate(body: GenerateBody):
        mismatch = check_hash(body)
        if mismatch is not None:
            return mismatch
        req = GenerationRequest(body.prompt, n_samples=body.n_samples,
                                mean_mode=body.mean, threshold=body.threshold,
                                resolution=body.resolution, seed=body.seed)
        try:
            req.validate()
        except ValueError as e:
            field, _, msg = str(e).partition(":")
            return _field_error(field.strip(), msg.strip())
        t0 = time.perf_counter()
        shapes = bundle.generate(req)
        latency_ms = (time.perf_counter() - t0) * 1000.0
        return {
            "grids": _encode_grids(shapes),
            "meshes": [s.mesh.to_obj() for s in shapes],
            "latency_ms": round(latency_ms, 3),
            "resolution": body.resolution,
            "seed": body.seed,
            "mean": body.mean,
        }

    @app.post("/interpolate")
    def interpolate(body: InterpolateBody):
        mismatch = check_hash(body)
        if mismatch is not None:
            return mismatch
        if body.steps < 2:
            return _field_error("steps", f"{body.steps} < 2")
        if not (0.0 < body.threshold < 1.0):
            return _field_error("threshold", f"{body.threshold} outside (0, 1)")
        if body.mode not in ("slerp", "lerp"):
            return _field_error("mode", f"unknown mode {body.mode!r}")
        if not body.prompt_a.strip():
            return _field_error("prompt_a", "must be a nonempty string")
        if not body.prompt_b.strip():
            return _field_error("prompt_b", "must be a nonempty string")
        t0 = time.perf_counter()
        notices = []
        shapes = bundle.interpolate(body.prompt_a, body.prompt_b, body.steps,
                                    mode=body.mode, threshold=body.threshold,
                                    resolution=body.resolution, notices=notices)
        latency_ms = (time.perf_counter() - t0) * 1000.0
        return {
            "grids": _encode_grids(shapes),
            "meshes": [s.mesh.to_obj() for s in shapes],
            "alphas": [i / (body.steps - 1) for i in range(body.steps)],
            "latency_ms": round(latency_ms, 3),
            "resolution": body.resolution,
            "notices": notices,
        }

    return app
