"""HTTP inference service exposing the three synthesis tasks over a loaded
checkpoint. Images travel as base64 PNG inside JSON; requests are serialized
through a configurable number of model-execution lanes (default one, matching
the single-stream benchmark protocol)."""

from __future__ import annotations

import base64
import io
import logging
import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Literal

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from . import tasks
from .data import SampleRecord, preprocess_sample, tensor_to_uint8
from .models import HairSynthesisModel, count_params

log = logging.getLogger(__name__)

WORKING_RESOLUTION = 128


class SynthesisRequest(BaseModel):
    task: Literal["reconstruct", "transfer", "edit"]
    source_image: str
    source_mask: str
    edited_mask: str | None = None
    reference_image: str | None = None
    reference_mask: str | None = None
    seed: int | None = None


class _ModelHolder:
    def __init__(self):
        self.model: HairSynthesisModel | None = None
        self.checkpoint_id: str = ""


def _decode_png(field: str, payload: str, mode: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
        with Image.open(io.BytesIO(raw)) as image:
            return np.asarray(image.convert(mode))
    except Exception as exc:
        raise HTTPException(status_code=400,
                            detail=f"field {field!r} is not a base64 PNG: {exc}")


def _encode_png(image: torch.Tensor) -> str:
    buffer = io.BytesIO()
    Image.fromarray(tensor_to_uint8(image)).save(buffer, format="PNG")
    return base64.b64encode(buffer.getvalue()).decode("ascii")


def _record_from_request(image_b64: str, mask_b64: str, sample_id: str,
                         image_field: str, mask_field: str) -> SampleRecord:
    image = _decode_png(image_field, image_b64, "RGB")
    mask = _decode_png(mask_field, mask_b64, "L")
    try:
        return preprocess_sample(image, mask, sample_id=sample_id)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))


def create_app(checkpoint_path: Path | str | None = None,
               model: HairSynthesisModel | None = None,
               checkpoint_id: str | None = None,
               lanes: int = 1,
               cors_origins: tuple[str, ...] = ("*",)) -> FastAPI:
    """App factory. Pass `model` directly (tests) or `checkpoint_path`
    (loaded at startup; health reports 503 until it finishes)."""
    holder = _ModelHolder()
    lane_gate = threading.Semaphore(lanes)

    if model is not None:
        model.eval()
        holder.model = model
        holder.checkpoint_id = checkpoint_id or "in-memory"

    @asynccontextmanager
    async def _lifespan(app: FastAPI):
        if holder.model is None and checkpoint_path is not None:
            from .checkpoint import load_checkpoint

            loaded, _, _ = load_checkpoint(checkpoint_path)
            loaded.eval()
            holder.model = loaded
            holder.checkpoint_id = checkpoint_id or Path(checkpoint_path).stem
            log.info("loaded checkpoint %s", checkpoint_path)
        yield

    app = FastAPI(title="hairsynth inference service", lifespan=_lifespan)
    app.add_middleware(CORSMiddleware, allow_origins=list(cors_origins),
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def _schema_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/v1/health")
    def health():
        if holder.model is None:
            raise HTTPException(status_code=503, detail="model not ready")
        return {"status": "ready", "checkpoint_id": holder.checkpoint_id,
                "param_count": count_params(holder.model.generator)}

    @app.post("/v1/synthesize")
    def synthesize(request: SynthesisRequest):
        if holder.model is None:
            raise HTTPException(status_code=503, detail="model not ready")
        if request.task == "transfer" and not (request.reference_image
                                               and request.reference_mask):
            raise HTTPException(status_code=400,
                                detail="transfer requires reference_image and reference_mask")
        if request.task == "edit" and not request.edited_mask:
            raise HTTPException(status_code=400, detail="edit requires edited_mask")

        source = _record_from_request(request.source_image, request.source_mask,
                                      "source", "source_image", "source_mask")
        reference = None
        if request.reference_image and request.reference_mask:
            reference = _record_from_request(request.reference_image,
                                             request.reference_mask, "reference",
                                             "reference_image", "reference_mask")
            if reference.hair_fraction == 0:
                raise HTTPException(status_code=422, detail="reference has no hair region")

        seed = tasks.DEFAULT_TASK_SEED if request.seed is None else request.seed
        start = time.perf_counter()
        with lane_gate:
            if request.task == "reconstruct":
                output = tasks.reconstruct(source, holder.model, seed=seed)
            elif request.task == "transfer":
                output = tasks.transfer_style(source, reference, holder.model, seed=seed)
            else:
                mask_gray = _decode_png("edited_mask", request.edited_mask, "L")
                if mask_gray.shape != (WORKING_RESOLUTION, WORKING_RESOLUTION):
                    raise HTTPException(
                        status_code=400,
                        detail=f"edited_mask must be {WORKING_RESOLUTION}x"
                               f"{WORKING_RESOLUTION}, got {mask_gray.shape}")
                edited = torch.from_numpy((mask_gray >= 128).astype(np.float32))[None, None]
                output = tasks.edit_shape(source, reference, edited, holder.model,
                                          seed=seed)
        latency_ms = (time.perf_counter() - start) * 1e3
        return {"image": _encode_png(output), "seed": seed, "latency_ms": latency_ms}

    return app
