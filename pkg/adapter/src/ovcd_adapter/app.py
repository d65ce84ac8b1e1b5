"""FastAPI application implementing the /v1 backend wire protocol.

Stateless except for propagation, where concurrent requests sharing a
session id are serialized. Every error is returned as a structured JSON
envelope {"error": {"code", "message", "request_id"}}.
"""

from __future__ import annotations

import threading
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from . import fallback
from .codec import PayloadError, decode_floats, decode_image, decode_mask, encode_floats, encode_grid, encode_mask
from .config import AdapterConfig, calibrate_logits


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, request_id: Optional[str] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.request_id = request_id

    def envelope(self) -> dict:
        err = {"code": self.code, "message": self.message}
        if self.request_id is not None:
            err["request_id"] = self.request_id
        return {"error": err}


class GridPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")
    w: int = Field(ge=1)
    h: int = Field(ge=1)
    values_b64: str


class ExemplarPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")
    dim: int = Field(ge=1)
    values_b64: str
    replication: int = Field(ge=0)


class SegmentRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    request_id: str
    image_b64: str
    prompts: list[str] = Field(min_length=1)
    exemplar: Optional[ExemplarPayload] = None


class FeaturesRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    request_id: Optional[str] = None
    image_b64: str


class PropagateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    session_id: str
    init_mask_b64: str
    frames: list[str] = Field(min_length=2)


class EchoRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    request_id: Optional[str] = None
    grid: GridPayload


def create_app(config: AdapterConfig = AdapterConfig()) -> FastAPI:
    if config.model != "fallback":
        raise ValueError(
            f"model {config.model!r} is not bundled; this reference adapter serves 'fallback'"
        )

    app = FastAPI(title="ovcd-adapter", docs_url=None, redoc_url=None)
    inflight = threading.BoundedSemaphore(config.max_concurrency)
    session_locks: dict[str, threading.Lock] = {}
    sessions_guard = threading.Lock()

    def session_lock(session_id: str) -> threading.Lock:
        with sessions_guard:
            return session_locks.setdefault(session_id, threading.Lock())

    def check_image_size(arr: np.ndarray, request_id: Optional[str]) -> None:
        side = max(arr.shape[0], arr.shape[1])
        if side > config.max_side:
            raise ApiError(
                413,
                "image_too_large",
                f"image side {side} exceeds max_side {config.max_side}",
                request_id,
            )

    def calibrated(raw: np.ndarray) -> np.ndarray:
        return calibrate_logits(raw, config.calibration_offset, config.calibration_scale)

    @app.exception_handler(ApiError)
    async def on_api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.envelope())

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(_request: Request, exc: RequestValidationError):
        detail = "; ".join(
            f"{'/'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()[:3]
        )
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "schema_violation", "message": detail}},
        )

    @app.get("/v1/capabilities")
    def capabilities():
        return {
            "max_side": config.max_side,
            "max_concurrency": config.max_concurrency,
            "feature_dim": fallback.FEATURE_DIM,
            "feature_stride": config.feature_stride,
        }

    @app.post("/v1/segment")
    def segment(req: SegmentRequest):
        with inflight:
            try:
                image = decode_image(req.image_b64)
            except PayloadError as exc:
                raise ApiError(400, "bad_payload", str(exc), req.request_id) from exc
            check_image_size(image, req.request_id)

            exemplar_vector = None
            if req.exemplar is not None:
                try:
                    exemplar_vector = decode_floats(req.exemplar.values_b64, req.exemplar.dim)
                except PayloadError as exc:
                    raise ApiError(400, "bad_payload", str(exc), req.request_id) from exc
                exemplar_vector = exemplar_vector.astype(np.float64)

            logits, presence = fallback.segment(image, req.prompts, exemplar_vector)
            return {
                "request_id": req.request_id,
                "logits": encode_grid(calibrated(logits)),
                "presence": presence,
            }

    @app.post("/v1/features")
    def features(req: FeaturesRequest):
        with inflight:
            try:
                image = decode_image(req.image_b64)
            except PayloadError as exc:
                raise ApiError(400, "bad_payload", str(exc), req.request_id) from exc
            check_image_size(image, req.request_id)
            values, grid_w, grid_h = fallback.extract_features(image, config.feature_stride)
            body = {
                "grid_w": grid_w,
                "grid_h": grid_h,
                "dim": fallback.FEATURE_DIM,
                "stride": config.feature_stride,
                "values_b64": encode_floats(values),
            }
            if req.request_id is not None:
                body["request_id"] = req.request_id
            return body

    @app.post("/v1/propagate")
    def propagate(req: PropagateRequest):
        with inflight, session_lock(req.session_id):
            try:
                init_mask = decode_mask(req.init_mask_b64)
                frames = [decode_image(f) for f in req.frames]
            except PayloadError as exc:
                raise ApiError(400, "bad_payload", str(exc), req.session_id) from exc
            for frame in frames:
                check_image_size(frame, req.session_id)
            if init_mask.shape != frames[0].shape[:2]:
                raise ApiError(
                    400,
                    "bad_payload",
                    f"prompt mask {init_mask.shape} does not match first frame "
                    f"{frames[0].shape[:2]}",
                    req.session_id,
                )
            mask, confidence = fallback.propagate(init_mask, frames)
            return {
                "session_id": req.session_id,
                "mask_b64": encode_mask(mask),
                "confidence": encode_grid(confidence),
            }

    @app.post("/v1/echo")
    def echo(req: EchoRequest):
        try:
            values = decode_floats(req.grid.values_b64, req.grid.w * req.grid.h)
        except PayloadError as exc:
            raise ApiError(400, "bad_payload", str(exc), req.request_id) from exc
        body = {"grid": {"w": req.grid.w, "h": req.grid.h, "values_b64": encode_floats(values)}}
        if req.request_id is not None:
            body["request_id"] = req.request_id
        return body

    return app
