"""JSON/base64 wire codec and the HTTP client for remote model servers.

One request per call; propagation carries a session id. Transport failures,
schema violations and server-reported errors raise distinct exceptions, all
tagged with the request id so server logs can be correlated.
"""

from __future__ import annotations

import base64
import io
import json
import uuid
from importlib import resources
from typing import Optional, Sequence

import numpy as np
import requests
from jsonschema import Draft202012Validator
from PIL import Image

from ..errors import SchemaViolation, ServerError, TransportError
from ..query import PromptSpec
from ..raster import BitMask, RasterImage, ScalarMap
from .base import (
    BackendCapabilities,
    FeatureMap,
    validate_confidence,
    validate_logits,
    validate_mask,
    validate_presence,
)

WIRE_SCHEMA: dict = json.loads(
    resources.files("ovcd.backends").joinpath("wire_schema.json").read_text(encoding="utf-8")
)

_VALIDATORS: dict[str, Draft202012Validator] = {}


def payload_validator(name: str) -> Draft202012Validator:
    if name not in _VALIDATORS:
        if name not in WIRE_SCHEMA["$defs"]:
            raise KeyError(f"unknown wire payload {name!r}")
        schema = {"$ref": f"#/$defs/{name}", "$defs": WIRE_SCHEMA["$defs"]}
        _VALIDATORS[name] = Draft202012Validator(schema)
    return _VALIDATORS[name]


def validate_payload(name: str, payload: dict) -> None:
    errors = sorted(payload_validator(name).iter_errors(payload), key=str)
    if errors:
        raise SchemaViolation(f"{name}: {errors[0].message}")


# ---------------------------------------------------------------------------
# Codec helpers
# ---------------------------------------------------------------------------


def encode_image_b64(image: RasterImage) -> str:
    buf = io.BytesIO()
    Image.fromarray(image.data, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image_b64(data: str) -> RasterImage:
    raw = base64.b64decode(data)
    with Image.open(io.BytesIO(raw)) as img:
        return RasterImage(np.asarray(img.convert("RGB")))


def encode_mask_b64(mask: BitMask) -> str:
    buf = io.BytesIO()
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_mask_b64(data: str) -> BitMask:
    raw = base64.b64decode(data)
    with Image.open(io.BytesIO(raw)) as img:
        return BitMask(np.asarray(img.convert("L")) > 127)


def encode_floats_b64(values: np.ndarray) -> str:
    arr = np.ascontiguousarray(values, dtype="<f4")
    return base64.b64encode(arr.tobytes()).decode("ascii")


def decode_floats_b64(data: str, count: int) -> np.ndarray:
    raw = base64.b64decode(data)
    if len(raw) != 4 * count:
        raise SchemaViolation(f"float payload holds {len(raw)} bytes, expected {4 * count}")
    return np.frombuffer(raw, dtype="<f4").copy()


def encode_grid(values: np.ndarray) -> dict:
    h, w = values.shape
    return {"w": int(w), "h": int(h), "values_b64": encode_floats_b64(values)}


def decode_grid(grid: dict) -> np.ndarray:
    w, h = int(grid["w"]), int(grid["h"])
    return decode_floats_b64(grid["values_b64"], w * h).reshape(h, w)


# ---------------------------------------------------------------------------
# Client
# ---------------------------------------------------------------------------


class RemoteBackend:
    """Client; implements Segmenter, FeatureExtractor and MaskPropagator."""

    def __init__(self, base_url: str, timeout: float = 60.0, session: Optional[requests.Session] = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()
        self._caps: Optional[BackendCapabilities] = None

    def capabilities(self) -> BackendCapabilities:
        if self._caps is None:
            body = self._get("/v1/capabilities", "capabilities_response")
            self._caps = BackendCapabilities(
                max_side=body["max_side"],
                max_concurrency=body["max_concurrency"],
                feature_dim=body["feature_dim"],
                feature_stride=body["feature_stride"],
            )
        return self._caps

    def segment(self, image: RasterImage, prompt: PromptSpec) -> tuple[ScalarMap, dict[str, float]]:
        request_id = uuid.uuid4().hex
        payload: dict = {
            "request_id": request_id,
            "image_b64": encode_image_b64(image),
            "prompts": list(prompt.text_prompts),
        }
        if prompt.exemplar is not None:
            payload["exemplar"] = {
                "dim": prompt.exemplar.dim,
                "values_b64": encode_floats_b64(prompt.exemplar.vector),
                "replication": prompt.replication,
            }
        body = self._post("/v1/segment", payload, "segment_response", request_id)
        origin = f"segment {request_id}"
        logits = validate_logits(decode_grid(body["logits"]), image.width, image.height, origin)
        presence = validate_presence(body["presence"], prompt.text_prompts, origin)
        return logits, presence

    def extract_features(self, image: RasterImage) -> FeatureMap:
        request_id = uuid.uuid4().hex
        payload = {"request_id": request_id, "image_b64": encode_image_b64(image)}
        body = self._post("/v1/features", payload, "features_response", request_id)
        gw, gh, dim = int(body["grid_w"]), int(body["grid_h"]), int(body["dim"])
        values = decode_floats_b64(body["values_b64"], gw * gh * dim).astype(np.float64)
        return FeatureMap(values.reshape(gh, gw, dim), stride=int(body["stride"]))

    def propagate(
        self, init_mask: BitMask, frames: Sequence[RasterImage]
    ) -> tuple[BitMask, ScalarMap]:
        session_id = uuid.uuid4().hex
        payload = {
            "session_id": session_id,
            "init_mask_b64": encode_mask_b64(init_mask),
            "frames": [encode_image_b64(f) for f in frames],
        }
        body = self._post("/v1/propagate", payload, "propagate_response", session_id)
        origin = f"propagate {session_id}"
        last = frames[-1]
        mask = decode_mask_b64(body["mask_b64"])
        mask = validate_mask(mask.bits, last.width, last.height, origin)
        confidence = validate_confidence(
            decode_grid(body["confidence"]), last.width, last.height, origin
        )
        return mask, confidence

    def echo(self, values: np.ndarray) -> np.ndarray:
        """Diagnostic round-trip of a float grid through the server."""
        request_id = uuid.uuid4().hex
        payload = {"request_id": request_id, "grid": encode_grid(values)}
        body = self._post("/v1/echo", payload, "echo_response", request_id)
        return decode_grid(body["grid"])

    # -- plumbing -----------------------------------------------------------

    def _get(self, path: str, schema_name: str) -> dict:
        request_id = uuid.uuid4().hex
        try:
            resp = self._session.get(self.base_url + path, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"GET {path} failed (request {request_id}): {exc}") from exc
        return self._handle(resp, path, schema_name, request_id)

    def _post(self, path: str, payload: dict, schema_name: str, request_id: str) -> dict:
        try:
            resp = self._session.post(self.base_url + path, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"POST {path} failed (request {request_id}): {exc}") from exc
        return self._handle(resp, path, schema_name, request_id)

    def _handle(self, resp: requests.Response, path: str, schema_name: str, request_id: str) -> dict:
        try:
            body = resp.json()
        except ValueError as exc:
            raise SchemaViolation(
                f"{path}: response is not JSON (request {request_id}, status {resp.status_code})"
            ) from exc
        if isinstance(body, dict) and "error" in body:
            err = body.get("error") or {}
            raise ServerError(
                f"{path}: server error {err.get('code', 'unknown')}: "
                f"{err.get('message', '')} (request {err.get('request_id', request_id)})"
            )
        if resp.status_code >= 400:
            raise ServerError(f"{path}: HTTP {resp.status_code} (request {request_id})")
        if not isinstance(body, dict):
            raise SchemaViolation(f"{path}: expected a JSON object (request {request_id})")
        try:
            validate_payload(schema_name, body)
        except SchemaViolation as exc:
            raise SchemaViolation(f"{path} (request {request_id}): {exc}") from None
        return body
