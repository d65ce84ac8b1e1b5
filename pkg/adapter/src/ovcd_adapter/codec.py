"""base64 payload helpers: PNG images/masks and little-endian float grids."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image


class PayloadError(ValueError):
    """Malformed request payload (bad base64, wrong sizes, ...)."""


def decode_image(data: str) -> np.ndarray:
    try:
        raw = base64.b64decode(data)
        with Image.open(io.BytesIO(raw)) as img:
            arr = np.asarray(img.convert("RGB"))
    except Exception as exc:
        raise PayloadError(f"cannot decode image payload: {exc}") from exc
    return arr


def decode_mask(data: str) -> np.ndarray:
    try:
        raw = base64.b64decode(data)
        with Image.open(io.BytesIO(raw)) as img:
            arr = np.asarray(img.convert("L"))
    except Exception as exc:
        raise PayloadError(f"cannot decode mask payload: {exc}") from exc
    return arr > 127


def encode_mask(bits: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.where(bits, 255, 0).astype(np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_floats(data: str, count: int) -> np.ndarray:
    try:
        raw = base64.b64decode(data)
    except Exception as exc:
        raise PayloadError(f"cannot decode float payload: {exc}") from exc
    if len(raw) != 4 * count:
        raise PayloadError(f"float payload holds {len(raw)} bytes, expected {4 * count}")
    return np.frombuffer(raw, dtype="<f4").copy()


def encode_floats(values: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(values, dtype="<f4").tobytes()).decode("ascii")


def encode_grid(values: np.ndarray) -> dict:
    h, w = values.shape
    return {"w": int(w), "h": int(h), "values_b64": encode_floats(values)}
