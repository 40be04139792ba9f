"""Input validation helpers shared by the estimators and stage functions."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array


def _as_uint8(arr: np.ndarray, name: str) -> np.ndarray:
    if arr.dtype == np.uint8:
        return arr
    if arr.dtype == bool:
        return np.where(arr, 255, 0).astype(np.uint8)
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError(f"{name} values must lie in [0, 255]")
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def check_rgb(img, name: str = "image") -> np.ndarray:
    """Return an ``(h, w, 3)`` uint8 array; gray input is replicated, alpha dropped."""
    arr = check_array(img, ensure_2d=False, allow_nd=True, dtype=None,
                      ensure_all_finite=True, input_name=name)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    elif arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[..., :3]
    elif arr.ndim == 3 and arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must be (h, w), (h, w, 3) or (h, w, 4); got {arr.shape}")
    return _as_uint8(arr, name)


def check_gray(img, name: str = "gray") -> np.ndarray:
    """Return a 2-D array in [0, 255] (dtype kept if already numeric)."""
    arr = check_array(img, ensure_2d=False, allow_nd=True, dtype=None,
                      ensure_all_finite=True, input_name=name)
    if arr.ndim == 3 and arr.shape[2] in (3, 4):
        from .imageprep import to_grayscale

        return to_grayscale(arr)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D; got shape {arr.shape}")
    if arr.dtype == bool:
        return np.where(arr, 255, 0).astype(np.uint8)
    return arr


def check_unit_interval(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not 0.0 <= float(value) <= 1.0:
        raise ValueError(f"{name} must be a number in [0, 1]; got {value!r}")
    return float(value)


def check_payload(data) -> bytes:
    if isinstance(data, str):
        return data.encode("utf-8")
    if isinstance(data, (bytes, bytearray, memoryview)):
        return bytes(data)
    raise TypeError(f"payload must be str or bytes, not {type(data).__name__}")
