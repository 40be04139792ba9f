"""Input-image preparation: luminance, module binarization, module priority."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import cv2
import numpy as np

from ._validation import check_gray, check_rgb
from .exceptions import DimensionMismatch

LUMA = np.array([0.299, 0.587, 0.114])
PRIORITY_WEIGHTS = (0.67, 0.23, 0.10)


def luminance(img) -> np.ndarray:
    """Float luminance of an RGB image (no rounding)."""
    img = check_rgb(img)
    return img.astype(float) @ LUMA


def to_grayscale(img) -> np.ndarray:
    """RGB -> uint8 gray with the 0.299/0.587/0.114 weights, rounded."""
    return np.clip(np.rint(luminance(img)), 0, 255).astype(np.uint8)


def center_square(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    s = min(h, w)
    top, left = (h - s) // 2, (w - s) // 2
    return img[top:top + s, left:left + s]


def module_pixels(side: int, target: int = 512) -> int:
    return max(1, int(round(target / side)))


def resample_for_code(img, side: int, target: int = 512) -> np.ndarray:
    """Center-crop to square and bicubically resize to ``a * side`` pixels."""
    img = check_rgb(img)
    a = module_pixels(side, target)
    n = a * side
    sq = center_square(img)
    if sq.shape[0] == n:
        return sq.copy()
    out = cv2.resize(sq, (n, n), interpolation=cv2.INTER_CUBIC)
    return out


@lru_cache(maxsize=64)
def _gaussian_grid(a: int, sigma: float) -> np.ndarray:
    if a == 1 or sigma <= 0:
        g = np.zeros((a, a))
        g[(a - 1) // 2:a // 2 + 1, (a - 1) // 2:a // 2 + 1] = 1.0
        return g / g.sum()
    # pixel centers sit at i + 0.5; the module center is a / 2
    d = np.arange(a) + 0.5 - a / 2.0
    g = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * sigma * sigma))
    g /= g.sum()
    g.setflags(write=False)
    return g


def gaussian_weights(a: int, sigma: float | None = None) -> np.ndarray:
    """Normalized ``a x a`` Gaussian centered on the module (sums to 1)."""
    if sigma is None:
        sigma = (a - 1) / 5.0
    return _gaussian_grid(int(a), float(sigma))


def module_view(grid: np.ndarray, side: int) -> np.ndarray:
    """Reshape an ``(a*l, a*l)`` grid to ``(l, l, a, a)`` without copying."""
    n = grid.shape[0]
    if grid.shape[:2] != (n, n) or n % side:
        raise DimensionMismatch(f"grid {grid.shape[:2]} is not a multiple of {side} modules")
    a = n // side
    return grid.reshape(side, a, side, a).swapaxes(1, 2)


def module_binarize(gray, side: int, sigma: float | None = None) -> np.ndarray:
    """``True`` (bright) where the Gaussian-weighted module mean >= 127.5."""
    gray = check_gray(gray).astype(float)
    blocks = module_view(gray, side)
    g = gaussian_weights(blocks.shape[2], sigma)
    means = np.einsum("klij,ij->kl", blocks, g)
    return means >= 255 / 2


def mean_pool(values: np.ndarray, side: int) -> np.ndarray:
    return module_view(np.asarray(values, dtype=float), side).mean(axis=(2, 3))


def normalize01(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi - lo <= 1e-12:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def canny_edges(gray, sigma: float = 1.4, low: float = 50, high: float = 150) -> np.ndarray:
    """Binary Canny edge map in {0, 1}."""
    gray = check_gray(gray)
    blurred = cv2.GaussianBlur(gray, (0, 0), sigmaX=sigma, sigmaY=sigma)
    return (cv2.Canny(blurred, low, high) > 0).astype(float)


def histogram_contrast_saliency(img, bins: int = 12) -> np.ndarray:
    """Global color-contrast saliency on a quantized color histogram.

    A pixel's saliency is the frequency-weighted Lab distance of its color
    bin to every other occupied bin.  Stands in for region-based contrast.
    """
    img = check_rgb(img)
    q = (img.astype(np.int64) * bins) // 256
    codes = (q[..., 0] * bins + q[..., 1]) * bins + q[..., 2]
    uniq, inverse, counts = np.unique(codes.ravel(), return_inverse=True, return_counts=True)
    centers = np.stack([uniq // (bins * bins), (uniq // bins) % bins, uniq % bins], axis=1)
    rgb = ((centers + 0.5) * (256 / bins)).clip(0, 255).astype(np.uint8)
    lab = cv2.cvtColor(rgb[None, :, :], cv2.COLOR_RGB2LAB)[0].astype(float)
    freq = counts / counts.sum()
    dist = np.linalg.norm(lab[:, None, :] - lab[None, :, :], axis=2)
    sal = dist @ freq
    return normalize01(sal[inverse].reshape(codes.shape))


def heuristic_weight(x, y, side: int):
    """Center preference ``1 - ((x - l/2)^2 + (y - l/2)^2) / (l^2 / 2)``, floored at 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = 1.0 - ((x - side / 2) ** 2 + (y - side / 2) ** 2) / (side * side / 2)
    return np.maximum(h, 0.0)


def heuristic_map(side: int) -> np.ndarray:
    """Heuristic weight at module centers, normalized to [0, 1]."""
    c = np.arange(side) + 0.5
    return normalize01(heuristic_weight(c[:, None], c[None, :], side))


@dataclass
class PriorityMap:
    weights: np.ndarray
    edge: np.ndarray
    saliency: np.ndarray
    heuristic: np.ndarray


def combine_priority(edge, saliency, heuristic, lambdas=PRIORITY_WEIGHTS) -> np.ndarray:
    l1, l2, l3 = lambdas
    return l1 * np.asarray(edge) + l2 * np.asarray(saliency) + l3 * np.asarray(heuristic)


def priority_map(img, side: int, lambdas=PRIORITY_WEIGHTS) -> PriorityMap:
    img = check_rgb(img)
    gray = to_grayscale(img)
    edge = normalize01(mean_pool(canny_edges(gray), side))
    sal = normalize01(mean_pool(histogram_contrast_saliency(img), side))
    heu = heuristic_map(side)
    return PriorityMap(combine_priority(edge, sal, heu, lambdas), edge, sal, heu)
