"""Color aesthetic stage: pull each pixel along the line toward its module's
extreme color until its luminance equals the grayscale code."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_rgb
from .imageprep import LUMA


@dataclass
class ColorizeStats:
    theta: np.ndarray  # unclamped interpolation parameter
    clamped: np.ndarray  # pixels where theta left [0, 1]
    singular: np.ndarray  # pixels already at the extreme luminance

    @property
    def clamped_count(self) -> int:
        return int(self.clamped.sum())


def colorize(image, gray_code, light, *, tol: float = 1e-9) -> tuple[np.ndarray, ColorizeStats]:
    """Combine the color image with the grayscale code.

    ``light`` is a per-pixel boolean map (or per-module, upsampled to the
    image size) selecting white or black as the extreme color.
    """
    img = check_rgb(image).astype(float)
    qg = np.asarray(gray_code, dtype=float)
    h, w = qg.shape
    light = np.asarray(light, dtype=bool)
    if light.shape != (h, w):
        a = h // light.shape[0]
        if a * light.shape[0] != h:
            raise ValueError(f"module map {light.shape} does not divide image {qg.shape}")
        light = np.kron(light.astype(np.uint8), np.ones((a, a), dtype=np.uint8)).astype(bool)
    if img.shape[:2] != (h, w):
        raise ValueError(f"image {img.shape[:2]} vs gray code {qg.shape}")

    extreme = np.where(light, 255.0, 0.0)
    lum = img @ LUMA
    denom = extreme - lum
    singular = np.abs(denom) < tol
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(singular, 0.0, (qg - lum) / np.where(singular, 1.0, denom))
    # at the extreme already: jump to it only if the code asks for it
    theta = np.where(singular & (np.abs(qg - extreme) < 0.5), 1.0, theta)
    # the code gray is the pixel's own rounded gray: nothing to pull
    theta = np.where(qg == np.rint(lum), 0.0, theta)
    clamped = (theta < -tol) | (theta > 1 + tol)
    t = np.clip(theta, 0.0, 1.0)[..., None]
    out = img + t * (extreme[..., None] - img)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8), ColorizeStats(theta, clamped, singular)
