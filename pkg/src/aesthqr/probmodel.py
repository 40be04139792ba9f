"""Module-based scanning-probability model.

``bit`` arguments follow the thresholding convention: ``1`` means the pixel
should binarize bright (a light module), ``0`` dark.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

DEFAULT_SIGMA2 = 255.0 / 3.0
_EPS = 1e-12


def window_sum(img: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Sum and pixel count of the ``size x size`` window around each pixel,
    clipped to the image.  The window spans ``[i - size//2, i - size//2 + size)``."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    ii = np.zeros((h + 1, w + 1))
    ii[1:, 1:] = img.cumsum(0).cumsum(1)
    lo = size // 2
    r0 = np.clip(np.arange(h) - lo, 0, h)
    r1 = np.clip(np.arange(h) - lo + size, 0, h)
    c0 = np.clip(np.arange(w) - lo, 0, w)
    c1 = np.clip(np.arange(w) - lo + size, 0, w)
    s = (ii[r1][:, c1] - ii[r0][:, c1] - ii[r1][:, c0] + ii[r0][:, c0])
    count = (r1 - r0)[:, None] * (c1 - c0)[None, :]
    return s, count


def expected_threshold(gray: np.ndarray, a: int) -> np.ndarray:
    """Local mean over the ``3a x 3a`` window centered on each pixel."""
    s, count = window_sum(gray, 3 * int(a))
    return s / count


class ThresholdModel:
    """Gaussian threshold noise around the local mean, truncated to [0, 255]."""

    def __init__(self, sigma2: float = DEFAULT_SIGMA2):
        if sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        self.sigma2 = float(sigma2)

    def _cdf(self, y, t):
        return ndtr((np.asarray(y, dtype=float) - t) / self.sigma2)

    def split(self, y, t) -> tuple[np.ndarray, np.ndarray]:
        """Unnormalized ``(P(H=0), P(H=1))``."""
        t = np.asarray(t, dtype=float)
        c_y = self._cdf(y, t)
        p1 = c_y - self._cdf(0.0, t)
        p0 = self._cdf(255.0, t) - c_y
        return p0, p1

    def prob_correct(self, y, t, bit) -> np.ndarray:
        p0, p1 = self.split(y, t)
        total = p0 + p1
        return np.where(np.asarray(bit, dtype=bool), p1, p0) / total

    def _inverse_bright(self, q, t):
        lo = self._cdf(0.0, t)
        z = self._cdf(255.0, t) - lo
        u = np.clip(q * z + lo, 1e-300, 1 - 1e-16)
        return np.clip(t + self.sigma2 * ndtri(u), 0.0, 255.0)

    def invert(self, target, t, bit, original=None, rounding: str = "conservative") -> np.ndarray:
        """Integer gray level realizing the target probability.

        ``conservative`` returns the gray closest to the opposite extreme
        whose probability still reaches ``target``, so rounding never loses
        probability.  ``nearest`` minimizes ``|p(Y) - target|`` with ties
        broken toward ``original``.
        """
        target = np.clip(np.asarray(target, dtype=float), 0.0, 1.0)
        t = np.asarray(t, dtype=float)
        bit = np.asarray(bit, dtype=bool)
        target, t, bit = np.broadcast_arrays(target, t, bit)
        # dark targets map onto bright ones by the 255 - Y symmetry
        tt = np.where(bit, t, 255.0 - t)
        y = self._inverse_bright(target, tt)

        def p(v):
            return self.prob_correct(v, tt, True)

        lo = np.clip(np.floor(y), 0, 255)
        hi = np.clip(lo + 1, 0, 255)
        if rounding == "conservative":
            cand = np.where(p(lo) >= target - _EPS, lo, hi)
            # guard against ndtri round-off in either direction
            down = np.clip(cand - 1, 0, 255)
            cand = np.where((cand > 0) & (p(down) >= target - _EPS), down, cand)
            up = np.clip(cand + 1, 0, 255)
            cand = np.where(p(cand) < target - _EPS, up, cand)
        elif rounding == "nearest":
            dlo = np.abs(p(lo) - target)
            dhi = np.abs(p(hi) - target)
            cand = np.where(dlo < dhi, lo, hi)
            if original is not None:
                orig = np.where(bit, np.asarray(original, dtype=float),
                                255.0 - np.asarray(original, dtype=float))
                tie = np.isclose(dlo, dhi, rtol=0, atol=1e-15)
                cand = np.where(tie, np.where(np.abs(lo - orig) <= np.abs(hi - orig), lo, hi), cand)
        else:
            raise ValueError(f"unknown rounding {rounding!r}")
        return np.where(bit, cand, 255.0 - cand)


def threshold_success_prob(y, t, bit, sigma2: float = DEFAULT_SIGMA2):
    return ThresholdModel(sigma2).prob_correct(y, t, bit)


def invert_threshold_prob(target, t, bit, sigma2: float = DEFAULT_SIGMA2,
                          original=None, rounding: str = "conservative"):
    return ThresholdModel(sigma2).invert(target, t, bit, original=original, rounding=rounding)


def sampling_prob_grid(a: int, sigma3: float | None = None) -> np.ndarray:
    """Probability of each pixel of an ``a x a`` module being sampled."""
    from .imageprep import gaussian_weights

    if a < 1:
        raise ValueError("module side must be >= 1")
    if sigma3 is None:
        sigma3 = a / 6.0
    return gaussian_weights(a, sigma3)


def module_success_prob(ps: np.ndarray, pt: np.ndarray) -> np.ndarray:
    """``sum(ps * pt)`` over the trailing module axes."""
    ps = np.asarray(ps, dtype=float)
    pt = np.asarray(pt, dtype=float)
    if pt.shape[-2:] != ps.shape:
        raise ValueError(f"p^t module shape {pt.shape[-2:]} != p^s shape {ps.shape}")
    return np.einsum("...ij,ij->...", pt, ps)


def module_probabilities(gray: np.ndarray, light: np.ndarray, a: int,
                         sigma2: float = DEFAULT_SIGMA2, sigma3: float | None = None,
                         thresholds: np.ndarray | None = None) -> np.ndarray:
    """``P_M`` for every module of a rendered code area.

    ``gray`` is the ``a*l`` square code area, ``light`` the ``l x l`` intended
    bits.  Thresholds default to the local means of ``gray`` itself.
    """
    from .imageprep import module_view

    gray = np.asarray(gray, dtype=float)
    side = light.shape[0]
    if thresholds is None:
        thresholds = expected_threshold(gray, a)
    bits = np.kron(np.asarray(light, dtype=np.uint8), np.ones((a, a), dtype=np.uint8)).astype(bool)
    pt = ThresholdModel(sigma2).prob_correct(gray, thresholds, bits)
    return module_success_prob(sampling_prob_grid(a, sigma3), module_view(pt, side))
