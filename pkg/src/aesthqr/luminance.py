"""Grayscale aesthetic stage.

:func:`modify_modules` raises each module's probability of being read
correctly to at least its ``eta`` by spending per-pixel weights ``varpi``;
:func:`estimate_thresholds` alternates that with re-estimating the local
thresholds until they settle.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .imageprep import canny_edges, module_view, normalize01
from .probmodel import (
    DEFAULT_SIGMA2,
    ThresholdModel,
    expected_threshold,
    module_success_prob,
    sampling_prob_grid,
)

log = logging.getLogger(__name__)

MAX_ITERATIONS = 50
THRESHOLD_TOLERANCE = 1.0
OMEGA_PRESETS = ("gaussian", "constant", "random", "image", "center", "edge")
_TOL = 1e-12


class NonConvergenceWarning(RuntimeWarning):
    pass


@dataclass
class ModifyResult:
    gray: np.ndarray  # (K, a, a) updated grays
    prob: np.ndarray  # (K,) P_M from the internal bookkeeping
    exhausted: np.ndarray  # (K,) weight budget ran out below eta
    rounds: int


def modify_modules(gray, thresholds, ps, varpi, eta, light, *, model: ThresholdModel,
                   max_pt: float = 1.0) -> ModifyResult:
    """Luminance modification for a stack of ``K`` modules at once.

    ``gray``/``thresholds``/``varpi`` are ``(K, a, a)``; ``eta`` and ``light``
    are ``(K,)``.  Each module runs the same deficit-spreading loop
    independently; capped pixels drop out of the weight budget.
    """
    gray = np.asarray(gray, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    ps = np.asarray(ps, dtype=float)
    eta = np.broadcast_to(np.asarray(eta, dtype=float), gray.shape[:1])
    light = np.broadcast_to(np.asarray(light, dtype=bool), gray.shape[:1])
    bits = np.broadcast_to(light[:, None, None], gray.shape)
    w = np.array(np.broadcast_to(varpi, gray.shape), dtype=float)
    if (w < 0).any():
        raise ValueError("varpi must be non-negative")

    pt0 = model.prob_correct(gray, thresholds, bits)
    pt = pt0.copy()
    exhausted = np.zeros(gray.shape[0], dtype=bool)
    active = np.ones(gray.shape[0], dtype=bool)
    rounds = 0
    # each pass caps at least one pixel of every still-active module
    for rounds in range(1, gray.shape[1] * gray.shape[2] + 2):
        prob = module_success_prob(ps, pt)
        active &= prob < eta - _TOL
        budget = module_success_prob(ps, w)
        dry = active & (budget <= 0)
        exhausted |= dry
        active &= ~dry
        if not active.any():
            break
        idx = np.flatnonzero(active)
        step = (np.maximum(eta[idx], prob[idx]) - prob[idx]) / budget[idx]
        sub = pt[idx] + step[:, None, None] * w[idx]
        capped = sub >= max_pt
        sub[capped] = max_pt
        pt[idx] = sub
        wi = w[idx]
        wi[capped] = 0.0
        w[idx] = wi
    prob = module_success_prob(ps, pt)

    out = gray.copy()
    changed = pt > pt0
    if changed.any():
        y = model.invert(pt[changed], thresholds[changed], bits[changed])
        orig = gray[changed]
        # only ever move toward the module's extreme
        y = np.where(bits[changed], np.maximum(y, orig), np.minimum(y, orig))
        out[changed] = y
    return ModifyResult(out, prob, exhausted & (prob < eta - _TOL), rounds)


def modify_module(gray, thresholds, ps, varpi, eta: float, bit, *,
                  sigma2: float = DEFAULT_SIGMA2, max_pt: float = 1.0) -> np.ndarray:
    """Single-module convenience wrapper around :func:`modify_modules`."""
    res = modify_modules(np.asarray(gray, dtype=float)[None], np.asarray(thresholds, dtype=float)[None],
                         ps, np.asarray(varpi, dtype=float)[None], np.array([eta]),
                         np.array([bool(bit)]), model=ThresholdModel(sigma2), max_pt=max_pt)
    return res.gray[0]


# ------------------------------------------------------------------ inputs


def eta_map(priority: np.ndarray | None = None, scalar: float | None = None,
            side: int | None = None) -> np.ndarray:
    """Per-module constraint: a scalar everywhere, or ``0.75 + 0.15 (1 - W)``."""
    if scalar is not None:
        if not 0.0 <= scalar <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if priority is not None:
            side = priority.shape[0]
        return np.full((side, side), float(scalar))
    if priority is None:
        raise ValueError("priority map required for the default eta map")
    return 0.75 + 0.15 * (1.0 - np.clip(priority, 0.0, 1.0))


def omega_weights(preset: str, side: int, a: int, *, sigma3: float | None = None,
                  seed: int | None = 0, image=None, mask_image=None) -> np.ndarray:
    """Per-pixel adjustment weights over the ``a*side`` code area.

    gaussian
        the sampling distribution in every module (default)
    constant
        1 everywhere
    random
        uniform [0, 1), seeded
    image
        luminance of ``mask_image`` scaled to [0, 1]
    center
        1 in the central third of each module, 0.1 elsewhere
    edge
        normalized Gaussian plus the Canny edges of ``image``
    """
    n = side * a
    ps = sampling_prob_grid(a, sigma3)
    tile = np.tile(ps / ps.max(), (side, side))
    if preset == "gaussian":
        return np.tile(ps, (side, side))
    if preset == "constant":
        return np.ones((n, n))
    if preset == "random":
        return np.random.default_rng(seed).random((n, n))
    if preset == "center":
        d = np.abs(np.arange(a) + 0.5 - a / 2.0)
        core = (d[:, None] <= a / 6.0) & (d[None, :] <= a / 6.0)
        return np.tile(np.where(core, 1.0, 0.1), (side, side))
    if preset == "image":
        if mask_image is None:
            raise ValueError("the image preset needs a mask image")
        import cv2

        from .imageprep import to_grayscale

        g = to_grayscale(mask_image).astype(np.float32)
        return cv2.resize(g, (n, n), interpolation=cv2.INTER_AREA).astype(float) / 255.0
    if preset == "edge":
        if image is None:
            raise ValueError("the edge preset needs the source image")
        from .imageprep import to_grayscale

        gray = image if np.asarray(image).ndim == 2 else to_grayscale(image)
        return normalize01(tile + canny_edges(np.asarray(gray, dtype=np.uint8)))
    raise ValueError(f"unknown omega preset {preset!r}; choose from {OMEGA_PRESETS}")


# ------------------------------------------------------ threshold estimation


@dataclass
class GrayAestheticState:
    gray: np.ndarray  # Q^g over the code area, float in [0, 255]
    thresholds: np.ndarray  # L computed from ``gray``
    iterations: int
    converged: bool
    changed_fraction: list[float] = field(default_factory=list)
    max_delta: list[float] = field(default_factory=list)
    mean_prob: list[float] = field(default_factory=list)
    prob: np.ndarray | None = None  # last internal P_M per module
    exhausted: np.ndarray | None = None

    def diagnostics_csv(self) -> str:
        lines = ["iteration,changed_fraction,max_threshold_delta,mean_module_prob"]
        for i, (c, d, p) in enumerate(zip(self.changed_fraction, self.max_delta,
                                          self.mean_prob), start=1):
            lines.append(f"{i},{c:.6f},{d:.6f},{p:.6f}")
        return "\n".join(lines) + "\n"


def render_modules(light: np.ndarray, a: int) -> np.ndarray:
    return np.kron(np.where(light, 255.0, 0.0), np.ones((a, a)))


def estimate_thresholds(image_gray, light, function, varpi, eta, *, a: int,
                        sigma2: float = DEFAULT_SIGMA2, sigma3: float | None = None,
                        max_iter: int = MAX_ITERATIONS, tol: float = THRESHOLD_TOLERANCE,
                        max_pt: float = 1.0) -> GrayAestheticState:
    """Iterate threshold estimation and luminance modification.

    ``image_gray`` is the ``a*l`` code-area luminance, ``light``/``function``
    are ``l x l`` module maps, ``varpi`` is per pixel and ``eta`` per module.
    Function modules stay pure black/white and are never modified.
    """
    side = light.shape[0]
    ig = np.asarray(image_gray, dtype=float)
    if ig.shape != (a * side, a * side):
        raise ValueError(f"image {ig.shape} does not match {side} modules of {a} px")
    model = ThresholdModel(sigma2)
    ps = sampling_prob_grid(a, sigma3)
    pure = render_modules(light, a)
    fpix = np.kron(function.astype(np.uint8), np.ones((a, a), dtype=np.uint8)).astype(bool)

    base = ig.copy()
    base[fpix] = pure[fpix]
    qg = 0.5 * ig + 0.5 * pure
    qg[fpix] = pure[fpix]

    sel = ~function
    eta = np.broadcast_to(np.asarray(eta, dtype=float), light.shape)
    w_mod = module_view(np.asarray(varpi, dtype=float), side)[sel]
    y0 = module_view(base, side)[sel]
    bits = light[sel]
    eta_sel = eta[sel]

    state = GrayAestheticState(qg, expected_threshold(qg, a), 0, False)
    l_old = None
    res = None
    while True:
        L = expected_threshold(qg, a)
        if l_old is not None:
            delta = float(np.abs(L - l_old).max())
            state.max_delta.append(delta)
            if delta <= tol:
                state.converged = True
                break
        if state.iterations >= max_iter:
            warnings.warn(f"threshold estimation did not settle in {max_iter} iterations",
                          NonConvergenceWarning, stacklevel=2)
            break
        state.iterations += 1
        res = modify_modules(y0, module_view(L, side)[sel], ps, w_mod, eta_sel, bits,
                             model=model, max_pt=max_pt)
        new = base.copy()
        module_view(new, side)[sel] = res.gray
        state.changed_fraction.append(float(np.mean(new != qg)))
        state.mean_prob.append(float(res.prob.mean()) if res.prob.size else 1.0)
        log.debug("iteration %d: %.4f of pixels changed", state.iterations,
                  state.changed_fraction[-1])
        qg = new
        l_old = L
    if res is not None:
        qg, L, prob_sel = _repair(qg, base, res, side, sel, ps, w_mod, eta_sel, bits, a,
                                  model, max_pt)
        prob = np.ones(light.shape)
        prob[sel] = prob_sel
        exh = np.zeros(light.shape, dtype=bool)
        exh[sel] = res.exhausted
        state.prob, state.exhausted = prob, exh
    state.gray = qg
    state.thresholds = L
    return state


def _repair(qg, base, res, side, sel, ps, w_mod, eta_sel, bits, a, model, max_pt,
            rounds: int = 10):
    """Top up modules that the settled thresholds leave just below eta.

    The last modification used thresholds up to ``tol`` away from the ones
    the final gray implies, so a few modules can miss eta by a hair.  They
    are pushed again from their current pixels (never back toward the
    original) until every non-exhausted module holds.
    """
    for _ in range(rounds):
        L = expected_threshold(qg, a)
        cur = module_view(qg, side)[sel]
        t = module_view(L, side)[sel]
        pt = model.prob_correct(cur, t, np.broadcast_to(bits[:, None, None], cur.shape))
        prob = module_success_prob(ps, pt)
        low = (prob < eta_sel - _TOL) & ~res.exhausted
        if not low.any():
            break
        fix = modify_modules(cur[low], t[low], ps, w_mod[low], eta_sel[low], bits[low],
                             model=model, max_pt=max_pt)
        cur[low] = fix.gray
        qg = qg.copy()
        module_view(qg, side)[sel] = cur
    return qg, L, prob
