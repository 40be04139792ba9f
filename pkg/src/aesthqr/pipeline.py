"""End-to-end generator: binary, grayscale and color aesthetic stages."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_payload, check_rgb
from .basis import build_operator_set_a, eliminate_to_set_b, match_target, pivot_map
from .colorize import colorize
from .exceptions import CapacityExceeded, NoPaddingAvailable, VerificationFailed
from .imageprep import module_binarize, module_pixels, priority_map, resample_for_code, to_grayscale
from .luminance import OMEGA_PRESETS, estimate_thresholds, eta_map, omega_weights, render_modules
from .probmodel import DEFAULT_SIGMA2, module_probabilities
from .qr_symbol import (
    EC_LEVELS,
    FUNCTION,
    MAX_VERSION,
    QUIET_ZONE,
    ModuleMatrix,
    QrSpec,
    byte_capacity,
    encode_symbol,
    min_version,
)
from .scanner import ScanReport, scan

log = logging.getLogger(__name__)


@dataclass
class BeautifyConfig:
    """Everything that steers one generation run.

    ``eta`` is a number in [0, 1] applied to every module, or ``"map"`` for
    the priority-driven map in [0.75, 0.9].  ``omega_preset`` is one of
    ``gaussian``, ``constant``, ``random``, ``image:<path>``, ``center``,
    ``edge``.  ``version=None`` picks the smallest version that fits;
    ``mask=None`` tries all eight masks and keeps the one whose adjusted
    code agrees best with the picture.
    """

    payload: bytes | str = b""
    version: int | None = None
    ec_level: str = "M"
    mask: int | None = 0
    eta: float | str = "map"
    omega_preset: str = "gaussian"
    sigma2: float = DEFAULT_SIGMA2
    sigma3: float | None = None
    size: int = 512
    seed: int = 0
    verify: bool = False
    max_iter: int = 50

    def __post_init__(self):
        self.payload = check_payload(self.payload)
        if self.ec_level not in EC_LEVELS:
            raise ValueError(f"ec_level must be one of {EC_LEVELS}")
        if self.version is not None and not 1 <= int(self.version) <= MAX_VERSION:
            raise ValueError(f"version must be in 1..{MAX_VERSION}")
        if self.mask is not None and not 0 <= int(self.mask) <= 7:
            raise ValueError("mask must be in 0..7")
        if isinstance(self.eta, str):
            if self.eta != "map":
                self.eta = float(self.eta)
        if not isinstance(self.eta, str) and not 0.0 <= float(self.eta) <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        name = self.omega_preset.split(":", 1)[0]
        if name not in OMEGA_PRESETS:
            raise ValueError(f"unknown omega preset {self.omega_preset!r}")
        if name == "image" and ":" not in self.omega_preset:
            raise ValueError("the image preset is written image:<path>")
        if self.sigma2 <= 0 or (self.sigma3 is not None and self.sigma3 <= 0):
            raise ValueError("sigma2 and sigma3 must be positive")
        if self.size < 21:
            raise ValueError("size too small for a version 1 symbol")

    def resolve_version(self) -> int:
        n = len(self.payload)
        if self.version is not None:
            cap = byte_capacity(int(self.version), self.ec_level)
            if n > cap:
                raise CapacityExceeded(
                    f"{n} bytes exceed the {cap}-byte capacity of version {self.version}-{self.ec_level}")
            return int(self.version)
        return min_version(n, self.ec_level)


@dataclass
class BeautifyResult:
    binary: ModuleMatrix  # Q^b
    gray: np.ndarray  # Q^g, uint8, quiet zone included
    color: np.ndarray  # Q^c, uint8 RGB, quiet zone included
    module_px: int
    prob: np.ndarray  # recomputed P_M per module (function modules = 1)
    exhausted: np.ndarray
    iteration_log: str
    diagnostics: dict = field(default_factory=dict)
    report: ScanReport | None = None

    def binary_image(self) -> np.ndarray:
        return _with_quiet_zone(render_modules(~self.binary.dark, self.module_px), self.module_px)

    def prob_heatmap(self) -> np.ndarray:
        """P_M as an 8-bit gray image, one pixel block per module."""
        return np.kron(np.rint(self.prob * 255).astype(np.uint8),
                       np.ones((self.module_px, self.module_px), dtype=np.uint8))

    def save(self, out: str | Path, diag_dir: str | Path | None = None) -> None:
        from PIL import Image

        Image.fromarray(self.color).save(out)
        if diag_dir is None:
            return
        d = Path(diag_dir)
        d.mkdir(parents=True, exist_ok=True)
        Image.fromarray(self.binary_image().astype(np.uint8)).save(d / "binary.png")
        Image.fromarray(self.gray).save(d / "gray.png")
        Image.fromarray(self.prob_heatmap()).save(d / "prob_heatmap.png")
        (d / "iterations.csv").write_text(self.iteration_log)
        (d / "diagnostics.json").write_text(json.dumps(self.diagnostics, indent=2, sort_keys=True))


def _with_quiet_zone(code: np.ndarray, a: int) -> np.ndarray:
    q = QUIET_ZONE * a
    pad = ((q, q), (q, q)) + ((0, 0),) * (code.ndim - 2)
    return np.pad(code, pad, constant_values=255)


def _binary_stage(payload: bytes, version: int, ec: str, mask: int | None, target_dark, weights):
    """Q^b for the given mask, or the best of all eight by priority-weighted
    agreement with the target."""
    best = None
    for m in range(8) if mask is None else [int(mask)]:
        spec = QrSpec(version, ec, m)
        base = encode_symbol(payload, spec)
        try:
            basis = eliminate_to_set_b(build_operator_set_a(spec, payload), weights)
            qb = match_target(base, basis, target_dark, weights)
            controlled = int(pivot_map(basis).sum())
        except NoPaddingAvailable:
            log.warning("no padding codewords in %s; the binary stage keeps the plain symbol", spec)
            qb, controlled = base, 0
            qb.meta["operators_applied"] = 0
        free = qb.role != FUNCTION
        score = float((weights * (qb.dark == target_dark))[free].sum())
        if best is None or score > best[0]:
            best = (score, qb, controlled)
    return best[1], best[2]


def beautify(image, config: BeautifyConfig) -> BeautifyResult:
    """Turn ``image`` into a color QR code carrying ``config.payload``."""
    version = config.resolve_version()
    side = 4 * version + 17
    a = module_pixels(side, config.size)
    img = resample_for_code(check_rgb(image), side, config.size)
    gray = to_grayscale(img)

    weights = priority_map(img, side).weights
    target_dark = ~module_binarize(gray, side)
    qb, controlled = _binary_stage(config.payload, version, config.ec_level, config.mask,
                                   target_dark, weights)
    light = ~qb.dark
    function = qb.role == FUNCTION

    if config.eta == "map":
        eta = eta_map(weights)
    else:
        eta = eta_map(scalar=float(config.eta), side=side)
    preset, _, arg = config.omega_preset.partition(":")
    mask_image = None
    if preset == "image":
        from PIL import Image

        mask_image = np.asarray(Image.open(arg).convert("RGB"))
    varpi = omega_weights(preset, side, a, sigma3=config.sigma3, seed=config.seed,
                          image=gray, mask_image=mask_image)

    state = estimate_thresholds(gray, light, function, varpi, eta, a=a, sigma2=config.sigma2,
                                sigma3=config.sigma3, max_iter=config.max_iter)
    qg = np.clip(np.rint(state.gray), 0, 255).astype(np.uint8)
    qc, stats = colorize(img, qg, light)

    prob = module_probabilities(qg, light, a, config.sigma2, config.sigma3)
    prob[function] = 1.0
    exhausted = state.exhausted if state.exhausted is not None else np.zeros_like(function)
    data = ~function
    diag = {
        "version": version, "ec_level": config.ec_level, "mask": qb.spec.mask,
        "side": side, "module_px": a, "payload_bytes": len(config.payload),
        "controllable_modules": controlled,
        "operators_applied": int(qb.meta.get("operators_applied", 0)),
        "binary_agreement": float((qb.dark == target_dark)[data].mean()),
        "eta": config.eta if isinstance(config.eta, str) else float(config.eta),
        "iterations": state.iterations, "converged": state.converged,
        "changed_fraction": state.changed_fraction, "max_threshold_delta": state.max_delta,
        "prob_min": float(prob[data].min()), "prob_mean": float(prob[data].mean()),
        "exhausted_modules": int(exhausted[data].sum()),
        "colorize_clamped": stats.clamped_count,
        "config": {k: v for k, v in asdict(replace(config, payload=b"")).items() if k != "payload"},
    }
    result = BeautifyResult(qb, _with_quiet_zone(qg, a), _with_quiet_zone(qc, a), a, prob,
                            exhausted, state.diagnostics_csv(), diag)
    if config.verify:
        report = scan(result.color, ground_truth=qb)
        result.report = report
        diag["verification"] = report.to_dict()
        if not report.ok or report.payload != config.payload:
            raise VerificationFailed(f"generated code did not scan back: {report.outcome}"
                                     f" {report.message}".strip(), report=report)
    return result


class AestheticQRGenerator(TransformerMixin, BaseEstimator):
    """Estimator front end to :func:`beautify`.

    ``transform`` maps each input image to its color QR code; the last
    :class:`BeautifyResult` is kept in ``results_``.
    """

    def __init__(self, data="", version=None, ec_level="M", mask=0, eta="map",
                 omega_preset="gaussian", sigma2=DEFAULT_SIGMA2, sigma3=None, size=512,
                 seed=0, verify=False):
        self.data = data
        self.version = version
        self.ec_level = ec_level
        self.mask = mask
        self.eta = eta
        self.omega_preset = omega_preset
        self.sigma2 = sigma2
        self.sigma3 = sigma3
        self.size = size
        self.seed = seed
        self.verify = verify

    def _config(self) -> BeautifyConfig:
        return BeautifyConfig(self.data, self.version, self.ec_level, self.mask, self.eta,
                              self.omega_preset, self.sigma2, self.sigma3, self.size,
                              self.seed, self.verify)

    def fit(self, X=None, y=None):
        cfg = self._config()
        self.version_ = cfg.resolve_version()
        self.side_ = 4 * self.version_ + 17
        return self

    def transform(self, X):
        from .scanner import _as_image_list

        cfg = self._config()
        single = isinstance(X, np.ndarray) and len(_as_image_list(X)) == 1 and X.ndim < 4
        self.results_ = [beautify(img, cfg) for img in _as_image_list(X)]
        out = [r.color for r in self.results_]
        return out[0] if single else out
