"""Perturbation benchmark: rotation, brightness, scale and coverage sweeps
plus the success-rate-versus-eta sweep."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import cv2
import numpy as np

from ._validation import check_payload
from .scanner import scan

KINDS = ("rotate_x", "rotate_y", "rotate_z", "brightness", "scale", "coverage")
SWEEP_ALIASES = {"x": "rotate_x", "y": "rotate_y", "z": "rotate_z"}
CSV_FIELDS = ("kind", "parameter", "image_id", "outcome", "corrections")
CAMERA_DISTANCE = 4.0  # in code widths
CANVAS_SCALE = 1.25
COVERAGE_REPS = 30
# the mild perturbation fixture of the eta sweep
ETA_FIXTURE = (("brightness", -40), ("brightness", 40), ("scale", 0.75), ("scale", 1.25),
               ("rotate_x", -30), ("rotate_x", 30))


def default_grid(kind: str) -> np.ndarray:
    if kind in ("rotate_x", "rotate_y"):
        return np.arange(-60, 61, 15)
    if kind == "rotate_z":
        return np.arange(0, 361, 30)
    if kind == "brightness":
        return np.arange(-255, 256, 5)
    if kind == "scale":
        return np.round(np.arange(1, 61) * 0.05, 2)
    if kind == "coverage":
        return np.arange(0, 13)
    raise ValueError(f"unknown perturbation {kind!r}; choose from {KINDS}")


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    grid: tuple = ()
    seed: int = 0
    reps: int = 1

    def __post_init__(self):
        kind = SWEEP_ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown perturbation {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "kind", kind)
        grid = tuple(default_grid(kind).tolist()) if len(self.grid) == 0 else tuple(self.grid)
        object.__setattr__(self, "grid", grid)
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if kind == "coverage" and any(int(n) != n or n < 0 for n in grid):
            raise ValueError("coverage points are non-negative block counts")


@dataclass
class BenchItem:
    """One code image under test with the payload it must decode to."""

    image_id: str
    image: np.ndarray
    payload: bytes
    module_px: int
    code_box: tuple[int, int, int, int] | None = None  # x0, y0, x1, y1 of the symbol

    @classmethod
    def from_result(cls, image_id: str, result, payload) -> "BenchItem":
        """Wrap a :class:`~aesthqr.pipeline.BeautifyResult` color code."""
        a = result.module_px
        q = 4 * a
        n = result.binary.side * a
        return cls(image_id, result.color, check_payload(payload), a, (q, q, q + n, q + n))


# ------------------------------------------------------------ perturbations


def _rotation(kind: str, deg: float) -> np.ndarray:
    t = np.deg2rad(deg)
    c, s = np.cos(t), np.sin(t)
    if kind == "rotate_x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if kind == "rotate_y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def view_homography(shape, kind: str, deg: float, canvas: tuple[int, int]) -> np.ndarray:
    """Pinhole view of the image plane turned by ``deg`` about one axis.

    The camera sits ``CAMERA_DISTANCE`` image widths from the plane's
    center; the focal length equals that distance so the unrotated plane
    keeps its native scale.
    """
    h, w = shape[:2]
    dist = CAMERA_DISTANCE * max(h, w)
    r = _rotation(kind, deg)
    to_plane = np.array([[1, 0, -w / 2], [0, 1, -h / 2], [0, 0, 1]])
    extr = np.column_stack([r[:, 0], r[:, 1], [0, 0, dist]])
    k = np.array([[dist, 0, canvas[1] / 2], [0, dist, canvas[0] / 2], [0, 0, 1]])
    hom = k @ extr @ to_plane
    return hom / hom[2, 2]


def _coverage(image: np.ndarray, n: int, module_px: int, box, rng: np.random.Generator):
    out = image.copy()
    h, w = image.shape[:2]
    x0, y0, x1, y1 = box if box is not None else (0, 0, w, h)
    size = 2 * module_px
    for _ in range(int(n)):
        x = int(rng.integers(x0, max(x0 + 1, x1 - size + 1)))
        y = int(rng.integers(y0, max(y0 + 1, y1 - size + 1)))
        out[y:y + size, x:x + size] = 0 if rng.random() < 0.5 else 255
    return out


def perturb(image, kind: str, point, *, module_px: int = 8, code_box=None,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Return a perturbed copy of ``image``; the input is never modified."""
    kind = SWEEP_ALIASES.get(kind, kind)
    img = np.asarray(image)
    if kind == "brightness":
        return np.clip(img.astype(np.int16) + int(round(point)), 0, 255).astype(np.uint8)
    if kind == "scale":
        ratio = float(point)
        if ratio <= 0:
            raise ValueError("scale ratio must be positive")
        if ratio == 1.0:
            return img.copy()
        h, w = img.shape[:2]
        size = (max(1, int(round(w * ratio))), max(1, int(round(h * ratio))))
        return cv2.resize(img, size, interpolation=cv2.INTER_CUBIC)
    if kind in ("rotate_x", "rotate_y", "rotate_z"):
        h, w = img.shape[:2]
        canvas = (int(round(h * CANVAS_SCALE)), int(round(w * CANVAS_SCALE)))
        hom = view_homography(img.shape, kind, float(point), canvas)
        border = (255,) * (img.shape[2] if img.ndim == 3 else 1)
        return cv2.warpPerspective(img, hom, (canvas[1], canvas[0]), flags=cv2.INTER_LINEAR,
                                   borderMode=cv2.BORDER_CONSTANT, borderValue=border)
    if kind == "coverage":
        if rng is None:
            rng = np.random.default_rng(0)
        return _coverage(img, int(point), module_px, code_box, rng)
    raise ValueError(f"unknown perturbation {kind!r}; choose from {KINDS}")


# ------------------------------------------------------------------ sweeps


@dataclass
class BenchResult:
    rows: list[tuple] = field(default_factory=list)  # CSV_FIELDS tuples

    def success_rates(self, kind: str | None = None) -> dict:
        """Mean success per parameter value, in first-seen order."""
        acc: dict = {}
        for k, p, _, outcome, _ in self.rows:
            if kind is None or k == kind:
                acc.setdefault(p, []).append(outcome == "decoded")
        return {p: float(np.mean(v)) for p, v in acc.items()}

    def extend(self, other: "BenchResult") -> None:
        self.rows.extend(other.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for k, p, image_id, outcome, corr in self.rows:
            w.writerow((k, _fmt(p), image_id, outcome, corr))
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def plot_svg(self, path, title: str = "") -> None:
        """Success-rate curve per sweep kind as an SVG line plot."""
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        # a fixed hash salt keeps the SVG element ids, and so the file, stable
        with matplotlib.rc_context({"svg.hashsalt": "aesthqr"}):
            fig, ax = plt.subplots(figsize=(6, 4))
            for kind in dict.fromkeys(r[0] for r in self.rows):
                rates = self.success_rates(kind)
                ax.plot(list(rates), list(rates.values()), marker="o", label=kind)
            ax.set_ylim(-0.05, 1.05)
            ax.set_xlabel("parameter")
            ax.set_ylabel("success rate")
            ax.set_title(title)
            ax.legend()
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)


def _fmt(p) -> str:
    return f"{float(p):g}"


def _scan_outcome(img, payload: bytes) -> tuple[str, int]:
    rep = scan(img)
    if rep.ok and rep.payload != payload:
        return "misdecoded", rep.corrections
    return rep.outcome, rep.corrections


def _run_job(job) -> tuple:
    kind, point, image_id, item, rng_seed = job
    rng = np.random.default_rng(rng_seed) if rng_seed is not None else None
    img = perturb(item.image, kind, point, module_px=item.module_px, code_box=item.code_box,
                  rng=rng)
    return (kind, point, image_id) + _scan_outcome(img, item.payload)


def _map_jobs(fn, jobs: list, n_jobs: int | None) -> list:
    if n_jobs is None:
        n_jobs = os.cpu_count() or 1
    if n_jobs <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        # map keeps submission order, so the reduce is deterministic
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))


def run_sweep(items, spec: PerturbationSpec, n_jobs: int | None = 1) -> BenchResult:
    """Scan every (item, grid point) pair.

    Coverage draws are nested across block counts: repetition ``r`` of an
    image places the same blocks for every ``N`` and only adds more as ``N``
    grows, so the curve compares like with like.
    """
    items = list(items)
    jobs = []
    for point in spec.grid:
        for idx, item in enumerate(items):
            if spec.kind == "coverage":
                for r in range(spec.reps):
                    image_id = item.image_id if spec.reps == 1 else f"{item.image_id}#{r:02d}"
                    seed = np.random.SeedSequence([spec.seed, idx, r]).generate_state(1)[0]
                    jobs.append((spec.kind, point, image_id, item, int(seed)))
            else:
                jobs.append((spec.kind, point, item.image_id, item, None))
    return BenchResult(_map_jobs(_run_job, jobs, n_jobs))


# ------------------------------------------------------------- item makers


def standard_items(payload, versions=range(1, 11), ec_level: str = "M", mask: int = 0,
                   size: int = 512) -> list[BenchItem]:
    """Plain (non-aesthetic) codes rendered with a 4-module quiet zone."""
    from .qr_symbol import QUIET_ZONE, QrSpec, encode_symbol, min_version, render_matrix

    payload = check_payload(payload)
    items = []
    for v in versions:
        if v < min_version(len(payload), ec_level):
            continue
        m = encode_symbol(payload, QrSpec(v, ec_level, mask))
        gray = render_matrix(m.dark, size=size)
        a = max(1, size // (m.side + 2 * QUIET_ZONE))
        off = (gray.shape[0] - m.side * a) // 2
        items.append(BenchItem(f"standard_v{v}", gray, payload, a,
                               (off, off, off + m.side * a, off + m.side * a)))
    return items


def aesthetic_items(images: dict, config) -> list[BenchItem]:
    """Beautify every image with ``config`` and wrap the color codes."""
    from .pipeline import beautify

    return [BenchItem.from_result(name, beautify(img, config), config.payload)
            for name, img in images.items()]


def _eta_job(job) -> list[tuple]:
    eta, name, img, config, fixture = job
    from dataclasses import replace

    item = aesthetic_items({name: img}, replace(config, eta=float(eta)))[0]
    rows = []
    for kind, point in fixture:
        out = perturb(item.image, kind, point, module_px=item.module_px, code_box=item.code_box)
        rows.append(("eta", float(eta), f"{name}@{kind}={_fmt(point)}")
                    + _scan_outcome(out, item.payload))
    return rows


def eta_sweep(images: dict, config, etas=None, fixture=ETA_FIXTURE,
              n_jobs: int | None = 1) -> BenchResult:
    """Success rate versus a uniform eta.

    Every image is beautified once per eta and scanned under each fixture
    perturbation; rows carry ``image_id@kind=value``.
    """
    if etas is None:
        etas = np.round(np.arange(100, -1, -1) / 100.0, 2)
    jobs = [(eta, name, img, config, tuple(fixture)) for eta in etas
            for name, img in images.items()]
    return BenchResult([row for rows in _map_jobs(_eta_job, jobs, n_jobs) for row in rows])
