"""Command-line front end.

Exit codes: 0 success, 1 usage or unreadable input, 2 domain failure
(capacity, verification, scan that does not decode).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .exceptions import QRError, VerificationFailed

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2
log = logging.getLogger("aesthqr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(message)


# ------------------------------------------------------------------ helpers


def read_image(path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (OSError, UnidentifiedImageError) as exc:
        raise UsageError(f"cannot read image {path}: {exc}") from exc


def write_image(path, arr: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(np.asarray(arr, dtype=np.uint8)).save(path)


def parse_config_file(path) -> dict:
    """``key = value`` lines; ``#`` comments, optional quotes, dashes or
    underscores in keys."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.replace("-", "_")] = value.strip("\"'")
    return out


def _eta_arg(text: str):
    if text == "map":
        return "map"
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("eta is a number in [0, 1] or 'map'") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("eta must lie in [0, 1]")
    return v


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError("must be positive")
        return v
    return conv


def _mask_arg(text: str):
    if text == "auto":
        return None
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("mask is 0..7 or 'auto'") from None
    if not 0 <= v <= 7:
        raise argparse.ArgumentTypeError("mask is 0..7 or 'auto'")
    return v


def _add_symbol_flags(p, mask_default=0):
    p.add_argument("--data", help="payload text")
    p.add_argument("--version", type=int, choices=range(1, 11), metavar="1..10")
    p.add_argument("--ec", choices=["L", "M", "Q", "H"], default="M")
    p.add_argument("--mask", type=_mask_arg, default=mask_default,
                   help="0..7, or auto (beautify only: best match with the picture)")
    p.add_argument("--size", type=_positive(int), default=512)


def _add_style_flags(p):
    p.add_argument("--image", help="input picture")
    p.add_argument("--eta", type=_eta_arg, default="map")
    p.add_argument("--omega-preset", default="gaussian",
                   help="gaussian, constant, random, image:<path>, center or edge")
    p.add_argument("--sigma2", type=_positive(float), default=255.0 / 3.0)
    p.add_argument("--sigma3", type=_positive(float), default=None)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file; flags given explicitly win")
    common.add_argument("--json", action="store_true", help="machine-readable stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="aesthqr", description="Scanning-robust aesthetic QR codes.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", parents=[common], help="plain QR code")
    _add_symbol_flags(p)
    p.add_argument("--out", required=True, help=".png or .pbm")

    p = sub.add_parser("beautify", parents=[common], help="aesthetic QR code from a picture")
    _add_symbol_flags(p)
    _add_style_flags(p)
    p.add_argument("--verify", action="store_true", help="scan the result before writing")
    p.add_argument("--out", required=True)
    p.add_argument("--diag-dir", help="write Q^b, Q^g, P_M heat map and logs here")

    p = sub.add_parser("stylize", parents=[common], help="one code per weight preset")
    _add_symbol_flags(p)
    _add_style_flags(p)
    p.add_argument("--mask-image", help="picture for the image preset")
    p.add_argument("--out-dir", "--out", dest="out_dir", required=True)

    p = sub.add_parser("scan", parents=[common], help="decode with the simulated scanner")
    p.add_argument("path")
    p.add_argument("--truth", help="expected module matrix (.pbm) for the error mask")
    p.add_argument("--overlay", help="write the red/green error overlay PNG here")

    for name in ("bench", "eta-sweep"):
        p = sub.add_parser(name, parents=[common], help="perturbation sweep" if name == "bench"
                           else "success rate versus eta")
        _add_symbol_flags(p)
        _add_style_flags(p)
        if name == "bench":
            p.add_argument("--sweep", required=True,
                           choices=["x", "y", "z", "brightness", "scale", "coverage", "eta"])
            p.add_argument("--standard", action="store_true",
                           help="bench plain codes instead of aesthetic ones")
            p.set_defaults(eta=0.9)
        p.add_argument("--images", help="directory of pictures (default: bundled corpus)")
        p.add_argument("--grid", help="comma-separated parameter values")
        p.add_argument("--reps", type=_positive(int), default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--csv", help="write rows here")
        p.add_argument("--svg", help="write a success-rate plot here")
    return parser


def _apply_config(parser, args, argv) -> None:
    if not getattr(args, "config", None):
        return
    given = {a.split("=", 1)[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    for key, raw in parse_config_file(args.config).items():
        if key in given:
            continue
        if key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = act.type(raw) if act.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config {key}: {exc}") from exc
            if act.choices is not None and value not in act.choices:
                raise UsageError(f"config {key}: {raw!r} not allowed")
        setattr(args, key, value)


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


def _need(args, *names):
    for n in names:
        if not getattr(args, n, None):
            raise UsageError(f"--{n.replace('_', '-')} is required")


def _config(args, **over):
    from .pipeline import BeautifyConfig

    kw = dict(payload=args.data, version=args.version, ec_level=args.ec, mask=args.mask,
              eta=args.eta, omega_preset=args.omega_preset, sigma2=args.sigma2,
              sigma3=args.sigma3, size=args.size, seed=args.seed,
              verify=getattr(args, "verify", False))
    kw.update(over)
    try:
        return BeautifyConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ----------------------------------------------------------------- commands


def cmd_encode(args) -> int:
    from .qr_symbol import QrSpec, encode_symbol, min_version, render_matrix, to_pbm

    _need(args, "data")
    payload = args.data.encode("utf-8")
    if args.mask is None:
        raise UsageError("encode needs an explicit --mask 0..7")
    version = args.version or min_version(len(payload), args.ec)
    m = encode_symbol(payload, QrSpec(version, args.ec, args.mask))
    if str(args.out).lower().endswith(".pbm"):
        Path(args.out).write_text(to_pbm(m.dark))
    else:
        write_image(args.out, render_matrix(m.dark, size=args.size))
    _emit(args, {"out": str(args.out), "version": version, "ec_level": args.ec,
                 "mask": args.mask, "side": m.side},
          f"wrote {args.out}: version {version}-{args.ec}, mask {args.mask}")
    return EXIT_OK


def cmd_beautify(args) -> int:
    from .pipeline import beautify

    _need(args, "data", "image")
    cfg = _config(args)
    img = read_image(args.image)
    try:
        res = beautify(img, cfg)
    except VerificationFailed as exc:
        rep = exc.report.to_dict() if exc.report is not None else {}
        _emit(args, {"error": "verification_failed", "message": str(exc), "scan": rep},
              f"verification failed: {exc}")
        return EXIT_DOMAIN
    res.save(args.out, args.diag_dir)
    d = res.diagnostics
    _emit(args, {"out": str(args.out), **{k: v for k, v in d.items() if k != "config"}},
          f"wrote {args.out}: version {d['version']}-{d['ec_level']} mask {d['mask']}, "
          f"{d['iterations']} iterations, min P_M {d['prob_min']:.3f}")
    return EXIT_OK


def cmd_stylize(args) -> int:
    from .luminance import OMEGA_PRESETS
    from .pipeline import beautify

    _need(args, "data", "image")
    img = read_image(args.image)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for preset in OMEGA_PRESETS:
        if preset == "image":
            if not args.mask_image:
                continue
            read_image(args.mask_image)
            preset = f"image:{args.mask_image}"
        res = beautify(img, _config(args, omega_preset=preset))
        path = out_dir / f"{preset.split(':', 1)[0]}.png"
        write_image(path, res.color)
        written[preset.split(":", 1)[0]] = str(path)
    _emit(args, {"outputs": written}, "\n".join(f"{k}: {v}" for k, v in written.items()))
    return EXIT_OK


def cmd_scan(args) -> int:
    from .qr_symbol import from_pbm
    from .scanner import scan

    img = read_image(args.path)
    truth = None
    if args.truth:
        try:
            truth = from_pbm(Path(args.truth).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read truth matrix: {exc}") from exc
    rep = scan(img, ground_truth=truth)
    if args.overlay:
        if rep.error_mask is None:
            raise UsageError("--overlay needs --truth and a sampled grid of the same size")
        write_image(args.overlay, rep.overlay())
    text = (f"decoded ({rep.corrections} corrections): {rep.payload.decode('utf-8', 'replace')}"
            if rep.ok else f"{rep.outcome}: {rep.message}")
    _emit(args, rep.to_dict(), text)
    return EXIT_OK if rep.ok else EXIT_DOMAIN


def _load_images(args) -> dict:
    if not args.images:
        from .data import load_corpus

        return load_corpus()
    root = Path(args.images)
    if not root.is_dir():
        raise UsageError(f"{root} is not a directory")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not files:
        raise UsageError(f"no PNG/JPEG files in {root}")
    return {p.stem: read_image(p) for p in files}


def _grid(args):
    if not args.grid:
        return None
    try:
        return tuple(float(v) for v in args.grid.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --grid: {exc}") from exc


def cmd_bench(args) -> int:
    from . import bench

    sweep = "eta" if args.command == "eta-sweep" else args.sweep
    grid = _grid(args)
    if sweep == "eta":
        cfg = _config(args, payload=args.data or "https://example.org/aesthetic-qr")
        result = bench.eta_sweep(_load_images(args), cfg, etas=grid, n_jobs=args.jobs)
    else:
        payload = args.data or "https://example.org/aesthetic-qr"
        if getattr(args, "standard", False):
            items = bench.standard_items(payload, ec_level=args.ec, mask=args.mask or 0,
                                         size=args.size)
        else:
            items = bench.aesthetic_items(_load_images(args), _config(args, payload=payload))
        kind = bench.SWEEP_ALIASES.get(sweep, sweep)
        reps = args.reps or (bench.COVERAGE_REPS if kind == "coverage" else 1)
        if kind == "coverage" and grid is not None:
            grid = tuple(int(g) for g in grid)
        spec = bench.PerturbationSpec(kind, grid or (), seed=args.seed, reps=reps)
        result = bench.run_sweep(items, spec, n_jobs=args.jobs)
    if args.csv:
        result.write_csv(args.csv)
    if args.svg:
        result.plot_svg(args.svg, title=sweep)
    rates = result.success_rates()
    _emit(args, {"sweep": sweep, "rows": len(result.rows),
                 "success_rate": {bench._fmt(k): v for k, v in rates.items()}},
          "\n".join(f"{bench._fmt(k):>8} {v:.3f}" for k, v in rates.items()))
    return EXIT_OK


COMMANDS = {"encode": cmd_encode, "beautify": cmd_beautify, "stylize": cmd_stylize,
            "scan": cmd_scan, "bench": cmd_bench, "eta-sweep": cmd_bench}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(parser, args, argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"aesthqr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QRError as exc:
        print(f"aesthqr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ValueError, TypeError) as exc:
        print(f"aesthqr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
