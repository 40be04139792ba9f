"""QR symbol construction and parsing (versions 1-10, byte mode).

Module convention: ``dark[r, c] is True`` for a dark module.  Every module
also carries a role tag so later stages know which cells they may touch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .exceptions import (
    CapacityExceeded,
    DecodeError,
    FormatInfoUnreadable,
    VersionUnsupported,
)
from .galois import rs_decode, rs_encode

MAX_VERSION = 10
EC_LEVELS = ("L", "M", "Q", "H")
QUIET_ZONE = 4

# role tags
FUNCTION = 0
MESSAGE = 1
PADDING = 2
ECC = 3
REMAINDER = 4

# (ecc codewords per block, [(block count, data codewords per block), ...])
_EC_TABLE = {
    1: {"L": (7, [(1, 19)]), "M": (10, [(1, 16)]), "Q": (13, [(1, 13)]), "H": (17, [(1, 9)])},
    2: {"L": (10, [(1, 34)]), "M": (16, [(1, 28)]), "Q": (22, [(1, 22)]), "H": (28, [(1, 16)])},
    3: {"L": (15, [(1, 55)]), "M": (26, [(1, 44)]), "Q": (18, [(2, 17)]), "H": (22, [(2, 13)])},
    4: {"L": (20, [(1, 80)]), "M": (18, [(2, 32)]), "Q": (26, [(2, 24)]), "H": (16, [(4, 9)])},
    5: {"L": (26, [(1, 108)]), "M": (24, [(2, 43)]), "Q": (18, [(2, 15), (2, 16)]),
        "H": (22, [(2, 11), (2, 12)])},
    6: {"L": (18, [(2, 68)]), "M": (16, [(4, 27)]), "Q": (24, [(4, 19)]), "H": (28, [(4, 15)])},
    7: {"L": (20, [(2, 78)]), "M": (18, [(4, 31)]), "Q": (18, [(2, 14), (4, 15)]),
        "H": (26, [(4, 13), (1, 14)])},
    8: {"L": (24, [(2, 97)]), "M": (22, [(2, 38), (2, 39)]), "Q": (22, [(4, 18), (2, 19)]),
        "H": (26, [(4, 14), (2, 15)])},
    9: {"L": (30, [(2, 116)]), "M": (22, [(3, 36), (2, 37)]), "Q": (20, [(4, 16), (4, 17)]),
        "H": (24, [(4, 12), (4, 13)])},
    10: {"L": (18, [(2, 68), (2, 69)]), "M": (26, [(4, 43), (1, 44)]),
         "Q": (24, [(6, 19), (2, 20)]), "H": (28, [(6, 15), (2, 16)])},
}

_ALIGNMENT = {
    1: (), 2: (6, 18), 3: (6, 22), 4: (6, 26), 5: (6, 30), 6: (6, 34),
    7: (6, 22, 38), 8: (6, 24, 42), 9: (6, 26, 46), 10: (6, 28, 50),
}

_EC_FORMAT_BITS = {"L": 1, "M": 0, "Q": 3, "H": 2}
_FORMAT_MASK = 0x5412


@dataclass(frozen=True)
class QrSpec:
    version: int = 1
    ec_level: str = "M"
    mask: int = 0

    def __post_init__(self):
        if not 1 <= self.version <= MAX_VERSION:
            raise VersionUnsupported(f"version {self.version} outside 1..{MAX_VERSION}")
        if self.ec_level not in EC_LEVELS:
            raise ValueError(f"unknown EC level {self.ec_level!r}")
        if not 0 <= self.mask <= 7:
            raise ValueError(f"mask {self.mask} outside 0..7")

    @property
    def side(self) -> int:
        return side_length(self.version)


@dataclass
class ModuleMatrix:
    """An ``l x l`` symbol plus per-module role tags."""

    dark: np.ndarray
    role: np.ndarray
    spec: QrSpec
    message_codewords: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def side(self) -> int:
        return self.dark.shape[0]

    def copy(self) -> "ModuleMatrix":
        return ModuleMatrix(self.dark.copy(), self.role.copy(), self.spec,
                            self.message_codewords, dict(self.meta))

    def xor(self, flips: np.ndarray) -> "ModuleMatrix":
        out = self.copy()
        out.dark ^= flips.astype(bool)
        return out

    @property
    def light(self) -> np.ndarray:
        """Bright-module bits (1 = light), the convention used by thresholding."""
        return ~self.dark


class DecodeResult(NamedTuple):
    payload: bytes
    corrections: int
    version: int
    ec_level: str
    mask: int


def side_length(version: int) -> int:
    return 4 * version + 17


def block_layout(version: int, ec_level: str) -> list[tuple[int, int]]:
    """Per-block ``(data codewords, ecc codewords)`` in stream order."""
    c, groups = _EC_TABLE[version][ec_level]
    return [(d, c) for count, d in groups for _ in range(count)]


def data_capacity(version: int, ec_level: str) -> int:
    return sum(d for d, _ in block_layout(version, ec_level))


def _count_bits(version: int) -> int:
    return 8 if version <= 9 else 16


def byte_capacity(version: int, ec_level: str) -> int:
    bits = data_capacity(version, ec_level) * 8 - 4 - _count_bits(version)
    return bits // 8


def min_version(nbytes: int, ec_level: str) -> int:
    for v in range(1, MAX_VERSION + 1):
        if nbytes <= byte_capacity(v, ec_level):
            return v
    raise CapacityExceeded(
        f"{nbytes} bytes do not fit any version 1..{MAX_VERSION} at level {ec_level}")


# ---------------------------------------------------------------- geometry


@lru_cache(maxsize=None)
def function_mask(version: int) -> np.ndarray:
    """Boolean map of function-pattern cells (finders, separators, timing,
    alignment, format/version info, dark module)."""
    n = side_length(version)
    f = np.zeros((n, n), dtype=bool)
    for r, c in ((0, 0), (0, n - 7), (n - 7, 0)):
        f[max(r - 1, 0):r + 8, max(c - 1, 0):c + 8] = True
    f[6, :] = True
    f[:, 6] = True
    pos = _ALIGNMENT[version]
    for r in pos:
        for c in pos:
            if (r, c) in ((6, 6), (6, pos[-1]), (pos[-1], 6)):
                continue
            f[r - 2:r + 3, c - 2:c + 3] = True
    f[8, :9] = True
    f[:9, 8] = True
    f[8, n - 8:] = True
    f[n - 8:, 8] = True
    if version >= 7:
        f[:6, n - 11:n - 8] = True
        f[n - 11:n - 8, :6] = True
    f.setflags(write=False)
    return f


@lru_cache(maxsize=None)
def placement_order(version: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows/cols of every non-function module in zig-zag placement order."""
    n = side_length(version)
    fm = function_mask(version)
    rows, cols = [], []
    right = n - 1
    while right >= 1:
        if right == 6:
            right = 5
        upward = ((right + 1) & 2) == 0
        for vert in range(n):
            y = n - 1 - vert if upward else vert
            for j in range(2):
                x = right - j
                if not fm[y, x]:
                    rows.append(y)
                    cols.append(x)
        right -= 2
    r = np.array(rows, dtype=np.intp)
    c = np.array(cols, dtype=np.intp)
    r.setflags(write=False)
    c.setflags(write=False)
    return r, c


@lru_cache(maxsize=None)
def interleave_index(version: int, ec_level: str) -> list[np.ndarray]:
    """For each block, the stream position of each of its codewords."""
    layout = block_layout(version, ec_level)
    nblocks = len(layout)
    pos = [np.zeros(d + c, dtype=np.intp) for d, c in layout]
    k = 0
    for i in range(max(d for d, _ in layout)):
        for b, (d, _) in enumerate(layout):
            if i < d:
                pos[b][i] = k
                k += 1
    c = layout[0][1]
    for i in range(c):
        for b, (d, _) in enumerate(layout):
            pos[b][d + i] = k
            k += 1
    assert nblocks == len(pos)
    return pos


@lru_cache(maxsize=None)
def block_bit_modules(version: int, ec_level: str) -> list[tuple[np.ndarray, np.ndarray]]:
    """For each block, (rows, cols) of the module holding each codeword bit,
    MSB first, in block-local order ``data || ecc``."""
    rows, cols = placement_order(version)
    out = []
    for idx in interleave_index(version, ec_level):
        bit = (idx[:, None] * 8 + np.arange(8)[None, :]).ravel()
        out.append((rows[bit], cols[bit]))
    return out


def mask_pattern(mask: int, n: int) -> np.ndarray:
    i, j = np.indices((n, n))
    if mask == 0:
        m = (i + j) % 2 == 0
    elif mask == 1:
        m = i % 2 == 0
    elif mask == 2:
        m = j % 3 == 0
    elif mask == 3:
        m = (i + j) % 3 == 0
    elif mask == 4:
        m = (i // 2 + j // 3) % 2 == 0
    elif mask == 5:
        m = (i * j) % 2 + (i * j) % 3 == 0
    elif mask == 6:
        m = ((i * j) % 2 + (i * j) % 3) % 2 == 0
    elif mask == 7:
        m = ((i + j) % 2 + (i * j) % 3) % 2 == 0
    else:
        raise ValueError(f"mask {mask} outside 0..7")
    return m


def apply_mask(dark: np.ndarray, mask: int, version: int) -> np.ndarray:
    """XOR the mask over the data region; an involution."""
    n = dark.shape[0]
    return dark ^ (mask_pattern(mask, n) & ~function_mask(version))


def _bch_remainder(value: int, poly: int, degree: int) -> int:
    value <<= degree
    top = poly.bit_length() - 1
    for shift in range(value.bit_length() - 1, top - 1, -1):
        if value >> shift & 1:
            value ^= poly << (shift - top)
    return value


def format_bits(ec_level: str, mask: int) -> int:
    data = _EC_FORMAT_BITS[ec_level] << 3 | mask
    return ((data << 10) | _bch_remainder(data, 0x537, 10)) ^ _FORMAT_MASK


def version_bits(version: int) -> int:
    return (version << 12) | _bch_remainder(version, 0x1F25, 12)


def _format_coords(n: int) -> tuple[list, list]:
    first = [(i, 8) for i in range(6)] + [(7, 8), (8, 8), (8, 7)]
    first += [(8, 14 - i) for i in range(9, 15)]
    second = [(8, n - 1 - i) for i in range(8)]
    second += [(n - 15 + i, 8) for i in range(8, 15)]
    return first, second


def _draw_function_patterns(dark: np.ndarray, spec: QrSpec) -> None:
    n = dark.shape[0]
    dark[6, :] = np.arange(n) % 2 == 0
    dark[:, 6] = np.arange(n) % 2 == 0
    for r, c in ((0, 0), (0, n - 7), (n - 7, 0)):
        for dr in range(-1, 8):
            for dc in range(-1, 8):
                rr, cc = r + dr, c + dc
                if 0 <= rr < n and 0 <= cc < n:
                    d = max(abs(dr - 3), abs(dc - 3))
                    dark[rr, cc] = d != 2 and d != 4
    pos = _ALIGNMENT[spec.version]
    for r in pos:
        for c in pos:
            if (r, c) in ((6, 6), (6, pos[-1]), (pos[-1], 6)):
                continue
            for dr in range(-2, 3):
                for dc in range(-2, 3):
                    dark[r + dr, c + dc] = max(abs(dr), abs(dc)) != 1
    bits = format_bits(spec.ec_level, spec.mask)
    first, second = _format_coords(n)
    for i, (r, c) in enumerate(first):
        dark[r, c] = bool(bits >> i & 1)
    for i, (r, c) in enumerate(second):
        dark[r, c] = bool(bits >> i & 1)
    dark[n - 8, 8] = True
    if spec.version >= 7:
        vb = version_bits(spec.version)
        for i in range(18):
            bit = bool(vb >> i & 1)
            a, b = n - 11 + i % 3, i // 3
            dark[b, a] = bit
            dark[a, b] = bit


# ---------------------------------------------------------------- encoding


def _to_bytes(payload) -> bytes:
    if isinstance(payload, str):
        return payload.encode("utf-8")
    return bytes(payload)


def encode_bitstream(payload, version: int, ec_level: str) -> tuple[bytes, int]:
    """Data codewords (before RS) and the count of message codewords.

    Message codewords hold mode, count, payload, terminator and bit padding;
    the rest are 0xEC/0x11 pad codewords.
    """
    data = _to_bytes(payload)
    cap = data_capacity(version, ec_level)
    if len(data) > byte_capacity(version, ec_level):
        raise CapacityExceeded(
            f"{len(data)} bytes exceed v{version}-{ec_level} capacity "
            f"{byte_capacity(version, ec_level)}")
    bits = [0, 1, 0, 0]
    cb = _count_bits(version)
    bits += [(len(data) >> (cb - 1 - i)) & 1 for i in range(cb)]
    for byte in data:
        bits += [(byte >> (7 - i)) & 1 for i in range(8)]
    bits += [0] * min(4, cap * 8 - len(bits))
    bits += [0] * (-len(bits) % 8)
    message = len(bits) // 8
    out = bytearray(int("".join(map(str, bits[i:i + 8])), 2) for i in range(0, len(bits), 8))
    pad = (0xEC, 0x11)
    i = 0
    while len(out) < cap:
        out.append(pad[i % 2])
        i += 1
    return bytes(out), message


def split_blocks(data: bytes, version: int, ec_level: str) -> list[bytes]:
    blocks, k = [], 0
    for d, _ in block_layout(version, ec_level):
        blocks.append(data[k:k + d])
        k += d
    return blocks


def codeword_roles(version: int, ec_level: str, message_codewords: int) -> list[np.ndarray]:
    """Per-block role tag of every codeword (MESSAGE / PADDING / ECC)."""
    out, k = [], 0
    for d, c in block_layout(version, ec_level):
        roles = np.full(d + c, ECC, dtype=np.int8)
        idx = np.arange(k, k + d)
        roles[:d] = np.where(idx < message_codewords, MESSAGE, PADDING)
        out.append(roles)
        k += d
    return out


def place_blocks(blocks: list[bytes], spec: QrSpec) -> np.ndarray:
    """Unmasked data-region bits (dark=True) for full RS codewords."""
    n = spec.side
    dark = np.zeros((n, n), dtype=bool)
    for (rows, cols), cw in zip(block_bit_modules(spec.version, spec.ec_level), blocks):
        bits = np.unpackbits(np.frombuffer(bytes(cw), dtype=np.uint8)).astype(bool)
        dark[rows, cols] = bits
    return dark


def encode_symbol(payload, spec: QrSpec) -> ModuleMatrix:
    data, message = encode_bitstream(payload, spec.version, spec.ec_level)
    blocks = []
    for d, (_, c) in zip(split_blocks(data, spec.version, spec.ec_level),
                         block_layout(spec.version, spec.ec_level)):
        blocks.append(rs_encode(d, c).codeword)
    dark = place_blocks(blocks, spec)
    dark = apply_mask(dark, spec.mask, spec.version)
    _draw_function_patterns(dark, spec)

    n = spec.side
    role = np.full((n, n), REMAINDER, dtype=np.int8)
    role[function_mask(spec.version)] = FUNCTION
    for (rows, cols), roles in zip(block_bit_modules(spec.version, spec.ec_level),
                                   codeword_roles(spec.version, spec.ec_level, message)):
        role[rows, cols] = np.repeat(roles, 8)
    return ModuleMatrix(dark, role, spec, message)


def controllable_map(spec: QrSpec, payload) -> np.ndarray:
    """Modules holding padding-codeword bits: freely settable before any
    basis extension."""
    _, message = encode_bitstream(payload, spec.version, spec.ec_level)
    n = spec.side
    out = np.zeros((n, n), dtype=bool)
    for (rows, cols), roles in zip(block_bit_modules(spec.version, spec.ec_level),
                                   codeword_roles(spec.version, spec.ec_level, message)):
        sel = np.repeat(roles == PADDING, 8)
        out[rows[sel], cols[sel]] = True
    return out


# ---------------------------------------------------------------- decoding


_ALL_FORMATS = [(ec, m, format_bits(ec, m)) for ec in EC_LEVELS for m in range(8)]


def read_format(dark: np.ndarray) -> tuple[str, int]:
    n = dark.shape[0]
    first, second = _format_coords(n)
    best = None
    for coords in (first, second):
        raw = sum(int(dark[r, c]) << i for i, (r, c) in enumerate(coords))
        for ec, m, fb in _ALL_FORMATS:
            dist = bin(raw ^ fb).count("1")
            if best is None or dist < best[0]:
                best = (dist, ec, m)
    if best is None or best[0] > 3:
        raise FormatInfoUnreadable("format information beyond correction")
    return best[1], best[2]


def _parse_bitstream(data: bytes, version: int) -> bytes:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    pos = 0
    out = bytearray()

    def take(k):
        nonlocal pos
        if pos + k > len(bits):
            raise DecodeError("bitstream truncated")
        v = 0
        for b in bits[pos:pos + k]:
            v = (v << 1) | int(b)
        pos += k
        return v

    while len(bits) - pos >= 4:
        mode = take(4)
        if mode == 0:
            break
        if mode != 0b0100:
            raise DecodeError(f"unsupported mode indicator {mode:04b}")
        count = take(_count_bits(version))
        for _ in range(count):
            out.append(take(8))
    return bytes(out)


def decode_matrix(grid) -> DecodeResult:
    """Decode an ``l x l`` module grid (dark=True) back to its payload."""
    dark = grid.dark if isinstance(grid, ModuleMatrix) else np.asarray(grid, dtype=bool)
    if dark.ndim != 2 or dark.shape[0] != dark.shape[1]:
        raise VersionUnsupported(f"grid of shape {dark.shape} is not square")
    n = dark.shape[0]
    version, rem = divmod(n - 17, 4)
    if rem or not 1 <= version <= MAX_VERSION:
        raise VersionUnsupported(f"side {n} is not a supported version")
    ec, mask = read_format(dark)
    raw = apply_mask(dark, mask, version)
    corrections = 0
    data = bytearray()
    for (rows, cols), (d, c) in zip(block_bit_modules(version, ec), block_layout(version, ec)):
        cw = np.packbits(raw[rows, cols].astype(np.uint8)).tobytes()
        block, fixed = rs_decode(cw, c)
        corrections += fixed
        data += block
    payload = _parse_bitstream(bytes(data), version)
    return DecodeResult(payload, corrections, version, ec, mask)


# ---------------------------------------------------------------- I/O


def render_matrix(dark: np.ndarray, module_px: int | None = None,
                  quiet: int = QUIET_ZONE, size: int = 512) -> np.ndarray:
    """Gray uint8 image, 0 for dark modules.

    Without ``module_px`` the module size is ``size // (l + 2*quiet)`` and the
    quiet zone absorbs the leftover so the image is exactly ``size`` pixels.
    """
    if isinstance(dark, ModuleMatrix):
        dark = dark.dark
    n = dark.shape[0]
    if module_px is None:
        module_px = max(1, size // (n + 2 * quiet))
        total = max(size, (n + 2 * quiet) * module_px)
    else:
        total = (n + 2 * quiet) * module_px
    code = np.where(np.kron(dark, np.ones((module_px, module_px), dtype=bool)), 0, 255)
    img = np.full((total, total), 255, dtype=np.uint8)
    off = (total - n * module_px) // 2
    img[off:off + n * module_px, off:off + n * module_px] = code
    return img


def matrix_from_render(img: np.ndarray) -> np.ndarray:
    """Recover the module grid from an axis-aligned render (inverse of
    :func:`render_matrix`)."""
    img = np.asarray(img)
    if img.ndim == 3:
        img = img[..., :3].mean(axis=2)
    dark = img < 128
    ys, xs = np.nonzero(dark)
    if ys.size == 0:
        raise DecodeError("no dark modules in image")
    top, left = ys.min(), xs.min()
    width = xs.max() - left + 1
    row = dark[top, left:]
    run = int(np.argmin(row)) if not row.all() else row.size
    module = run / 7.0
    n = int(round(width / module))
    centers = top + (np.arange(n) + 0.5) * module, left + (np.arange(n) + 0.5) * module
    r = np.clip(centers[0].astype(int), 0, img.shape[0] - 1)
    c = np.clip(centers[1].astype(int), 0, img.shape[1] - 1)
    return dark[np.ix_(r, c)]


def to_pbm(dark: np.ndarray) -> str:
    """Plain PBM (P1) text with one pixel per module, 1 = dark."""
    if isinstance(dark, ModuleMatrix):
        dark = dark.dark
    n = dark.shape[0]
    rows = [" ".join("1" if v else "0" for v in row) for row in dark]
    return f"P1\n{n} {n}\n" + "\n".join(rows) + "\n"


def from_pbm(text: str) -> np.ndarray:
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens += line.split()
    if not tokens or tokens[0] != "P1":
        raise ValueError("not a plain PBM (P1) document")
    w, h = int(tokens[1]), int(tokens[2])
    body = "".join(tokens[3:])
    if len(body) != w * h:
        raise ValueError("PBM body length mismatch")
    return (np.frombuffer(body.encode(), dtype=np.uint8) == ord("1")).reshape(h, w)
