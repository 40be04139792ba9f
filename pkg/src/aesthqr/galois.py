"""GF(256) arithmetic and the Reed-Solomon code used by QR symbols.

Field elements are plain ints in ``[0, 255]`` reduced by ``x^8+x^4+x^3+x^2+1``
(0x11D).  Polynomials are lists of coefficients, highest degree first, which
is also the order codewords appear in a QR block.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .exceptions import UncorrectableBlock

PRIMITIVE = 0x11D

EXP = [0] * 512
LOG = [0] * 256


def _build_tables() -> None:
    x = 1
    for i in range(255):
        EXP[i] = x
        LOG[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE
    for i in range(255, 512):
        EXP[i] = EXP[i - 255]


_build_tables()


def gf_add(a: int, b: int) -> int:
    return a ^ b


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return EXP[(LOG[a] - LOG[b]) % 255]


def gf_pow(a: int, n: int) -> int:
    if a == 0:
        return 0 if n else 1
    return EXP[(LOG[a] * n) % 255]


def gf_inverse(a: int) -> int:
    return gf_div(1, a)


def poly_mul(p: Sequence[int], q: Sequence[int]) -> list[int]:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] ^= gf_mul(a, b)
    return out


def poly_eval(p: Sequence[int], x: int) -> int:
    y = 0
    for c in p:
        y = gf_mul(y, x) ^ c
    return y


@lru_cache(maxsize=None)
def generator_poly(c: int) -> tuple[int, ...]:
    """Monic generator ``prod_{i<c} (x - alpha^i)``."""
    g = [1]
    for i in range(c):
        g = poly_mul(g, [1, EXP[i]])
    return tuple(g)


@dataclass(frozen=True)
class RsBlock:
    """One systematic RS codeword: ``data`` followed by ``ecc``."""

    data: bytes
    ecc: bytes

    @property
    def codeword(self) -> bytes:
        return self.data + self.ecc

    def __len__(self) -> int:
        return len(self.data) + len(self.ecc)


def rs_remainder(data: Sequence[int], c: int) -> bytes:
    """ECC bytes: remainder of ``data * x^c`` divided by the generator."""
    gen = generator_poly(c)
    rem = [0] * c
    for byte in data:
        factor = byte ^ rem[0]
        rem = rem[1:] + [0]
        if factor:
            lf = LOG[factor]
            for i in range(c):
                g = gen[i + 1]
                if g:
                    rem[i] ^= EXP[lf + LOG[g]]
    return bytes(rem)


def rs_encode(data: Sequence[int], c: int) -> RsBlock:
    if c < 0 or len(data) + c > 255:
        raise ValueError(f"block of {len(data)}+{c} codewords exceeds 255")
    data = bytes(data)
    return RsBlock(data, rs_remainder(data, c) if c else b"")


def syndromes(codeword: Sequence[int], c: int) -> list[int]:
    return [poly_eval(codeword, EXP[j]) for j in range(c)]


def _berlekamp_massey(synd: list[int]) -> list[int]:
    # error locator, lowest degree first
    sigma = [1]
    prev = [1]
    L = 0
    m = 1
    b = 1
    for n, s in enumerate(synd):
        d = s
        for i in range(1, L + 1):
            if i < len(sigma):
                d ^= gf_mul(sigma[i], synd[n - i])
        if d == 0:
            m += 1
            continue
        coef = gf_div(d, b)
        shifted = [0] * m + [gf_mul(coef, p) for p in prev]
        new = [
            (sigma[i] if i < len(sigma) else 0) ^ (shifted[i] if i < len(shifted) else 0)
            for i in range(max(len(sigma), len(shifted)))
        ]
        if 2 * L <= n:
            prev = sigma
            L = n + 1 - L
            b = d
            m = 1
        else:
            m += 1
        sigma = new
    while len(sigma) > 1 and sigma[-1] == 0:
        sigma.pop()
    return sigma


def rs_decode(codeword: Sequence[int] | RsBlock, c: int | None = None) -> tuple[bytes, int]:
    """Correct up to ``c // 2`` byte errors.

    Returns the data part and the number of corrected bytes.  Raises
    :class:`UncorrectableBlock` if the locator is inconsistent or the
    corrected word still fails the syndrome check.
    """
    if isinstance(codeword, RsBlock):
        c = len(codeword.ecc)
        codeword = codeword.codeword
    if c is None:
        raise TypeError("ecc length required for raw codewords")
    word = list(codeword)
    n = len(word)
    k = n - c
    synd = syndromes(word, c)
    if not any(synd):
        return bytes(word[:k]), 0

    sigma = _berlekamp_massey(synd)
    nerr = len(sigma) - 1
    if nerr == 0 or 2 * nerr > c:
        raise UncorrectableBlock(f"{nerr} errors exceed capacity {c // 2}")

    # Chien search over the n valid positions; position i (from the left)
    # has locator X = alpha^(n-1-i).
    positions = []
    for i in range(n):
        xinv = EXP[(255 - (n - 1 - i)) % 255]
        acc = 0
        for coef in reversed(sigma):
            acc = gf_mul(acc, xinv) ^ coef
        if acc == 0:
            positions.append(i)
    if len(positions) != nerr:
        raise UncorrectableBlock("error locator roots do not match degree")

    # Forney, first consecutive root alpha^0
    omega = [0] * c
    for i, s in enumerate(synd):
        for j, sg in enumerate(sigma):
            if i + j < c:
                omega[i + j] ^= gf_mul(s, sg)
    deriv = [sigma[i] if i % 2 == 1 else 0 for i in range(1, len(sigma))]
    for pos in positions:
        power = n - 1 - pos
        x = EXP[power]
        xinv = EXP[(255 - power) % 255]
        num = 0
        for coef in reversed(omega):
            num = gf_mul(num, xinv) ^ coef
        den = 0
        for coef in reversed(deriv):
            den = gf_mul(den, xinv) ^ coef
        if den == 0:
            raise UncorrectableBlock("zero derivative in Forney step")
        word[pos] ^= gf_mul(x, gf_div(num, den))

    if any(syndromes(word, c)):
        raise UncorrectableBlock("correction failed syndrome recheck")
    return bytes(word[:k]), nerr
