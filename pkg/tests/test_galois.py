import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aesthqr.exceptions import UncorrectableBlock
from aesthqr.galois import (
    RsBlock,
    gf_div,
    gf_inverse,
    gf_mul,
    gf_pow,
    generator_poly,
    rs_decode,
    rs_encode,
    syndromes,
)
from conftest import long_mul


def test_mul_examples():
    assert gf_mul(0, 77) == 0
    assert gf_mul(77, 0) == 0
    assert gf_mul(1, 200) == 200
    assert gf_mul(2, 128) == 29


def test_mul_table_matches_long_multiplication():
    for a in range(256):
        for b in range(0, 256, 7):
            assert gf_mul(a, b) == long_mul(a, b)


def test_every_nonzero_element_invertible():
    for a in range(1, 256):
        assert gf_mul(a, gf_inverse(a)) == 1
        assert gf_div(a, a) == 1


def test_div_by_zero():
    with pytest.raises(ZeroDivisionError):
        gf_div(5, 0)


def test_pow_cycle():
    assert gf_pow(2, 255) == 1
    assert gf_pow(2, 8) == 0x1D


def _naive_remainder(data, c):
    # long division of data * x^c by prod (x - 2^i) using only long_mul
    gen = [1]
    for i in range(c):
        root = 1
        for _ in range(i):
            root = long_mul(root, 2)
        nxt = [0] * (len(gen) + 1)
        for j, g in enumerate(gen):
            nxt[j] ^= g
            nxt[j + 1] ^= long_mul(g, root)
        gen = nxt
    work = list(data) + [0] * c
    for i in range(len(data)):
        coef = work[i]
        if coef:
            for j, g in enumerate(gen):
                work[i + j] ^= long_mul(g, coef)
    return bytes(work[-c:])


def test_generator_degree():
    for c in (7, 10, 30):
        g = generator_poly(c)
        assert len(g) == c + 1 and g[0] == 1


def test_three_byte_message_against_division_oracle():
    data = bytes([0x40, 0xD2, 0x75])
    block = rs_encode(data, 4)
    assert block.ecc == _naive_remainder(data, 4)
    assert syndromes(block.codeword, 4) == [0, 0, 0, 0]


@pytest.mark.parametrize("seed", range(5))
def test_encode_matches_division_oracle_random(seed):
    rng = np.random.default_rng(seed)
    data = rng.integers(0, 256, int(rng.integers(1, 40))).tolist()
    c = int(rng.integers(2, 31))
    assert rs_encode(data, c).ecc == _naive_remainder(data, c)


def test_zero_data_zero_ecc():
    assert rs_encode(bytes(19), 7).ecc == bytes(7)


def test_length_bound():
    with pytest.raises(ValueError):
        rs_encode(bytes(250), 10)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 60).flatmap(lambda n: st.tuples(st.binary(min_size=n, max_size=n),
                                                      st.binary(min_size=n, max_size=n))),
       st.integers(2, 30))
def test_linearity_and_systematic(pair, c):
    a, b = pair
    ea, eb = rs_encode(a, c), rs_encode(b, c)
    x = bytes(p ^ q for p, q in zip(a, b))
    ex = rs_encode(x, c)
    assert ex.codeword == bytes(p ^ q for p, q in zip(ea.codeword, eb.codeword))
    assert ea.data == a


def test_clean_decode():
    block = rs_encode(b"hello world", 10)
    assert rs_decode(block) == (b"hello world", 0)


def test_raw_codeword_needs_c():
    with pytest.raises(TypeError):
        rs_decode(rs_encode(b"x", 4).codeword)


@settings(max_examples=150, deadline=None)
@given(st.binary(min_size=1, max_size=80), st.integers(2, 30), st.randoms(use_true_random=False))
def test_corrects_up_to_half_c(data, c, rnd):
    block = rs_encode(data, c)
    word = bytearray(block.codeword)
    t = c // 2
    for pos in rnd.sample(range(len(word)), min(t, len(word))):
        word[pos] ^= rnd.randrange(1, 256)
    decoded, nerr = rs_decode(word, c)
    assert decoded == data
    assert nerr == min(t, len(word))


def test_one_past_capacity_exhaustive_small():
    # c = 2 corrects one error; every two-error pattern must be refused or
    # land on a different codeword within one symbol of the received word
    data = bytes([17, 99, 4])
    block = rs_encode(data, 2)
    for i, j in itertools.combinations(range(5), 2):
        for ei, ej in ((1, 1), (0x80, 3), (255, 254)):
            word = bytearray(block.codeword)
            word[i] ^= ei
            word[j] ^= ej
            try:
                decoded, nerr = rs_decode(bytes(word), 2)
            except UncorrectableBlock:
                continue
            assert decoded != data
            again = rs_encode(decoded, 2).codeword
            assert sum(p != q for p, q in zip(again, word)) <= 1


def test_block_dataclass():
    b = RsBlock(b"ab", b"cd")
    assert b.codeword == b"abcd" and len(b) == 4
