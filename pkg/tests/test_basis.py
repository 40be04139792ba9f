import itertools

import numpy as np
import pytest

from aesthqr.basis import (
    build_operator_set_a,
    eliminate_to_set_b,
    match_target,
    pivot_map,
)
from aesthqr.exceptions import NoPaddingAvailable
from aesthqr.galois import syndromes
from aesthqr.qr_symbol import (
    FUNCTION,
    MESSAGE,
    QrSpec,
    block_layout,
    byte_capacity,
    codeword_roles,
    decode_matrix,
    encode_bitstream,
    encode_symbol,
)


def _gf2_rank(rows: np.ndarray) -> int:
    m = rows.copy().astype(bool)
    rank = 0
    for col in range(m.shape[1]):
        piv = np.flatnonzero(m[rank:, col])
        if piv.size == 0:
            continue
        r = rank + piv[0]
        m[[rank, r]] = m[[r, rank]]
        others = m[:, col].copy()
        others[rank] = False
        m[others] ^= m[rank]
        rank += 1
        if rank == m.shape[0]:
            break
    return rank


def _setup(v=3, ec="M", payload=b"basis test", mask=2):
    spec = QrSpec(v, ec, mask)
    a = build_operator_set_a(spec, payload)
    w = np.random.default_rng(v).random((spec.side, spec.side))
    return spec, a, eliminate_to_set_b(a, w), w


def test_set_a_operator_count_v1():
    payload = b"hi"
    _, message = encode_bitstream(payload, 1, "L")
    (d, _), = block_layout(1, "L")
    a = build_operator_set_a(QrSpec(1, "L", 0), payload)
    assert len(a) == 8 * (d - message)
    assert a.kind == "A"


def test_set_a_operators_are_codewords():
    _, a, _, _ = _setup()
    for blk, bits, _ in a.iter_operators():
        cw = np.packbits(bits.astype(np.uint8)).tobytes()
        c = block_layout(3, "M")[blk.block][1]
        assert not any(syndromes(cw, c))


def test_set_a_single_padding_bit():
    spec, a, _, _ = _setup()
    _, message = encode_bitstream(b"basis test", 3, "M")
    for blk, bits, piv in a.iter_operators():
        d = block_layout(3, "M")[blk.block][0]
        assert np.flatnonzero(bits[:8 * d]).tolist() == [piv]


def test_xor_involution():
    spec, a, _, _ = _setup()
    base = encode_symbol(b"basis test", spec)
    m = a.module_mask(0)
    assert np.array_equal(base.xor(m).xor(m).dark, base.dark)


def test_no_padding():
    cap = byte_capacity(1, "M")
    with pytest.raises(NoPaddingAvailable):
        build_operator_set_a(QrSpec(1, "M", 0), b"q" * cap)


def test_set_b_span_and_pivots():
    _, a, b, _ = _setup()
    assert b.kind == "B" and len(b) == len(a)
    for ba, bb in zip(a.blocks, b.blocks):
        assert len(set(bb.pivots.tolist())) == len(bb.pivots)
        # each operator is 0 at every other pivot
        sub = bb.bits[:, bb.pivots]
        assert np.array_equal(sub, np.eye(len(bb.pivots), dtype=bool))
        # same span: stacking adds no rank
        assert _gf2_rank(np.vstack([ba.bits, bb.bits])) == _gf2_rank(ba.bits) == len(ba.pivots)


def test_set_b_keeps_message_bits():
    spec, _, b, _ = _setup()
    _, message = encode_bitstream(b"basis test", 3, "M")
    for blk, bits, _ in b.iter_operators():
        role = np.repeat(codeword_roles(3, "M", message)[blk.block], 8)
        assert not bits[role == MESSAGE].any()


def test_set_b_pivots_follow_priority():
    spec, _, b, w = _setup()
    for blk in b.blocks:
        pw = np.sort(w[blk.rows[blk.pivots], blk.cols[blk.pivots]])[::-1]
        # the best pivot is the highest-priority module of the block
        assert pw[0] == pytest.approx(w[blk.rows, blk.cols].max())


def test_uniform_priority_is_valid():
    spec = QrSpec(2, "Q", 0)
    a = build_operator_set_a(spec, b"uni")
    b = eliminate_to_set_b(a, np.ones((spec.side, spec.side)))
    assert len(b) == len(a)


def test_operators_avoid_function_modules():
    spec, a, b, _ = _setup(v=7)
    base = encode_symbol(b"basis test", spec)
    fm = base.role == FUNCTION
    for basis in (a, b):
        for i in range(len(basis)):
            assert not (basis.module_mask(i) & fm).any()


def test_exhaustive_combinations_decode_v2l():
    # 31 bytes in v2-L leave one padding codeword: 8 operators, 256 combinations
    payload = bytes(range(65, 96))
    spec = QrSpec(2, "L", 6)
    a = build_operator_set_a(spec, payload)
    assert len(a) == 8
    w = np.random.default_rng(1).random((spec.side, spec.side))
    b = eliminate_to_set_b(a, w)
    base = encode_symbol(payload, spec)
    for r in range(len(b) + 1):
        for combo in itertools.combinations(range(len(b)), r):
            res = decode_matrix(base.xor(b.combination_mask(combo)))
            assert res.payload == payload and res.corrections == 0


@pytest.mark.parametrize("v", [4, 9])
def test_random_combinations_decode(v):
    spec, _, b, _ = _setup(v=v, ec="L")
    base = encode_symbol(b"basis test", spec)
    rng = np.random.default_rng(v)
    for _ in range(25):
        sel = np.flatnonzero(rng.random(len(b)) < 0.5)
        assert decode_matrix(base.xor(b.combination_mask(sel))).payload == b"basis test"


def test_match_fixed_point():
    spec, _, b, w = _setup()
    base = encode_symbol(b"basis test", spec)
    out = match_target(base, b, base.dark, w)
    assert out.meta["operators_applied"] == 0
    assert np.array_equal(out.dark, base.dark)


def test_match_complement_forces_all():
    spec, _, b, w = _setup()
    base = encode_symbol(b"basis test", spec)
    out = match_target(base, b, ~base.dark, w)
    assert out.meta["operators_applied"] == len(b)
    piv = pivot_map(b)
    assert np.array_equal(out.dark[piv], ~base.dark[piv])
    assert decode_matrix(out).payload == b"basis test"


def test_match_pivot_controllability():
    spec, _, b, w = _setup()
    base = encode_symbol(b"basis test", spec)
    rng = np.random.default_rng(3)
    target = rng.random(base.dark.shape) < 0.5
    out1 = match_target(base, b, target, w)
    piv = b.pivot_modules()
    r, c = piv[len(piv) // 2]
    t2 = target.copy()
    t2[r, c] ^= True
    out2 = match_target(base, b, t2, w)
    pm = pivot_map(b)
    diff = (out1.dark ^ out2.dark) & pm
    assert np.flatnonzero(diff).tolist() == [r * spec.side + c]


def test_match_improves_agreement():
    spec = QrSpec(4, "L", 0)
    payload = b"agree"
    base = encode_symbol(payload, spec)
    a = build_operator_set_a(spec, payload)
    free = base.role != FUNCTION
    wins = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        w = rng.random((spec.side, spec.side))
        target = rng.random(base.dark.shape) < 0.5
        out = match_target(base, eliminate_to_set_b(a, w), target, w)
        before = (base.dark == target)[free].mean()
        after = (out.dark == target)[free].mean()
        wins += after >= before
        assert decode_matrix(out).payload == payload
    assert wins == 100


def test_match_shape_check():
    spec, _, b, _ = _setup()
    base = encode_symbol(b"basis test", spec)
    with pytest.raises(ValueError):
        match_target(base, b, np.zeros((5, 5), dtype=bool))
