"""Binary aesthetic stage: XOR operators over RS codewords.

Every operator is a valid RS codeword (bit vector over one block) whose
message bits are zero, so XORing any combination of operators into the base
symbol leaves the payload intact.  Set A has one operator per padding bit;
set B is its Gauss-Jordan reduction with pivots chosen by module priority.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NoPaddingAvailable
from .galois import rs_remainder
from .qr_symbol import (
    PADDING,
    ModuleMatrix,
    QrSpec,
    block_bit_modules,
    block_layout,
    codeword_roles,
    encode_bitstream,
)


@dataclass
class BlockOperators:
    block: int
    bits: np.ndarray  # (k, nbits) bool, block-local bit order
    pivots: np.ndarray  # (k,) block-local bit index each operator controls
    rows: np.ndarray  # module row of each block bit
    cols: np.ndarray


@dataclass
class OperatorBasis:
    kind: str
    blocks: list[BlockOperators]
    side: int

    def __len__(self) -> int:
        return sum(len(b.pivots) for b in self.blocks)

    def per_block_counts(self) -> list[int]:
        return [len(b.pivots) for b in self.blocks]

    def iter_operators(self):
        """Yield ``(block, bits, pivot)`` for every operator."""
        for blk in self.blocks:
            for bits, piv in zip(blk.bits, blk.pivots):
                yield blk, bits, int(piv)

    def module_mask(self, index: int) -> np.ndarray:
        """The ``l x l`` flip pattern of the ``index``-th operator."""
        for i, (blk, bits, _) in enumerate(self.iter_operators()):
            if i == index:
                out = np.zeros((self.side, self.side), dtype=bool)
                out[blk.rows[bits], blk.cols[bits]] = True
                return out
        raise IndexError(index)

    def pivot_modules(self) -> list[tuple[int, int]]:
        return [(int(blk.rows[p]), int(blk.cols[p])) for blk, _, p in self.iter_operators()]

    def combination_mask(self, selection) -> np.ndarray:
        """Flip pattern of the XOR of the selected operators (by flat index)."""
        out = np.zeros((self.side, self.side), dtype=bool)
        chosen = set(int(i) for i in selection)
        for i, (blk, bits, _) in enumerate(self.iter_operators()):
            if i in chosen:
                out[blk.rows[bits], blk.cols[bits]] ^= True
        return out


def _bits_of(codeword: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(codeword, dtype=np.uint8)).astype(bool)


def build_operator_set_a(spec: QrSpec, payload) -> OperatorBasis:
    _, message = encode_bitstream(payload, spec.version, spec.ec_level)
    layout = block_layout(spec.version, spec.ec_level)
    roles = codeword_roles(spec.version, spec.ec_level, message)
    modules = block_bit_modules(spec.version, spec.ec_level)
    blocks = []
    for b, ((d, c), role, (rows, cols)) in enumerate(zip(layout, roles, modules)):
        pad_bits = np.flatnonzero(np.repeat(role[:d] == PADDING, 8))
        ops = np.zeros((len(pad_bits), (d + c) * 8), dtype=bool)
        for i, bit in enumerate(pad_bits):
            data = bytearray(d)
            data[bit // 8] = 0x80 >> (bit % 8)
            ops[i] = _bits_of(bytes(data) + rs_remainder(data, c))
        blocks.append(BlockOperators(b, ops, pad_bits.astype(np.intp), rows, cols))
    if not any(len(b.pivots) for b in blocks):
        raise NoPaddingAvailable("payload leaves no padding codewords in any block")
    return OperatorBasis("A", blocks, spec.side)


def _gauss_jordan(ops: np.ndarray, order: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows = ops.copy()
    k = rows.shape[0]
    pivots = np.full(k, -1, dtype=np.intp)
    done = 0
    for col in order:
        if done == k:
            break
        cand = np.flatnonzero(rows[done:, col])
        if cand.size == 0:
            continue
        r = done + cand[0]
        if r != done:
            rows[[done, r]] = rows[[r, done]]
        hit = rows[:, col].copy()
        hit[done] = False
        rows[hit] ^= rows[done]
        pivots[done] = col
        done += 1
    if done < k:
        raise ArithmeticError("operator set is rank deficient")
    return rows, pivots


def eliminate_to_set_b(a: OperatorBasis, priority: np.ndarray) -> OperatorBasis:
    """Re-pivot each block's operators onto its highest-priority modules.

    Columns are visited by descending module priority (ties by block-local
    bit index); the row operations preserve the span, so every result is
    still an RS codeword with zero message bits.
    """
    priority = np.asarray(priority, dtype=float)
    blocks = []
    for blk in a.blocks:
        if len(blk.pivots) == 0:
            blocks.append(blk)
            continue
        w = priority[blk.rows, blk.cols]
        order = np.lexsort((np.arange(w.size), -w))
        bits, pivots = _gauss_jordan(blk.bits, order)
        blocks.append(BlockOperators(blk.block, bits, pivots, blk.rows, blk.cols))
    return OperatorBasis("B", blocks, a.side)


def match_target(base: ModuleMatrix, basis: OperatorBasis, target_dark: np.ndarray,
                 priority: np.ndarray | None = None) -> ModuleMatrix:
    """Flip operators so every pivot module equals ``target_dark``.

    Operators are visited by descending pivot priority; for a reduced basis
    the visiting order does not change the result, since no operator touches
    another's pivot.
    """
    target_dark = np.asarray(target_dark, dtype=bool)
    if target_dark.shape != base.dark.shape:
        raise ValueError(f"target {target_dark.shape} vs symbol {base.dark.shape}")
    entries = list(basis.iter_operators())
    if priority is not None:
        w = [priority[blk.rows[p], blk.cols[p]] for blk, _, p in entries]
        entries = [entries[i] for i in np.argsort(-np.asarray(w), kind="stable")]
    out = base.copy()
    applied = 0
    for blk, bits, p in entries:
        r, c = blk.rows[p], blk.cols[p]
        if out.dark[r, c] != target_dark[r, c]:
            out.dark[blk.rows[bits], blk.cols[bits]] ^= True
            applied += 1
    out.meta["operators_applied"] = applied
    return out


def pivot_map(basis: OperatorBasis) -> np.ndarray:
    """Boolean ``l x l`` map of the modules the basis controls."""
    out = np.zeros((basis.side, basis.side), dtype=bool)
    for r, c in basis.pivot_modules():
        out[r, c] = True
    return out
