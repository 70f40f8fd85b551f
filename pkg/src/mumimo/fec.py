"""Rate-1/2 tail-biting convolutional code with soft-decision Viterbi decoding.

This is the substitute coding chain for block-error-rate trend experiments:
the standard-cell turbo code the reference link uses is out of scope, so a
K=7 (133,171 octal) convolutional code stands in.  Receiver ordering and
SNR-gap trends survive the substitution; absolute BLER numbers do not, and
outputs that involve this chain say so in their metadata.

LLR convention matches the demappers: positive favors bit 1.  Decoding uses
the wrap-around Viterbi approach for tail-biting codes: the circular LLR
sequence is extended by ``WRAP_STEPS`` trellis steps on both sides, decoded
once from uniform state metrics, and the middle section is kept.  The
extension is dozens of constraint lengths, far beyond the path-merge depth,
so the result is maximum-likelihood for all practical purposes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WRAP_STEPS = 512


@dataclass(frozen=True)
class CodeConfig:
    """Code parameters; the defaults are the only supported polynomial set."""

    constraint_length: int = 7
    generators: tuple[int, int] = (0o133, 0o171)
    rate_num: int = 1
    rate_den: int = 2
    block_bits: int = 6144

    def __post_init__(self):
        if self.constraint_length != 7 or self.generators != (0o133, 0o171):
            raise ValueError("only the K=7 (133,171) code is implemented")
        if self.block_bits < self.constraint_length:
            raise ValueError("block_bits must be at least the constraint length")

    @property
    def coded_bits(self) -> int:
        return 2 * self.block_bits


def _tap_offsets(generator: int, constraint_length: int) -> np.ndarray:
    """Delay offsets with a set tap, reading the polynomial MSB-first."""
    bits = [(generator >> (constraint_length - 1 - i)) & 1
            for i in range(constraint_length)]
    return np.flatnonzero(bits)


def encode(bits: np.ndarray, config: CodeConfig = CodeConfig()) -> np.ndarray:
    """Tail-biting encode; accepts (block_bits,) or (batch, block_bits).

    The shift register starts loaded with the block's final bits, so the
    output is a circular convolution and no termination tail is emitted.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] != config.block_bits:
        raise ValueError(f"expected {config.block_bits} bits per block, "
                         f"got {bits.shape[-1]}")
    b = bits.astype(np.uint8)
    coded = np.empty(bits.shape[:-1] + (config.coded_bits,), dtype=np.uint8)
    for which, gen in enumerate(config.generators):
        acc = np.zeros_like(b)
        for off in _tap_offsets(gen, config.constraint_length):
            acc ^= np.roll(b, off, axis=-1)
        coded[..., which::2] = acc
    return coded


def _parity(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> 4)
    x = x ^ (x >> 2)
    x = x ^ (x >> 1)
    return x & 1


def _trellis(config: CodeConfig):
    """Predecessor-pair layout and branch code indices for the 64-state trellis.

    State packs the previous six bits, most recent in the MSB.  The two
    predecessors of any next-state share its low five bits, which lets the
    metric update read them as a plain reshape instead of a gather.
    """
    mem = config.constraint_length - 1
    n_states = 1 << mem
    g0, g1 = config.generators
    ns = np.arange(n_states)
    u = ns >> (mem - 1)                              # input bit that leads to ns
    pred = ((ns[:, None] & (n_states // 2 - 1)) << 1) | np.arange(2)[None, :]
    reg = (u[:, None] << mem) | pred                 # 7-bit register contents
    code_idx = 2 * _parity(reg & g0) + _parity(reg & g1)
    return n_states, code_idx.astype(np.intp)


def decode(llrs: np.ndarray, config: CodeConfig = CodeConfig()) -> np.ndarray:
    """Soft Viterbi decode of tail-biting blocks; positive LLR favors bit 1.

    Accepts (coded_bits,) or (batch, coded_bits); returns decoded info bits
    with the matching leading shape.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    squeeze = llrs.ndim == 1
    if squeeze:
        llrs = llrs[None, :]
    if llrs.shape[-1] != config.coded_bits:
        raise ValueError(f"expected {config.coded_bits} LLRs per block, "
                         f"got {llrs.shape[-1]}")

    n = config.block_bits
    batch = llrs.shape[0]
    pairs = llrs.reshape(batch, n, 2)
    wrap = min(WRAP_STEPS, n)
    ext = np.concatenate([pairs[:, n - wrap:], pairs, pairs[:, :wrap]], axis=1)
    steps = ext.shape[1]

    n_states, code_idx = _trellis(config)
    half = n_states // 2
    ci = code_idx.reshape(2, half, 2)               # split by input bit u

    # branch metric per step for code index 2*c0+c1: [0, l1, l0, l0+l1]
    zeros = np.zeros(batch)
    metrics = np.zeros((batch, n_states))
    decisions = np.empty((steps, batch, n_states // 8), dtype=np.uint8)
    for t in range(steps):
        l0 = ext[:, t, 0]
        l1 = ext[:, t, 1]
        bm4 = np.stack([zeros, l1, l0, l0 + l1], axis=1)
        prev_pairs = metrics.reshape(batch, half, 2)
        cand0 = prev_pairs + bm4[:, ci[0]]
        cand1 = prev_pairs + bm4[:, ci[1]]
        dec0 = cand0[..., 1] > cand0[..., 0]
        dec1 = cand1[..., 1] > cand1[..., 0]
        metrics = np.concatenate(
            [np.where(dec0, cand0[..., 1], cand0[..., 0]),
             np.where(dec1, cand1[..., 1], cand1[..., 0])], axis=1)
        decisions[t] = np.packbits(
            np.concatenate([dec0, dec1], axis=1), axis=1)

    state = metrics.argmax(axis=1)
    rows = np.arange(batch)
    out = np.empty((batch, steps), dtype=np.uint8)
    for t in range(steps - 1, -1, -1):
        out[:, t] = (state >> 5).astype(np.uint8)
        byte = decisions[t, rows, state >> 3]
        bit = (byte >> (7 - (state & 7))) & 1
        state = ((state & (half - 1)) << 1) | bit

    decoded = out[:, wrap:wrap + n]
    return decoded[0] if squeeze else decoded
