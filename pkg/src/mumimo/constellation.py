"""Gray-labeled QAM alphabets and the interferer hypothesis set.

All constellations are normalized to unit average symbol energy (the LTE
convention), so SNR and SIR definitions stay power-consistent when the two
users run different alphabets.  ``ABSENT`` models the no-interferer case as
the singleton {0} with an alphabet size of 1, which makes its size-penalty
term vanish in the classification metrics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class ConstellationKind(enum.Enum):
    """Supported alphabets. Values are the names used in configs and CSVs."""

    ABSENT = "off"
    QAM4 = "qam4"
    QAM16 = "qam16"
    QAM64 = "qam64"

    @property
    def size(self) -> int:
        return _KIND_SIZES[self]

    @classmethod
    def from_name(cls, name: str) -> "ConstellationKind":
        key = name.strip().lower()
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown constellation name {name!r} "
                         f"(expected one of {[k.value for k in cls]})")


_KIND_SIZES = {
    ConstellationKind.ABSENT: 1,
    ConstellationKind.QAM4: 4,
    ConstellationKind.QAM16: 16,
    ConstellationKind.QAM64: 64,
}

#: Canonical interferer hypothesis set, ascending alphabet size.  Keeping this
#: order fixed makes argmin tie-breaking deterministic (smallest wins).
HYPOTHESIS_KINDS = (
    ConstellationKind.ABSENT,
    ConstellationKind.QAM4,
    ConstellationKind.QAM16,
    ConstellationKind.QAM64,
)


@dataclass(frozen=True, eq=False)
class Constellation:
    """A Gray-labeled square QAM alphabet with unit average energy.

    Points live on the square grid ``(levels[i] + 1j*levels[q]) * level_scale``
    with ``levels = 2*arange(m) - (m-1)`` and point index ``i*m + q``; that
    layout is what :meth:`nearest_index` relies on.  Label bit ``j`` maps to
    the sign convention ``bit 1 -> +1``, ``bit 0 -> -1``.
    """

    kind: ConstellationKind
    points: np.ndarray          # (size,) complex128
    bits_per_symbol: int
    labels: np.ndarray          # (size, bits_per_symbol) uint8
    levels_per_axis: int        # m; size == m*m (1 for ABSENT)
    level_scale: float          # grid scale; 0.0 for ABSENT

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def nearest_index(self, values: np.ndarray) -> np.ndarray:
        """Indices of the closest constellation points (exact per-axis slicing).

        Works on arrays of any shape.  Exact because the grid is separable in
        I/Q: rounding each axis to the nearest level minimizes the Euclidean
        distance.
        """
        values = np.asarray(values)
        if self.kind is ConstellationKind.ABSENT:
            return np.zeros(values.shape, dtype=np.intp)
        m = self.levels_per_axis
        half = (m - 1) / 2.0
        li = np.clip(np.rint(values.real / (2.0 * self.level_scale) + half), 0, m - 1)
        lq = np.clip(np.rint(values.imag / (2.0 * self.level_scale) + half), 0, m - 1)
        return (li.astype(np.intp) * m + lq.astype(np.intp))

    def label_value_to_index(self) -> np.ndarray:
        """Lookup table mapping a label's integer value (MSB first) to the point index."""
        k = self.bits_per_symbol
        weights = 1 << np.arange(k - 1, -1, -1) if k else np.zeros(0, dtype=np.intp)
        vals = self.labels.astype(np.intp) @ weights if k else np.zeros(1, dtype=np.intp)
        lut = np.empty(max(1, 1 << k), dtype=np.intp)
        lut[vals] = np.arange(self.size)
        return lut


@dataclass(frozen=True)
class BitPartition:
    """The half of an alphabet whose label bit ``bit_index`` maps to ``sign``."""

    bit_index: int
    sign: int                   # +1 or -1
    subset: np.ndarray          # point indices


def _gray_codes(n_bits: int) -> np.ndarray:
    """Binary-reflected Gray codes for level indices 0..2**n_bits-1."""
    idx = np.arange(1 << n_bits)
    return idx ^ (idx >> 1)


@lru_cache(maxsize=None)
def build_constellation(kind: ConstellationKind) -> Constellation:
    """Construct the standard Gray-labeled unit-energy alphabet for ``kind``.

    4-QAM points are (+-1 +-1j)/sqrt(2), 16-QAM uses +-1,+-3 components over
    sqrt(10), 64-QAM uses +-1..+-7 over sqrt(42).  ``ABSENT`` is the singleton
    {0} with zero bits per symbol.  Results are cached, so repeated calls
    return the same immutable object.
    """
    if kind is ConstellationKind.ABSENT:
        return Constellation(
            kind=kind,
            points=np.zeros(1, dtype=np.complex128),
            bits_per_symbol=0,
            labels=np.zeros((1, 0), dtype=np.uint8),
            levels_per_axis=1,
            level_scale=0.0,
        )

    size = kind.size
    m = int(round(np.sqrt(size)))
    k_axis = m.bit_length() - 1                      # bits per axis
    levels = 2.0 * np.arange(m) - (m - 1)            # ascending odd integers
    scale = 1.0 / np.sqrt(2.0 * np.mean(levels ** 2))
    gray = _gray_codes(k_axis)

    points = np.empty(size, dtype=np.complex128)
    labels = np.zeros((size, 2 * k_axis), dtype=np.uint8)
    axis_bits = ((gray[:, None] >> np.arange(k_axis - 1, -1, -1)) & 1).astype(np.uint8)
    for li in range(m):
        for lq in range(m):
            idx = li * m + lq
            points[idx] = (levels[li] + 1j * levels[lq]) * scale
            # LTE-style interleaving: even label positions carry the I axis,
            # odd positions the Q axis (both MSB first)
            labels[idx, 0::2] = axis_bits[li]
            labels[idx, 1::2] = axis_bits[lq]

    return Constellation(
        kind=kind,
        points=points,
        bits_per_symbol=2 * k_axis,
        labels=labels,
        levels_per_axis=m,
        level_scale=float(scale),
    )


def hypothesis_set() -> tuple[Constellation, ...]:
    """The four interferer hypotheses in canonical (ascending-size) order."""
    return tuple(build_constellation(k) for k in HYPOTHESIS_KINDS)


def bit_partition(c: Constellation, bit_index: int, sign: int) -> BitPartition:
    """Points of ``c`` whose label bit ``bit_index`` maps to ``sign`` (+1 or -1)."""
    if c.kind is ConstellationKind.ABSENT:
        raise ValueError("the absent alphabet has no bit labels")
    if not 0 <= bit_index < c.bits_per_symbol:
        raise ValueError(f"bit index {bit_index} out of range for "
                         f"{c.bits_per_symbol} bits per symbol")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    want = 1 if sign == +1 else 0
    subset = np.flatnonzero(c.labels[:, bit_index] == want)
    return BitPartition(bit_index=bit_index, sign=sign, subset=subset)


def modulate(bits: np.ndarray, c: Constellation) -> np.ndarray:
    """Map a 0/1 bit vector to symbols, ``bits_per_symbol`` bits at a time."""
    bits = np.asarray(bits)
    if c.kind is ConstellationKind.ABSENT:
        raise ValueError("cannot modulate onto the absent alphabet")
    k = c.bits_per_symbol
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} is not divisible by {k}")
    groups = bits.reshape(-1, k).astype(np.intp)
    vals = groups @ (1 << np.arange(k - 1, -1, -1))
    return c.points[c.label_value_to_index()[vals]]


def demap_hard(symbols: np.ndarray, c: Constellation) -> np.ndarray:
    """Nearest-point hard demapping back to a flat 0/1 bit vector."""
    idx = c.nearest_index(np.asarray(symbols))
    return c.labels[idx].reshape(-1).copy()
