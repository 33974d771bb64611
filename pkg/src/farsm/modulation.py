"""Square QAM constellations and the joint spatial/symbol bit mapping.

Each channel use carries log2(N_r) + log2(M) bits: the leading bits pick the
targeted receive antenna (natural binary, value + 1 gives the 1-based index),
the trailing bits pick the QAM point through its Gray label. Constellations
are normalized to unit mean symbol energy and labeled Gray per axis, so
nearest neighbors along either axis differ in exactly one bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SUPPORTED_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class Constellation:
    """Unit-energy square QAM constellation with Gray bit labels.

    ``points[m]`` is the complex symbol whose label is ``bit_labels[m]``; the
    label string concatenates the in-phase bits with the quadrature bits.
    """

    order: int
    points: np.ndarray
    bit_labels: tuple[str, ...]

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    def label_index(self, label: str) -> int:
        """Index of the point carrying ``label``."""
        return self._label_to_index[label]

    def __post_init__(self):
        lut = {lab: i for i, lab in enumerate(self.bit_labels)}
        object.__setattr__(self, "_label_to_index", lut)


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def build_qam(order: int) -> Constellation:
    """Build a unit-mean-energy square QAM constellation of the given order.

    Supported orders: 4, 16, 64. Amplitude levels per axis are the odd
    integers scaled by the usual normalization sqrt(2 (M - 1) / 3), and each
    axis carries a binary-reflected Gray label; a point's label is its
    in-phase bits followed by its quadrature bits.
    """
    if order not in _SUPPORTED_ORDERS:
        raise ValueError(f"order must be one of {_SUPPORTED_ORDERS}, got {order}")
    side = int(round(np.sqrt(order)))
    axis_bits = side.bit_length() - 1
    scale = np.sqrt(2.0 * (order - 1) / 3.0)
    # label value v sits at the level whose Gray code is v
    level_of_value = np.empty(side, dtype=int)
    for level in range(side):
        level_of_value[_gray(level)] = level
    amplitudes = 2.0 * np.arange(side) - (side - 1)

    points = np.empty(order, dtype=complex)
    labels = []
    for m in range(order):
        vi = m >> axis_bits          # leading bits: in-phase
        vq = m & (side - 1)          # trailing bits: quadrature
        re = amplitudes[level_of_value[vi]]
        im = amplitudes[level_of_value[vq]]
        points[m] = (re + 1j * im) / scale
        labels.append(format(m, f"0{2 * axis_bits}b"))
    return Constellation(order=order, points=points, bit_labels=tuple(labels))


@dataclass(frozen=True)
class SpatialSymbol:
    """One channel use: 1-based receive-antenna index plus QAM point index."""

    antenna: int
    symbol: int


def spectral_efficiency(order: int, n_r: int) -> float:
    """Bits per channel use: log2(order) + log2(n_r)."""
    return float(np.log2(order) + np.log2(n_r))


def _check_power_of_two(n_r: int) -> int:
    if n_r < 2 or n_r & (n_r - 1):
        raise ValueError(f"receive antenna count must be a power of two >= 2, got {n_r}")
    return n_r.bit_length() - 1


def bits_to_symbol(bits: np.ndarray, n_r: int,
                   constellation: Constellation) -> SpatialSymbol:
    """Map one bit block to (antenna, symbol).

    ``bits`` holds log2(n_r) + log2(M) entries in {0, 1}, MSB first. The
    spatial bits are read as natural binary and offset by one to make the
    antenna index 1-based.
    """
    kb = _check_power_of_two(n_r)
    bits = np.asarray(bits, dtype=int)
    if bits.size != kb + constellation.bits_per_symbol:
        raise ValueError(
            f"expected {kb + constellation.bits_per_symbol} bits, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bit block must contain only 0s and 1s")
    antenna = 1 + int(bits[:kb].dot(1 << np.arange(kb)[::-1]))
    label = "".join(str(b) for b in bits[kb:])
    return SpatialSymbol(antenna=antenna, symbol=constellation.label_index(label))


def symbol_to_bits(symbol: SpatialSymbol, n_r: int,
                   constellation: Constellation) -> np.ndarray:
    """Inverse of :func:`bits_to_symbol`."""
    kb = _check_power_of_two(n_r)
    if not 1 <= symbol.antenna <= n_r:
        raise ValueError(f"antenna index {symbol.antenna} outside 1..{n_r}")
    spatial = format(symbol.antenna - 1, f"0{kb}b")
    label = constellation.bit_labels[symbol.symbol]
    return np.array([int(b) for b in spatial + label], dtype=np.uint8)
