"""Maximal-length PRBS generator (Fibonacci LFSR).

The sequence obeys ``s[i] = XOR_j s[i - o_j]`` with offsets derived from a
primitive polynomial. Squaring the polynomial over GF(2) doubles every
offset, which lets :meth:`PrbsSource.next_bits` extend the stream in numpy
blocks that grow geometrically instead of one bit at a time.
"""

from __future__ import annotations

import numpy as np

# x^L + x^t + ... + 1, listed as [L, t, ...]
PRIMITIVE_TAPS = {
    2: [2, 1],
    3: [3, 2],
    4: [4, 3],
    5: [5, 3],
    6: [6, 5],
    7: [7, 6],
    9: [9, 5],
    10: [10, 7],
    11: [11, 9],
    13: [13, 4, 3, 1],
    15: [15, 14],
    17: [17, 14],
    20: [20, 17],
    23: [23, 18],
    29: [29, 27],
    31: [31, 28],
}


class PrbsSource:
    """Stateful PRBS stream.

    Parameters
    ----------
    degree : int
        LFSR length; the period is ``2**degree - 1``.
    seed : int
        Initial register contents, nonzero, ``< 2**degree``. Bit ``j`` of the
        seed is the ``j``-th output bit.
    """

    def __init__(self, degree: int = 23, seed: int = 1):
        if degree not in PRIMITIVE_TAPS:
            raise ValueError(f"no primitive polynomial tabulated for degree {degree}")
        if not 0 < seed < (1 << degree):
            raise ValueError("seed must be nonzero and fit in the register")
        self.degree = degree
        self.seed = seed
        taps = PRIMITIVE_TAPS[degree]
        self._offsets = sorted({degree - t for t in taps[1:]} | {degree})
        self._history = np.array([(seed >> j) & 1 for j in range(degree)], dtype=np.uint8)
        self.bit_counter = 0

    @property
    def period(self) -> int:
        return (1 << self.degree) - 1

    @property
    def state(self) -> int:
        """Register contents: the last ``degree`` bits, oldest in bit 0."""
        return int(sum(int(b) << j for j, b in enumerate(self._history)))

    def next_bits(self, count: int) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be >= 1")
        L = self.degree
        out = np.empty(L + count, dtype=np.uint8)
        out[:L] = self._history
        pos, total = L, L + count
        lo, hi = self._offsets[0], self._offsets[-1]
        scale = 1
        while pos < total:
            while hi * scale * 2 <= pos:
                scale *= 2
            end = min(pos + lo * scale, total)
            acc = out[pos - hi * scale:end - hi * scale].copy()
            for o in self._offsets[:-1]:
                acc ^= out[pos - o * scale:end - o * scale]
            out[pos:end] = acc
            pos = end
        self._history = out[-L:].copy()
        self.bit_counter += count
        return out[L:]
