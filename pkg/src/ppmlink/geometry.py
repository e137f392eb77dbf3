"""Frame geometry, symbol/slot mapping and grid arithmetic.

Slot labels are 1-based everywhere in the public interface. A symbol of M
bits is read most-significant bit first, so the all-zero word sits in slot 1.

Superframe layout (``N = data_clock_ratio``)::

    | PPM 2^M | guard | PPM 2^M | guard | ... (N times) ... | clock frame |

Frame index ``0..N-1`` addresses the guarded PPM frames; frame index ``N``
is the clock frame, whose single pulse sits in its slot 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import LinkConfig


@dataclass(frozen=True)
class FrameGeometry:
    ppm_order_exp: int
    slot_width: int
    data_clock_ratio: int
    slots_per_ppm_frame: int
    guard_slots: int
    guarded_frame_slots: int
    clock_frame_slots: int
    superframe_slots: int

    @property
    def guarded_frame_duration(self) -> int:
        return self.guarded_frame_slots * self.slot_width

    @property
    def superframe_duration(self) -> int:
        return self.superframe_slots * self.slot_width

    @property
    def ppm_frame_duration(self) -> int:
        return self.slots_per_ppm_frame * self.slot_width

    @property
    def clock_frame_offset(self) -> int:
        """Start of the clock frame (and time of its pulse) within a superframe."""
        return self.data_clock_ratio * self.guarded_frame_duration

    @property
    def clock_frame_index(self) -> int:
        return self.data_clock_ratio


def frame_geometry(cfg: LinkConfig) -> FrameGeometry:
    q = 1 << cfg.ppm_order_exp
    guarded = q + cfg.guard_slots
    return FrameGeometry(
        ppm_order_exp=cfg.ppm_order_exp,
        slot_width=cfg.slot_width,
        data_clock_ratio=cfg.data_clock_ratio,
        slots_per_ppm_frame=q,
        guard_slots=cfg.guard_slots,
        guarded_frame_slots=guarded,
        clock_frame_slots=cfg.clock_frame_slots,
        superframe_slots=cfg.data_clock_ratio * guarded + cfg.clock_frame_slots,
    )


def symbol_to_slot(bits: Sequence[int], m: int) -> int:
    """Slot label (1..2^m) carrying the m-bit word ``bits``, MSB first."""
    if len(bits) != m:
        raise ValueError(f"expected {m} bits, got {len(bits)}")
    value = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"bits must be 0/1, got {b!r}")
        value = (value << 1) | int(b)
    return value + 1


def slot_to_symbol(slot: int, m: int) -> list[int]:
    if not 1 <= slot <= (1 << m):
        raise ValueError(f"slot {slot} outside 1..{1 << m}")
    value = slot - 1
    return [(value >> (m - 1 - i)) & 1 for i in range(m)]


def bits_to_values(bits: np.ndarray, m: int) -> np.ndarray:
    """Pack a flat 0/1 array into consecutive m-bit integers (MSB first)."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % m:
        raise ValueError("bit count is not a multiple of m")
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    return bits.reshape(-1, m) @ weights


def slot_start_time(geom: FrameGeometry, superframe: int, frame: int, slot: int) -> int:
    """Ideal transmitter-grid time (ps) of ``slot`` in the given frame.

    ``frame == geom.clock_frame_index`` addresses the clock frame.
    """
    if superframe < 0:
        raise ValueError("superframe index must be >= 0")
    if not 0 <= frame <= geom.clock_frame_index:
        raise ValueError(f"frame index {frame} outside 0..{geom.clock_frame_index}")
    if frame == geom.clock_frame_index:
        if not 1 <= slot <= geom.clock_frame_slots:
            raise ValueError(f"clock slot {slot} outside 1..{geom.clock_frame_slots}")
    elif not 1 <= slot <= geom.guarded_frame_slots:
        # guard slots continue the numbering after 2^M
        raise ValueError(f"slot {slot} outside 1..{geom.guarded_frame_slots}")
    slots = superframe * geom.superframe_slots + frame * geom.guarded_frame_slots + (slot - 1)
    return slots * geom.slot_width
