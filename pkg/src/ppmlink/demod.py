"""Per-frame decisions and link error statistics.

A frame is erased when its 2^M data slots hold zero or two-plus detections;
otherwise the single detection decides the symbol. Detections in guard or
clock regions never count toward a frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .config import LinkConfig
from .detector import DARK, LEAK, SIGNAL, DetectionStream, single_count_probability
from .geometry import frame_geometry
from .oscillator import PS_PER_S
from .recovery import DATA_SLOT, GUARD, SlotMap
from .transmitter import PulseSchedule

CORRECT, SYMBOL_ERROR, ERASURE = 0, 1, 2
OUTCOME_NAMES = {CORRECT: "correct", SYMBOL_ERROR: "symbol_error", ERASURE: "erasure"}

NO_CAUSE, DARK_ON_ERASED, LEAK_CAUSE, CLOCK_MISALIGNMENT, MULTI_PHOTON = range(5)
CAUSE_NAMES = {
    NO_CAUSE: "none",
    DARK_ON_ERASED: "dark_on_erased",
    LEAK_CAUSE: "leak",
    CLOCK_MISALIGNMENT: "clock_misalignment",
    MULTI_PHOTON: "multi_photon",
}


class FrameVerdict(NamedTuple):
    frame_index: int
    superframe: int
    frame: int
    outcome: str
    count_in_frame: int
    cause: str
    bit_errors: int


@dataclass(frozen=True)
class FrameVerdicts:
    """Column-wise verdicts for frames ``0..n_frames-1`` in transmit order."""

    data_clock_ratio: int
    outcome: np.ndarray
    count: np.ndarray
    guard_count: np.ndarray
    sent_slot: np.ndarray
    decided_slot: np.ndarray  # 0 where erased
    bit_errors: np.ndarray
    cause: np.ndarray

    def __len__(self):
        return len(self.outcome)

    def __getitem__(self, i: int) -> FrameVerdict:
        n = self.data_clock_ratio
        return FrameVerdict(
            i, i // n, i % n,
            OUTCOME_NAMES[int(self.outcome[i])],
            int(self.count[i]),
            CAUSE_NAMES[int(self.cause[i])],
            int(self.bit_errors[i]),
        )

    def __iter__(self) -> Iterator[FrameVerdict]:
        for i in range(len(self)):
            yield self[i]


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    return np.unpackbits(x.view(np.uint8).reshape(-1, 8), axis=1).sum(axis=1).astype(np.int64)


def judge_frames(slots: SlotMap, schedule: PulseSchedule,
                 detections: DetectionStream | None = None) -> FrameVerdicts:
    """Classify every transmitted PPM frame.

    ``detections`` (aligned with ``slots``) is only used for cause
    attribution; omit it to judge from the receiver's view alone.
    """
    n = schedule.n_frames
    sent = schedule.data_slots.astype(np.int64)
    gf = slots.global_frame
    valid = (gf >= 0) & (gf < n)
    in_data = valid & (slots.region == DATA_SLOT)
    count = np.bincount(gf[in_data], minlength=n)
    guard_count = np.bincount(gf[valid & (slots.region == GUARD)], minlength=n)

    single = count == 1
    hit = np.flatnonzero(in_data)
    hit = hit[single[gf[hit]]]
    decided = np.zeros(n, dtype=np.int64)
    decided[gf[hit]] = slots.slot[hit]

    outcome = np.full(n, ERASURE, dtype=np.uint8)
    outcome[single] = np.where(decided[single] == sent[single], CORRECT, SYMBOL_ERROR)
    bit_errors = np.zeros(n, dtype=np.int64)
    wrong = outcome == SYMBOL_ERROR
    bit_errors[wrong] = _popcount((decided[wrong] - 1) ^ (sent[wrong] - 1))

    cause = np.full(n, NO_CAUSE, dtype=np.uint8)
    cause[count >= 2] = MULTI_PHOTON
    if detections is not None:
        prov = detections.provenance[hit]
        err = outcome[gf[hit]] == SYMBOL_ERROR
        frames = gf[hit][err]
        p = prov[err]
        cause[frames[p == DARK]] = DARK_ON_ERASED
        cause[frames[p == LEAK]] = LEAK_CAUSE
        cause[frames[p == SIGNAL]] = CLOCK_MISALIGNMENT
    return FrameVerdicts(schedule.geometry.data_clock_ratio, outcome, count, guard_count,
                         sent, decided, bit_errors, cause)


@dataclass
class LinkTally:
    ppm_order_exp: int
    n_frames: int = 0
    n_erased: int = 0
    n_correct: int = 0
    n_symbol_errors: int = 0
    n_bit_errors: int = 0
    cause_counts: dict[str, int] = field(default_factory=lambda: {name: 0 for name in CAUSE_NAMES.values()})
    lambda_pulse: float | None = None

    @property
    def n_decided(self) -> int:
        return self.n_frames - self.n_erased

    @property
    def fer(self) -> float:
        return self.n_erased / self.n_frames

    @property
    def ser(self) -> float | None:
        return self.n_symbol_errors / self.n_decided if self.n_decided else None

    @property
    def ber(self) -> float | None:
        if not self.n_decided:
            return None
        return self.n_bit_errors / (self.ppm_order_exp * self.n_decided)

    def __add__(self, other: LinkTally) -> LinkTally:
        if other.ppm_order_exp != self.ppm_order_exp:
            raise ValueError("cannot merge tallies of different PPM orders")
        causes = {k: self.cause_counts.get(k, 0) + other.cause_counts.get(k, 0)
                  for k in set(self.cause_counts) | set(other.cause_counts)}
        lam = self.lambda_pulse if self.lambda_pulse == other.lambda_pulse else None
        return LinkTally(
            self.ppm_order_exp,
            self.n_frames + other.n_frames,
            self.n_erased + other.n_erased,
            self.n_correct + other.n_correct,
            self.n_symbol_errors + other.n_symbol_errors,
            self.n_bit_errors + other.n_bit_errors,
            causes,
            lam,
        )


def tally(verdicts: FrameVerdicts, ppm_order_exp: int, lambda_pulse: float | None = None) -> LinkTally:
    if len(verdicts) == 0:
        raise ValueError("no verdicts to tally")
    causes = np.bincount(verdicts.cause, minlength=len(CAUSE_NAMES))
    return LinkTally(
        ppm_order_exp=ppm_order_exp,
        n_frames=len(verdicts),
        n_erased=int(np.count_nonzero(verdicts.outcome == ERASURE)),
        n_correct=int(np.count_nonzero(verdicts.outcome == CORRECT)),
        n_symbol_errors=int(np.count_nonzero(verdicts.outcome == SYMBOL_ERROR)),
        n_bit_errors=int(verdicts.bit_errors.sum()),
        cause_counts={CAUSE_NAMES[i]: int(c) for i, c in enumerate(causes)},
        lambda_pulse=lambda_pulse,
    )


def wrong_slot_bit_fraction(m: int) -> float:
    """Mean fraction of bits in error when a uniformly random wrong slot is decided."""
    return 2 ** (m - 1) / (2**m - 1)


def dcef_ber_prediction(cfg: LinkConfig) -> float:
    """BER from dark counts landing in frames whose signal photon was missed."""
    geom = frame_geometry(cfg)
    dark = cfg.detector.dark_count_rate * geom.ppm_frame_duration / PS_PER_S
    if dark == 0:
        return 0.0
    p_missed = math.exp(-cfg.lambda_pulse * cfg.detector.efficiency)
    p_one_dark = dark * math.exp(-dark)
    return p_missed * p_one_dark * wrong_slot_bit_fraction(cfg.ppm_order_exp) / single_count_probability(cfg)
