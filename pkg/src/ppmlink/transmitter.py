"""Transmit-side pulse schedule on the ideal transmitter grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .config import LinkConfig
from .geometry import FrameGeometry, bits_to_values, frame_geometry
from .prbs import PrbsSource

DATA, CLOCK = 0, 1
KIND_NAMES = {DATA: "data", CLOCK: "clock"}


class Pulse(NamedTuple):
    ideal_time: int
    kind: str
    superframe: int
    frame: int
    slot: int
    symbol: int | None


@dataclass(frozen=True)
class PulseSchedule:
    """Time-ordered pulses, stored column-wise.

    ``frame`` is the frame index inside the superframe (``N`` for the clock
    frame); ``symbol`` is the integer value of the M source bits, -1 for
    clock pulses. ``n_frames`` counts PPM data frames.
    """

    geometry: FrameGeometry
    n_frames: int
    ideal_time: np.ndarray
    kind: np.ndarray
    superframe: np.ndarray
    frame: np.ndarray
    slot: np.ndarray
    symbol: np.ndarray

    def __len__(self):
        return len(self.ideal_time)

    def __iter__(self) -> Iterator[Pulse]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> Pulse:
        sym = int(self.symbol[i])
        return Pulse(
            int(self.ideal_time[i]),
            KIND_NAMES[int(self.kind[i])],
            int(self.superframe[i]),
            int(self.frame[i]),
            int(self.slot[i]),
            None if sym < 0 else sym,
        )

    @property
    def data_mask(self) -> np.ndarray:
        return self.kind == DATA

    @property
    def data_slots(self) -> np.ndarray:
        """Transmitted slot label of each PPM frame, in frame order."""
        return self.slot[self.data_mask]

    @property
    def data_symbols(self) -> np.ndarray:
        return self.symbol[self.data_mask]

    @property
    def n_clock_pulses(self) -> int:
        return int(np.count_nonzero(self.kind == CLOCK))

    @property
    def span(self) -> int:
        """Duration covered by the schedule: whole superframes, in ps."""
        n_sf = -(-self.n_frames // self.geometry.data_clock_ratio)
        return n_sf * self.geometry.superframe_duration

    def to_csv(self, path) -> None:
        m = self.geometry.ppm_order_exp
        width = -(-m // 4)
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ideal_time_ps", "kind", "superframe", "frame", "slot", "symbol_hex"])
            for p in self:
                sym = "" if p.symbol is None else format(p.symbol, f"0{width}x")
                w.writerow([p.ideal_time, p.kind, p.superframe, p.frame, p.slot, sym])


def default_prbs(cfg: LinkConfig, degree: int = 23) -> PrbsSource:
    return PrbsSource(degree, 1 + cfg.rng_seed % ((1 << degree) - 1))


def build_schedule(
    cfg: LinkConfig,
    n_frames: int,
    distinct_frames: int | None = None,
    prbs: PrbsSource | None = None,
) -> PulseSchedule:
    """Emit ``n_frames`` PPM pulses plus one clock pulse per complete superframe.

    With ``distinct_frames < n_frames`` the symbol pattern repeats with that
    period, as an AWG replaying a finite memory would.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    distinct = n_frames if distinct_frames is None else min(int(distinct_frames), n_frames)
    if distinct < 1:
        raise ValueError("distinct_frames must be >= 1")
    geom = frame_geometry(cfg)
    m, n_per_sf = cfg.ppm_order_exp, cfg.data_clock_ratio
    src = prbs if prbs is not None else default_prbs(cfg)

    pattern = bits_to_values(src.next_bits(distinct * m), m)
    symbols = np.resize(pattern, n_frames)
    idx = np.arange(n_frames, dtype=np.int64)
    sf, fr = idx // n_per_sf, idx % n_per_sf
    t_data = (sf * geom.superframe_slots + fr * geom.guarded_frame_slots + symbols) * geom.slot_width

    n_clock = n_frames // n_per_sf
    sf_clock = np.arange(n_clock, dtype=np.int64)
    t_clock = sf_clock * geom.superframe_duration + geom.clock_frame_offset

    times = np.concatenate([t_data, t_clock])
    order = np.argsort(times, kind="stable")
    kind = np.concatenate([np.full(n_frames, DATA, np.uint8), np.full(n_clock, CLOCK, np.uint8)])
    return PulseSchedule(
        geometry=geom,
        n_frames=n_frames,
        ideal_time=times[order],
        kind=kind[order],
        superframe=np.concatenate([sf, sf_clock])[order],
        frame=np.concatenate([fr, np.full(n_clock, n_per_sf, np.int64)])[order],
        slot=np.concatenate([symbols + 1, np.ones(n_clock, np.int64)])[order],
        symbol=np.concatenate([symbols, np.full(n_clock, -1, np.int64)])[order],
    )
