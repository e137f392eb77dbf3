"""Simulator for photon-starved, high-order PPM links with timestamp-based clock recovery."""

from .config import DetectorConfig, LinkConfig, OscillatorConfig
from .demod import FrameVerdicts, LinkTally, dcef_ber_prediction, judge_frames, tally
from .detector import (
    ChannelConfig,
    DetectionStream,
    analytic_fer,
    detect,
    expected_frame_mu,
    incident_lambda,
    read_timestamps,
    write_timestamps,
)
from .exceptions import DecodeFailure, Infeasible, NoAcquisition, TooFewTicks
from .fec import (
    SymbolChannelStats,
    achievable_pie,
    block_error_prob,
    clock_overhead_db,
    coherent_limits,
    gap_db,
    max_rate,
    photons_per_frame,
    pie,
)
from .geometry import FrameGeometry, frame_geometry, slot_start_time, slot_to_symbol, symbol_to_slot
from .harness import RunSpec, pie_table, reproduce_reference_point, run_sweep
from .link import LinkRun, simulate_link
from .oscillator import ClockPath, composite_clock, realize_clock, to_local_time
from .prbs import PrbsSource
from .recovery import ClockRecovery, RecoveryConfig, map_to_slots
from .rs import RSCodec, rs_codec_roundtrip
from .transmitter import PulseSchedule, build_schedule

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
