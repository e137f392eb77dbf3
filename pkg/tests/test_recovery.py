import math

import numpy as np
import pytest
from sklearn.base import clone

from ppmlink import (
    ClockRecovery,
    DetectorConfig,
    LinkConfig,
    NoAcquisition,
    OscillatorConfig,
    TooFewTicks,
    build_schedule,
    detect,
    frame_geometry,
    map_to_slots,
    realize_clock,
    simulate_link,
    to_local_time,
)
from ppmlink.detector import SIGNAL
from ppmlink.recovery import (
    CLOCK_SLOT,
    DATA_SLOT,
    GUARD,
    ClockTicks,
    RecoveredTimebase,
    RecoveryConfig,
    acquire,
    extract_clock_ticks,
    interpolate_timebase,
    remove_outliers,
)

S = 10**12


def _stream(cfg, n_frames, seed=0):
    sched = build_schedule(cfg, n_frames)
    ss_clock, ss_det = np.random.SeedSequence(seed).spawn(2)
    from ppmlink.oscillator import composite_clock
    clock = realize_clock(composite_clock(cfg.tx_clock, cfg.rx_clock), sched.span,
                          rng=np.random.default_rng(ss_clock))
    d = detect(sched, clock, cfg.detector, cfg.lambda_pulse, np.random.default_rng(ss_det))
    return sched, clock, d


def _identity_timebase():
    grid = np.array([0.0, 1e15])
    return RecoveredTimebase(ClockTicks(np.empty(0, np.int64), np.empty(0, np.int64)), grid, grid)


# -- acquisition -------------------------------------------------------------

def test_acquire_ideal_clock():
    cfg = LinkConfig(ppm_order_exp=17)
    _, _, d = _stream(cfg, 50_000, seed=1)
    acq = acquire(d.timestamps, cfg)
    g = frame_geometry(cfg)
    assert abs(acq.frequency_offset) < 1e-9
    assert abs(acq.phase - g.clock_frame_offset) <= cfg.slot_width


@pytest.mark.parametrize("offset", [1e-6, -1.5e-6])
def test_acquire_injected_offset(offset):
    cfg = LinkConfig(ppm_order_exp=17, tx_clock=OscillatorConfig(fractional_frequency_offset=offset))
    _, _, d = _stream(cfg, 50_000, seed=2)
    assert acquire(d.timestamps, cfg).frequency_offset == pytest.approx(offset, abs=2e-8)


def test_acquire_pure_dark_counts():
    det = DetectorConfig(dark_count_rate=1000)
    cfg = LinkConfig(ppm_order_exp=17, lambda_pulse=0.0, detector=det)
    failures = 0
    for seed in range(20):
        _, _, d = _stream(cfg, 20_000, seed)
        with pytest.raises(NoAcquisition):
            acquire(d.timestamps, cfg)
        failures += 1
    assert failures == 20


def test_acquire_rejects_short_stream():
    with pytest.raises(ValueError):
        acquire(np.array([1, 2, 3]), LinkConfig())


# -- tick extraction ---------------------------------------------------------

def test_tick_fraction_matches_detection_probability():
    cfg = LinkConfig()
    n_sf = 20_000
    _, _, d = _stream(cfg, n_sf * 10, seed=3)
    acq = acquire(d.timestamps, cfg)
    ticks = extract_clock_ticks(d.timestamps, acq, cfg)
    p = 1 - math.exp(-0.213 * 0.85)
    assert abs(len(ticks) / n_sf - p) < 3 * math.sqrt(p * (1 - p) / n_sf) + 1e-3


def test_bright_noise_free_one_tick_per_superframe():
    det = DetectorConfig(efficiency=1, dark_count_rate=0, jitter_fwhm=0)
    cfg = LinkConfig(ppm_order_exp=17, lambda_pulse=30, detector=det)
    sched, _, d = _stream(cfg, 2000, seed=4)
    acq = acquire(d.timestamps, cfg)
    ticks = extract_clock_ticks(d.timestamps, acq, cfg)
    g = frame_geometry(cfg)
    assert ticks.superframe.tolist() == list(range(sched.n_clock_pulses))
    expected = ticks.superframe * g.superframe_duration + g.clock_frame_offset
    assert (ticks.time == expected).all()


def test_ambiguous_gate_yields_no_tick():
    cfg = LinkConfig(ppm_order_exp=17)
    g = frame_geometry(cfg)
    k = np.arange(40)
    ts = k * g.superframe_duration + g.clock_frame_offset
    ts = np.sort(np.append(ts, ts[5] + 5_000))  # extra event inside the gate
    acq = acquire(ts, cfg)
    ticks = extract_clock_ticks(ts, acq, cfg)
    assert 5 not in ticks.superframe.tolist()
    assert len(ticks) == 39


# -- outlier removal ---------------------------------------------------------

def test_perfect_line_all_accepted():
    k = np.arange(0, 300, 3)
    c = ClockTicks(k, k * 2_000_000_000 + 777)
    assert len(remove_outliers(c)) == len(c)


def test_displaced_tick_rejected():
    rng = np.random.default_rng(0)
    k = np.arange(200)
    t = k * 2_000_000_000 + np.rint(rng.normal(0, 19, 200)).astype(np.int64)
    mad = 1.4826 * np.median(np.abs(t - k * 2_000_000_000))
    t[100] += int(10 * max(mad, 5) * 3)
    kept = remove_outliers(ClockTicks(k, t))
    assert 100 not in kept.superframe.tolist()
    assert len(kept) >= 197


def _tick_stream(rng, n_sf, diffusion):
    period = 2_098_252_000
    present = np.flatnonzero(rng.random(n_sf) < 0.166)
    walk = np.zeros(n_sf)
    if diffusion:
        walk = np.cumsum(rng.normal(0, math.sqrt(diffusion * period / S), n_sf))
    t = present * period * (1 + 1e-7) + walk[present] + rng.normal(0, 19.1, present.size)
    is_false = rng.random(present.size) < 0.05
    disp = rng.uniform(-20_000, 20_000, is_false.sum())
    t[is_false] += disp
    kept = remove_outliers(ClockTicks(present, np.rint(t).astype(np.int64)))
    return np.isin(present, kept.superframe), is_false, disp


def test_false_tick_rejection_rates():
    # false ticks spread uniformly over the gate; the ones landing within a
    # few jitter sigmas of the true line are indistinguishable, which puts a
    # floor of roughly 0.5% on the survival rate
    kept, is_false, _ = _tick_stream(np.random.default_rng(11), 400_000, 0.0)
    assert kept[is_false].mean() <= 0.01
    assert 1 - kept[~is_false].mean() <= 0.01


def test_false_ticks_under_random_walk():
    kept, is_false, disp = _tick_stream(np.random.default_rng(12), 80_000, 2e5)
    assert np.abs(disp[kept[is_false]]).max(initial=0) < 1000
    assert 1 - kept[~is_false].mean() <= 0.01


def test_too_few_ticks():
    with pytest.raises(TooFewTicks):
        remove_outliers(ClockTicks(np.arange(4), np.arange(4) * 10))


# -- timebase ----------------------------------------------------------------

def test_two_ticks_affine():
    g = frame_geometry(LinkConfig())
    ticks = ClockTicks(np.array([0, 4]), np.array([g.clock_frame_offset + 10, g.clock_frame_offset
                                                   + 4 * g.superframe_duration + 50]))
    tb = interpolate_timebase(ticks, None, g)
    grid = np.array([0.0, 1e9, 5e9, 2e10])
    rx = tb.to_rx(grid)
    slope = (ticks.time[1] - ticks.time[0]) / (4 * g.superframe_duration)
    assert np.allclose(np.diff(rx) / np.diff(grid), slope)
    assert np.allclose(tb.to_grid(rx), grid)


def test_offset_clock_knots_exact():
    cfg = LinkConfig(tx_clock=OscillatorConfig(fractional_frequency_offset=3e-7))
    g = frame_geometry(cfg)
    path = realize_clock(OscillatorConfig(fractional_frequency_offset=3e-7), 200 * g.superframe_duration)
    k = np.arange(0, 190, 7)
    grid = k * g.superframe_duration + g.clock_frame_offset
    rx = np.asarray(to_local_time(path, grid))
    tb = interpolate_timebase(ClockTicks(k, rx), None, g)
    assert np.allclose(tb.to_rx(grid), rx, atol=1e-6)
    assert np.allclose(tb.offset_trace(), 3e-7, atol=1e-12)


def test_brownian_bridge_midpoint_error():
    g = frame_geometry(LinkConfig())
    d = 1e6
    n_gaps = 1000
    span = (n_gaps + 2) * g.superframe_duration
    path = realize_clock(OscillatorConfig(random_walk_diffusion=d), span, sample_interval=10**7,
                         rng=np.random.default_rng(5))
    k = np.arange(n_gaps + 1)
    grid = k * g.superframe_duration + g.clock_frame_offset
    tb = interpolate_timebase(ClockTicks(k, np.asarray(to_local_time(path, grid))), None, g)
    mid = grid[:-1] + g.superframe_duration / 2
    err = tb.to_rx(mid) - to_local_time(path, mid)
    rms = math.sqrt(np.mean(err**2))
    oracle = math.sqrt(d * g.superframe_duration / S / 4)
    assert oracle / 2 < rms < 2 * oracle


def test_sampling_period_averages_ticks():
    g = frame_geometry(LinkConfig())
    k = np.arange(100)
    ticks = ClockTicks(k, k * g.superframe_duration + g.clock_frame_offset)
    tb = interpolate_timebase(ticks, RecoveryConfig(clock_sampling_period=50 * 10**9), g)
    assert len(tb.knots_rx) < 10
    assert np.allclose(tb.to_grid(tb.knots_rx), tb.knots_grid)


# -- slot mapping ------------------------------------------------------------

def test_map_regions_and_nearest_slot():
    g = frame_geometry(LinkConfig())
    tb = _identity_timebase()
    slot_10 = 9 * g.slot_width
    ts = np.array([slot_10 + 190, slot_10 - 190, 2**19 * 400 + 800, g.clock_frame_offset,
                   g.superframe_duration + 3 * g.guarded_frame_duration])
    m = map_to_slots(ts, tb, g)
    assert m.slot.tolist()[:2] == [10, 10]
    assert m.region.tolist() == [DATA_SLOT, DATA_SLOT, GUARD, CLOCK_SLOT, DATA_SLOT]
    assert m.global_frame.tolist() == [0, 0, 0, -1, 13]


def test_jitter_never_crosses_slot_boundary():
    g = frame_geometry(LinkConfig())
    tb = _identity_timebase()
    rng = np.random.default_rng(9)
    bad = 0
    for _ in range(10):
        slots = rng.integers(1, 2**19 + 1, 10**6)
        t = (slots - 1) * g.slot_width + 10 * g.superframe_duration
        t = np.rint(t + rng.normal(0, 19.1, t.size))
        bad += int(np.count_nonzero(map_to_slots(t, tb, g).slot != slots))
    assert bad == 0


def test_noise_free_chain_maps_every_signal_detection():
    det = DetectorConfig(dark_count_rate=0, jitter_fwhm=0)
    cfg = LinkConfig(ppm_order_exp=17, lambda_pulse=0.5, detector=det, rng_seed=2)
    run = simulate_link(cfg, 30_000)
    assert run.ok
    sig = run.detections.provenance == SIGNAL
    origin = run.detections.origin[sig]
    assert (run.slots.slot[sig] == run.schedule.slot[origin]).all()
    assert run.tally.n_symbol_errors == 0


# -- estimator ---------------------------------------------------------------

def test_estimator_api(tmp_path):
    cfg = LinkConfig(ppm_order_exp=17)
    _, _, d = _stream(cfg, 20_000, seed=6)
    est = ClockRecovery(cfg, gate_halfwidth=15_000)
    assert est.get_params()["gate_halfwidth"] == 15_000
    twin = clone(est).set_params(outlier_threshold=4.0)
    assert twin.outlier_threshold == 4.0 and twin.link_config == cfg
    out = est.fit_transform(d.timestamps)
    assert out.shape == (len(d), 4)
    est.write_diagnostics(tmp_path / "diag.csv")
    lines = (tmp_path / "diag.csv").read_text().splitlines()
    assert lines[0].startswith("superframe,tick_present")
    assert len(lines) > 100


def test_estimator_deterministic():
    cfg = LinkConfig(ppm_order_exp=17, tx_clock=OscillatorConfig(5e-7, 0, 2e5))
    _, _, d = _stream(cfg, 20_000, seed=7)
    a = ClockRecovery(cfg).fit(d.timestamps).timebase_
    b = ClockRecovery(cfg).fit(d.timestamps).timebase_
    assert (a.knots_rx == b.knots_rx).all() and (a.knots_grid == b.knots_grid).all()


def test_gate_must_fit_guard():
    with pytest.raises(ValueError):
        ClockRecovery(LinkConfig(), gate_halfwidth=60_000).fit(np.arange(10))


def test_unfitted_transform_raises():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        ClockRecovery().transform(np.arange(5))


def test_extrapolation_beyond_last_tick_stays_on_grid():
    # two close end knots with opposite jitter must not tilt the tail
    g = frame_geometry(LinkConfig())
    k = np.array([0, 10, 20, 30, 40, 50, 60, 61])
    t = k * g.superframe_duration + g.clock_frame_offset
    t = t + np.array([0, 5, -5, 3, -2, 0, 30, -30])
    tb = interpolate_timebase(ClockTicks(k, t), None, g)
    far = 80 * g.superframe_duration + g.clock_frame_offset
    assert abs(tb.to_rx(far) - far) < 100
    assert abs(tb.to_grid(tb.to_rx(far)) - far) < 1e-3
    before = -5 * g.superframe_duration + g.clock_frame_offset
    assert abs(tb.to_grid(tb.to_rx(before)) - before) < 1e-3
