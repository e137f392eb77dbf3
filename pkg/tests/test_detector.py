import math

import numpy as np
import pytest
from scipy import stats

from ppmlink import (
    DetectorConfig,
    LinkConfig,
    OscillatorConfig,
    build_schedule,
    detect,
    expected_frame_mu,
    incident_lambda,
    read_timestamps,
    realize_clock,
    simulate_link,
    write_timestamps,
)
from ppmlink.detector import (
    DARK,
    SIGNAL,
    ChannelConfig,
    analytic_fer,
    apply_dead_time,
    merges_pulse_photons,
    single_count_probability,
)

S = 10**12


def _run_detect(cfg, n_frames, seed, span=None):
    sched = build_schedule(cfg, n_frames)
    span = sched.span if span is None else span
    clock = realize_clock(OscillatorConfig(), span)
    return sched, detect(sched, clock, cfg.detector, cfg.lambda_pulse, np.random.default_rng(seed), span)


def test_incident_lambda():
    assert incident_lambda(1.068e7, 77) == pytest.approx(0.213, rel=2e-3)
    assert incident_lambda(3.5, 0) == 3.5
    assert incident_lambda(0, 50) == 0
    assert ChannelConfig(77, 1.068e7).lambda_pulse == pytest.approx(0.213, rel=2e-3)
    with pytest.raises(ValueError):
        incident_lambda(-1, 3)


def test_expected_mu():
    mu = expected_frame_mu(LinkConfig())
    signal = 0.213 * 0.85
    dark = 20 * 2**19 * 400e-12
    assert mu == pytest.approx(signal + dark, abs=1e-8)
    assert mu == pytest.approx(0.185, abs=5e-4)
    assert expected_frame_mu(LinkConfig(lambda_pulse=0, detector=DetectorConfig(dark_count_rate=0))) == 0
    det = DetectorConfig(efficiency=1, dark_count_rate=0)
    assert expected_frame_mu(LinkConfig(lambda_pulse=1, detector=det)) == pytest.approx(1 + 10**-8.32, rel=1e-12)


def test_signal_detection_fraction():
    cfg = LinkConfig(ppm_order_exp=17)
    n = 10**6
    sched, d = _run_detect(cfg, n, 1)
    data_idx = set(np.flatnonzero(sched.data_mask).tolist())
    origins = np.unique(d.origin[d.provenance == SIGNAL])
    hits = sum(1 for o in origins.tolist() if o in data_idx)
    p = 1 - math.exp(-0.213 * 0.85)
    assert p == pytest.approx(0.1656, abs=1e-4)
    assert abs(hits - n * p) < 3 * math.sqrt(n * p * (1 - p))


def test_dead_time_drops_close_candidate():
    assert apply_dead_time(np.array([0, 30_000]), 60_000).tolist() == [0]
    assert apply_dead_time(np.array([0, 30_000, 60_000, 130_000]), 60_000).tolist() == [0, 2, 3]
    assert apply_dead_time(np.array([0, 30_000]), 0).tolist() == [0, 1]


def test_dark_count_statistics():
    cfg = LinkConfig(ppm_order_exp=17, lambda_pulse=0.0)
    counts = [len(_run_detect(cfg, 1, seed, span=10 * S)[1]) for seed in range(100)]
    assert abs(counts[0] - 200) < 3 * math.sqrt(200)
    assert abs(np.mean(counts) - 200) < 3 * math.sqrt(200 / 100)


def test_records_sorted_and_nonnegative():
    _, d = _run_detect(LinkConfig(ppm_order_exp=17), 1000, 3)
    assert np.all(np.diff(d.timestamps) > 0)
    assert d.timestamps.min() >= 0 and d.timestamps.max() < d.span
    rec = d[0]
    assert rec.provenance in ("signal", "dark", "leak")


def test_frame_counts_poisson_without_dead_time():
    det = DetectorConfig(dead_time=0)
    cfg = LinkConfig(ppm_order_exp=17, lambda_pulse=0.8, detector=det, rng_seed=5)
    run = simulate_link(cfg, 100_000, genie_timing=True)
    count = run.verdicts.count
    mu = expected_frame_mu(cfg)
    observed = np.array([np.sum(count == 0), np.sum(count == 1), np.sum(count == 2), np.sum(count >= 3)])
    pmf = stats.poisson.pmf([0, 1, 2], mu)
    expected = len(count) * np.append(pmf, 1 - pmf.sum())
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_click_model():
    assert merges_pulse_photons(DetectorConfig())
    assert not merges_pulse_photons(DetectorConfig(dead_time=0))
    cfg = LinkConfig(detector=DetectorConfig(dead_time=0))
    mu = expected_frame_mu(cfg)
    assert single_count_probability(cfg) == pytest.approx(mu * math.exp(-mu))
    # with merging, only noise can add a second count
    click = analytic_fer(LinkConfig())
    assert click < analytic_fer(cfg)
    assert click == pytest.approx(0.8316, abs=2e-4)


@pytest.mark.parametrize("suffix", [".bin", ".csv"])
def test_timestamp_io_round_trip(tmp_path, suffix):
    _, d = _run_detect(LinkConfig(ppm_order_exp=17), 2000, 4)
    path = tmp_path / f"ts{suffix}"
    write_timestamps(path, d)
    ts, prov = read_timestamps(path)
    assert (ts == d.timestamps).all()
    assert (prov == d.provenance).all()


def test_timestamp_io_plain_array(tmp_path):
    path = tmp_path / "plain.dat"
    write_timestamps(path, np.array([5, 10, 2**40]))
    ts, prov = read_timestamps(path)
    assert ts.tolist() == [5, 10, 2**40] and (prov == 255).all()
    with pytest.raises(ValueError):
        write_timestamps(path, np.array([-1]))
    path.write_bytes(b"\x00" * 10)
    with pytest.raises(ValueError):
        read_timestamps(path)


def test_detector_validation():
    with pytest.raises(ValueError):
        DetectorConfig(efficiency=1.2)
    with pytest.raises(ValueError):
        DetectorConfig(extinction_mode="other")
    assert DetectorConfig().jitter_sigma == pytest.approx(45 / 2.3548, rel=1e-4)


def test_dark_only_provenance():
    _, d = _run_detect(LinkConfig(ppm_order_exp=17, lambda_pulse=0.0), 1, 0, span=5 * S)
    assert (d.provenance == DARK).all()
