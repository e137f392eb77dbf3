import numpy as np
import pytest

from ppmlink import OscillatorConfig, composite_clock, realize_clock, to_local_time
from ppmlink.oscillator import ClockPath, diffusion_for_drift

S = 10**12


def test_ideal_path_is_zero_and_identity():
    p = realize_clock(OscillatorConfig(), 3 * S)
    assert not p.phase.any()
    t = np.array([0, 12345, 2 * S])
    assert (to_local_time(p, t) == t).all()


def test_pure_ramp():
    p = realize_clock(OscillatorConfig(fractional_frequency_offset=1e-6), 3 * S)
    assert p.phase_at(S) == pytest.approx(1e6, abs=1e-6)
    assert to_local_time(p, 2 * S) == pytest.approx(2 * S + 2e6, abs=1e-3)


def test_linear_interpolation_midpoint():
    p = ClockPath(1000, np.array([0.0, 10.0]), 1000)
    assert p.phase_at(500) == pytest.approx(5.0)


def test_out_of_span_rejected():
    p = realize_clock(OscillatorConfig(), S)
    with pytest.raises(ValueError):
        to_local_time(p, S + 1)
    with pytest.raises(ValueError):
        to_local_time(p, -1)


def test_diffusion_needs_rng():
    with pytest.raises(ValueError):
        realize_clock(OscillatorConfig(random_walk_diffusion=1.0), S)


def test_wiener_variance_monte_carlo():
    d, span = 4e5, S // 10
    rng = np.random.default_rng(7)
    end = np.array([realize_clock(OscillatorConfig(random_walk_diffusion=d), span, rng=rng).phase[-1]
                    for _ in range(10_000)])
    expected = d * span / S
    assert abs(end.var() / expected - 1) < 0.05


def test_increments_uncorrelated():
    p = realize_clock(OscillatorConfig(random_walk_diffusion=1e6), 50 * S, rng=np.random.default_rng(3))
    inc = np.diff(p.phase)
    assert abs(np.corrcoef(inc[:-1], inc[1:])[0, 1]) < 0.05


def test_composite_and_calibration():
    c = composite_clock(OscillatorConfig(1e-6, 3.0, 10.0), OscillatorConfig(4e-7, 4.0, 5.0))
    assert c.fractional_frequency_offset == pytest.approx(6e-7)
    assert c.white_phase_noise_rms == pytest.approx(5.0)
    assert c.random_walk_diffusion == 15.0
    assert diffusion_for_drift(50, 0.01) == pytest.approx(2.5e5)


@pytest.mark.parametrize("kw", [{"fractional_frequency_offset": 1e-3}, {"random_walk_diffusion": -1},
                                {"white_phase_noise_rms": -1}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        OscillatorConfig(**kw)
