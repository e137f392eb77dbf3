"""Achievable PIE under bounded-distance Reed-Solomon errors-and-erasures decoding.

Each RS symbol is one PPM frame. A symbol scores 0 when correct, 1 when
erased and 2 when wrong; a block of ``n`` symbols fails to decode when the
score sum exceeds ``n - k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .config import LinkConfig
from .detector import analytic_fer, expected_frame_mu
from .exceptions import Infeasible
from .geometry import frame_geometry
from .oscillator import PS_PER_S

DEFAULT_TARGET_BLER = 1e-6
_DIRECT_LIMIT = 4096


@dataclass(frozen=True)
class SymbolChannelStats:
    p_correct: float
    p_error: float
    p_erasure: float

    def __post_init__(self):
        probs = (self.p_correct, self.p_error, self.p_erasure)
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities must be nonnegative and sum to 1, got {probs}")

    @classmethod
    def from_error_erasure(cls, p_error: float, p_erasure: float) -> SymbolChannelStats:
        return cls(max(0.0, 1.0 - p_error - p_erasure), p_error, p_erasure)

    @classmethod
    def from_tally(cls, tally) -> SymbolChannelStats:
        n = tally.n_frames
        return cls(tally.n_correct / n, tally.n_symbol_errors / n, tally.n_erased / n)

    @classmethod
    def from_config(cls, cfg: LinkConfig) -> SymbolChannelStats:
        """Analytic prediction: an error needs a missed pulse and exactly one noise count elsewhere."""
        geom = frame_geometry(cfg)
        signal = cfg.lambda_pulse * cfg.detector.efficiency
        noise = expected_frame_mu(cfg) - signal
        q = geom.slots_per_ppm_frame
        p_erasure = analytic_fer(cfg)
        p_error = math.exp(-signal) * noise * math.exp(-noise) * (q - 1) / q
        return cls.from_error_erasure(p_error, p_erasure)

    @property
    def score_pmf(self) -> np.ndarray:
        return np.array([self.p_correct, self.p_erasure, self.p_error])


@dataclass(frozen=True)
class RsCodeParams:
    n: int
    k: int
    target_bler: float = DEFAULT_TARGET_BLER

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError("need 1 <= k <= n")
        if not 0 < self.target_bler < 1:
            raise ValueError("target_bler must lie in (0, 1)")

    @property
    def rate(self) -> float:
        return self.k / self.n


def _clean(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def score_sum_distribution(stats: SymbolChannelStats, n: int) -> np.ndarray:
    """PMF of the block score sum (length ``2n + 1``).

    Small blocks use repeated direct convolution; larger ones square in the
    FFT domain, clipping round-off negatives and renormalising after each
    product (absolute error around 1e-15 per coefficient).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    base = stats.score_pmf
    if n <= _DIRECT_LIMIT:
        dist = np.array([1.0])
        for _ in range(n):
            dist = np.convolve(dist, base)
        return dist / dist.sum()
    result = np.array([1.0])
    power = base
    e = n
    while e:
        if e & 1:
            result = _clean(fftconvolve(result, power))
        e >>= 1
        if e:
            power = _clean(fftconvolve(power, power))
    return result


def _tails(stats: SymbolChannelStats, n: int) -> np.ndarray:
    """``tails[t] = P(score sum > t)`` for t = 0..2n."""
    dist = score_sum_distribution(stats, n)
    tails = np.concatenate([np.cumsum(dist[::-1])[::-1][1:], [0.0]])
    return np.clip(tails, 0.0, 1.0)


def block_error_prob(stats: SymbolChannelStats, n: int, k: int) -> float:
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    return float(_tails(stats, n)[n - k])


def max_rate(stats: SymbolChannelStats, n: int, target_bler: float = DEFAULT_TARGET_BLER) -> tuple[int, float]:
    """Largest ``k`` whose block error probability meets ``target_bler``.

    Block error is nonincreasing in ``n - k``, so the boundary is found by
    bisection on the tail of one score-sum distribution.
    """
    if not 0 < target_bler < 1:
        raise ValueError("target_bler must lie in (0, 1)")
    tails = _tails(stats, n)
    if tails[n - 1] > target_bler:
        raise Infeasible(f"even k=1 gives block error {tails[n - 1]:.3g} > {target_bler:g}")
    lo, hi = 0, n - 1  # search redundancy r = n - k in [0, n-1]
    while lo < hi:
        mid = (lo + hi) // 2
        if tails[mid] <= target_bler:
            hi = mid
        else:
            lo = mid + 1
    k = n - lo
    return k, k / n


def photons_per_frame(lambda_pulse: float, data_clock_ratio: float) -> float:
    if data_clock_ratio < 1 or lambda_pulse < 0:
        raise ValueError("need N >= 1 and lambda >= 0")
    return (1.0 + 1.0 / data_clock_ratio) * lambda_pulse


def pie(rate: float, ppm_order_exp: int, photons_per_ppm_frame: float) -> float:
    """Bits per incident photon."""
    if photons_per_ppm_frame <= 0:
        raise ValueError("photons_per_frame must be positive")
    return rate * ppm_order_exp / photons_per_ppm_frame


def clock_overhead_db(data_clock_ratio: float) -> float:
    if data_clock_ratio < 1:
        raise ValueError("N must be >= 1")
    return 10.0 * math.log10(1.0 + 1.0 / data_clock_ratio)


def coherent_limits() -> tuple[float, float]:
    """(dual-quadrature, single-quadrature) coherent-detection PIE limits in BIP."""
    dual = 1.0 / math.log(2.0)
    return dual, 2.0 * dual


def gap_db(pie_bip: float, reference_bip: float) -> float:
    return 10.0 * math.log10(pie_bip / reference_bip)


def data_rate(cfg: LinkConfig, rate: float) -> float:
    """Information rate in bit/s for code rate ``rate``."""
    geom = frame_geometry(cfg)
    per_frame_s = geom.superframe_duration / cfg.data_clock_ratio / PS_PER_S
    return cfg.ppm_order_exp * rate / per_frame_s


def default_block_length(ppm_order_exp: int) -> int:
    """Full-length RS over GF(2^M): one code symbol per PPM frame."""
    return 2**ppm_order_exp - 1


@dataclass(frozen=True)
class PieResult:
    n: int
    k: int
    rate: float
    photons_per_frame: float
    pie_bip: float
    data_rate_bps: float


def achievable_pie(stats: SymbolChannelStats, cfg: LinkConfig, n: int | None = None,
                   target_bler: float = DEFAULT_TARGET_BLER) -> PieResult:
    n = default_block_length(cfg.ppm_order_exp) if n is None else n
    k, rate = max_rate(stats, n, target_bler)
    ppf = photons_per_frame(cfg.lambda_pulse, cfg.data_clock_ratio)
    return PieResult(n, k, rate, ppf, pie(rate, cfg.ppm_order_exp, ppf), data_rate(cfg, rate))
