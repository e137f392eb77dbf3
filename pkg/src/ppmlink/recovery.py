"""Clock and frame recovery from a bare timestamp stream.

Pipeline: :func:`acquire` (folding-histogram frequency search) ->
:func:`extract_clock_ticks` (gated tracking of the clock pulse) ->
:func:`remove_outliers` (sliding Theil-Sen residual test) ->
:func:`interpolate_timebase` (piecewise-linear rx -> tx grid map) ->
:func:`map_to_slots`.

Superframe 0 is the one whose clock pulse is the first to fall at a
nonnegative receiver time, i.e. the receiver is assumed to start recording
together with the transmitter. :class:`ClockRecovery` wraps the chain as a
scikit-learn style transformer.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_timestamps
from .config import LinkConfig
from .exceptions import NoAcquisition, TooFewTicks
from .geometry import FrameGeometry, frame_geometry

DATA_SLOT, GUARD, CLOCK_SLOT, OUTSIDE = 0, 1, 2, 3
REGION_NAMES = {DATA_SLOT: "data", GUARD: "guard", CLOCK_SLOT: "clock", OUTSIDE: "outside"}

MAD_TO_SIGMA = 1.4826
_MIN_ACQ_SUPERFRAMES = 10


@dataclass(frozen=True)
class RecoveryConfig:
    """Receiver tuning. Times in ps.

    ``clock_sampling_period`` of 0 keeps every accepted tick as a knot;
    otherwise ticks are averaged over windows of that length first.
    """

    gate_halfwidth: int = 20_000
    outlier_threshold: float = 5.0
    freq_search_halfwidth: float = 2e-6
    clock_sampling_period: int = 0
    outlier_window: int = 8
    min_residual_scale: float = 5.0
    acquisition_superframes: int = 256
    acquisition_max_span: int = 10**12
    bin_slots: int = 4

    def __post_init__(self):
        if self.gate_halfwidth <= 0:
            raise ValueError("gate_halfwidth must be positive")
        if self.outlier_threshold <= 0 or self.freq_search_halfwidth <= 0:
            raise ValueError("thresholds must be positive")
        if self.clock_sampling_period < 0:
            raise ValueError("clock_sampling_period must be >= 0")
        if self.outlier_window < 2:
            raise ValueError("outlier_window must be >= 2")

    def validate_for(self, cfg: LinkConfig) -> None:
        guard_time = cfg.guard_slots * cfg.slot_width
        if not self.gate_halfwidth < guard_time / 2:
            raise ValueError(f"gate_halfwidth {self.gate_halfwidth} ps must be < guard time / 2 = {guard_time / 2} ps")


@dataclass(frozen=True)
class Acquisition:
    frequency_offset: float
    phase: float  # rx time of the superframe-0 clock pulse
    period: float  # superframe period in rx time
    score: float
    mean_score: float


@dataclass(frozen=True)
class ClockTicks:
    superframe: np.ndarray
    time: np.ndarray

    def __len__(self):
        return len(self.superframe)


@dataclass(frozen=True)
class RecoveredTimebase:
    """Piecewise-linear map from receiver time to transmitter grid time.

    Inside the knot range the map interpolates; outside it follows
    ``head``/``tail`` lines ``(slope, intercept)`` giving rx time as a
    function of grid time. Without them the end segments are extended.
    """

    ticks: ClockTicks
    knots_rx: np.ndarray
    knots_grid: np.ndarray
    acquisition: Acquisition | None = None
    head: tuple[float, float] | None = None
    tail: tuple[float, float] | None = None

    def _segments(self, x, xs):
        return np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)

    def to_grid(self, rx_time) -> np.ndarray:
        x = np.asarray(rx_time, dtype=np.float64)
        i = self._segments(x, self.knots_rx)
        x0, x1 = self.knots_rx[i], self.knots_rx[i + 1]
        g0, g1 = self.knots_grid[i], self.knots_grid[i + 1]
        out = g0 + (x - x0) * (g1 - g0) / (x1 - x0)
        if self.head is not None:
            out = np.where(x < self.knots_rx[0], (x - self.head[1]) / self.head[0], out)
        if self.tail is not None:
            out = np.where(x > self.knots_rx[-1], (x - self.tail[1]) / self.tail[0], out)
        return out

    def to_rx(self, grid_time) -> np.ndarray:
        g = np.asarray(grid_time, dtype=np.float64)
        i = self._segments(g, self.knots_grid)
        x0, x1 = self.knots_rx[i], self.knots_rx[i + 1]
        g0, g1 = self.knots_grid[i], self.knots_grid[i + 1]
        out = x0 + (g - g0) * (x1 - x0) / (g1 - g0)
        if self.head is not None:
            out = np.where(g < self.knots_grid[0], self.head[0] * g + self.head[1], out)
        if self.tail is not None:
            out = np.where(g > self.knots_grid[-1], self.tail[0] * g + self.tail[1], out)
        return out

    def offset_trace(self) -> np.ndarray:
        """Fractional frequency offset of each knot segment (rx vs grid)."""
        return np.diff(self.knots_rx) / np.diff(self.knots_grid) - 1.0


@dataclass(frozen=True)
class SlotMap:
    """Per-timestamp grid coordinates.

    ``frame`` is the index within the superframe (``N`` = clock frame);
    ``slot`` is 1-based within that frame, guard slots continuing after
    ``2**M``. ``global_frame`` is ``superframe * N + frame`` for data and
    guard regions, -1 elsewhere.
    """

    superframe: np.ndarray
    frame: np.ndarray
    slot: np.ndarray
    region: np.ndarray
    global_frame: np.ndarray

    def __len__(self):
        return len(self.slot)

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.superframe, self.frame, self.slot, self.region]).astype(np.int64)


# -- acquisition -------------------------------------------------------------

def _max_bin_mass(events: np.ndarray, periods: np.ndarray, bin_width: float) -> np.ndarray:
    """Peak histogram count of ``events`` folded at each candidate period.

    Two binnings offset by half a bin are scored and the larger kept, so a
    peak straddling a bin edge is not halved.
    """
    scores = np.zeros(len(periods))
    if events.size == 0:
        return scores
    chunk = max(1, 2_000_000 // events.size)
    for lo in range(0, len(periods), chunk):
        p = periods[lo:lo + chunk, None]
        ph = np.mod(events[None, :], p)
        rows = np.arange(p.shape[0])[:, None]
        nbins = int(np.ceil(periods.max() / bin_width)) + 2
        for shift in (0.0, 0.5 * bin_width):
            idx = np.floor((ph + shift) / bin_width).astype(np.int64)
            key = (rows * nbins + idx).ravel()
            uniq, counts = np.unique(key, return_counts=True)
            best = np.zeros(p.shape[0])
            np.maximum.at(best, uniq // nbins, counts)
            scores[lo:lo + chunk] = np.maximum(scores[lo:lo + chunk], best)
    return scores


def _parabolic_vertex(y_m, y_0, y_p) -> float:
    denom = y_m - 2 * y_0 + y_p
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (y_m - y_p) / denom, -0.5, 0.5))


def acquire(timestamps, cfg: LinkConfig, rcfg: RecoveryConfig | None = None) -> Acquisition:
    """Estimate the superframe period and clock-pulse phase.

    A coarse grid over ``+-freq_search_halfwidth`` is scored on the first
    ``acquisition_superframes`` superframes, then refined on windows of
    doubling length (capped by ``acquisition_max_span``); the last stage is
    refined by a parabola through the score and a least-squares fit to the
    events in the peak.
    """
    rcfg = rcfg or RecoveryConfig()
    t = check_timestamps(timestamps).astype(np.float64)
    geom = frame_geometry(cfg)
    period = float(geom.superframe_duration)
    bin_width = float(rcfg.bin_slots * geom.slot_width)
    if t.size == 0 or t[-1] < _MIN_ACQ_SUPERFRAMES * period:
        raise ValueError(f"acquisition needs at least {_MIN_ACQ_SUPERFRAMES} superframes of data")
    n_sf = int(t[-1] // period) + 1

    k = min(rcfg.acquisition_superframes, n_sf)
    step = bin_width / (2.0 * k * period)
    n_half = int(np.ceil(rcfg.freq_search_halfwidth / step))
    deltas = np.arange(-n_half, n_half + 1) * step
    events = t[t < k * period]
    scores = _max_bin_mass(events, period * (1 + deltas), bin_width)
    best = int(np.argmax(scores))
    mean_score = float(scores.mean())
    peak = float(scores[best])
    if peak < 3.0 or peak < 3.0 * mean_score:
        raise NoAcquisition(f"peak score {peak:.0f} vs mean {mean_score:.2f}")
    delta = float(deltas[best])

    while 2 * k <= n_sf and 2 * k * period <= rcfg.acquisition_max_span:
        k *= 2
        new_step = bin_width / (2.0 * k * period)
        n_half = int(np.ceil(4 * step / new_step))
        step = new_step
        deltas = delta + np.arange(-n_half, n_half + 1) * step
        events = t[t < k * period]
        scores = _max_bin_mass(events, period * (1 + deltas), bin_width)
        best = int(np.argmax(scores))
        delta = float(deltas[best])
    if 0 < best < len(scores) - 1:
        delta += step * _parabolic_vertex(scores[best - 1], scores[best], scores[best + 1])

    p_hat = period * (1 + delta)
    ph = np.mod(events, p_hat)
    counts, edges = np.histogram(ph, bins=int(np.ceil(p_hat / bin_width)), range=(0, p_hat))
    centre = 0.5 * (edges[np.argmax(counts)] + edges[np.argmax(counts) + 1])
    wrapped = (ph - centre + p_hat / 2) % p_hat - p_hat / 2
    near = np.abs(wrapped) < 2 * bin_width
    phase = (centre + float(np.median(wrapped[near]))) % p_hat

    # least-squares polish on events lined up with the peak
    kk = np.rint((events - phase) / p_hat)
    resid = events - (phase + kk * p_hat)
    sel = np.abs(resid) < 2 * bin_width
    if sel.sum() >= 3 and np.unique(kk[sel]).size >= 2:
        slope, intercept = np.polyfit(kk[sel], events[sel], 1)
        p_hat, phase = float(slope), float(intercept)
        if phase < 0 or phase >= p_hat:
            phase = phase % p_hat
    return Acquisition(p_hat / period - 1.0, phase, p_hat, peak, mean_score)


# -- tick extraction and cleaning --------------------------------------------

def _theil_sen(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise Theil-Sen line fits for ``(rows, m)`` arrays."""
    pairs = np.array(list(combinations(range(x.shape[1]), 2)))
    dx = x[:, pairs[:, 1]] - x[:, pairs[:, 0]]
    dy = y[:, pairs[:, 1]] - y[:, pairs[:, 0]]
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(dx != 0, dy / dx, np.nan)
    slope = np.nanmedian(slopes, axis=1)
    intercept = np.median(y - slope[:, None] * x, axis=1)
    return slope, intercept


def extract_clock_ticks(timestamps, acquisition: Acquisition, cfg: LinkConfig,
                        rcfg: RecoveryConfig | None = None) -> ClockTicks:
    """Gate each predicted clock-pulse time and keep unambiguous hits.

    The prediction line is a Theil-Sen fit over the most recent candidate
    ticks, so it follows the clock causally; until two ticks exist the
    acquisition line is used.
    """
    rcfg = rcfg or RecoveryConfig()
    t = check_timestamps(timestamps)
    g = rcfg.gate_halfwidth
    hist_k: deque = deque(maxlen=rcfg.outlier_window)
    hist_t: deque = deque(maxlen=rcfg.outlier_window)
    slope, anchor_k, anchor_t = acquisition.period, 0, acquisition.phase
    out_k, out_t = [], []
    if t.size == 0:
        return ClockTicks(np.empty(0, np.int64), np.empty(0, np.int64))
    last = t[-1]
    k = 0
    pred = anchor_t
    while pred - g <= last:
        lo = np.searchsorted(t, pred - g, side="left")
        hi = np.searchsorted(t, pred + g, side="right")
        if hi - lo == 1:
            tick = int(t[lo])
            out_k.append(k)
            out_t.append(tick)
            hist_k.append(k)
            hist_t.append(tick)
            if len(hist_k) >= 2:
                xs = np.asarray(hist_k, np.float64) - k
                ys = np.asarray(hist_t, np.float64) - tick
                s, c = _theil_sen(xs[None, :], ys[None, :])
                slope, anchor_k, anchor_t = float(s[0]), k, tick + float(c[0])
            else:
                anchor_k, anchor_t = k, float(tick)
        k += 1
        pred = anchor_t + (k - anchor_k) * slope
    return ClockTicks(np.asarray(out_k, np.int64), np.asarray(out_t, np.int64))


def _neighbour_rows(n: int, pool: np.ndarray, m: int) -> np.ndarray:
    """For each of ``n`` candidates, the ``m`` nearest pool members other than itself."""
    rows = np.empty((n, m), dtype=np.int64)
    pool = np.asarray(pool)
    in_pool = np.zeros(n, bool)
    in_pool[pool] = True
    size = len(pool)
    for i in range(n):
        pos = int(np.searchsorted(pool, i))
        if in_pool[i]:
            start = min(max(pos - m // 2, 0), size - m - 1)
            window = pool[start:start + m + 1]
            rows[i] = window[window != i][:m]
        else:
            start = min(max(pos - m // 2, 0), size - m)
            rows[i] = pool[start:start + m]
    return rows


def _loo_residuals(k, t, pool, m):
    """Residual of each candidate against a Theil-Sen line through its pool neighbours."""
    rows = _neighbour_rows(len(k), pool, m)
    x = k[rows] - k[:, None]
    y = t[rows] - t[:, None]
    _, intercept = _theil_sen(x, y)
    return -intercept  # the candidate itself sits at x=0, y=0


def _residual_test(k, t, pool, rcfg: RecoveryConfig):
    """Flag candidates whose residual exceeds ``threshold`` robust scales.

    The scale is the MAD of the leave-one-out residuals of the ``2m``
    nearest pool members, floored at ``min_residual_scale``.
    """
    m = rcfg.outlier_window
    resid = _loo_residuals(k, t, pool, m)
    width = min(2 * m, len(pool) - 1)
    nb = _neighbour_rows(len(k), pool, width)
    r_nb = resid[nb]
    med = np.median(r_nb, axis=1)
    scale = MAD_TO_SIGMA * np.median(np.abs(r_nb - med[:, None]), axis=1)
    scale = np.maximum(scale, rcfg.min_residual_scale)
    return np.abs(resid - med) <= rcfg.outlier_threshold * scale, resid


def remove_outliers(candidates: ClockTicks, rcfg: RecoveryConfig | None = None) -> ClockTicks:
    """Drop ticks that do not sit on the local line of their neighbours.

    Two deterministic passes: the first judges every candidate against its
    nearest candidates, the second against the nearest survivors of the
    first pass.
    """
    rcfg = rcfg or RecoveryConfig()
    m = rcfg.outlier_window
    n = len(candidates)
    if n < m + 1:
        raise TooFewTicks(f"{n} candidate ticks, need at least {m + 1}")
    k = candidates.superframe.astype(np.float64)
    t = candidates.time.astype(np.float64)
    keep1, _ = _residual_test(k, t, np.arange(n), rcfg)
    pool = np.flatnonzero(keep1)
    if len(pool) < m + 1:
        raise TooFewTicks(f"only {len(pool)} ticks survive the first pass")
    keep2, _ = _residual_test(k, t, pool, rcfg)
    if keep2.sum() < m:
        raise TooFewTicks(f"only {int(keep2.sum())} ticks survive outlier removal")
    return ClockTicks(candidates.superframe[keep2], candidates.time[keep2])


def _end_line(grid, rx, anchor_grid, anchor_rx):
    """Least-squares slope through end knots, pinned to the outermost knot."""
    if len(grid) < 2:
        return None
    dg, dr = grid - anchor_grid, rx - anchor_rx
    slope = float(np.dot(dg, dr) / np.dot(dg, dg))
    return slope, float(anchor_rx - slope * anchor_grid)


def interpolate_timebase(ticks: ClockTicks, rcfg: RecoveryConfig | None, geom: FrameGeometry,
                         acquisition: Acquisition | None = None) -> RecoveredTimebase:
    """Piecewise-linear timebase through the accepted ticks.

    Beyond the first and last knots, the map extrapolates with a slope fitted
    to the ``outlier_window`` outermost knots; a single end segment would
    amplify tick jitter by the extrapolation lever arm.
    """
    rcfg = rcfg or RecoveryConfig()
    if len(ticks) < 2:
        raise TooFewTicks("need at least two ticks to interpolate")
    rx = ticks.time.astype(np.float64)
    grid = ticks.superframe.astype(np.float64) * geom.superframe_duration + geom.clock_frame_offset
    if rcfg.clock_sampling_period > 0:
        group = np.floor(rx / rcfg.clock_sampling_period).astype(np.int64)
        _, inv, cnt = np.unique(group, return_inverse=True, return_counts=True)
        rx = np.bincount(inv, weights=rx) / cnt
        grid = np.bincount(inv, weights=grid) / cnt
        if len(rx) < 2:
            raise TooFewTicks("fewer than two clock sampling periods contain ticks")
    m = min(rcfg.outlier_window, len(rx))
    head = _end_line(grid[:m], rx[:m], grid[0], rx[0])
    tail = _end_line(grid[-m:], rx[-m:], grid[-1], rx[-1])
    return RecoveredTimebase(ticks, rx, grid, acquisition, head, tail)


def map_to_slots(timestamps, timebase: RecoveredTimebase, cfg: LinkConfig | FrameGeometry) -> SlotMap:
    """Assign each timestamp to the nearest slot of the transmitter grid."""
    geom = cfg if isinstance(cfg, FrameGeometry) else frame_geometry(cfg)
    t = np.asarray(timestamps, dtype=np.float64)
    grid = timebase.to_grid(t)
    q = np.floor(grid / geom.slot_width + 0.5).astype(np.int64)
    sf = np.floor_divide(q, geom.superframe_slots)
    r = q - sf * geom.superframe_slots
    n = geom.data_clock_ratio
    frame = np.minimum(r // geom.guarded_frame_slots, n)
    within = r - frame * geom.guarded_frame_slots
    region = np.where(frame == n, CLOCK_SLOT, np.where(within < geom.slots_per_ppm_frame, DATA_SLOT, GUARD))
    region = np.where(sf < 0, OUTSIDE, region)
    global_frame = np.where((region == DATA_SLOT) | (region == GUARD), sf * n + frame, -1)
    return SlotMap(sf, frame, within + 1, region.astype(np.uint8), global_frame)


# -- estimator ---------------------------------------------------------------

class ClockRecovery(TransformerMixin, BaseEstimator):
    """Recover the transmitter slot grid from detection timestamps.

    ``fit`` learns the timebase from a timestamp stream; ``transform`` maps
    timestamps (the same stream or a later part of it) to
    ``[superframe, frame, slot, region]`` rows.

    Parameters
    ----------
    link_config : LinkConfig, optional
        Frame geometry of the link. Defaults to ``LinkConfig()``.
    gate_halfwidth, outlier_threshold, freq_search_halfwidth, clock_sampling_period
        See :class:`RecoveryConfig`.
    """

    def __init__(self, link_config=None, gate_halfwidth=20_000, outlier_threshold=5.0,
                 freq_search_halfwidth=2e-6, clock_sampling_period=0):
        self.link_config = link_config
        self.gate_halfwidth = gate_halfwidth
        self.outlier_threshold = outlier_threshold
        self.freq_search_halfwidth = freq_search_halfwidth
        self.clock_sampling_period = clock_sampling_period

    def _configs(self):
        cfg = self.link_config if self.link_config is not None else LinkConfig()
        rcfg = RecoveryConfig(
            gate_halfwidth=self.gate_halfwidth,
            outlier_threshold=self.outlier_threshold,
            freq_search_halfwidth=self.freq_search_halfwidth,
            clock_sampling_period=self.clock_sampling_period,
        )
        rcfg.validate_for(cfg)
        return cfg, rcfg

    def fit(self, X, y=None):
        cfg, rcfg = self._configs()
        t = check_timestamps(X)
        self.acquisition_ = acquire(t, cfg, rcfg)
        self.candidates_ = extract_clock_ticks(t, self.acquisition_, cfg, rcfg)
        self.ticks_ = remove_outliers(self.candidates_, rcfg)
        self.geometry_ = frame_geometry(cfg)
        self.timebase_ = interpolate_timebase(self.ticks_, rcfg, self.geometry_, self.acquisition_)
        self.n_timestamps_ = len(t)
        return self

    def map_slots(self, X) -> SlotMap:
        check_is_fitted(self, "timebase_")
        return map_to_slots(check_timestamps(X), self.timebase_, self.geometry_)

    def transform(self, X):
        return self.map_slots(X).as_array()

    def write_diagnostics(self, path) -> None:
        """Per-superframe tick presence, residuals and offset trace as CSV."""
        check_is_fitted(self, "timebase_")
        tb, geom = self.timebase_, self.geometry_
        cand = dict(zip(self.candidates_.superframe.tolist(), self.candidates_.time.tolist()))
        accepted = set(self.ticks_.superframe.tolist())
        n_sf = int(max(cand, default=-1)) + 1
        trace = tb.offset_trace()
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["superframe", "tick_present", "tick_accepted", "tick_time_ps",
                        "residual_ps", "offset_estimate"])
            for k in range(n_sf):
                grid = k * geom.superframe_duration + geom.clock_frame_offset
                seg = int(np.clip(np.searchsorted(tb.knots_grid, grid, side="right") - 1, 0, len(trace) - 1))
                if k in cand:
                    resid = cand[k] - float(tb.to_rx(grid))
                    w.writerow([k, 1, int(k in accepted), cand[k], f"{resid:.3f}", f"{trace[seg]:.6e}"])
                else:
                    w.writerow([k, 0, 0, "", "", f"{trace[seg]:.6e}"])
