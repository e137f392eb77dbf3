"""Batch sweeps, result tables and the reference operating-point report.

``results.csv`` and ``pie_curve.csv`` start with a ``# ppmlink-results v1``
line; the column sets are listed in ``RESULT_COLUMNS`` and ``PIE_COLUMNS``.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .config import DetectorConfig, LinkConfig
from .demod import CAUSE_NAMES, dcef_ber_prediction
from .detector import analytic_fer, expected_frame_mu
from .exceptions import Infeasible
from .fec import (
    DEFAULT_TARGET_BLER,
    SymbolChannelStats,
    achievable_pie,
    coherent_limits,
    default_block_length,
    gap_db,
    photons_per_frame,
)
from .link import simulate_link

log = logging.getLogger(__name__)

SCHEMA_VERSION = "ppmlink-results v1"
RESULT_COLUMNS = [
    "point", "lambda", "photons_per_frame", "mu", "n_frames", "status",
    "fer", "fer_pred", "ser", "ber", "ber_dcef_pred",
    "n_erased", "n_symbol_errors", "n_bit_errors",
    *(f"cause_{name}" for name in CAUSE_NAMES.values()),
    "n", "k", "rate", "pie_bip", "data_rate_bps",
]
PIE_COLUMNS = ["photons_per_frame", "rate", "pie_bip", "fer", "ber"]

REFERENCE_POINT = {"pie_bip": 12.5, "data_rate_bps": 13_940.0, "rate": 0.154,
               "gap_dual_db": 9.4, "gap_single_db": 6.4}


@dataclass
class RunSpec:
    """One sweep over incident photons per pulse.

    Exactly one of ``lambdas`` or ``photons_per_frame`` is given; the latter
    is converted with ``lambda = ppf / (1 + 1/N)``.
    """

    base: LinkConfig = field(default_factory=LinkConfig)
    lambdas: list[float] | None = None
    photons_per_frame: list[float] | None = None
    n_frames: int = 10_000
    distinct_frames: int | None = None
    output_dir: str | Path | None = None
    seed: int = 0
    block_length: int | None = None
    target_bler: float = DEFAULT_TARGET_BLER
    recovery: dict[str, Any] = field(default_factory=dict)
    genie_timing: bool = False
    jobs: int = 1

    def __post_init__(self):
        if (self.lambdas is None) == (self.photons_per_frame is None):
            raise ValueError("give exactly one of lambdas or photons_per_frame")
        if not self.points():
            raise ValueError("sweep is empty")
        if min(self.points()) < 0:
            raise ValueError("sweep values must be >= 0")
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        if self.n_frames < 1000:
            log.warning("n_frames=%d is below 1e3; statistics will be coarse", self.n_frames)

    def points(self) -> list[float]:
        if self.lambdas is not None:
            return [float(x) for x in self.lambdas]
        n = self.base.data_clock_ratio
        return [float(p) / (1.0 + 1.0 / n) for p in self.photons_per_frame]

    def point_seed(self, index: int) -> int:
        ss = np.random.SeedSequence([self.seed, index])
        return int(ss.generate_state(1, np.uint64)[0])

    @classmethod
    def from_mapping(cls, data: dict[str, Any] | None) -> RunSpec:
        """Build from the YAML schema documented in the README."""
        data = dict(data or {})
        link = LinkConfig.from_dict(data.pop("link", None))
        sweep = dict(data.pop("sweep", None) or {"lambdas": [link.lambda_pulse]})
        known = {"n_frames", "distinct_frames", "output_dir", "seed", "block_length",
                 "target_bler", "recovery", "genie_timing", "jobs"}
        unknown = set(data) - known
        if unknown or set(sweep) - {"lambdas", "photons_per_frame"}:
            raise ValueError(f"unknown config keys: {sorted(unknown | (set(sweep) - {'lambdas', 'photons_per_frame'}))}")
        return cls(base=link, **sweep, **data)

    @classmethod
    def from_yaml(cls, path) -> RunSpec:
        return cls.from_mapping(load_yaml(path))


def load_yaml(path) -> dict[str, Any]:
    text = Path(path).read_text()
    data = yaml.safe_load(text) if text.strip() else {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    return data


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else format(x, ".10g")
    return str(x)


def _run_point(spec: RunSpec, index: int, lam: float) -> dict[str, Any]:
    cfg = spec.base.replace(lambda_pulse=lam, rng_seed=spec.point_seed(index))
    run = simulate_link(cfg, spec.n_frames, spec.distinct_frames, spec.recovery or None, spec.genie_timing)
    t = run.tally
    n = spec.block_length or default_block_length(cfg.ppm_order_exp)
    row: dict[str, Any] = {
        "point": index,
        "lambda": lam,
        "photons_per_frame": photons_per_frame(lam, cfg.data_clock_ratio),
        "mu": expected_frame_mu(cfg),
        "n_frames": t.n_frames,
        "status": run.status,
        "fer": t.fer,
        "fer_pred": analytic_fer(cfg),
        "ser": t.ser,
        "ber": t.ber,
        "ber_dcef_pred": dcef_ber_prediction(cfg),
        "n_erased": t.n_erased,
        "n_symbol_errors": t.n_symbol_errors,
        "n_bit_errors": t.n_bit_errors,
        "n": n, "k": 0, "rate": 0.0, "pie_bip": None, "data_rate_bps": 0.0,
    }
    for name in CAUSE_NAMES.values():
        row[f"cause_{name}"] = t.cause_counts.get(name, 0)
    if lam > 0 and t.n_decided:
        try:
            res = achievable_pie(SymbolChannelStats.from_tally(t), cfg, n, spec.target_bler)
            row.update(k=res.k, rate=res.rate, pie_bip=res.pie_bip, data_rate_bps=res.data_rate_bps)
        except Infeasible:
            if row["status"] == "ok":
                row["status"] = "infeasible"
    elif row["status"] == "ok":
        row["status"] = "all_erased"
    return row


def run_sweep(spec: RunSpec) -> list[dict[str, Any]]:
    """Simulate every sweep point and write the result tables.

    Each point draws its own seed from ``(spec.seed, point index)``, so rows
    are identical whether points run serially or in a process pool.
    """
    pts = spec.points()
    if spec.jobs > 1 and len(pts) > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            rows = list(pool.map(_run_point, [spec] * len(pts), range(len(pts)), pts))
    else:
        rows = [_run_point(spec, i, lam) for i, lam in enumerate(pts)]
    if spec.output_dir is not None:
        out = Path(spec.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_table(out / "results.csv", rows, RESULT_COLUMNS)
        write_table(out / "pie_curve.csv", rows, PIE_COLUMNS)
    return rows


def write_table(path, rows: list[dict[str, Any]], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def read_table(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != f"# {SCHEMA_VERSION}":
            raise ValueError(f"{path}: unexpected schema line {header!r}")
        return list(csv.DictReader(fh))


def pie_table(base: LinkConfig, lambdas, block_length: int | None = None,
              target_bler: float = DEFAULT_TARGET_BLER) -> list[dict[str, Any]]:
    """Analytic rate and PIE per lambda, no simulation."""
    rows = []
    for lam in lambdas:
        cfg = base.replace(lambda_pulse=float(lam))
        n = block_length or default_block_length(cfg.ppm_order_exp)
        row = {"lambda": float(lam), "photons_per_frame": photons_per_frame(lam, cfg.data_clock_ratio),
               "fer": analytic_fer(cfg), "n": n, "k": 0, "rate": 0.0, "pie_bip": None, "data_rate_bps": 0.0}
        if lam > 0:
            try:
                res = achievable_pie(SymbolChannelStats.from_config(cfg), cfg, n, target_bler)
                row.update(k=res.k, rate=res.rate, pie_bip=res.pie_bip, data_rate_bps=res.data_rate_bps)
            except Infeasible:
                pass
        rows.append(row)
    return rows


PIE_TABLE_COLUMNS = ["lambda", "photons_per_frame", "fer", "n", "k", "rate", "pie_bip", "data_rate_bps"]


@dataclass(frozen=True)
class PointReport:
    n_frames: int
    fer: float
    fer_pred: float
    ber: float | None
    ber_dcef_pred: float
    n: int
    k: int
    rate: float
    pie_bip: float
    data_rate_bps: float
    gap_dual_db: float
    gap_single_db: float
    status: str

    def format(self) -> str:
        p = REFERENCE_POINT
        ber = "n/a" if self.ber is None else f"{self.ber:.3e}"
        lines = [
            f"frames simulated       {self.n_frames}  (status {self.status})",
            f"FER measured           {self.fer:.5f}   analytic {self.fer_pred:.5f}",
            f"BER measured           {ber}   DCEF prediction {self.ber_dcef_pred:.3e}",
            f"RS code (n, k)         ({self.n}, {self.k})",
            f"code rate              {self.rate:.4f}   reference {p['rate']}",
            f"PIE [bit/photon]       {self.pie_bip:.3f}    reference {p['pie_bip']}",
            f"data rate [kbit/s]     {self.data_rate_bps / 1e3:.3f}   reference {p['data_rate_bps'] / 1e3:.2f}",
            f"gap dual-quad [dB]     {self.gap_dual_db:.2f}     reference {p['gap_dual_db']}",
            f"gap single-quad [dB]   {self.gap_single_db:.2f}     reference {p['gap_single_db']}",
        ]
        return "\n".join(lines)


def reproduce_reference_point(n_frames: int = 100_000, seed: int = 0, block_length: int | None = None,
                          target_bler: float = DEFAULT_TARGET_BLER,
                          config: LinkConfig | None = None) -> PointReport:
    """Simulate the 2^19-PPM, N=10, lambda=0.213 operating point and size the code."""
    cfg = (config or LinkConfig(ppm_order_exp=19, data_clock_ratio=10, lambda_pulse=0.213,
                                detector=DetectorConfig())).replace(rng_seed=seed)
    run = simulate_link(cfg, n_frames)
    t = run.tally
    n = block_length or default_block_length(cfg.ppm_order_exp)
    res = achievable_pie(SymbolChannelStats.from_tally(t), cfg, n, target_bler)
    dual, single = coherent_limits()
    return PointReport(
        n_frames=t.n_frames, fer=t.fer, fer_pred=analytic_fer(cfg), ber=t.ber,
        ber_dcef_pred=dcef_ber_prediction(cfg), n=n, k=res.k, rate=res.rate,
        pie_bip=res.pie_bip, data_rate_bps=res.data_rate_bps,
        gap_dual_db=gap_db(res.pie_bip, dual), gap_single_db=gap_db(res.pie_bip, single),
        status=run.status,
    )
