"""Command-line front end: ``ppmlink {sweep,reproduce,recover,pie-table,simulate}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .config import LinkConfig
from .detector import read_timestamps, write_timestamps
from .exceptions import NoAcquisition, TooFewTicks
from .harness import (
    PIE_TABLE_COLUMNS,
    RunSpec,
    load_yaml,
    pie_table,
    reproduce_reference_point,
    run_sweep,
    write_table,
)
from .link import simulate_link
from .recovery import ClockRecovery

REGION_NAMES = ("data", "guard", "clock", "outside")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _load(path) -> dict:
    return load_yaml(path) if path else {}


def _link(args) -> LinkConfig:
    return LinkConfig.from_dict(_load(args.config).get("link"))


def cmd_sweep(args) -> int:
    data = _load(args.config)
    if args.lambdas is not None:
        data["sweep"] = {"lambdas": _floats(args.lambdas)}
    elif args.ppf is not None:
        data["sweep"] = {"photons_per_frame": _floats(args.ppf)}
    for key in ("n_frames", "seed", "jobs", "block_length"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    data["output_dir"] = args.out
    spec = RunSpec.from_mapping(data)
    rows = run_sweep(spec)
    flagged = sum(r["status"] != "ok" for r in rows)
    print(f"wrote {len(rows)} rows to {Path(args.out) / 'results.csv'} ({flagged} flagged)")
    return 0


def cmd_reproduce(args) -> int:
    data = _load(args.config)
    cfg = LinkConfig.from_dict(data.get("link")) if "link" in data else None
    report = reproduce_reference_point(args.n_frames, args.seed, args.block_length, config=cfg)
    text = report.format()
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "reproduce.txt").write_text(text + "\n")
    return 0


def cmd_recover(args) -> int:
    cfg = _link(args)
    rparams = _load(args.config).get("recovery") or {}
    unknown = set(rparams) - {"gate_halfwidth", "outlier_threshold", "freq_search_halfwidth",
                              "clock_sampling_period"}
    if unknown:
        raise ValueError(f"unknown recovery keys: {sorted(unknown)}")
    ts, _ = read_timestamps(args.timestamps)
    rec = ClockRecovery(cfg, **rparams)
    try:
        rec.fit(ts)
    except (NoAcquisition, TooFewTicks) as exc:
        print(f"recovery failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    slots = rec.map_slots(ts)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp_ps", "superframe", "frame", "slot", "region"])
        for t, sf, fr, sl, rg in zip(np.sort(ts).tolist(), slots.superframe.tolist(), slots.frame.tolist(),
                                     slots.slot.tolist(), slots.region.tolist()):
            w.writerow([t, sf, fr, sl, REGION_NAMES[rg]])
    if args.diagnostics:
        rec.write_diagnostics(args.diagnostics)
    acq = rec.acquisition_
    print(f"{len(ts)} timestamps mapped; offset {acq.frequency_offset:.3e}, "
          f"{len(rec.ticks_)} of {len(rec.candidates_)} clock ticks accepted")
    return 0


def cmd_pie_table(args) -> int:
    base = _link(args)
    lambdas = _floats(args.lambdas) if args.lambdas else [base.lambda_pulse]
    rows = pie_table(base, lambdas, args.block_length)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_table(args.out, rows, PIE_TABLE_COLUMNS)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(PIE_TABLE_COLUMNS)
    for r in rows:
        w.writerow(["" if r[c] is None else (format(r[c], ".6g") if isinstance(r[c], float) else r[c])
                    for c in PIE_TABLE_COLUMNS])
    return 0


def cmd_simulate(args) -> int:
    cfg = _link(args).replace(rng_seed=args.seed)
    run = simulate_link(cfg, args.n_frames, genie_timing=True)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_timestamps(out, run.detections)
    if args.schedule:
        run.schedule.to_csv(args.schedule)
    print(f"{len(run.detections)} detections over {run.schedule.span} ps written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ppmlink", description="Photon-counting PPM link simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=False, seed=True):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--out", required=out_required, help="output path")
        if seed:
            sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("sweep", help="simulate a lambda sweep")
    common(sp, out_required=True)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--lambdas", help="comma-separated incident photons per pulse")
    g.add_argument("--ppf", help="comma-separated photons per PPM frame")
    sp.add_argument("--n-frames", dest="n_frames", type=int)
    sp.add_argument("--block-length", dest="block_length", type=int)
    sp.add_argument("--jobs", type=int)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("reproduce", help="report the reference operating point")
    common(sp)
    sp.add_argument("--n-frames", dest="n_frames", type=int, default=100_000)
    sp.add_argument("--block-length", dest="block_length", type=int)
    sp.set_defaults(func=cmd_reproduce, seed=0)

    sp = sub.add_parser("recover", help="map a timestamp file to slots")
    sp.add_argument("timestamps", help="binary or .csv timestamp file")
    common(sp, out_required=True, seed=False)
    sp.add_argument("--diagnostics", help="write per-superframe tick diagnostics CSV")
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("pie-table", help="analytic rate and PIE per lambda")
    common(sp, seed=False)
    sp.add_argument("--lambdas")
    sp.add_argument("--block-length", dest="block_length", type=int)
    sp.set_defaults(func=cmd_pie_table)

    sp = sub.add_parser("simulate", help="write a simulated timestamp stream")
    common(sp, out_required=True)
    sp.add_argument("--n-frames", dest="n_frames", type=int, default=10_000)
    sp.add_argument("--schedule", help="also write the transmitted pulse schedule CSV")
    sp.set_defaults(func=cmd_simulate, seed=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", 0) is None and args.command != "sweep":
        args.seed = 0
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
