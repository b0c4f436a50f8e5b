"""Four-fold rate and phase-maximized fidelity versus coincidence window.

Simulates the swap preset (or reads an existing record) and writes
``fig4.csv`` and ``fig4.json`` with the log-log slopes of the small
(<= 150 ps) and large (>= 400 ps) window regimes.

    python scripts/fig4_sweep.py --out runs/fig4
    python scripts/fig4_sweep.py --record runs/swap/record.astr --out runs/fig4 --bootstrap 200
    python scripts/fig4_sweep.py --no-strays --out runs/fig4-clean
"""
from __future__ import annotations

import argparse
import json
from dataclasses import replace
from pathlib import Path

from asyncswap import pipeline
from asyncswap.config import load_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="paper-swap")
    ap.add_argument("--record", help="analyze this record instead of simulating")
    ap.add_argument("--out", required=True)
    ap.add_argument("--windows", help="comma-separated grid in ps (default: preset grid)")
    ap.add_argument("--bootstrap", type=int, default=0)
    ap.add_argument("--hours", type=float, help="override the simulated duration")
    ap.add_argument("--no-strays", action="store_true", help="zero stray and dark rates")
    args = ap.parse_args()

    cfg = load_config(preset=args.preset)
    if args.hours:
        cfg = replace(cfg, duration_s=args.hours * 3600)
    if args.no_strays:
        cfg = replace(cfg, stray_rate_hz=(0.0,) * 4, dark_rate_hz=(0.0,) * 4)
    windows = [int(w) for w in args.windows.split(",")] if args.windows else list(cfg.sweep_windows_ps)
    if max(windows) > cfg.gate_window_ps:
        cfg = replace(cfg, gate_window_ps=max(windows))

    out = Path(args.out)
    record = args.record
    if record is None:
        pipeline.run_simulate(cfg, out)
        record = out / pipeline.RECORD_NAME
    sweep = pipeline.run_fig4_sweep(record, windows, cfg, out, args.bootstrap)
    print(pipeline.fig4_table(sweep), end="")
    print(json.dumps(sweep["summary"], indent=2))


if __name__ == "__main__":
    main()
