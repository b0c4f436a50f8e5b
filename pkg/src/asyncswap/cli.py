"""Command line entry point: ``asyncswap <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 I/O or record error,
4 analysis degraded (some windows skipped).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from . import tomography as tomo
from .config import PRESETS, ConfigError, load_config
from .record import RecordFormatError, read_record
from .states import NonPhysicalStateError, entanglement_report, loads_density
from .tdc import InsufficientCounts, StartStopHistogram, TauCNotEstimable, start_stop_histogram, estimate_tau_c

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DEGRADED = 0, 2, 3, 4


def _windows(text: str | None):
    if text is None:
        return None
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad window list {text!r}") from None


def _config(args):
    return load_config(args.config, args.preset, {"seed": getattr(args, "seed", None)})


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    info = pipeline.run_simulate(cfg, args.out)
    print(json.dumps(info, indent=2))
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _config(args)
    windows = _windows(args.windows) or list(cfg.windows_ps)
    res = pipeline.run_analyze(args.record, windows, cfg, args.out)
    sys.stdout.write(pipeline.report_table(res.report))
    return EXIT_DEGRADED if res.degraded else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    windows = _windows(args.windows) or list(cfg.sweep_windows_ps)
    sweep = pipeline.run_fig4_sweep(args.record, windows, cfg, args.out, args.bootstrap)
    sys.stdout.write(pipeline.fig4_table(sweep))
    print(json.dumps(sweep["summary"], indent=2))
    for w in sweep["summary"]["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_DEGRADED if sweep["degraded"] else EXIT_OK


def cmd_tomo(args) -> int:
    counts = tomo.CountTable.from_text(Path(args.counts).read_text())
    cfg = _config(args)
    res = tomo.mle_reconstruct(counts, cfg.epsilon, cfg.tol, cfg.max_iter)
    metrics = {k: v for k, v in entanglement_report(res.rho).as_dict().items() if v is not None}
    if args.bootstrap:
        res.bootstrap_std = tomo.bootstrap_errors(counts, args.bootstrap, rng=cfg.seed,
                                                  epsilon=cfg.epsilon, tol=cfg.tol, max_iter=cfg.max_iter)
    _emit(res.to_text(metrics), args.out)
    return EXIT_OK


def cmd_metrics(args) -> int:
    rho = loads_density(Path(args.rho).read_text())
    rep = {k: v for k, v in entanglement_report(rho).as_dict().items() if v is not None}
    _emit(json.dumps(rep, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_tauc(args) -> int:
    if args.hist:
        hist = StartStopHistogram.from_text(Path(args.hist).read_text())
    elif args.record:
        hist = start_stop_histogram(read_record(args.record), args.start, args.stop, 1, args.range)
    else:
        raise ConfigError("tauc needs --hist or --record")
    if args.out:
        Path(args.out).write_text(hist.to_text())
    try:
        tau_c = estimate_tau_c(hist, args.tau_j)
    except (InsufficientCounts, TauCNotEstimable) as exc:
        print(f"tau_c not estimable: {exc}", file=sys.stderr)
        return EXIT_DEGRADED
    print(f"tau_c_ps,{tau_c:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asyncswap", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, record=False, out_required=False):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--preset", choices=PRESETS, help="built-in preset used as the base config")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", required=out_required, help="output directory or file")
        if record:
            sp.add_argument("--record", required=True, help="timestamp record file")

    sp = sub.add_parser("simulate", help="generate a timestamp record")
    common(sp, out_required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("analyze", help="four-folds, tomography and metrics per window")
    common(sp, record=True, out_required=True)
    sp.add_argument("--windows", help="comma-separated window widths in ps")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("sweep", help="rate and fidelity versus window with log-log slopes")
    common(sp, record=True, out_required=True)
    sp.add_argument("--windows", help="comma-separated window widths in ps")
    sp.add_argument("--bootstrap", type=int, default=0, help="bootstrap resamples per window (0: off)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("tomo", help="count table -> reconstructed density operator")
    common(sp)
    sp.add_argument("--counts", required=True, help="count table file")
    sp.add_argument("--bootstrap", type=int, default=0)
    sp.set_defaults(func=cmd_tomo)

    sp = sub.add_parser("metrics", help="density operator -> entanglement report")
    common(sp)
    sp.add_argument("--rho", required=True, help="density operator text file")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("tauc", help="start-stop histogram -> coherence time")
    sp.add_argument("--hist", help="histogram file (dt_ps,count)")
    sp.add_argument("--record", help="build the histogram from this record")
    sp.add_argument("--start", type=int, default=0, help="start channel index (0 = D1)")
    sp.add_argument("--stop", type=int, default=2, help="stop channel index (2 = D3)")
    sp.add_argument("--range", type=int, default=2000, help="histogram half range in ps")
    sp.add_argument("--tau-j", type=float, default=85.0, help="detector jitter FWHM in ps")
    sp.add_argument("--out", help="write the histogram here")
    sp.set_defaults(func=cmd_tauc)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RecordFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NonPhysicalStateError, tomo.TomographyError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
