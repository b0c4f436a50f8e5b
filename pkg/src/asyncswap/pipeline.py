"""End-to-end stages: simulate a run, analyze a record, sweep windows."""
from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import tomography as tomo
from .config import VERSION, ConfigError, ExperimentConfig
from .record import TimestampRecord, read_record, write_record
from .source import generate_run, setting_index
from .states import entanglement_report
from .tdc import (InsufficientCounts, TauCNotEstimable, estimate_tau_c, fit_gaussian,
                  start_stop_histogram, sweep_windows, twofold_counts)

RECORD_NAME = "record.astr"
CALIBRATION_NAME = "calibration.astr"
SMALL_REGIME_MAX = 150
LARGE_REGIME_MIN = 400


class LockError(OSError):
    pass


class RunLock:
    """Exclusive ownership of a run directory through a lock file."""

    def __init__(self, directory):
        self.path = Path(directory) / ".lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockError(f"run directory {self.path.parent} is locked by another process") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)


def calibration_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 1]).generate_state(1, np.uint64)[0])


# -- simulate ------------------------------------------------------------------


def simulate(cfg: ExperimentConfig) -> tuple[TimestampRecord, TimestampRecord | None]:
    """Main record plus, if configured, a short full-stream calibration record."""
    digest = bytes.fromhex(cfg.digest())
    extra = {"config_digest": cfg.digest(), "version": VERSION}
    rec = generate_run(cfg.physics(), cfg.circuit, cfg.mode, cfg.gate_window_ps)
    rec.metadata.update(extra)
    rec.digest = digest
    cal = None
    if cfg.calibration_duration_s > 0:
        pc = replace(cfg.physics(cfg.calibration_duration_s), seed=calibration_seed(cfg.seed))
        cal = generate_run(pc, cfg.circuit, "full")
        cal.metadata.update(extra, calibration=True)
        cal.digest = digest
    return rec, cal


def run_simulate(cfg: ExperimentConfig, out_dir) -> dict:
    out = Path(out_dir)
    with RunLock(out):
        t0 = time.perf_counter()
        rec, cal = simulate(cfg)
        write_record(rec, out / RECORD_NAME)
        if cal is not None:
            write_record(cal, out / CALIBRATION_NAME)
        (out / "config.ini").write_text(cfg.to_ini())
        info = {
            "record": str(out / RECORD_NAME),
            "calibration": str(out / CALIBRATION_NAME) if cal is not None else None,
            "config_digest": cfg.digest(),
            "version": VERSION,
            "events": len(rec),
            "seconds": round(time.perf_counter() - t0, 3),
        }
        (out / "run.json").write_text(json.dumps(info, indent=2) + "\n")
    return info


# -- analyze -------------------------------------------------------------------


def counts_for(record: TimestampRecord, events, n_modes: int, tau_w: int) -> tomo.CountTable:
    labels = record.metadata.get("settings") or tomo.setting_labels(n_modes)
    idx = setting_index(record, events.start_time)
    full = tomo.setting_labels(n_modes)
    pos = np.array([full.index(lab) for lab in labels], dtype=np.int64)
    counts = np.bincount(pos[idx], minlength=len(full)) if idx.size else np.zeros(len(full), np.int64)
    meta = {"tau_w_ps": int(tau_w), "duration_s": record.duration_s,
            "seed_digest": record.metadata.get("config_digest", record.digest.hex())}
    return tomo.CountTable(n_modes, counts, meta)


def _metrics(rho: np.ndarray) -> dict:
    return {k: v for k, v in entanglement_report(rho).as_dict().items() if v is not None}


def tomography_point(counts: tomo.CountTable, cfg: ExperimentConfig, bootstrap: int | None = None,
                     seed: int = 0) -> dict:
    res = tomo.mle_reconstruct(counts, cfg.epsilon, cfg.tol, cfg.max_iter)
    out = {"metrics": _metrics(res.rho.matrix), "log_likelihood": res.log_likelihood,
           "iterations": res.iterations, "converged": res.converged, "std": {}}
    n_boot = cfg.bootstrap if bootstrap is None else bootstrap
    if n_boot:
        # resamples start near the point estimate; the admixture keeps full rank
        d = res.rho.dim
        start = 0.9 * res.rho.matrix + 0.1 * np.eye(d) / d
        out["std"] = tomo.bootstrap_errors(counts, n_boot, rng=seed, epsilon=cfg.epsilon,
                                           tol=cfg.tol, max_iter=cfg.max_iter, rho0=start)
    out["rho"] = res.rho
    return out


def calibration_summary(cal: TimestampRecord, tau_j: float, window: int = 80) -> dict:
    """Background-subtracted pair rates (A: D1->D3, B: D2->D3) and the
    coherence time recovered from the D1->D3 histogram."""
    out: dict = {"window_ps": window}
    for name, start in (("A", 0), ("B", 1)):
        raw, net = twofold_counts(cal, start, 2, window)
        out[f"pair_rate_{name}_hz"] = net / cal.duration_s
    hist = start_stop_histogram(cal, 0, 2, 1, 2000)
    try:
        fit = fit_gaussian(hist)
        out["fwhm_ps"] = fit.fwhm
        out["tau_c_ps"] = estimate_tau_c(hist, tau_j)
    except (InsufficientCounts, TauCNotEstimable) as exc:
        out["tau_c_ps"] = None
        out["tau_c_error"] = str(exc)
    return out


@dataclass
class AnalysisResult:
    report: dict
    degraded: bool


_TABLE_COLUMNS = ["tau_w_ps", "fourfolds", "rate_per_hour", "F", "F_prime", "theta_star",
                  "EOF_or_witness", "F_std", "F_prime_std", "EOF_or_witness_std", "status",
                  "config_digest", "version"]


def analyze(record: TimestampRecord, windows, cfg: ExperimentConfig, calibration: TimestampRecord | None = None,
            bootstrap: int | None = None) -> AnalysisResult:
    windows = sorted(int(w) for w in windows)
    gate = record.metadata.get("gate_window_ps")
    if gate and max(windows) > gate:
        raise ConfigError(f"window {max(windows)} ps exceeds the record's gate window {gate} ps")
    circuit = record.metadata.get("circuit", cfg.circuit)
    n_modes = 2 if circuit == "swap" else 3
    hours = record.duration_s / 3600
    digest = record.metadata.get("config_digest", record.digest.hex())
    rows, degraded = [], False
    points = sweep_windows(record, windows, cfg.policy) if len(record) else []
    for k, w in enumerate(windows):
        n = points[k].count if points else 0
        entry = {"tau_w_ps": w, "fourfolds": n, "rate_per_hour": n / hours}
        if n == 0:
            entry["status"] = "skipped: no four-fold events"
            degraded = True
        elif n < 6**n_modes:
            entry["status"] = f"skipped: insufficient counts ({n} < {6 ** n_modes})"
            degraded = True
        else:
            counts = counts_for(record, points[k].events, n_modes, w)
            tp = tomography_point(counts, cfg, bootstrap, seed=cfg.seed + w)
            entry.update(status="ok", metrics=tp["metrics"], std=tp["std"],
                         iterations=tp["iterations"], converged=tp["converged"],
                         counts=counts.as_dict())
        rows.append(entry)
    report = {"circuit": circuit, "config_digest": digest, "version": VERSION,
              "duration_s": record.duration_s, "mode": record.metadata.get("mode"),
              "policy": cfg.policy, "windows": rows}
    if calibration is not None:
        report["calibration"] = calibration_summary(calibration, cfg.tau_j_ps)
    elif record.metadata.get("mode") == "full" and len(record):
        report["calibration"] = calibration_summary(record, cfg.tau_j_ps)
    return AnalysisResult(report, degraded)


def report_table(report: dict) -> str:
    key = "eof" if report["circuit"] == "swap" else "witness_value"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_TABLE_COLUMNS)
    for r in report["windows"]:
        m, s = r.get("metrics", {}), r.get("std", {})
        fmt = lambda x: "" if x is None else f"{x:.6g}"
        w.writerow([r["tau_w_ps"], r["fourfolds"], fmt(r["rate_per_hour"]), fmt(m.get("fidelity")),
                    fmt(m.get("phase_max_fidelity")), fmt(m.get("theta_star")), fmt(m.get(key)),
                    fmt(s.get("fidelity")), fmt(s.get("phase_max_fidelity")), fmt(s.get(key)),
                    r["status"], report["config_digest"], report["version"]])
    return buf.getvalue()


def _load_calibration(record_path: Path):
    cal_path = record_path.with_name(CALIBRATION_NAME)
    if cal_path.exists() and cal_path != record_path:
        return read_record(cal_path)
    return None


def run_analyze(record_path, windows, cfg: ExperimentConfig, out_dir) -> AnalysisResult:
    record_path = Path(record_path)
    record = read_record(record_path)
    result = analyze(record, windows, cfg, _load_calibration(record_path))
    out = Path(out_dir)
    with RunLock(out):
        (out / "report.json").write_text(json.dumps(result.report, indent=2, default=float) + "\n")
        (out / "report.csv").write_text(report_table(result.report))
    return result


# -- window sweep --------------------------------------------------------------


def loglog_slope(windows, rates) -> float | None:
    w = np.asarray(windows, float)
    r = np.asarray(rates, float)
    ok = r > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(w[ok]), np.log(r[ok]), 1)[0])


def fig4_sweep(record: TimestampRecord, windows, cfg: ExperimentConfig, bootstrap: int = 0) -> dict:
    """Rate and phase-maximized fidelity versus window, with log-log slopes
    over windows <= 150 ps and >= 400 ps."""
    result = analyze(record, windows, cfg, bootstrap=bootstrap)
    rows = result.report["windows"]
    w = [r["tau_w_ps"] for r in rows]
    rate = [r["rate_per_hour"] for r in rows]
    small = [(x, y) for x, y in zip(w, rate) if x <= SMALL_REGIME_MAX]
    large = [(x, y) for x, y in zip(w, rate) if x >= LARGE_REGIME_MIN]
    summary: dict = {"warnings": []}
    for name, pts in (("small", small), ("large", large)):
        slope = loglog_slope(*zip(*pts)) if len(pts) >= 2 else None
        if slope is None:
            summary["warnings"].append(f"grid too narrow for the {name}-window fit; slope omitted")
        else:
            summary[f"slope_{name}"] = slope
    fp = [r.get("metrics", {}).get("phase_max_fidelity") for r in rows]
    known = [x for x in fp if x is not None]
    summary["fidelity_non_increasing"] = all(b <= a for a, b in zip(known, known[1:]))
    return {"report": result.report, "summary": summary, "degraded": result.degraded}


def fig4_table(sweep: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau_w_ps", "fourfolds", "rate_per_hour", "F", "F_prime", "theta_star",
                "F_prime_std", "config_digest", "version"])
    rep = sweep["report"]
    for r in rep["windows"]:
        m, s = r.get("metrics", {}), r.get("std", {})
        fmt = lambda x: "" if x is None else f"{x:.6g}"
        w.writerow([r["tau_w_ps"], r["fourfolds"], fmt(r["rate_per_hour"]), fmt(m.get("fidelity")),
                    fmt(m.get("phase_max_fidelity")), fmt(m.get("theta_star")),
                    fmt(s.get("phase_max_fidelity")), rep["config_digest"], rep["version"]])
    return buf.getvalue()


def run_fig4_sweep(record_path, windows, cfg: ExperimentConfig, out_dir, bootstrap: int = 0) -> dict:
    record = read_record(record_path)
    sweep = fig4_sweep(record, windows, cfg, bootstrap)
    out = Path(out_dir)
    with RunLock(out):
        (out / "fig4.csv").write_text(fig4_table(sweep))
        summary = dict(sweep["summary"], config_digest=sweep["report"]["config_digest"], version=VERSION)
        (out / "fig4.json").write_text(json.dumps(summary, indent=2) + "\n")
    return sweep

