"""Monte Carlo timestamp generation for two asynchronous cw pair sources.

Every pair source emits as a homogeneous Poisson process. Within a pair the
interfering photon (modes 3, 4) leaves at the emission time and the herald
photon (modes 1, 2) carries an extra Gaussian offset of FWHM ``tau_c``; every
detection adds Gaussian jitter of FWHM ``tau_j``. Both Gaussians are cut at
5 sigma and detection times are rounded half-up to whole picoseconds.

An A and a B emission that are mutual nearest neighbours within 3 tau_c are
treated as one four-photon candidate: its outcome is drawn once from the
event tables of :mod:`asyncswap.optics`, from the indistinguishable table with
probability v = mode_overlap * visibility(t_a - t_b) and from the
distinguishable one otherwise. Every other emission is sampled on its own.

Two generation modes share that sampling core.

``full``
    Complete detector streams. Cost grows with the raw singles rate, so this
    is meant for calibration records and short runs.

``gated``
    Only the neighbourhoods of D1 events that can form a four-fold within the
    gate window W are produced. Candidates are drawn as pairs (D1 event, D2
    event within +-W/2) from the product intensity; the neighbourhood around
    each pair is the unconditioned process, and the pair is kept with
    probability 1/m, m being the number of D2 events within +-W/2, so every D1
    start is represented once on average. Because the processes are Poisson
    the resulting snippets have the same law as windows cut from a full
    stream. Stored snippets hold the start and the stops within +-W/2 only, so
    a gated record supports four-fold analysis for windows up to W but not
    singles or two-fold statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import optics
from .optics import EventTables, T3, T4, UNORDERED
from .record import DARK, PAIR_A, PAIR_B, STRAY, TimestampRecord
from .states import as_matrix, canonical_state
from .tomography import POLARIZATION, setting_labels

FWHM = 2 * math.sqrt(2 * math.log(2))
RNG_NAME = "numpy PCG64 via SeedSequence"
CIRCUITS = ("swap", "ghz")
PS = 1e-12
_ID_STRIDE = 1 << 40


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicsConfig:
    """Physical parameters of one simulated run.

    Rates are in Hz, times in ps, ``duration`` in seconds. Per-detector tuples
    are ordered D1..D4. ``settings`` restricts the analyzer schedule to the
    given labels; by default every tomography setting gets an equal block.
    """

    pair_rate_a: float
    pair_rate_b: float
    efficiency: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    tau_j: float = 85.0
    tau_c: float = 230.0
    stray_rate: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    dark_rate: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    dead_time: float = 0.0
    duration: float = 1.0
    seed: int = 0
    settings: tuple[str, ...] | None = None
    fidelity_a: float = 1.0
    fidelity_b: float = 1.0
    herald_phase: float = 0.0
    mode_overlap: float = 1.0

    def validate(self, circuit: str) -> None:
        if circuit not in CIRCUITS:
            raise SimulationError(f"unknown circuit {circuit!r}")
        if not self.duration > 0:
            raise SimulationError("duration must be positive")
        if self.pair_rate_a < 0 or self.pair_rate_b < 0:
            raise SimulationError("pair rates must be non-negative")
        for name in ("efficiency", "stray_rate", "dark_rate"):
            vals = getattr(self, name)
            if len(vals) != 4:
                raise SimulationError(f"{name} needs four entries (D1..D4)")
            if any(x < 0 for x in vals):
                raise SimulationError(f"{name} entries must be non-negative")
        if any(x > 1 for x in self.efficiency):
            raise SimulationError("efficiencies must lie in [0, 1]")
        if not self.tau_c > 0 or self.tau_j < 0 or self.dead_time < 0:
            raise SimulationError("need tau_c > 0, tau_j >= 0, dead_time >= 0")
        if not 0 <= self.mode_overlap <= 1:
            raise SimulationError("mode_overlap must lie in [0, 1]")
        for f in (self.fidelity_a, self.fidelity_b):
            if not 0.25 <= f <= 1:
                raise SimulationError("source fidelities must lie in [1/4, 1]")
        n = 2 if circuit == "swap" else 3
        valid = set(setting_labels(n))
        for lab in self.schedule(circuit):
            if lab not in valid:
                raise SimulationError(f"invalid analyzer setting {lab!r} for {circuit}")

    def schedule(self, circuit: str) -> tuple[str, ...]:
        if self.settings:
            return tuple(self.settings)
        return tuple(setting_labels(2 if circuit == "swap" else 3))


@dataclass(frozen=True)
class Circuit:
    """Optical layout plus the analyzer mapping for each setting label."""

    name: str
    transfer: np.ndarray
    rho_a: np.ndarray
    rho_b: np.ndarray

    @property
    def n_modes(self) -> int:
        return 2 if self.name == "swap" else 3

    @property
    def analyzed(self) -> tuple[str, ...]:
        return ("1", "2") if self.name == "swap" else ("1", "3'", "4'")

    def analyzers(self, label: str):
        """(p1, p2, a3, a4) polarizer vectors for the four detectors."""
        vec = [POLARIZATION[c] for c in label]
        if self.name == "swap":
            return vec[0], vec[1], POLARIZATION["V"], POLARIZATION["H"]
        return vec[0], POLARIZATION["V"], vec[1], vec[2]

    def tables(self, label: str) -> EventTables:
        p1, p2, a3, a4 = self.analyzers(label)
        return optics.event_tables(self.transfer, self.rho_a, self.rho_b, p1, p2, a3, a4)


# half-wave plate turning the V photon of source B into D
HWP_V_TO_D = np.array([[1, 1], [-1, 1]], dtype=complex) / math.sqrt(2)


def build_circuit(name: str, cfg: PhysicsConfig) -> Circuit:
    rho_a = as_matrix(optics.werner_pair(cfg.fidelity_a))
    if name == "swap":
        rho_b = as_matrix(optics.werner_pair(cfg.fidelity_b, phase=cfg.herald_phase))
        return Circuit(name, optics.HBS, rho_a, rho_b)
    if name == "ghz":
        if cfg.herald_phase:
            rho_a = optics.local_unitary(rho_a, np.diag([1.0, np.exp(1j * cfg.herald_phase)]), 0)
        vv = as_matrix(canonical_state("v"))
        rho_b = np.kron(vv, vv)
        if cfg.fidelity_b < 1:
            # depolarize the ancilla photon only; the herald stays V
            p = (4 * cfg.fidelity_b - 1) / 3
            rho_b = np.kron(vv, p * vv + (1 - p) * np.eye(2) / 2)
        rho_b = optics.local_unitary(rho_b, HWP_V_TO_D, 1)
        return Circuit(name, optics.PBS, rho_a, rho_b)
    raise SimulationError(f"unknown circuit {name!r}")


# -- categorical sampling ------------------------------------------------------


def _cdf(p: np.ndarray) -> np.ndarray | None:
    p = np.clip(np.asarray(p, float).ravel(), 0, None)
    s = p.sum()
    if s <= 0:
        return None
    c = np.cumsum(p / s)
    c[-1] = 1.0
    return c


class _Sampler:
    """Pre-normalized outcome distributions for one analyzer setting.

    Condition codes: bit 0 forces the A herald to pass its analyzer, bit 1
    the B herald (used for the candidate pairs of gated mode).
    """

    def __init__(self, tabs: EventTables):
        self.tabs = tabs
        o = np.arange(4)
        o1, o2 = o // 2, o % 2
        self.joint: dict[tuple[str, int], np.ndarray | None] = {}
        for cond in range(4):
            keep = np.ones(4, bool)
            if cond & 1:
                keep &= o1 == 0
            if cond & 2:
                keep &= o2 == 0
            ind = tabs.ind.reshape(4, -1) * keep[:, None]
            dist = tabs.dist.reshape(4, -1) * keep[:, None]
            self.joint["ind", cond] = _cdf(ind)
            self.joint["dist", cond] = _cdf(dist)
        self.alone_a = {0: _cdf(tabs.alone_a), 1: _cdf(tabs.alone_a[:1])}
        self.alone_b = {0: _cdf(tabs.alone_b), 1: _cdf(tabs.alone_b[:1])}

    @staticmethod
    def draw(rng, cdf, n):
        if cdf is None:
            raise SimulationError("conditioning on an impossible herald outcome")
        return np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), cdf.size - 1)


_UNORD = np.array(UNORDERED)


def _outcomes(rng, sampler: _Sampler, na, nb, ia, ib, v, cond_a, cond_b):
    """Herald pass flags and port modes for every A and B emission."""
    o1 = np.zeros(na, np.int8)
    o2 = np.zeros(nb, np.int8)
    pa = np.zeros(na, np.int8)
    pb = np.zeros(nb, np.int8)
    paired_a = np.zeros(na, bool)
    paired_b = np.zeros(nb, bool)
    paired_a[ia] = True
    paired_b[ib] = True

    if ia.size:
        ind = rng.random(ia.size) < v
        cond = cond_a[ia].astype(int) | (cond_b[ib].astype(int) << 1)
        for kind in ("ind", "dist"):
            for c in range(4):
                sel = np.nonzero((ind == (kind == "ind")) & (cond == c))[0]
                if not sel.size:
                    continue
                k = _Sampler.draw(rng, sampler.joint[kind, c], sel.size)
                if kind == "ind":
                    herald, pat = divmod(k, len(UNORDERED))
                    m, n = _UNORD[pat, 0], _UNORD[pat, 1]
                    flip = rng.random(sel.size) < 0.5
                    port_b, port_a = np.where(flip, n, m), np.where(flip, m, n)
                else:
                    herald, mn = divmod(k, 16)
                    port_b, port_a = divmod(mn, 4)
                o1[ia[sel]] = herald // 2
                o2[ib[sel]] = herald % 2
                pa[ia[sel]] = port_a
                pb[ib[sel]] = port_b

    for paired, cond, alone, o, port in (
        (paired_a, cond_a, sampler.alone_a, o1, pa),
        (paired_b, cond_b, sampler.alone_b, o2, pb),
    ):
        for c in (0, 1):
            sel = np.nonzero(~paired & (cond == bool(c)))[0]
            if sel.size:
                k = _Sampler.draw(rng, alone[c], sel.size)
                o[sel], port[sel] = divmod(k, 4)
    return o1, o2, pa, pb


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5).astype(np.int64)


def _trunc_normal(rng, sigma: float, n: int) -> np.ndarray:
    x = rng.standard_normal(n)
    bad = np.abs(x) > 5
    while bad.any():
        x[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(x) > 5
    return x * sigma


def _mutual_nearest(ta: np.ndarray, tb: np.ndarray, max_dt: float):
    """Indices (ia, ib) of A/B emissions that are each other's nearest
    neighbour and at most ``max_dt`` apart. Inputs must be sorted."""
    if ta.size == 0 or tb.size == 0:
        e = np.zeros(0, np.int64)
        return e, e

    def nearest(x, y):
        j = np.searchsorted(y, x)
        lo = np.clip(j - 1, 0, y.size - 1)
        hi = np.clip(j, 0, y.size - 1)
        return np.where(np.abs(x - y[lo]) <= np.abs(y[hi] - x), lo, hi)

    nb = nearest(ta, tb)
    na = nearest(tb, ta)
    ia = np.nonzero((na[nb] == np.arange(ta.size)) & (np.abs(ta - tb[nb]) <= max_dt))[0]
    return ia, nb[ia]


@dataclass
class _Events:
    channel: list = field(default_factory=list)
    time: list = field(default_factory=list)
    tag: list = field(default_factory=list)
    pid: list = field(default_factory=list)

    def add(self, ch, t, tag, pid):
        t = np.asarray(t, np.int64)
        self.channel.append(np.full(t.size, ch, np.int8) if np.isscalar(ch) else np.asarray(ch, np.int8))
        self.time.append(t)
        self.tag.append(np.full(t.size, tag, np.uint8) if np.isscalar(tag) else np.asarray(tag, np.uint8))
        self.pid.append(np.full(t.size, pid, np.int64) if np.isscalar(pid) else np.asarray(pid, np.int64))

    def arrays(self):
        if not self.time:
            return (np.zeros(0, np.int8), np.zeros(0, np.int64), np.zeros(0, np.uint8), np.zeros(0, np.int64))
        return tuple(np.concatenate(x) for x in (self.channel, self.time, self.tag, self.pid))


def _emit(rng, cfg: PhysicsConfig, sampler: _Sampler, ta, tb, ida, idb,
          cond_a=None, cond_b=None, emit_d1=True) -> _Events:
    """Detections caused by A emissions at ``ta`` and B emissions at ``tb``
    (both sorted). Conditioned heralds are forced to pass and not emitted:
    their detection is supplied by the caller."""
    na, nb = ta.size, tb.size
    cond_a = np.zeros(na, bool) if cond_a is None else cond_a
    cond_b = np.zeros(nb, bool) if cond_b is None else cond_b
    ia, ib = _mutual_nearest(ta, tb, 3 * cfg.tau_c)
    v = cfg.mode_overlap * optics.visibility_array(ta[ia] - tb[ib], cfg.tau_c)
    o1, o2, pa, pb = _outcomes(rng, sampler, na, nb, ia, ib, v, cond_a, cond_b)

    sc, sj = cfg.tau_c / FWHM, cfg.tau_j / FWHM
    eta = cfg.efficiency
    ev = _Events()
    for t, ids, o, cond, ch, tag, on in (
        (ta, ida, o1, cond_a, 0, PAIR_A, emit_d1),
        (tb, idb, o2, cond_b, 1, PAIR_B, True),
    ):
        if not on:
            continue
        sel = np.nonzero((o == 0) & ~cond)[0]
        sel = sel[rng.random(sel.size) < eta[ch]]
        d = _round_half_up(_trunc_normal(rng, sc, sel.size) + _trunc_normal(rng, sj, sel.size))
        ev.add(ch, t[sel] + d, tag, ids[sel])

    # interfering photons: port t3 -> D3, t4 -> D4, blocked ports are lost
    hits = []
    for t, ids, port, tag in ((ta, ida, pa, PAIR_A), (tb, idb, pb, PAIR_B)):
        ch = np.where(port == T3, 2, np.where(port == T4, 3, -1))
        det = ch >= 0
        det[det] = rng.random(int(det.sum())) < np.take(eta, ch[det])
        when = t + _round_half_up(_trunc_normal(rng, sj, t.size))
        hits.append((ch, det, when))
    (cha, deta, wa), (chb, detb, wb) = hits
    # a non-number-resolving detector clicks once for two photons of one candidate
    same = (cha[ia] == chb[ib]) & deta[ia] & detb[ib]
    later_a = same & (wa[ia] > wb[ib])
    deta[ia[later_a]] = False
    detb[ib[same & ~later_a]] = False
    ev.add(cha[deta], wa[deta], PAIR_A, ida[deta])
    ev.add(chb[detb], wb[detb], PAIR_B, idb[detb])
    return ev


def _noise(rng, cfg: PhysicsConfig, channels, lo, hi, ev: _Events):
    """Stray and dark Poisson events in [lo, hi) ps."""
    span = hi - lo
    for ch in channels:
        for rate, tag in ((cfg.stray_rate[ch], STRAY), (cfg.dark_rate[ch], DARK)):
            n = rng.poisson(rate * span * PS)
            if n:
                ev.add(ch, rng.integers(lo, hi, n), tag, -1)


def _uniform_times(rng, rate_hz, lo, hi):
    n = rng.poisson(rate_hz * (hi - lo) * PS)
    return np.sort(rng.integers(lo, hi, n)) if n else np.zeros(0, np.int64)


def _run_block_full(rng, cfg, sampler, lo, hi, id0) -> _Events:
    ta = _uniform_times(rng, cfg.pair_rate_a, lo, hi)
    tb = _uniform_times(rng, cfg.pair_rate_b, lo, hi)
    ida = id0 + np.arange(ta.size)
    idb = id0 + ta.size + np.arange(tb.size)
    ev = _emit(rng, cfg, sampler, ta, tb, ida, idb)
    _noise(rng, cfg, range(4), lo, hi, ev)
    return ev


def gate_geometry(cfg: PhysicsConfig, gate_window: int):
    """Half gate H, neighbourhood radius L and the virtual slot width."""
    half = int(gate_window) // 2
    sc, sj = cfg.tau_c / FWHM, cfg.tau_j / FWHM
    radius = half + int(math.ceil(5 * sc + 5 * sj)) + 1
    span = 4 * radius + int(6 * cfg.tau_c) + 1000
    return half, radius, span


def _categorical(rng, weights, n):
    w = np.asarray(weights, float)
    return np.searchsorted(np.cumsum(w / w.sum())[:-1], rng.random(n), side="right")


def _run_block_gated(rng, cfg, sampler, lo, hi, id0, gate_window, chunk=500_000):
    half, radius, span = gate_geometry(cfg, gate_window)
    eta = cfg.efficiency
    pa_pass = float(sampler.tabs.alone_a[0].sum())
    pb_pass = float(sampler.tabs.alone_b[0].sum())
    w1 = (cfg.pair_rate_a * eta[0] * pa_pass, cfg.stray_rate[0], cfg.dark_rate[0])
    w2 = (cfg.pair_rate_b * eta[1] * pb_pass, cfg.stray_rate[1], cfg.dark_rate[1])
    lam1, lam2 = sum(w1), sum(w2)
    n_total = rng.poisson(lam1 * PS * lam2 * PS * (2 * half + 1) * (hi - lo)) if lam1 and lam2 else 0
    out = _Events()
    done = 0
    next_id = id0
    tags = np.array([PAIR_A, STRAY, DARK], np.uint8)
    tags_b = np.array([PAIR_B, STRAY, DARK], np.uint8)
    sc, sj = cfg.tau_c / FWHM, cfg.tau_j / FWHM
    while done < n_total:
        n = min(chunk, n_total - done)
        done += n
        t1 = rng.integers(lo, hi, n)
        off2 = rng.integers(-half, half + 1, n)
        k1 = _categorical(rng, w1, n)
        k2 = _categorical(rng, w2, n)
        base = np.arange(n, dtype=np.int64) * span + span // 2

        # candidate emissions in virtual time (seed i lives in slot i)
        seed_a = np.nonzero(k1 == 0)[0]
        seed_b = np.nonzero(k2 == 0)[0]
        va = base[seed_a] - _round_half_up(_trunc_normal(rng, sc, seed_a.size) + _trunc_normal(rng, sj, seed_a.size))
        vb = base[seed_b] + off2[seed_b] - _round_half_up(
            _trunc_normal(rng, sc, seed_b.size) + _trunc_normal(rng, sj, seed_b.size))
        xa = rng.poisson(cfg.pair_rate_a * PS * (2 * radius + 1), n)
        xb = rng.poisson(cfg.pair_rate_b * PS * (2 * radius + 1), n)
        ea = np.repeat(base, xa) + rng.integers(-radius, radius + 1, int(xa.sum()))
        eb = np.repeat(base, xb) + rng.integers(-radius, radius + 1, int(xb.sum()))
        ta = np.concatenate([va, ea])
        tb = np.concatenate([vb, eb])
        ca = np.concatenate([np.ones(va.size, bool), np.zeros(ea.size, bool)])
        cb = np.concatenate([np.ones(vb.size, bool), np.zeros(eb.size, bool)])
        ida = next_id + np.arange(ta.size)
        idb = next_id + ta.size + np.arange(tb.size)
        next_id += ta.size + tb.size
        oa, ob = np.argsort(ta, kind="stable"), np.argsort(tb, kind="stable")
        ev = _emit(rng, cfg, sampler, ta[oa], tb[ob], ida[oa], idb[ob], ca[oa], cb[ob], emit_d1=False)

        # stray and dark stops near every candidate
        for ch, reach in ((1, half), (2, half), (3, half)):
            for rate, tag in ((cfg.stray_rate[ch], STRAY), (cfg.dark_rate[ch], DARK)):
                cnt = rng.poisson(rate * PS * (2 * reach + 1), n) if rate else np.zeros(n, np.int64)
                if cnt.any():
                    ev.add(ch, np.repeat(base, cnt) + rng.integers(-reach, reach + 1, int(cnt.sum())), tag, -1)
        ch, vt, tag, pid = ev.arrays()
        slot = vt // span
        rel = vt - slot * span - span // 2

        # seed detections
        pid_a = np.full(n, -1, np.int64)
        pid_b = np.full(n, -1, np.int64)
        pid_a[seed_a] = ida[: seed_a.size]
        pid_b[seed_b] = idb[: seed_b.size]
        near = np.abs(rel) <= half
        d2 = near & (ch == 1)
        m = 1 + np.bincount(slot[d2], minlength=n)
        keep = rng.random(n) * m < 1
        for c in (1, 2, 3):
            hit = np.zeros(n, bool)
            hit[slot[near & (ch == c)]] = True
            if c == 1:
                hit[:] = True  # the seed D2 is inside by construction
            keep &= hit
        sel = near & (ch > 0) & keep[slot]
        out.add(0, t1[keep], tags[k1[keep]], pid_a[keep])
        out.add(1, t1[keep] + off2[keep], tags_b[k2[keep]], pid_b[keep])
        out.add(ch[sel], t1[slot[sel]] + rel[sel], tag[sel], pid[sel])
    return out


def _dead_time(t: np.ndarray, dead: float) -> np.ndarray:
    if dead <= 0 or t.size < 2:
        return np.ones(t.size, bool)
    keep = np.zeros(t.size, bool)
    last = None
    for i, x in enumerate(t.tolist()):
        if last is None or x - last >= dead:
            keep[i] = True
            last = x
    return keep


def generate_run(cfg: PhysicsConfig, circuit: str, mode: str = "full",
                 gate_window: int = 1000) -> TimestampRecord:
    """Simulate one run; see the module docstring for the two modes.

    The analyzer schedule is split into equal sequential time blocks, one per
    setting, each driven by its own child of ``SeedSequence(cfg.seed)``.
    """
    cfg.validate(circuit)
    if mode not in ("full", "gated"):
        raise SimulationError(f"unknown mode {mode!r}")
    if mode == "gated" and gate_window <= 0:
        raise SimulationError("gate window must be positive")
    circ = build_circuit(circuit, cfg)
    labels = cfg.schedule(circuit)
    total_ps = int(round(cfg.duration * 1e12))
    block = total_ps // len(labels)
    if block <= 0:
        raise SimulationError("duration too short for the settings schedule")
    children = np.random.SeedSequence(cfg.seed).spawn(len(labels))
    samplers: dict[str, _Sampler] = {}
    parts = []
    for k, (lab, ss) in enumerate(zip(labels, children)):
        if lab not in samplers:
            samplers[lab] = _Sampler(circ.tables(lab))
        rng = np.random.Generator(np.random.PCG64(ss))
        lo, hi = k * block, (k + 1) * block
        if mode == "full":
            ev = _run_block_full(rng, cfg, samplers[lab], lo, hi, k * _ID_STRIDE)
        else:
            ev = _run_block_gated(rng, cfg, samplers[lab], lo, hi, k * _ID_STRIDE, gate_window)
        parts.append(ev.arrays())

    ch, t, tag, pid = (np.concatenate(x) for x in zip(*parts))
    times, tags, ids = [], [], []
    for c in range(4):
        sel = np.nonzero(ch == c)[0]
        order = sel[np.lexsort((pid[sel], t[sel]))]
        keep = _dead_time(t[order], cfg.dead_time)
        order = order[keep]
        times.append(t[order])
        tags.append(tag[order])
        ids.append(pid[order])
    meta = {
        "circuit": circuit,
        "mode": mode,
        "gate_window_ps": int(gate_window) if mode == "gated" else None,
        "settings": list(labels),
        "block_ps": int(block),
        "analyzed_modes": list(circ.analyzed),
        "seed": int(cfg.seed),
        "rng": RNG_NAME,
    }
    return TimestampRecord(times, tags, ids, cfg.duration, meta)


def setting_index(record: TimestampRecord, start_times: np.ndarray) -> np.ndarray:
    """Index into ``record.metadata['settings']`` for each start time."""
    block = record.metadata["block_ps"]
    n = len(record.metadata["settings"])
    return np.minimum(np.asarray(start_times) // block, n - 1)


def ground_truth_report(record: TimestampRecord, tau_w: int | None = None) -> dict:
    """Truth-tag census per channel; with ``tau_w`` also the split of the
    four-fold coincidences into genuine (one A pair plus one B pair supplying
    all four clicks) and accidental events."""
    from .record import CHANNEL_NAMES, TAG_NAMES
    from .tdc import extract_fourfolds

    per = {}
    for name, tg in zip(CHANNEL_NAMES, record.tags):
        cnt = np.bincount(tg, minlength=4)
        per[name] = {TAG_NAMES[k]: int(cnt[k]) for k in TAG_NAMES}
    out = {"channels": per, "duration_s": record.duration_s}
    if tau_w is not None:
        ff = extract_fourfolds(record, tau_w)
        true = 0
        if len(ff):
            tg = np.stack([record.tags[c + 1][ff.stop_index[:, c]] for c in range(3)], axis=1)
            pid = np.stack([record.pair_ids[c + 1][ff.stop_index[:, c]] for c in range(3)], axis=1)
            t1 = record.tags[0][ff.start_index]
            p1 = record.pair_ids[0][ff.start_index]
            a_ok = (t1 == PAIR_A)
            b_ok = (tg[:, 0] == PAIR_B)
            # D3 and D4: one photon from each of those two pairs
            from_a = (tg[:, 1:] == PAIR_A) & (pid[:, 1:] == p1[:, None])
            from_b = (tg[:, 1:] == PAIR_B) & (pid[:, 1:] == pid[:, :1])
            mix = (from_a[:, 0] & from_b[:, 1]) | (from_b[:, 0] & from_a[:, 1])
            true = int(np.sum(a_ok & b_ok & mix))
        out["fourfolds"] = {"tau_w_ps": int(tau_w), "total": len(ff), "true": true,
                            "accidental": len(ff) - true}
    return out


def with_settings(cfg: PhysicsConfig, labels: Sequence[str]) -> PhysicsConfig:
    return replace(cfg, settings=tuple(labels))


__all__ = [
    "PhysicsConfig", "Circuit", "build_circuit", "generate_run", "ground_truth_report",
    "setting_index", "SimulationError", "gate_geometry", "with_settings",
]
