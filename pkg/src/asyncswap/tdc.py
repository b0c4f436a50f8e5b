"""Start-stop coincidence processing on sorted timestamp streams.

D1 is the start channel and D2, D3, D4 are stops. A window of width tau_w is
centred on the start and closed: a stop at offset d counts when
|d| <= floor(tau_w / 2). All offsets are integer picoseconds and all window
comparisons are done in integer arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .record import TimestampRecord

FWHM = 2 * math.sqrt(2 * math.log(2))
POLICIES = ("closest", "earliest", "all")
STOP_CHANNELS = (1, 2, 3)


class UnsortedStreamError(ValueError):
    pass


class TauCNotEstimable(ValueError):
    """Fitted width does not exceed the jitter contribution."""


class InsufficientCounts(ValueError):
    pass


def _require_sorted(*streams: np.ndarray) -> None:
    for t in streams:
        if t.size > 1 and np.any(np.diff(t) < 0):
            raise UnsortedStreamError("timestamp stream is not sorted")


def half_width(tau_w) -> int:
    if tau_w <= 0:
        raise ValueError("window width must be positive")
    return int(tau_w) // 2


# -- histograms ----------------------------------------------------------------


@dataclass
class StartStopHistogram:
    """Counts of stop - start offsets. Bin k covers
    [lo + k * bin_width, lo + (k + 1) * bin_width) with lo = -range."""

    bin_width: int
    range: int
    counts: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return -self.range + self.bin_width * np.arange(self.counts.size)

    @property
    def centers(self) -> np.ndarray:
        return self.edges + (self.bin_width - 1) / 2

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_text(self) -> str:
        rows = [f"{e},{c}" for e, c in zip(self.edges, self.counts)]
        return "dt_ps,count\n" + "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "StartStopHistogram":
        data = np.loadtxt(text.splitlines()[1:], delimiter=",", dtype=np.int64, ndmin=2)
        edges, counts = data[:, 0], data[:, 1]
        bw = int(edges[1] - edges[0]) if edges.size > 1 else 1
        return cls(bw, int(-edges[0]), counts)


def _pair_offsets(starts: np.ndarray, stops: np.ndarray, rng_ps: int, chunk: int = 1 << 20):
    lo = np.searchsorted(stops, starts - rng_ps, side="left")
    hi = np.searchsorted(stops, starts + rng_ps, side="right")
    n = hi - lo
    for s in range(0, starts.size, chunk):
        nn = n[s:s + chunk]
        tot = int(nn.sum())
        if not tot:
            continue
        rep = np.repeat(np.arange(s, s + nn.size), nn)
        first = np.repeat(lo[s:s + chunk] - np.cumsum(nn) + nn, nn)
        idx = first + np.arange(tot)
        yield stops[idx] - starts[rep]


def start_stop_histogram(record: TimestampRecord, start_ch: int = 0, stop_ch: int = 2,
                         bin_width: int = 1, range: int = 2000) -> StartStopHistogram:
    """Tally every stop within +-``range`` ps of every start."""
    if start_ch == stop_ch:
        raise ValueError("start and stop channels must differ")
    if bin_width < 1 or range < 0:
        raise ValueError("need bin_width >= 1 and range >= 0")
    starts, stops = record.times[start_ch], record.times[stop_ch]
    _require_sorted(starts, stops)
    nbins = (2 * range) // bin_width + 1
    counts = np.zeros(nbins, np.int64)
    for d in _pair_offsets(starts, stops, range):
        counts += np.bincount((d + range) // bin_width, minlength=nbins)[:nbins]
    return StartStopHistogram(int(bin_width), int(range), counts)


# -- tau_c estimation ----------------------------------------------------------


@dataclass(frozen=True)
class GaussianFit:
    amplitude: float
    center: float
    fwhm: float
    background: float


def _model(x, a, mu, w, b):
    s = w / FWHM
    return a * np.exp(-0.5 * ((x - mu) / s) ** 2) + b


def _jac(x, a, mu, w, b):
    s = w / FWHM
    z = (x - mu) / s
    g = np.exp(-0.5 * z**2)
    return np.stack([g, a * g * z / s, a * g * z**2 / w, np.ones_like(x)], axis=1)


def fit_gaussian(hist: StartStopHistogram) -> GaussianFit:
    """Least-squares Gaussian plus flat floor; start values from moments."""
    if hist.total < 100:
        raise InsufficientCounts(f"histogram holds {hist.total} counts; need at least 100")
    x = hist.centers.astype(float)
    y = hist.counts.astype(float)
    edge = max(1, y.size // 10)
    b0 = float(np.median(np.concatenate([y[:edge], y[-edge:]])))
    yp = np.clip(y - b0, 0, None)
    if yp.sum() <= 0:
        yp = y
    mu0 = float(np.sum(x * yp) / yp.sum())
    s0 = float(np.sqrt(max(np.sum((x - mu0) ** 2 * yp) / yp.sum(), hist.bin_width**2)))
    a0 = max(float(y.max()) - b0, 1.0)
    try:
        popt, _ = curve_fit(_model, x, y, p0=[a0, mu0, FWHM * s0, b0], jac=_jac,
                            ftol=1e-9, xtol=1e-9, maxfev=500)
    except RuntimeError as exc:
        raise TauCNotEstimable(f"Gaussian fit did not converge: {exc}") from exc
    a, mu, w, b = popt
    return GaussianFit(float(a), float(mu), float(abs(w)), float(b))


def tau_c_from_fwhm(w: float, tau_j: float) -> float:
    """Invert w^2 = tau_c^2 + 2 tau_j^2."""
    rest = w * w - 2 * tau_j * tau_j
    if rest <= 0:
        raise TauCNotEstimable(f"fitted FWHM {w:.1f} ps does not exceed sqrt(2) tau_j")
    return math.sqrt(rest)


def estimate_tau_c(hist: StartStopHistogram, tau_j: float) -> float:
    return tau_c_from_fwhm(fit_gaussian(hist).fwhm, tau_j)


# -- four-fold extraction ------------------------------------------------------


@dataclass(frozen=True)
class FourfoldEvent:
    start_time: int
    stop_times: tuple[int, int, int]
    policy: str


@dataclass
class FourfoldEvents:
    """Column store of four-fold events; indices point into the record's
    per-channel streams (stops ordered D2, D3, D4)."""

    start_index: np.ndarray
    stop_index: np.ndarray
    start_time: np.ndarray
    stop_time: np.ndarray
    policy: str

    def __len__(self) -> int:
        return int(self.start_index.size)

    def __iter__(self) -> Iterator[FourfoldEvent]:
        for s, st in zip(self.start_time.tolist(), self.stop_time.tolist()):
            yield FourfoldEvent(s, tuple(st), self.policy)

    def subset(self, mask: np.ndarray) -> "FourfoldEvents":
        return FourfoldEvents(self.start_index[mask], self.stop_index[mask],
                              self.start_time[mask], self.stop_time[mask], self.policy)

    def to_text(self) -> str:
        rows = [f"{s},{a},{b},{c}" for s, (a, b, c) in zip(self.start_time.tolist(), self.stop_time.tolist())]
        return "start_ps,d2_ps,d3_ps,d4_ps\n" + "\n".join(rows) + ("\n" if rows else "")

    @classmethod
    def empty(cls, policy: str = "closest") -> "FourfoldEvents":
        z = np.zeros(0, np.int64)
        return cls(z, np.zeros((0, 3), np.int64), z, np.zeros((0, 3), np.int64), policy)


def _nearest(starts: np.ndarray, stops: np.ndarray):
    """Index of the stop closest to each start (ties to the earlier) and the
    absolute offset; offset is a large sentinel when the stream is empty."""
    if stops.size == 0:
        return np.zeros(starts.size, np.int64), np.full(starts.size, np.iinfo(np.int64).max)
    j = np.searchsorted(stops, starts, side="left")
    lo = np.clip(j - 1, 0, stops.size - 1)
    hi = np.clip(j, 0, stops.size - 1)
    dlo = np.abs(starts - stops[lo])
    dhi = np.abs(stops[hi] - starts)
    pick_lo = dlo <= dhi
    return np.where(pick_lo, lo, hi), np.where(pick_lo, dlo, dhi)


def _streams(record: TimestampRecord):
    starts = record.times[0]
    stops = [record.times[c] for c in STOP_CHANNELS]
    _require_sorted(starts, *stops)
    return starts, stops


def extract_fourfolds(record: TimestampRecord, tau_w: int, policy: str = "closest") -> FourfoldEvents:
    """Four-folds: D1 starts with at least one event on each stop channel in
    the window. ``policy`` picks the stop when several qualify: the one
    closest to the start (ties to the earlier), the earliest, or ``all``
    which emits one event per combination."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    h = half_width(tau_w)
    starts, stops = _streams(record)
    if policy == "closest":
        idx, dist = zip(*(_nearest(starts, s) for s in stops))
        ok = np.all(np.stack(dist) <= h, axis=0)
        return _build(starts, stops, np.nonzero(ok)[0], np.stack(idx, axis=1)[ok], policy)

    lo = np.stack([np.searchsorted(s, starts - h, side="left") for s in stops], axis=1)
    hi = np.stack([np.searchsorted(s, starts + h, side="right") for s in stops], axis=1)
    n = hi - lo
    ok = np.nonzero(np.all(n > 0, axis=1))[0]
    if policy == "earliest":
        return _build(starts, stops, ok, lo[ok], policy)
    # every combination of qualifying stops
    n, lo = n[ok], lo[ok]
    reps = np.prod(n, axis=1)
    si = np.repeat(ok, reps)
    k = np.arange(int(reps.sum())) - np.repeat(np.cumsum(reps) - reps, reps)
    cols = []
    div = np.ones(ok.size, np.int64)
    for c in (2, 1, 0):
        nc = np.repeat(n[:, c], reps)
        cols.append(np.repeat(lo[:, c], reps) + (k // np.repeat(div, reps)) % nc)
        div = div * n[:, c]
    return _build(starts, stops, si, np.stack(cols[::-1], axis=1), policy)


def _build(starts, stops, si, stop_idx, policy) -> FourfoldEvents:
    si = np.asarray(si, np.int64)
    stop_idx = np.asarray(stop_idx, np.int64).reshape(-1, 3)
    st = np.stack([s[stop_idx[:, c]] if s.size else np.zeros(0, np.int64)
                   for c, s in enumerate(stops)], axis=1) if si.size else np.zeros((0, 3), np.int64)
    return FourfoldEvents(si, stop_idx, starts[si], st.reshape(-1, 3), policy)


@dataclass
class SweepPoint:
    tau_w: int
    count: int
    events: FourfoldEvents


def sweep_windows(record: TimestampRecord, windows: Sequence[int], policy: str = "closest") -> list[SweepPoint]:
    """Four-folds for several windows. Under the closest policy one nearest-
    stop pass serves all windows, so the event sets are nested."""
    windows = [int(w) for w in windows]
    if not windows:
        raise ValueError("empty window list")
    if any(b < a for a, b in zip(windows, windows[1:])):
        raise ValueError("windows must be sorted ascending")
    for w in windows:
        half_width(w)
    if policy != "closest":
        out = []
        for w in windows:
            ev = extract_fourfolds(record, w, policy)
            out.append(SweepPoint(w, len(ev), ev))
        return out
    starts, stops = _streams(record)
    idx, dist = zip(*(_nearest(starts, s) for s in stops))
    worst = np.max(np.stack(dist), axis=0)
    idx = np.stack(idx, axis=1)
    out = []
    for w in windows:
        ok = worst <= half_width(w)
        ev = _build(starts, stops, np.nonzero(ok)[0], idx[ok], policy)
        out.append(SweepPoint(w, len(ev), ev))
    return out


def twofold_counts(record: TimestampRecord, start_ch: int, stop_ch: int, tau_w: int,
                   background_from: int = 1500, background_to: int = 2500) -> tuple[float, float]:
    """Start-stop pairs with |d| <= tau_w/2, and the same count with the flat
    accidental floor (estimated from background_from < |d| <= background_to)
    subtracted. Returns (raw, background_subtracted)."""
    h = half_width(tau_w)
    hist = start_stop_histogram(record, start_ch, stop_ch, 1, background_to)
    d = hist.edges
    raw = float(hist.counts[np.abs(d) <= h].sum())
    side = (np.abs(d) > background_from)
    floor = hist.counts[side].sum() / max(int(side.sum()), 1)
    return raw, raw - floor * (2 * h + 1)
