"""Per-detector timestamp streams and their on-disk formats.

Binary layout (little-endian):

    magic      4s   b"ASTR"
    version    u2
    channels   u1
    duration   f8   seconds
    digest     32s  sha256 of the generating config
    meta_len   u4   followed by meta_len bytes of UTF-8 JSON run metadata
    n_events   u8
    events     n_events x (channel u1, time i8 [ps], tag u1, pair_id i8)

Events are stored merged and sorted by (time, channel).
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"ASTR"
VERSION = 1
N_CHANNELS = 4
CHANNEL_NAMES = ("D1", "D2", "D3", "D4")

DARK, STRAY, PAIR_A, PAIR_B = 0, 1, 2, 3
TAG_NAMES = {DARK: "dark", STRAY: "stray", PAIR_A: "A", PAIR_B: "B"}

EVENT_DTYPE = np.dtype(
    [("channel", "u1"), ("time", "<i8"), ("tag", "u1"), ("pair_id", "<i8")], align=False
)
_HEADER = struct.Struct("<4sHBd32sI")


class RecordFormatError(ValueError):
    pass


@dataclass
class TimestampRecord:
    """Four sorted detector streams with ground-truth tags.

    ``times[k]`` holds integer picoseconds for detector D(k+1); ``tags`` and
    ``pair_ids`` run parallel to it (pair_id is -1 for stray and dark events).
    """

    times: list[np.ndarray]
    tags: list[np.ndarray]
    pair_ids: list[np.ndarray]
    duration_s: float
    metadata: dict = field(default_factory=dict)
    digest: bytes = b"\0" * 32

    def __post_init__(self):
        if not (len(self.times) == len(self.tags) == len(self.pair_ids) == N_CHANNELS):
            raise ValueError("a record has exactly four channels")
        self.times = [np.asarray(t, dtype=np.int64) for t in self.times]
        self.tags = [np.asarray(t, dtype=np.uint8) for t in self.tags]
        self.pair_ids = [np.asarray(p, dtype=np.int64) for p in self.pair_ids]
        for t in self.times:
            t.setflags(write=False)

    @classmethod
    def empty(cls, duration_s: float, metadata: dict | None = None) -> "TimestampRecord":
        z = [np.zeros(0, np.int64) for _ in range(N_CHANNELS)]
        return cls(z, [np.zeros(0, np.uint8)] * 4, [np.zeros(0, np.int64)] * 4,
                   duration_s, dict(metadata or {}))

    def __len__(self) -> int:
        return sum(t.size for t in self.times)

    def is_sorted(self) -> bool:
        return all(t.size < 2 or bool(np.all(np.diff(t) >= 0)) for t in self.times)

    def counts(self) -> list[int]:
        return [int(t.size) for t in self.times]

    def to_events(self) -> np.ndarray:
        ev = np.empty(len(self), dtype=EVENT_DTYPE)
        i = 0
        for ch in range(N_CHANNELS):
            n = self.times[ch].size
            ev["channel"][i:i + n] = ch
            ev["time"][i:i + n] = self.times[ch]
            ev["tag"][i:i + n] = self.tags[ch]
            ev["pair_id"][i:i + n] = self.pair_ids[ch]
            i += n
        order = np.lexsort((ev["channel"], ev["time"]))
        return ev[order]

    @classmethod
    def from_events(cls, ev: np.ndarray, duration_s: float, metadata=None,
                    digest: bytes = b"\0" * 32) -> "TimestampRecord":
        times, tags, ids = [], [], []
        for ch in range(N_CHANNELS):
            sel = ev[ev["channel"] == ch]
            sel = sel[np.argsort(sel["time"], kind="stable")]
            times.append(sel["time"].copy())
            tags.append(sel["tag"].copy())
            ids.append(sel["pair_id"].copy())
        return cls(times, tags, ids, duration_s, dict(metadata or {}), digest)


def merge(records: list[TimestampRecord], offsets_s: list[float] | None = None) -> TimestampRecord:
    """Concatenate records in time; each is shifted by the preceding durations
    unless explicit offsets are given."""
    if offsets_s is None:
        offsets_s, acc = [], 0.0
        for r in records:
            offsets_s.append(acc)
            acc += r.duration_s
    evs = []
    for r, off in zip(records, offsets_s):
        ev = r.to_events()
        ev["time"] += int(round(off * 1e12))
        evs.append(ev)
    ev = np.concatenate(evs) if evs else np.zeros(0, EVENT_DTYPE)
    duration = max(o + r.duration_s for r, o in zip(records, offsets_s))
    meta = dict(records[0].metadata) if records else {}
    return TimestampRecord.from_events(ev, duration, meta, records[0].digest if records else b"\0" * 32)


def write_record(record: TimestampRecord, path) -> None:
    meta = json.dumps(record.metadata, sort_keys=True).encode()
    ev = record.to_events()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, N_CHANNELS, float(record.duration_s),
                              record.digest, len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<Q", ev.size))
        fh.write(ev.tobytes())


def read_record(path) -> TimestampRecord:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise RecordFormatError("file too short for a record header")
    magic, version, nch, duration, digest, mlen = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise RecordFormatError("bad magic; not a timestamp record")
    if version != VERSION or nch != N_CHANNELS:
        raise RecordFormatError(f"unsupported record version {version} / channels {nch}")
    pos = _HEADER.size
    try:
        meta = json.loads(data[pos:pos + mlen].decode())
    except ValueError as exc:
        raise RecordFormatError("corrupt metadata block") from exc
    pos += mlen
    (n,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    if len(data) - pos != n * EVENT_DTYPE.itemsize:
        raise RecordFormatError("event block length does not match header")
    ev = np.frombuffer(data, dtype=EVENT_DTYPE, count=n, offset=pos)
    if n and (ev["channel"].max() >= N_CHANNELS):
        raise RecordFormatError("event with invalid channel")
    return TimestampRecord.from_events(ev, duration, meta, digest)


def truth_label(tag: int, pair_id: int) -> str:
    if tag in (PAIR_A, PAIR_B):
        return f"{TAG_NAMES[tag]}:{pair_id}"
    return TAG_NAMES[int(tag)]


def export_text(record: TimestampRecord, path) -> None:
    ev = record.to_events()
    with open(path, "w") as fh:
        fh.write("channel,time_ps,truth\n")
        for c, t, g, p in zip(ev["channel"], ev["time"], ev["tag"], ev["pair_id"]):
            fh.write(f"{CHANNEL_NAMES[c]},{t},{truth_label(int(g), int(p))}\n")


def import_text(path, duration_s: float) -> TimestampRecord:
    rows = Path(path).read_text().splitlines()[1:]
    ev = np.zeros(len(rows), EVENT_DTYPE)
    inv = {v: k for k, v in TAG_NAMES.items()}
    for i, row in enumerate(rows):
        ch, t, truth = row.split(",")
        ev[i]["channel"] = CHANNEL_NAMES.index(ch)
        ev[i]["time"] = int(t)
        src, _, pid = truth.partition(":")
        ev[i]["tag"] = inv[src]
        ev[i]["pair_id"] = int(pid) if pid else -1
    return TimestampRecord.from_events(ev, duration_s)
