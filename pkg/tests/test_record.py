import numpy as np
import pytest

from asyncswap.record import (
    DARK,
    PAIR_A,
    PAIR_B,
    STRAY,
    RecordFormatError,
    TimestampRecord,
    export_text,
    import_text,
    merge,
    read_record,
    write_record,
)


def small_record(offset=0):
    times = [np.array([5, 100, 900]) + offset, np.array([7]) + offset,
             np.array([], int), np.array([3, 3, 40]) + offset]
    tags = [np.array([PAIR_A, STRAY, DARK]), np.array([PAIR_B]), np.array([], int),
            np.array([PAIR_A, PAIR_B, STRAY])]
    ids = [np.array([1, -1, -1]), np.array([2]), np.array([], int), np.array([1, 2, -1])]
    return TimestampRecord(times, tags, ids, 1e-9, {"seed": 3}, b"\x01" * 32)


def assert_same(a, b):
    for k in range(4):
        assert np.array_equal(a.times[k], b.times[k])
        assert np.array_equal(a.tags[k], b.tags[k])
        assert np.array_equal(a.pair_ids[k], b.pair_ids[k])


def test_binary_round_trip(tmp_path):
    rec = small_record()
    write_record(rec, tmp_path / "r.astr")
    back = read_record(tmp_path / "r.astr")
    assert_same(rec, back)
    assert back.duration_s == rec.duration_s
    assert back.metadata == {"seed": 3}
    assert back.digest == b"\x01" * 32


def test_streams_are_read_only_int64():
    rec = small_record()
    assert all(t.dtype == np.int64 for t in rec.times)
    with pytest.raises(ValueError):
        rec.times[0][0] = 1


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.astr"
    write_record(small_record(), p)
    data = bytearray(p.read_bytes())
    data[:4] = b"XXXX"
    p.write_bytes(bytes(data))
    with pytest.raises(RecordFormatError):
        read_record(p)


def test_truncated_file(tmp_path):
    p = tmp_path / "t.astr"
    write_record(small_record(), p)
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(RecordFormatError):
        read_record(p)
    p.write_bytes(b"AS")
    with pytest.raises(RecordFormatError):
        read_record(p)


def test_text_round_trip(tmp_path):
    rec = small_record()
    export_text(rec, tmp_path / "r.txt")
    lines = (tmp_path / "r.txt").read_text().splitlines()
    assert lines[0] == "channel,time_ps,truth"
    assert "D4,3,A:1" in lines and "D1,900,dark" in lines
    assert_same(rec, import_text(tmp_path / "r.txt", rec.duration_s))


def test_events_sorted_by_time_then_channel():
    ev = small_record().to_events()
    key = list(zip(ev["time"], ev["channel"]))
    assert key == sorted(key)


def test_merge_shifts_by_duration():
    a = small_record()
    b = TimestampRecord([np.array([0]), [], [], []], [[STRAY], [], [], []],
                        [[-1], [], [], []], 2.0)
    m = merge([b, a])
    assert m.duration_s == pytest.approx(2.0 + 1e-9)
    assert m.times[0].tolist() == [0, 2_000_000_000_005, 2_000_000_000_100, 2_000_000_000_900]
    assert len(m) == len(a) + len(b)
    assert m.is_sorted()


def test_empty_record():
    rec = TimestampRecord.empty(5.0)
    assert len(rec) == 0 and rec.counts() == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        TimestampRecord([[]] * 3, [[]] * 3, [[]] * 3, 1.0)
