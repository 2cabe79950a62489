import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lobfractal.events import (
    BINARY_MAGIC,
    CSV_HEADER,
    BadMagic,
    DuplicateAdd,
    EventRecord,
    EventType,
    MalformedLine,
    NonMonotoneTimestamp,
    SessionWindow,
    Side,
    TruncatedRecord,
    apply_session_filter,
    clock_to_ms,
    encode_binary_log,
    log_name,
    parse_binary_log,
    parse_csv_log,
    parse_log_name,
    read_log,
    write_csv_log,
    write_log,
)
from lobfractal.synth import random_valid_stream


def csv(*lines):
    return "\n".join([CSV_HEADER, *lines]) + "\n"


def test_parse_single_line():
    recs = parse_csv_log(csv("34200000,ADD,17,BID,10150,200"))
    assert recs == [EventRecord(34200000, EventType.ADD, 17, Side.BID, 10150, 200)]


def test_parse_accepts_bytes_and_streams():
    text = csv("34200000,ADD,17,BID,10150,200")
    assert parse_csv_log(text.encode()) == parse_csv_log(io.StringIO(text)) == parse_csv_log(io.BytesIO(text.encode()))


@pytest.mark.parametrize(
    "line",
    [
        "34200000,ADD,17,MID,10150,200",
        "34200000,MODIFY,17,BID,10150,200",
        "34200000,ADD,17,BID,10150",
        "34200000,ADD,17,BID,10150,200,1",
        "34200000,ADD,x,BID,10150,200",
        "86400000,ADD,17,BID,10150,200",
        "34200000,ADD,17,BID,10150,0",
        "-1,ADD,17,BID,10150,5",
    ],
)
def test_malformed_lines(line):
    with pytest.raises(MalformedLine, match="line 2"):
        parse_csv_log(csv(line))


def test_missing_header():
    with pytest.raises(MalformedLine, match="header"):
        parse_csv_log("34200000,ADD,17,BID,10150,200\n")


def test_non_monotone_timestamp():
    with pytest.raises(NonMonotoneTimestamp, match="line 3"):
        parse_csv_log(csv("34200001,ADD,1,BID,10,1", "34200000,ADD,2,BID,10,1"))


def test_equal_timestamps_keep_file_order():
    recs = parse_csv_log(csv("5,ADD,2,BID,10,1", "5,ADD,1,BID,10,1"))
    assert [r.order_id for r in recs] == [2, 1]


def test_duplicate_add_even_after_removal():
    with pytest.raises(DuplicateAdd):
        parse_csv_log(csv("1,ADD,7,BID,10,1", "2,DELETE,7,BID,10,0", "3,ADD,7,BID,10,1"))


def test_binary_empty_file():
    assert parse_binary_log(BINARY_MAGIC) == []


def test_binary_truncated():
    data = encode_binary_log([EventRecord(1, EventType.ADD, 1, Side.BID, 10, 1)])
    with pytest.raises(TruncatedRecord):
        parse_binary_log(data[:-1])


def test_binary_bad_magic():
    with pytest.raises(BadMagic):
        parse_binary_log(b"LOBF0002")


def test_binary_record_layout():
    rec = EventRecord(0x01020304, EventType.CANCEL, 2**64 - 1, Side.ASK, 7, 9)
    data = encode_binary_log([rec])
    assert len(data) == 8 + 22
    assert data[8:12] == bytes([4, 3, 2, 1])
    assert data[12] == 2 and data[21] == 1
    assert parse_binary_log(data) == [rec]


def test_binary_applies_same_checks():
    recs = [EventRecord(5, EventType.ADD, 1, Side.BID, 10, 1), EventRecord(4, EventType.ADD, 2, Side.BID, 10, 1)]
    with pytest.raises(NonMonotoneTimestamp, match="record 1"):
        parse_binary_log(encode_binary_log(recs))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 400))
def test_csv_binary_roundtrip(seed, n):
    stream = random_valid_stream(n, seed=seed)
    buf = io.StringIO()
    write_csv_log(stream, buf)
    from_csv = parse_csv_log(buf.getvalue())
    assert from_csv == stream
    assert parse_binary_log(encode_binary_log(from_csv)) == from_csv


def test_file_roundtrip(tmp_path):
    stream = random_valid_stream(50, seed=3)
    for ext in ("csv", "lob"):
        path = tmp_path / f"XYZ_20120102.{ext}"
        write_log(stream, path)
        assert read_log(path) == stream


def test_log_names():
    stock, day, ext = parse_log_name("/x/DK1_20100601.lob")
    assert (stock, day.isoformat(), ext) == ("DK1", "2010-06-01", "lob")
    assert log_name(stock, day, "csv") == "DK1_20100601.csv"
    with pytest.raises(ValueError):
        parse_log_name("DK1-20100601.csv")


# -- session filter --------------------------------------------------------

WINDOW = SessionWindow(clock_to_ms("07:00"), clock_to_ms("15:30"), 1_800_000)


def _at(ms):
    return EventRecord(ms, EventType.ADD, ms, Side.BID, 1, 1)


def test_session_lower_bound_closed():
    assert apply_session_filter([_at(clock_to_ms("07:29:59.999"))], WINDOW) == []
    assert len(apply_session_filter([_at(clock_to_ms("07:30"))], WINDOW)) == 1


def test_session_upper_bound_open_helsinki():
    # trimmed Helsinki window runs 7:30 to 15:00
    assert apply_session_filter([_at(clock_to_ms("15:00"))], WINDOW) == []
    assert len(apply_session_filter([_at(clock_to_ms("14:59:59.999"))], WINDOW)) == 1


def test_session_window_validation():
    with pytest.raises(ValueError):
        SessionWindow(1000, 2000, 500)
    assert SessionWindow.from_clock("07:00", "15:30").start == clock_to_ms("07:30")


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.integers(0, 86_399_999), max_size=60),
    st.integers(0, 40_000_000),
    st.integers(1, 40_000_000),
    st.integers(0, 3_000_000),
)
def test_session_filter_properties(times, open_ms, length, trim):
    close_ms = open_ms + length
    if not open_ms + trim < close_ms - trim:
        return
    window = SessionWindow(open_ms, close_ms, trim)
    events = [_at(t) for t in sorted(times)]
    kept = apply_session_filter(events, window)
    assert all(window.start <= e.timestamp < window.end for e in kept)
    assert apply_session_filter(kept, window) == kept
    assert kept == [e for e in events if e in kept]
