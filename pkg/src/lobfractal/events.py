"""Canonical order-book message logs: records, CSV/binary codecs, session filter.

One file holds one stock for one trading day. Timestamps are exchange-local
milliseconds since midnight; prices are integer ticks.

CSV layout (UTF-8, LF, header required)::

    timestamp,event_type,order_id,side,price,quantity

Binary layout: the 8-byte magic ``LOBF0001`` followed by packed little-endian
22-byte records ``u32 timestamp_ms, u8 event_type, u64 order_id, u8 side,
u32 price_ticks, u32 quantity``.
"""

from __future__ import annotations

import enum
import io
import re
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

MS_PER_DAY = 86_400_000
CSV_HEADER = "timestamp,event_type,order_id,side,price,quantity"
BINARY_MAGIC = b"LOBF0001"
RECORD_DTYPE = np.dtype(
    [
        ("timestamp", "<u4"),
        ("event_type", "u1"),
        ("order_id", "<u8"),
        ("side", "u1"),
        ("price", "<u4"),
        ("quantity", "<u4"),
    ]
)
assert RECORD_DTYPE.itemsize == 22

_FILENAME_RE = re.compile(r"^(?P<stock>.+)_(?P<day>\d{8})\.(?P<ext>csv|lob)$")


class EventType(enum.IntEnum):
    ADD = 0
    EXECUTE = 1
    CANCEL = 2
    DELETE = 3


class Side(enum.IntEnum):
    BID = 0
    ASK = 1


class EventRecord(NamedTuple):
    """One normalized order-book message."""

    timestamp: int
    event_type: EventType
    order_id: int
    side: Side
    price: int
    quantity: int


class LogFormatError(ValueError):
    """Base class for malformed message logs."""


class MalformedLine(LogFormatError):
    pass


class NonMonotoneTimestamp(LogFormatError):
    pass


class DuplicateAdd(LogFormatError):
    pass


class TruncatedRecord(LogFormatError):
    pass


class BadMagic(LogFormatError):
    pass


@dataclass(frozen=True)
class SessionWindow:
    """Trading session ``[open, close)`` with ``trim`` ms removed at both ends."""

    open: int
    close: int
    trim: int = 1_800_000

    def __post_init__(self):
        if self.trim < 0:
            raise ValueError("trim must be nonnegative")
        if not self.open + self.trim < self.close - self.trim:
            raise ValueError(
                f"empty session: open={self.open} close={self.close} trim={self.trim}"
            )

    @property
    def start(self) -> int:
        return self.open + self.trim

    @property
    def end(self) -> int:
        return self.close - self.trim

    @classmethod
    def from_clock(cls, open_hhmm: str, close_hhmm: str, trim_minutes: float = 30) -> "SessionWindow":
        return cls(clock_to_ms(open_hhmm), clock_to_ms(close_hhmm), int(round(trim_minutes * 60_000)))


def clock_to_ms(text: str) -> int:
    """``"07:30"`` or ``"07:30:00.250"`` -> milliseconds since midnight."""
    parts = text.strip().split(":")
    if not 2 <= len(parts) <= 3:
        raise ValueError(f"bad clock time {text!r}")
    hours, minutes = int(parts[0]), int(parts[1])
    seconds = float(parts[2]) if len(parts) == 3 else 0.0
    ms = (hours * 3600 + minutes * 60) * 1000 + int(round(seconds * 1000))
    if not 0 <= ms <= MS_PER_DAY:
        raise ValueError(f"clock time out of range: {text!r}")
    return ms


def ms_to_clock(ms: int) -> str:
    seconds, millis = divmod(int(ms), 1000)
    minutes, seconds = divmod(seconds, 60)
    hours, minutes = divmod(minutes, 60)
    return f"{hours:02d}:{minutes:02d}:{seconds:02d}.{millis:03d}"


def parse_log_name(path: str | Path) -> tuple[str, date, str]:
    """Split ``<stockid>_<yyyymmdd>.(csv|lob)`` into (stock, day, extension)."""
    name = Path(path).name
    match = _FILENAME_RE.match(name)
    if match is None:
        raise ValueError(f"log file name {name!r} does not match <stock>_<yyyymmdd>.(csv|lob)")
    raw = match["day"]
    return match["stock"], date(int(raw[:4]), int(raw[4:6]), int(raw[6:])), match["ext"]


def log_name(stock: str, day: date, ext: str = "csv") -> str:
    return f"{stock}_{day:%Y%m%d}.{ext}"


class _Validator:
    """Day-level checks shared by both codecs: monotone time, unique ADD ids."""

    def __init__(self):
        self.last_ts = -1
        self.added: set[int] = set()

    def check(self, rec: EventRecord, where: str) -> None:
        if rec.timestamp < self.last_ts:
            raise NonMonotoneTimestamp(
                f"{where}: timestamp {rec.timestamp} precedes {self.last_ts}"
            )
        self.last_ts = rec.timestamp
        if rec.event_type is EventType.ADD:
            if rec.order_id in self.added:
                raise DuplicateAdd(f"{where}: order {rec.order_id} added twice")
            self.added.add(rec.order_id)


def _check_fields(ts: int, etype: EventType, oid: int, price: int, qty: int, where: str) -> None:
    if not 0 <= ts < MS_PER_DAY:
        raise MalformedLine(f"{where}: timestamp {ts} outside the day")
    if not 0 <= oid < 2**64:
        raise MalformedLine(f"{where}: order id {oid} out of u64 range")
    if not 0 <= price < 2**32:
        raise MalformedLine(f"{where}: price {price} out of u32 range")
    if not 0 <= qty < 2**32:
        raise MalformedLine(f"{where}: quantity {qty} out of u32 range")
    if qty == 0 and etype is not EventType.DELETE:
        raise MalformedLine(f"{where}: quantity must be positive for {etype.name}")


_TYPES = {t.name: t for t in EventType}
_SIDES = {s.name: s for s in Side}


def parse_csv_log(stream: BinaryIO | io.TextIOBase | Iterable[str] | bytes | str) -> list[EventRecord]:
    """Parse a canonical CSV message log.

    Accepts a binary or text stream, raw bytes, or the text itself. Records are
    returned in file order; equal timestamps keep file order.

    Raises:
        MalformedLine: wrong field count, bad enum, non-integer or out-of-range field.
        NonMonotoneTimestamp: a timestamp smaller than its predecessor.
        DuplicateAdd: an order id added twice in the same file.
    """
    lines = _text_lines(stream)
    header = next(lines, None)
    if header is None or header.strip() != CSV_HEADER:
        raise MalformedLine(f"line 1: expected header {CSV_HEADER!r}, got {header!r}")

    validator = _Validator()
    records: list[EventRecord] = []
    for lineno, raw in enumerate(lines, start=2):
        line = raw.rstrip("\r\n")
        if not line:
            continue
        where = f"line {lineno}"
        fields = line.split(",")
        if len(fields) != 6:
            raise MalformedLine(f"{where}: expected 6 fields, got {len(fields)}")
        try:
            etype = _TYPES[fields[1]]
            side = _SIDES[fields[3]]
        except KeyError as exc:
            raise MalformedLine(f"{where}: unknown enum value {exc.args[0]!r}") from None
        try:
            ts, oid, price, qty = int(fields[0]), int(fields[2]), int(fields[4]), int(fields[5])
        except ValueError:
            raise MalformedLine(f"{where}: non-integer field in {line!r}") from None
        _check_fields(ts, etype, oid, price, qty, where)
        rec = EventRecord(ts, etype, oid, side, price, qty)
        validator.check(rec, where)
        records.append(rec)
    return records


def _text_lines(stream) -> Iterator[str]:
    if hasattr(stream, "read"):
        stream = stream.read()
    if isinstance(stream, (bytes, bytearray)):
        stream = stream.decode("utf-8")
    if isinstance(stream, str):
        return iter(stream.split("\n"))
    return iter(stream)


def write_csv_log(records: Sequence[EventRecord], stream: io.TextIOBase) -> None:
    stream.write(CSV_HEADER + "\n")
    for r in records:
        stream.write(
            f"{r.timestamp},{EventType(r.event_type).name},{r.order_id},"
            f"{Side(r.side).name},{r.price},{r.quantity}\n"
        )


def encode_binary_log(records: Sequence[EventRecord]) -> bytes:
    arr = np.empty(len(records), dtype=RECORD_DTYPE)
    if records:
        cols = list(zip(*records))
        for name, col in zip(RECORD_DTYPE.names, cols):
            arr[name] = np.asarray(col, dtype=np.uint64 if name == "order_id" else np.int64)
    return BINARY_MAGIC + arr.tobytes()


def parse_binary_log(stream: BinaryIO | bytes) -> list[EventRecord]:
    """Decode the compact binary log; returns the same records as the CSV parse.

    Raises:
        BadMagic: missing or wrong 8-byte header.
        TruncatedRecord: payload length not a multiple of 22 bytes.
        MalformedLine, NonMonotoneTimestamp, DuplicateAdd: as for CSV, with record indices.
    """
    data = stream if isinstance(stream, bytes) else stream.read()
    if data[: len(BINARY_MAGIC)] != BINARY_MAGIC:
        raise BadMagic(f"expected magic {BINARY_MAGIC!r}, got {data[:8]!r}")
    payload = memoryview(data)[len(BINARY_MAGIC):]
    if len(payload) % RECORD_DTYPE.itemsize:
        raise TruncatedRecord(
            f"payload of {len(payload)} bytes is not a multiple of {RECORD_DTYPE.itemsize}"
        )
    arr = np.frombuffer(payload, dtype=RECORD_DTYPE)
    validator = _Validator()
    records: list[EventRecord] = []
    types = list(EventType)
    sides = list(Side)
    for i, (ts, et, oid, sd, price, qty) in enumerate(arr.tolist()):
        where = f"record {i}"
        if et > 3 or sd > 1:
            raise MalformedLine(f"{where}: bad enum code event_type={et} side={sd}")
        etype = types[et]
        _check_fields(ts, etype, oid, price, qty, where)
        rec = EventRecord(ts, etype, oid, sides[sd], price, qty)
        validator.check(rec, where)
        records.append(rec)
    return records


def read_log(path: str | Path) -> list[EventRecord]:
    """Parse a log file, picking the codec from its extension."""
    path = Path(path)
    if path.suffix == ".lob":
        return parse_binary_log(path.read_bytes())
    with path.open("r", encoding="utf-8", newline="") as fh:
        return parse_csv_log(fh)


def write_log(records: Sequence[EventRecord], path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".lob":
        path.write_bytes(encode_binary_log(records))
    else:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            write_csv_log(records, fh)


def apply_session_filter(events: Sequence[EventRecord], window: SessionWindow) -> list[EventRecord]:
    """Keep events with ``open + trim <= timestamp < close - trim``, order preserved."""
    lo, hi = window.start, window.end
    return [e for e in events if lo <= e.timestamp < hi]
