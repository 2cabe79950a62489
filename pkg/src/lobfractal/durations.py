"""Per-day duration series: inter-event gaps and order lifetimes.

Five variables are extracted per side:

========  ===============================================
or-or     gap between consecutive order submissions
tr-tr     gap between consecutive trades
ca-ca     gap between consecutive cancellations
or-tr     order lifetime, submission to (each) trade
or-ca     order lifetime, submission to cancellation
========  ===============================================

Durations are integer milliseconds. Series never span two days.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass
from datetime import date
from typing import NamedTuple, Sequence, Union

import numpy as np

from .book import ClassifiedEvent, Kind
from .events import Side


class Variable(str, enum.Enum):
    OR_OR = "or-or"
    TR_TR = "tr-tr"
    CA_CA = "ca-ca"
    OR_TR = "or-tr"
    OR_CA = "or-ca"

    @property
    def kind(self) -> Kind:
        """Event kind whose timestamps (or lifetimes) make up the series."""
        return _VARIABLE_KIND[self]

    @property
    def is_lifetime(self) -> bool:
        return self in (Variable.OR_TR, Variable.OR_CA)

    @classmethod
    def parse(cls, text: str) -> "Variable":
        key = text.strip().lower().replace("_", "-")
        return cls(key)


_VARIABLE_KIND = {
    Variable.OR_OR: Kind.ORDER,
    Variable.TR_TR: Kind.TRADE,
    Variable.CA_CA: Kind.CANCEL,
    Variable.OR_TR: Kind.TRADE,
    Variable.OR_CA: Kind.CANCEL,
}

# only ca-ca is restricted to best-level events by default
DEFAULT_BEST_ONLY = {
    Variable.OR_OR: False,
    Variable.TR_TR: False,
    Variable.CA_CA: True,
    Variable.OR_TR: False,
    Variable.OR_CA: False,
}


class MixedKey(ValueError):
    pass


class DurationFormatError(ValueError):
    pass


@dataclass
class DurationSeries:
    stock_id: str
    day: date | None
    side: Side
    variable: Variable
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.values.ndim != 1:
            raise ValueError("duration values must be one-dimensional")
        if self.values.size and self.values.min() < 0:
            raise ValueError("durations must be nonnegative")

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    @property
    def key(self) -> tuple[str, Side, Variable]:
        return self.stock_id, self.side, self.variable


class EventTable(NamedTuple):
    """Column view of a classified-event stream, for vectorized filtering."""

    timestamp: np.ndarray
    kind: np.ndarray
    side: np.ndarray
    at_best: np.ndarray
    lifetime: np.ndarray  # -1 where absent
    quantity: np.ndarray

    def __len__(self) -> int:
        return int(self.timestamp.size)


Events = Union[Sequence[ClassifiedEvent], EventTable]


def event_table(events: Events) -> EventTable:
    if isinstance(events, EventTable):
        return events
    n = len(events)
    if n == 0:
        empty = np.empty(0, dtype=np.int64)
        return EventTable(empty, empty.astype(np.int8), empty.astype(np.int8),
                          empty.astype(bool), empty, empty)
    ts, kind, side, best, _oid, life, qty, _price = zip(*events)
    return EventTable(
        np.fromiter(ts, dtype=np.int64, count=n),
        np.fromiter(kind, dtype=np.int8, count=n),
        np.fromiter(side, dtype=np.int8, count=n),
        np.fromiter(best, dtype=bool, count=n),
        np.fromiter((-1 if x is None else x for x in life), dtype=np.int64, count=n),
        np.fromiter(qty, dtype=np.int64, count=n),
    )


def qualifying_mask(table: EventTable, kind: Kind, side: Side, best_only: bool = False) -> np.ndarray:
    mask = (table.kind == int(kind)) & (table.side == int(side))
    if best_only:
        mask &= table.at_best
    return mask


def inter_event_durations(
    events: Events,
    kind: Kind,
    side: Side,
    best_only: bool = False,
    stock_id: str = "",
    day: date | None = None,
) -> DurationSeries:
    """Consecutive timestamp gaps between qualifying events, in event order.

    Fewer than two qualifying events give an empty series. Equal timestamps
    produce zero durations, which are kept.
    """
    table = event_table(events)
    ts = table.timestamp[qualifying_mask(table, kind, side, best_only)]
    values = np.diff(ts) if ts.size >= 2 else np.empty(0, dtype=np.int64)
    variable = {Kind.ORDER: Variable.OR_OR, Kind.TRADE: Variable.TR_TR, Kind.CANCEL: Variable.CA_CA}[Kind(kind)]
    return DurationSeries(stock_id, day, Side(side), variable, values)


def lifetime_durations(
    events: Events,
    terminal: Kind,
    side: Side,
    best_only: bool = False,
    stock_id: str = "",
    day: date | None = None,
) -> DurationSeries:
    """Lifetimes carried by each TRADE or CANCEL event, ordered by terminal time.

    A partially filled order contributes one lifetime per execution.
    """
    terminal = Kind(terminal)
    if terminal is Kind.ORDER:
        raise ValueError("lifetimes end in a TRADE or a CANCEL")
    table = event_table(events)
    values = table.lifetime[qualifying_mask(table, terminal, side, best_only)]
    variable = Variable.OR_TR if terminal is Kind.TRADE else Variable.OR_CA
    return DurationSeries(stock_id, day, Side(side), variable, values)


def extract_series(
    events: Events,
    variable: Variable,
    side: Side,
    best_only: bool | None = None,
    drop_zeros: bool = False,
    stock_id: str = "",
    day: date | None = None,
) -> DurationSeries:
    """One variable/side series with the configured best-level and zero handling."""
    variable = Variable(variable)
    if best_only is None:
        best_only = DEFAULT_BEST_ONLY[variable]
    if variable.is_lifetime:
        series = lifetime_durations(events, variable.kind, side, best_only, stock_id, day)
    else:
        series = inter_event_durations(events, variable.kind, side, best_only, stock_id, day)
    if drop_zeros:
        series.values = series.values[series.values != 0]
    return series


def concat_days(series: Sequence[DurationSeries]) -> DurationSeries:
    """Join daily series end to end; no overnight durations are inserted.

    Raises:
        MixedKey: inputs disagree on stock, side or variable.
    """
    if not series:
        raise ValueError("nothing to concatenate")
    key = series[0].key
    for s in series[1:]:
        if s.key != key:
            raise MixedKey(f"cannot concatenate {s.key} onto {key}")
    values = np.concatenate([s.values for s in series]) if len(series) > 1 else series[0].values.copy()
    first = series[0]
    return DurationSeries(first.stock_id, None, first.side, first.variable, values)


# -- serialization ---------------------------------------------------------

DURATION_CSV_HEADER = "stock,day,side,variable,index,duration_ms"
DURATION_MAGIC = b"LOBD0001"


def write_duration_csv(series: Sequence[DurationSeries], stream: io.TextIOBase) -> None:
    stream.write(DURATION_CSV_HEADER + "\n")
    for s in series:
        day = "" if s.day is None else f"{s.day:%Y-%m-%d}"
        prefix = f"{s.stock_id},{day},{s.side.name},{s.variable.value},"
        stream.writelines(f"{prefix}{i},{v}\n" for i, v in enumerate(s.values.tolist()))


def read_duration_csv(stream: io.TextIOBase) -> list[DurationSeries]:
    """Inverse of :func:`write_duration_csv`; groups rows back into series.

    A series with no values has no rows and therefore does not come back.
    """
    lines = iter(stream)
    header = next(lines, "").strip()
    if header != DURATION_CSV_HEADER:
        raise DurationFormatError(f"expected header {DURATION_CSV_HEADER!r}, got {header!r}")
    groups: dict[tuple, list[int]] = {}
    for lineno, line in enumerate(lines, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise DurationFormatError(f"line {lineno}: expected 6 fields")
        stock, day, side, var, index, value = parts
        key = (stock, day, side, var)
        bucket = groups.setdefault(key, [])
        if int(index) != len(bucket):
            raise DurationFormatError(f"line {lineno}: index {index} out of sequence")
        bucket.append(int(value))
    out = []
    for (stock, day, side, var), values in groups.items():
        out.append(
            DurationSeries(
                stock,
                date.fromisoformat(day) if day else None,
                Side[side],
                Variable(var),
                np.array(values, dtype=np.int64),
            )
        )
    return out


def encode_duration_binary(series: DurationSeries) -> bytes:
    """``LOBD0001`` + u16 stock length + stock utf-8 + u32 yyyymmdd (0 if none)
    + u8 side + u8 variable index + u64 count + count * u32 durations, little-endian."""
    stock = series.stock_id.encode("utf-8")
    day = 0 if series.day is None else int(f"{series.day:%Y%m%d}")
    var_index = list(Variable).index(series.variable)
    if series.values.size and series.values.max() >= 2**32:
        raise DurationFormatError("duration exceeds u32 range")
    head = struct.pack(f"<H{len(stock)}sIBBQ", len(stock), stock, day, int(series.side), var_index, series.n)
    return DURATION_MAGIC + head + series.values.astype("<u4").tobytes()


def decode_duration_binary(data: bytes) -> DurationSeries:
    if data[:8] != DURATION_MAGIC:
        raise DurationFormatError("bad duration-series magic")
    pos = 8
    (slen,) = struct.unpack_from("<H", data, pos)
    pos += 2
    stock = data[pos:pos + slen].decode("utf-8")
    pos += slen
    day_raw, side, var_index, count = struct.unpack_from("<IBBQ", data, pos)
    pos += struct.calcsize("<IBBQ")
    payload = data[pos:]
    if len(payload) != 4 * count:
        raise DurationFormatError(f"expected {count} durations, found {len(payload) / 4:g}")
    day = None if day_raw == 0 else date(day_raw // 10000, day_raw // 100 % 100, day_raw % 100)
    values = np.frombuffer(payload, dtype="<u4").astype(np.int64)
    return DurationSeries(stock, day, Side(side), list(Variable)[var_index], values)
