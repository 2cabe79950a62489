"""Validation signals with known scaling and synthetic order-flow days.

``generate`` covers white noise, its running sum, and exact fractional
Gaussian noise by circulant embedding of the fGn autocovariance. A dense
Cholesky generator is kept for small sizes as an independent check.

``synth_order_flow`` turns a duration sequence into a valid one-day message
log whose trade-to-trade gaps reproduce those durations exactly.
"""

from __future__ import annotations

import enum
import io
from collections import defaultdict, deque
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np
from scipy.linalg import cholesky, toeplitz

from .book import BookState
from .events import EventRecord, EventType, SessionWindow, Side, log_name, write_log

HELSINKI = SessionWindow(7 * 3_600_000, 15 * 3_600_000 + 1_800_000, 1_800_000)


class SignalKind(str, enum.Enum):
    WHITE = "white"
    BROWNIAN_INCREMENTS_INTEGRATED = "brownian"
    FGN = "fgn"


class EmbeddingFailure(RuntimeError):
    pass


class InvalidShapeParams(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    kind: SignalKind
    length: int
    seed: int = 0
    hurst: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SignalKind(self.kind))
        if self.length < 2:
            raise ValueError("length must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.kind is SignalKind.FGN:
            if self.hurst is None or not 0 < self.hurst < 1:
                raise ValueError(f"fGn needs 0 < hurst < 1, got {self.hurst}")


def fgn_autocovariance(hurst: float, lags: np.ndarray | int) -> np.ndarray:
    """Unit-variance fGn autocovariance ``(|k+1|^2H - 2|k|^2H + |k-1|^2H) / 2``."""
    k = np.abs(np.asarray(lags, dtype=np.float64))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def _circulant_eigenvalues(hurst: float, n: int) -> np.ndarray:
    gamma = fgn_autocovariance(hurst, np.arange(n + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])  # length 2n
    return np.fft.fft(row).real


def fgn_circulant(n: int, hurst: float, rng: np.random.Generator, max_doublings: int = 3) -> np.ndarray:
    """Exact fGn sample of length ``n`` by circulant embedding.

    The covariance row is embedded in a circulant of size ``2m`` with ``m = n``;
    if that has negative eigenvalues ``m`` is doubled, up to ``max_doublings``
    times.
    """
    m = n
    for _ in range(max_doublings + 1):
        lam = _circulant_eigenvalues(hurst, m)
        if lam.min() >= -1e-10 * lam.max():
            break
        m *= 2
    else:
        raise EmbeddingFailure(f"negative circulant eigenvalues for H={hurst}, n={n}")
    size = lam.size
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    y = np.fft.fft(np.sqrt(np.clip(lam, 0.0, None) / size) * z)
    return y.real[:n].copy()


def fgn_cholesky(n: int, hurst: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Dense-covariance fGn (O(n^3)); only for small ``n``.

    With ``size`` set, returns ``size`` independent rows sharing one factorization.
    """
    cov = toeplitz(fgn_autocovariance(hurst, np.arange(n)))
    factor = cholesky(cov, lower=True)
    if size is None:
        return factor @ rng.standard_normal(n)
    return rng.standard_normal((size, n)) @ factor.T


def generate(spec: GeneratorSpec) -> np.ndarray:
    """Deterministic sample for ``spec``; the same seed gives the same array."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind is SignalKind.WHITE:
        return rng.standard_normal(spec.length)
    if spec.kind is SignalKind.BROWNIAN_INCREMENTS_INTEGRATED:
        return np.cumsum(rng.standard_normal(spec.length))
    return fgn_circulant(spec.length, spec.hurst, rng)


def write_signal_csv(values: np.ndarray, stream: io.TextIOBase) -> None:
    stream.write("index,value\n")
    stream.writelines(f"{i},{v:.12g}\n" for i, v in enumerate(np.asarray(values).tolist()))


# -- durations ------------------------------------------------------------


def signal_to_durations(signal: np.ndarray, mean_ms: float, log_sigma: float = 0.3) -> np.ndarray:
    """Log-duration model: ``mean_ms * exp(log_sigma * x - log_sigma**2 / 2)``, rounded to ms.

    For unit-variance Gaussian ``x`` the expected duration is ``mean_ms``.
    """
    x = np.asarray(signal, dtype=np.float64)
    d = mean_ms * np.exp(log_sigma * x - 0.5 * log_sigma**2)
    return np.rint(d).astype(np.int64)


def exponential_durations(n: int, mean_ms: float, rng: np.random.Generator) -> np.ndarray:
    return np.rint(rng.exponential(mean_ms, n)).astype(np.int64)


@dataclass(frozen=True)
class DurationSource:
    """Where a day's trade gaps come from: i.i.d. exponential, or a Gaussian
    signal (``signal``) pushed through the log-duration model."""

    n: int
    mean_ms: float
    kind: str = "exponential"  # or "signal"
    signal: GeneratorSpec | None = None
    log_sigma: float = 0.3

    def durations(self, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "exponential":
            return exponential_durations(self.n, self.mean_ms, rng)
        if self.kind == "signal":
            if self.signal is None:
                raise InvalidShapeParams("signal source needs a GeneratorSpec")
            x = generate(self.signal)[: self.n]
            if x.size < self.n:
                raise InvalidShapeParams("signal shorter than requested durations")
            return signal_to_durations(x, self.mean_ms, self.log_sigma)
        raise InvalidShapeParams(f"unknown duration source {self.kind!r}")


# -- order flow ------------------------------------------------------------


@dataclass(frozen=True)
class BookShape:
    """Knobs of the synthetic book. Rates are expected counts per trade gap;
    the cancel rate scales with ``live orders / target_live``."""

    base_price: int = 10_000
    depth: int = 5
    lot: int = 100
    add_rate: float = 1.5
    cancel_rate: float = 1.0
    target_live: int = 50
    move_prob: float = 0.05
    partial_prob: float = 0.3

    def validate(self) -> None:
        if self.depth < 1 or self.lot < 1 or self.target_live < 1:
            raise InvalidShapeParams("depth and lot must be positive")
        if self.base_price <= self.depth + 1:
            raise InvalidShapeParams("base price too small for the requested depth")
        for name in ("add_rate", "cancel_rate"):
            if getattr(self, name) < 0:
                raise InvalidShapeParams(f"{name} must be nonnegative")
        for name in ("move_prob", "partial_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidShapeParams(f"{name} must lie in [0, 1]")


class _FlowBuilder:
    """Emits messages while mirroring them in a BookState, so every message is
    checked against the book as it is produced."""

    def __init__(self, shape: BookShape, rng: np.random.Generator):
        self.shape = shape
        self.rng = rng
        self.book = BookState()
        self.events: list[EventRecord] = []
        self.next_id = 1
        self.center = shape.base_price  # bids <= center < center + 1 <= asks
        self.live: list[int] = []
        self.pos: dict[int, int] = {}
        # FIFO of order ids per (side, price); removed orders are skipped lazily
        self.queues: dict[tuple[Side, int], deque[int]] = defaultdict(deque)

    def _emit(self, ev: EventRecord) -> None:
        self.book.apply(ev)
        self.events.append(ev)
        oid = ev.order_id
        if ev.event_type is EventType.ADD:
            self.pos[oid] = len(self.live)
            self.live.append(oid)
            self.queues[(ev.side, ev.price)].append(oid)
        elif oid not in self.book.live_orders:
            i = self.pos.pop(oid)
            last = self.live.pop()
            if last != oid:
                self.live[i] = last
                self.pos[last] = i

    def _qty(self) -> int:
        return self.shape.lot * int(self.rng.integers(1, 6))

    def add(self, t: int, side: Side, level: int = 0) -> None:
        price = self.center - level if side is Side.BID else self.center + 1 + level
        self._emit(EventRecord(t, EventType.ADD, self.next_id, side, price, self._qty()))
        self.next_id += 1

    def add_random(self, t: int) -> None:
        side = Side(int(self.rng.integers(0, 2)))
        level = min(int(self.rng.geometric(0.5)) - 1, self.shape.depth - 1)
        self.add(t, side, level)

    def cancel_random(self, t: int) -> None:
        if len(self.live) <= 2 * self.shape.depth:
            return
        oid = self.live[int(self.rng.integers(0, len(self.live)))]
        order = self.book.live_orders[oid]
        qty = order.remaining
        if qty > 1 and self.rng.random() < self.shape.partial_prob:
            qty = int(self.rng.integers(1, qty))
        self._emit(EventRecord(t, EventType.CANCEL, oid, order.side, order.price, qty))

    def move(self, t: int) -> None:
        up = self.rng.random() < 0.5
        book = self.book
        if up:
            # clear the inside ask level, then the bid side may step up
            doomed = [oid for oid, o in book.live_orders.items()
                      if o.side is Side.ASK and o.price == self.center + 1]
            for oid in doomed:
                o = book.live_orders[oid]
                self._emit(EventRecord(t, EventType.CANCEL, oid, o.side, o.price, o.remaining))
            self.center += 1
            self.add(t, Side.BID)
            if book.best_ask is None:
                self.add(t, Side.ASK)
        else:
            if self.center - 1 <= self.shape.depth:
                return
            doomed = [oid for oid, o in book.live_orders.items()
                      if o.side is Side.BID and o.price == self.center]
            for oid in doomed:
                o = book.live_orders[oid]
                self._emit(EventRecord(t, EventType.CANCEL, oid, o.side, o.price, o.remaining))
            self.center -= 1
            self.add(t, Side.ASK)
            if book.best_bid is None:
                self.add(t, Side.BID)

    def trade(self, t: int, side: Side) -> None:
        book = self.book
        best = book.best(side)
        if best is None:
            self.add(t, side)
            best = book.best(side)
        # oldest order at the best price (price-time priority)
        queue = self.queues[(side, best)]
        while queue[0] not in book.live_orders:
            queue.popleft()
        oid = queue[0]
        order = book.live_orders[oid]
        qty = order.remaining
        if qty > 1 and self.rng.random() < self.shape.partial_prob:
            qty = int(self.rng.integers(1, qty))
        self._emit(EventRecord(t, EventType.EXECUTE, oid, side, order.price, qty))
        # replenish the inside level so the next trade always finds liquidity
        self.add(t, side)


def synth_order_flow(
    durations: np.ndarray | Mapping[Side, np.ndarray],
    shape: BookShape = BookShape(),
    seed: int = 0,
    session: SessionWindow = HELSINKI,
    trade_side: Side = Side.BID,
    first_trade_offset_ms: int = 1_000,
) -> list[EventRecord]:
    """Build one valid day of messages around prescribed trade gaps.

    Trades on each side happen at ``first + cumsum(durations)``; between trades
    the book receives random limit orders, cancellations and occasional
    one-tick moves of the inside quotes. The tr-tr series of each trading side
    equals its (ms-rounded) durations.

    Args:
        durations: gaps in ms for ``trade_side``, or a mapping side -> gaps.
        shape: book parameters.
        seed: RNG seed for the background flow.
        session: all messages fall inside ``[session.start, session.end)``.

    Raises:
        InvalidShapeParams: bad shape, negative durations, or trades overrunning the session.
    """
    shape.validate()
    if not isinstance(durations, Mapping):
        durations = {trade_side: durations}
    rng = np.random.default_rng(seed)
    t_open = session.start
    first = t_open + first_trade_offset_ms

    trades: list[tuple[int, int, Side]] = []
    for side, gaps in sorted(durations.items()):
        gaps = np.rint(np.asarray(gaps, dtype=np.float64)).astype(np.int64)
        if gaps.size and gaps.min() < 0:
            raise InvalidShapeParams("durations must be nonnegative")
        times = first + np.concatenate([[0], np.cumsum(gaps)])
        if times[-1] >= session.end:
            raise InvalidShapeParams(
                f"{side.name} trades end at {times[-1]} ms, past session end {session.end}"
            )
        trades.extend((int(t), i, Side(side)) for i, t in enumerate(times.tolist()))
    trades.sort(key=lambda item: (item[0], item[2], item[1]))

    flow = _FlowBuilder(shape, rng)
    for level in range(shape.depth):
        flow.add(t_open, Side.BID, level)
        flow.add(t_open, Side.ASK, level)

    prev = t_open
    for t_trade, _, side in trades:
        n_add = int(rng.poisson(shape.add_rate))
        n_cancel = int(rng.poisson(shape.cancel_rate * len(flow.live) / shape.target_live))
        n_move = int(rng.random() < shape.move_prob)
        actions = ["a"] * n_add + ["c"] * n_cancel + ["m"] * n_move
        if actions:
            rng.shuffle(actions)
            times = np.sort(rng.integers(prev, t_trade + 1, size=len(actions)))
            for act, t in zip(actions, times.tolist()):
                if act == "a":
                    flow.add_random(t)
                elif act == "c":
                    flow.cancel_random(t)
                else:
                    flow.move(t)
        flow.trade(t_trade, side)
        prev = t_trade
    return flow.events


def random_valid_stream(n_events: int, seed: int = 0, start_ms: int = 34_200_000) -> list[EventRecord]:
    """Random but valid message stream mixing all four message types,
    partial fills and timestamp ties; for property tests of the book."""
    rng = np.random.default_rng(seed)
    book = BookState()
    out: list[EventRecord] = []
    live: list[int] = []
    t = start_ms
    next_id = 1
    center = 10_000
    while len(out) < n_events:
        t += int(rng.integers(0, 20))
        removal_bias = 0.75 if len(live) > 200 else 0.45
        if not live or rng.random() > removal_bias:
            side = Side(int(rng.integers(0, 2)))
            j = int(rng.integers(0, 8))
            if side is Side.BID:
                ceiling = (book.best_ask if book.best_ask is not None else center + 1) - 1
                price = ceiling - j
            else:
                floor = (book.best_bid if book.best_bid is not None else center) + 1
                price = floor + j
            ev = EventRecord(t, EventType.ADD, next_id, side, price, int(rng.integers(1, 500)))
            next_id += 1
            live.append(ev.order_id)
        else:
            i = int(rng.integers(0, len(live)))
            oid = live[i]
            order = book.live_orders[oid]
            etype = EventType(int(rng.integers(1, 4)))
            if etype is EventType.DELETE:
                qty = 0 if rng.random() < 0.5 else order.remaining
            else:
                qty = order.remaining if rng.random() < 0.6 else int(rng.integers(1, order.remaining + 1))
            ev = EventRecord(t, etype, oid, order.side, order.price, qty)
            if etype is EventType.DELETE or qty == order.remaining:
                live[i] = live[-1]
                live.pop()
        book.apply(ev)
        out.append(ev)
    return out


# -- corpora ---------------------------------------------------------------


@dataclass(frozen=True)
class CorpusSpec:
    """Multi-day synthetic corpus; ``hurst=None`` gives i.i.d. exponential gaps."""

    n_days: int = 20
    trades_per_day: int = 3000
    hurst: float | None = 0.68
    seed: int = 0
    stock: str = "SYN"
    start: date = date(2010, 6, 1)
    log_sigma: float = 0.3
    fill: float = 0.8  # fraction of the session the trades span on average
    session: SessionWindow = HELSINKI
    shape: BookShape = field(default_factory=BookShape)

    def __post_init__(self):
        if self.n_days < 1 or self.trades_per_day < 2:
            raise ValueError("need at least one day and two trades per day")
        if self.hurst is not None and not 0 < self.hurst < 1:
            raise ValueError(f"hurst must lie in (0, 1), got {self.hurst}")


def trading_days(start: date, n: int) -> list[date]:
    days, d = [], start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def corpus_durations(spec: CorpusSpec) -> list[np.ndarray]:
    """Per-day trade gaps. With ``hurst`` set, one continuous fGn spans all
    days so the concatenated series keeps its long memory across days."""
    n = spec.trades_per_day - 1
    span = spec.session.end - spec.session.start
    mean_ms = spec.fill * span / n
    rng = np.random.default_rng([spec.seed, 1])
    if spec.hurst is None:
        gaps = exponential_durations(n * spec.n_days, mean_ms, rng)
    else:
        x = fgn_circulant(n * spec.n_days, spec.hurst, rng)
        gaps = signal_to_durations(x, mean_ms, spec.log_sigma)
    return [gaps[i * n:(i + 1) * n] for i in range(spec.n_days)]


def iter_corpus(spec: CorpusSpec) -> Iterator[tuple[date, list[EventRecord]]]:
    """Yield ``(day, events)`` one day at a time so large corpora stream to disk."""
    days = trading_days(spec.start, spec.n_days)
    for i, (day, gaps) in enumerate(zip(days, corpus_durations(spec))):
        yield day, synth_order_flow(gaps, spec.shape, seed=int(spec.seed) * 100_003 + i, session=spec.session)


def synth_corpus(spec: CorpusSpec) -> dict[date, list[EventRecord]]:
    return dict(iter_corpus(spec))


def write_corpus(spec: CorpusSpec, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write each synthetic day as ``<stock>_<yyyymmdd>.<fmt>``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for day, events in iter_corpus(spec):
        path = out_dir / log_name(spec.stock, day, fmt)
        write_log(events, path)
        paths.append(path)
    return paths
