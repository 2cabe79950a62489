"""Limit-order-book replay and event classification.

The book tracks every price level on both sides plus the registry of live
orders, so best prices stay correct as levels empty. Each message is turned
into at most one :class:`ClassifiedEvent` (order submission, trade or
cancellation) tagged with the pre-event best-level flag and, for trades and
cancellations, the lifetime of the referenced order.
"""

from __future__ import annotations

import bisect
import enum
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .events import EventRecord, EventType, Side


class Kind(enum.IntEnum):
    ORDER = 0
    TRADE = 1
    CANCEL = 2


class ClassifiedEvent(NamedTuple):
    timestamp: int
    kind: Kind
    side: Side
    at_best: bool
    order_id: int
    lifetime_ms: int | None
    quantity: int
    price: int


class BookError(ValueError):
    """A message that cannot be applied to the current book."""

    index: int | None = None


class UnknownOrder(BookError):
    pass


class Overfill(BookError):
    pass


class CrossedBook(BookError):
    pass


class BookInvariantError(AssertionError):
    pass


class LiveOrder(NamedTuple):
    side: Side
    price: int
    remaining: int
    submitted: int


@dataclass
class BookState:
    """Both price ladders and the live-order registry for one stock and day."""

    bid_ladder: dict[int, int] = field(default_factory=dict)
    ask_ladder: dict[int, int] = field(default_factory=dict)
    live_orders: dict[int, LiveOrder] = field(default_factory=dict)
    # ascending price keys of each ladder, kept in step with the dicts
    _bid_prices: list[int] = field(default_factory=list, repr=False)
    _ask_prices: list[int] = field(default_factory=list, repr=False)

    @property
    def best_bid(self) -> int | None:
        return self._bid_prices[-1] if self._bid_prices else None

    @property
    def best_ask(self) -> int | None:
        return self._ask_prices[0] if self._ask_prices else None

    def best(self, side: Side) -> int | None:
        return self.best_bid if side is Side.BID else self.best_ask

    def mid_sum(self) -> int | None:
        """``best_bid + best_ask`` (twice the mid) or None for a one-sided book."""
        if self._bid_prices and self._ask_prices:
            return self._bid_prices[-1] + self._ask_prices[0]
        return None

    def _ladder(self, side: Side) -> tuple[dict[int, int], list[int]]:
        if side is Side.BID:
            return self.bid_ladder, self._bid_prices
        return self.ask_ladder, self._ask_prices

    def _add_level_qty(self, side: Side, price: int, qty: int) -> None:
        ladder, prices = self._ladder(side)
        if price in ladder:
            ladder[price] += qty
        else:
            ladder[price] = qty
            bisect.insort(prices, price)

    def _remove_level_qty(self, side: Side, price: int, qty: int) -> None:
        ladder, prices = self._ladder(side)
        left = ladder[price] - qty
        if left:
            ladder[price] = left
        else:
            del ladder[price]
            del prices[bisect.bisect_left(prices, price)]

    def apply(self, event: EventRecord, deletes_are_cancels: bool = True) -> ClassifiedEvent | None:
        """Apply one message in place; see :func:`apply_event`."""
        etype = EventType(event.event_type)
        ts = event.timestamp
        oid = event.order_id

        if etype is EventType.ADD:
            side = Side(event.side)
            price = event.price
            if oid in self.live_orders:
                raise UnknownOrder(f"order {oid} is already live")
            opposite = self.best_ask if side is Side.BID else self.best_bid
            if opposite is not None and (
                price >= opposite if side is Side.BID else price <= opposite
            ):
                raise CrossedBook(
                    f"ADD {oid} {side.name}@{price} crosses opposite best {opposite}"
                )
            at_best = price == self.best(side)
            self.live_orders[oid] = LiveOrder(side, price, event.quantity, ts)
            self._add_level_qty(side, price, event.quantity)
            return ClassifiedEvent(ts, Kind.ORDER, side, at_best, oid, None, event.quantity, price)

        order = self.live_orders.get(oid)
        if order is None:
            raise UnknownOrder(f"{etype.name} references unknown order {oid}")
        side, price = order.side, order.price
        at_best = price == self.best(side)
        lifetime = ts - order.submitted

        if etype is EventType.DELETE:
            qty = order.remaining
        else:
            qty = event.quantity
            if qty > order.remaining:
                raise Overfill(
                    f"{etype.name} of {qty} exceeds remaining {order.remaining} on order {oid}"
                )
        if qty == order.remaining:
            del self.live_orders[oid]
        else:
            self.live_orders[oid] = order._replace(remaining=order.remaining - qty)
        self._remove_level_qty(side, price, qty)

        if etype is EventType.EXECUTE:
            return ClassifiedEvent(ts, Kind.TRADE, side, at_best, oid, lifetime, qty, price)
        if etype is EventType.CANCEL or deletes_are_cancels:
            return ClassifiedEvent(ts, Kind.CANCEL, side, at_best, oid, lifetime, qty, price)
        return None

    def check_invariants(self) -> None:
        """Raise :class:`BookInvariantError` if ladders, registry and bests disagree."""
        sums: tuple[dict[int, int], dict[int, int]] = ({}, {})
        for order in self.live_orders.values():
            if order.remaining <= 0:
                raise BookInvariantError(f"non-positive remaining quantity {order}")
            bucket = sums[order.side]
            bucket[order.price] = bucket.get(order.price, 0) + order.remaining
        if sums[Side.BID] != self.bid_ladder or sums[Side.ASK] != self.ask_ladder:
            raise BookInvariantError("ladder quantities do not match live orders")
        if self._bid_prices != sorted(self.bid_ladder) or self._ask_prices != sorted(self.ask_ladder):
            raise BookInvariantError("price index out of step with ladders")
        bb, ba = self.best_bid, self.best_ask
        if bb is not None and ba is not None and bb >= ba:
            raise BookInvariantError(f"crossed book: bid {bb} >= ask {ba}")

    def snapshot(self) -> dict:
        """JSON-ready view of the book."""
        return {
            "best_bid": self.best_bid,
            "best_ask": self.best_ask,
            "bids": [[p, self.bid_ladder[p]] for p in reversed(self._bid_prices)],
            "asks": [[p, self.ask_ladder[p]] for p in self._ask_prices],
            "live_orders": {
                str(oid): {
                    "side": o.side.name,
                    "price": o.price,
                    "remaining": o.remaining,
                    "submitted": o.submitted,
                }
                for oid, o in sorted(self.live_orders.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), indent=2, sort_keys=True)


def apply_event(
    state: BookState, event: EventRecord, deletes_are_cancels: bool = True
) -> tuple[BookState, ClassifiedEvent | None]:
    """Apply ``event`` to ``state`` (mutated in place) and classify it.

    ADD emits ORDER, EXECUTE emits TRADE and CANCEL emits CANCEL. DELETE removes
    the whole remaining quantity and emits CANCEL unless ``deletes_are_cancels``
    is false, in which case nothing is emitted. For EXECUTE/CANCEL/DELETE the
    side and price come from the live-order registry, not from the message.

    Raises:
        UnknownOrder: the referenced order is not live (or an ADD reuses a live id).
        Overfill: EXECUTE/CANCEL quantity exceeds the order's remaining quantity.
        CrossedBook: an ADD at or through the opposite best.
    """
    return state, state.apply(event, deletes_are_cancels)


class DayReplay(NamedTuple):
    events: list[ClassifiedEvent]
    # (timestamp, best_bid + best_ask or None) at every change of the pair
    mid_path: list[tuple[int, int | None]]


def replay_with_mid_path(
    events: Sequence[EventRecord],
    deletes_are_cancels: bool = True,
    check_invariants: bool = False,
    dump_at: int | None = None,
) -> tuple[DayReplay, BookState | None]:
    """Replay a day from an empty book, also recording the mid-price path.

    The returned path stores twice the mid in ticks so it stays integral. When
    ``dump_at`` is given, a copy of the book taken after the last event with
    timestamp <= ``dump_at`` is returned alongside.
    """
    state = BookState()
    out: list[ClassifiedEvent] = []
    path: list[tuple[int, int | None]] = []
    last_mid: object = object()
    dumped: BookState | None = None
    apply = state.apply
    for i, ev in enumerate(events):
        if dump_at is not None and dumped is None and ev.timestamp > dump_at:
            dumped = _copy_state(state)
        try:
            ce = apply(ev, deletes_are_cancels)
        except BookError as exc:
            exc.index = i
            exc.args = (f"event {i}: {exc.args[0]}",)
            raise
        if check_invariants:
            state.check_invariants()
        if ce is not None:
            out.append(ce)
        mid = state.mid_sum()
        if mid != last_mid:
            if path and path[-1][0] == ev.timestamp:
                path[-1] = (ev.timestamp, mid)
            else:
                path.append((ev.timestamp, mid))
            last_mid = mid
    if dump_at is not None and dumped is None:
        dumped = _copy_state(state)
    return DayReplay(out, path), dumped


def replay_day(
    events: Sequence[EventRecord],
    deletes_are_cancels: bool = True,
    check_invariants: bool = False,
) -> list[ClassifiedEvent]:
    """Fold :func:`apply_event` over a session-filtered day from an empty book.

    Errors from individual messages propagate with the offending event index
    set on ``exc.index`` and prefixed to the message.
    """
    replay, _ = replay_with_mid_path(events, deletes_are_cancels, check_invariants)
    return replay.events


def _copy_state(state: BookState) -> BookState:
    return BookState(
        dict(state.bid_ladder),
        dict(state.ask_ladder),
        dict(state.live_orders),
        list(state._bid_prices),
        list(state._ask_prices),
    )
