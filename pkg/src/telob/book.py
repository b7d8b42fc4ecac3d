"""The pair of priority-sorted order lists (bids, asks)."""
from __future__ import annotations

from datetime import datetime, timedelta
from typing import Iterator

from sortedcontainers import SortedKeyList

from .domain import MarketConfig, Order, Side, priority_key


class BookError(KeyError):
    pass


class Book:
    """Bids and asks, each kept best-first by price-time priority.

    ``opened_at`` is the instant the market started continuous trading.
    Expiration clocks never start before it, so orders collected during a
    call phase keep their full lifetime when the book opens.
    """

    def __init__(self, now: int = 0, opened_at: int | None = None):
        self.bids: SortedKeyList = SortedKeyList(key=priority_key)
        self.asks: SortedKeyList = SortedKeyList(key=priority_key)
        self._index: dict[int, Order] = {}
        self.now = now
        self.opened_at = opened_at

    def side(self, side: Side) -> SortedKeyList:
        return self.bids if side is Side.BUY else self.asks

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, order_id: int) -> bool:
        return order_id in self._index

    def __iter__(self) -> Iterator[Order]:
        yield from self.bids
        yield from self.asks

    def get(self, order_id: int) -> Order:
        try:
            return self._index[order_id]
        except KeyError:
            raise BookError(f"unknown order id {order_id}") from None

    def position(self, order_id: int) -> tuple[Side, int]:
        order = self.get(order_id)
        return order.side, self.side(order.side).index(order)

    @property
    def best_bid(self) -> Order | None:
        return self.bids[0] if self.bids else None

    @property
    def best_ask(self) -> Order | None:
        return self.asks[0] if self.asks else None

    def insert(self, order: Order) -> "Book":
        if order.order_id in self._index:
            raise BookError(f"duplicate order id {order.order_id}")
        if order.activation_time is not None and order.activation_time > self.now:
            raise ValueError(f"order {order.order_id} is not active until {order.activation_time}")
        self.side(order.side).add(order)
        self._index[order.order_id] = order
        return self

    def remove(self, order_id: int) -> Order:
        order = self.get(order_id)
        self.side(order.side).remove(order)
        del self._index[order_id]
        return order

    def cancel(self, order_id: int) -> Order:
        return self.remove(order_id)

    def deadline(self, order: Order) -> int | None:
        """Last instant at which ``order`` may still rest in the book."""
        if order.is_market or order.expiration is None:
            return None
        start = order.active_from
        if self.opened_at is not None:
            start = max(start, self.opened_at)
        return start + order.expiration

    def expire_due(self, now: int) -> list[int]:
        """Advance the clock to ``now`` and drop orders whose deadline has passed."""
        if now < self.now:
            raise ValueError(f"time regression: {now} < {self.now}")
        self.now = now
        due = [o for o in self if (d := self.deadline(o)) is not None and d < now]
        for order in due:
            self.remove(order.order_id)
        return [o.order_id for o in due]

    def spread(self) -> int | None:
        """Best ask minus best bid, in ticks; None if a side is empty or led by a market order."""
        bid, ask = self.best_bid, self.best_ask
        if bid is None or ask is None or bid.is_market or ask.is_market:
            return None
        return ask.limit_price - bid.limit_price

    def crossed(self) -> bool:
        bid, ask = self.best_bid, self.best_ask
        return bid is not None and ask is not None and bid.crosses(ask)

    def is_equilibrium(self) -> bool:
        from .matching import is_equilibrium

        return is_equilibrium(self)

    def copy(self) -> "Book":
        other = Book(self.now, self.opened_at)
        for order in self:
            other.side(order.side).add(order)
            other._index[order.order_id] = order
        return other

    def check(self) -> None:
        """Full rescan of the structural invariants; raises AssertionError."""
        keys = [priority_key(o) for o in self.bids]
        assert keys == sorted(keys), "bids out of priority order"
        keys = [priority_key(o) for o in self.asks]
        assert keys == sorted(keys), "asks out of priority order"
        assert all(o.is_buy for o in self.bids) and not any(o.is_buy for o in self.asks)
        ids = [o.order_id for o in self]
        assert len(ids) == len(set(ids)) == len(self._index)
        assert all(self._index[o.order_id] is o for o in self)

    def snapshot(self) -> dict[str, list[Order]]:
        return {"bids": list(self.bids), "asks": list(self.asks)}


TABLE_COLUMNS = ("Device ID", "Order ID", "Timestamp", "Quantity", "Price",
                 "isPowerFlexible", "Duration", "Expiration")


def format_table(book: Book, config: MarketConfig | None = None, epoch: datetime | None = None) -> str:
    """The book as text: a header row, then the BUY section and the SELL section.

    Quantities are signed, so asks show negative.  With an ``epoch`` the
    timestamps print as date-times.
    """
    config = config or MarketConfig()

    def stamp(t: int) -> str:
        if epoch is None:
            return str(t)
        return (epoch + timedelta(seconds=t)).strftime("%Y-%m-%d %H:%M:%S")

    def row(o: Order) -> tuple[str, ...]:
        return (
            str(o.device_id),
            str(o.order_id),
            stamp(o.active_from),
            str(o.signed_quantity),
            "MKT" if o.is_market else config.price_str(o.limit_price),
            "TRUE" if o.flexible else "FALSE",
            str(o.duration),
            "" if o.expiration is None else str(o.expiration),
        )

    buys = [row(o) for o in book.bids]
    sells = [row(o) for o in book.asks]
    widths = [max([len(c)] + [len(r[i]) for r in buys + sells]) for i, c in enumerate(TABLE_COLUMNS)]

    def line(cells) -> str:
        return " | ".join(c.rjust(w) for c, w in zip(cells, widths)).rstrip()

    out = [line(TABLE_COLUMNS), "BUY"]
    out += [line(r) for r in buys]
    out.append("SELL")
    out += [line(r) for r in sells]
    return "\n".join(out) + "\n"
