"""Market domain types.

Prices are integer tick counts, quantities integer power units and durations
whole seconds.  Nothing in the book or the matcher ever touches a float; the
conversion to and from currency happens once, at the serialization boundary,
through :class:`MarketConfig`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import Any, NamedTuple

__all__ = [
    "Side",
    "OrderKind",
    "Rounding",
    "ResidualMode",
    "OrderError",
    "MarketConfig",
    "PriorityKey",
    "Order",
    "Transaction",
    "Dispatch",
    "MARKET_RANK",
    "make_order",
    "priority_key",
    "to_ticks",
    "format_ticks",
    "midpoint",
    "OrderFactory",
]

# Sorts ahead of every limit rank on either side.
MARKET_RANK = -(1 << 64)


class OrderError(ValueError):
    """Raised for an order description that violates the order invariants."""


class Side(str, Enum):
    BUY = "buy"
    SELL = "sell"

    @property
    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY


class OrderKind(str, Enum):
    LIMIT = "limit"
    MARKET = "market"


class Rounding(str, Enum):
    """Rounding of a midpoint that falls between two ticks."""

    HALF_UP = "half_up"  # toward the buyer's (higher) price
    HALF_DOWN = "half_down"  # toward the seller's price
    HALF_EVEN = "half_even"


class ResidualMode(str, Enum):
    DEFERRED = "deferred"
    IMMEDIATE = "immediate"


def _is_decimal_fraction(value: Fraction) -> bool:
    d = value.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


@dataclass(frozen=True)
class MarketConfig:
    """Numeric granularity and clearing options shared by all modules."""

    tick_size: Fraction = Fraction(1, 100)
    power_unit_kw: Fraction = Fraction(1)
    rounding: Rounding = Rounding.HALF_UP
    residual_mode: ResidualMode = ResidualMode.DEFERRED

    def __post_init__(self):
        object.__setattr__(self, "tick_size", Fraction(self.tick_size))
        object.__setattr__(self, "power_unit_kw", Fraction(self.power_unit_kw))
        object.__setattr__(self, "rounding", Rounding(self.rounding))
        object.__setattr__(self, "residual_mode", ResidualMode(self.residual_mode))
        if self.tick_size <= 0 or not _is_decimal_fraction(self.tick_size):
            raise ValueError(f"tick size must be a positive decimal, got {self.tick_size}")
        if self.power_unit_kw <= 0:
            raise ValueError("power unit must be positive")

    @property
    def price_places(self) -> int:
        places = 0
        t = self.tick_size
        while t.denominator != 1:
            t *= 10
            places += 1
        return places

    def ticks(self, value: Any) -> int:
        return to_ticks(value, self.tick_size)

    def price_str(self, ticks: int | None) -> str | None:
        return None if ticks is None else format_ticks(ticks, self.tick_size)

    def currency(self, ticks: int) -> Fraction:
        return ticks * self.tick_size


def to_ticks(value: Any, tick_size: Fraction = Fraction(1, 100)) -> int:
    """Convert a currency amount (str, int, Decimal, Fraction) to whole ticks.

    Floats are accepted through their shortest decimal repr so that a JSON
    ``2.5`` means exactly 2.50.
    """
    if isinstance(value, bool):
        raise OrderError(f"price must be numeric, got {value!r}")
    if isinstance(value, float):
        value = Decimal(repr(value))
    try:
        amount = Fraction(value)
    except (ValueError, TypeError) as exc:
        raise OrderError(f"unparseable price {value!r}") from exc
    ticks = amount / Fraction(tick_size)
    if ticks.denominator != 1:
        raise OrderError(f"price {value} is not a whole number of {tick_size} ticks")
    return int(ticks)


def format_ticks(ticks: int, tick_size: Fraction = Fraction(1, 100)) -> str:
    amount = ticks * Fraction(tick_size)
    places = MarketConfig(tick_size=tick_size).price_places
    q = Decimal(amount.numerator) / Decimal(amount.denominator)
    return f"{q:.{places}f}"


def midpoint(high: int, low: int, rounding: Rounding = Rounding.HALF_UP) -> int:
    """Midpoint of two tick prices, ``high`` being the buyer's side."""
    total = high + low
    if total % 2 == 0:
        return total // 2
    down = total // 2
    if rounding is Rounding.HALF_UP:
        return down + 1
    if rounding is Rounding.HALF_DOWN:
        return down
    return down if down % 2 == 0 else down + 1


class PriorityKey(NamedTuple):
    """Smaller keys have better priority within one side of the book."""

    limit_rank: int
    origin_timestamp: int
    origin_seq: int


@dataclass(frozen=True)
class Order:
    order_id: int
    device_id: int
    side: Side
    quantity: int
    duration: int
    flexible: bool
    kind: OrderKind = OrderKind.LIMIT
    limit_price: int | None = None
    expiration: int | None = None
    timestamp: int = 0
    seq: int = 0
    activation_time: int | None = None
    ancestor_id: int | None = None
    origin: tuple[int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "kind", OrderKind(self.kind))
        if self.quantity < 1:
            raise OrderError(f"order {self.order_id}: quantity must be at least 1 unit")
        if self.duration < 1:
            raise OrderError(f"order {self.order_id}: duration must be at least 1 second")
        if self.kind is OrderKind.MARKET:
            if self.limit_price is not None:
                raise OrderError(f"order {self.order_id}: market order cannot carry a price")
            if self.expiration is not None:
                raise OrderError(f"order {self.order_id}: market order cannot carry an expiration")
        else:
            if self.limit_price is None:
                raise OrderError(f"order {self.order_id}: limit order requires a price")
            if self.expiration is not None and self.expiration < 0:
                raise OrderError(f"order {self.order_id}: expiration must be nonnegative")
        if self.activation_time is not None and self.activation_time <= self.timestamp:
            raise OrderError(f"order {self.order_id}: activation must follow the timestamp")

    @property
    def is_market(self) -> bool:
        return self.kind is OrderKind.MARKET

    @property
    def is_buy(self) -> bool:
        return self.side is Side.BUY

    @property
    def signed_quantity(self) -> int:
        return self.quantity if self.is_buy else -self.quantity

    @property
    def active_from(self) -> int:
        return self.timestamp if self.activation_time is None else self.activation_time

    @property
    def priority(self) -> PriorityKey:
        return priority_key(self)

    def crosses(self, other: "Order") -> bool:
        """True when this order and an opposite-side order can trade on price."""
        bid, ask = (self, other) if self.is_buy else (other, self)
        if bid.is_market or ask.is_market:
            return True
        return bid.limit_price >= ask.limit_price

    def replace(self, **changes) -> "Order":
        return replace(self, **changes)


def priority_key(order: Order) -> PriorityKey:
    ts, seq = order.origin if order.origin is not None else (order.timestamp, order.seq)
    if order.is_market:
        rank = MARKET_RANK
    else:
        rank = -order.limit_price if order.is_buy else order.limit_price
    return PriorityKey(rank, ts, seq)


@dataclass(frozen=True)
class Transaction:
    seller_device: int
    buyer_device: int
    seller_order: int
    buyer_order: int
    quantity: int
    clearing_price: int
    duration: int
    start_time: int

    def __post_init__(self):
        if self.quantity < 1:
            raise ValueError("transaction quantity must be positive")
        if self.duration < 1:
            raise ValueError("transaction duration must be positive")


@dataclass(frozen=True)
class Dispatch:
    round_id: int
    time: int
    clearing_price: int
    trigger_order: int
    transactions: tuple[Transaction, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "transactions", tuple(self.transactions))
        for t in self.transactions:
            if t.clearing_price != self.clearing_price:
                raise ValueError("all transactions of a dispatch settle at one price")

    @property
    def quantity(self) -> int:
        return sum(t.quantity for t in self.transactions)

    def bought(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for t in self.transactions:
            out[t.buyer_order] = out.get(t.buyer_order, 0) + t.quantity
        return out

    def sold(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for t in self.transactions:
            out[t.seller_order] = out.get(t.seller_order, 0) + t.quantity
        return out


def make_order(
    *,
    order_id: int,
    device_id: int,
    quantity: int,
    duration: int,
    flexible: bool = False,
    price: Any = None,
    expiration: int | None = None,
    kind: OrderKind | str = OrderKind.LIMIT,
    timestamp: int = 0,
    seq: int = 0,
    tick_size: Fraction = Fraction(1, 100),
) -> Order:
    """Build an order from the signed-quantity description used on the wire.

    Positive quantities are bids, negative quantities asks. ``price`` is in
    currency units and must land on the tick grid.
    """
    if isinstance(quantity, bool) or not isinstance(quantity, int):
        raise OrderError(f"order {order_id}: quantity must be an integer, got {quantity!r}")
    if quantity == 0:
        raise OrderError(f"order {order_id}: quantity must be nonzero")
    kind = OrderKind(kind)
    if kind is OrderKind.MARKET and price is not None:
        raise OrderError(f"order {order_id}: market order cannot carry a price")
    if kind is OrderKind.LIMIT and price is None:
        raise OrderError(f"order {order_id}: limit order requires a price")
    ticks = None if price is None else to_ticks(price, tick_size)
    return Order(
        order_id=order_id,
        device_id=device_id,
        side=Side.BUY if quantity > 0 else Side.SELL,
        quantity=abs(quantity),
        duration=duration,
        flexible=bool(flexible),
        kind=kind,
        limit_price=ticks,
        expiration=expiration,
        timestamp=timestamp,
        seq=seq,
    )


class OrderFactory:
    """Hands out monotone submission sequence numbers."""

    def __init__(self, tick_size: Fraction = Fraction(1, 100), start: int = 1):
        self.tick_size = Fraction(tick_size)
        self._seq = itertools.count(start)

    def make(self, **raw) -> Order:
        raw.setdefault("tick_size", self.tick_size)
        return make_order(seq=next(self._seq), **raw)
