"""Append-only market events and their JSON Lines encoding.

Every line is ``{"index", "time", "type", "payload"}`` in that order, and each
payload has a fixed key order, so two runs can be compared byte for byte.
Orders use the field names of the tabular book layout (``Order ID``,
``Device ID``, signed ``Quantity`` and so on) with prices as decimal strings.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Iterator

from .domain import Dispatch, MarketConfig, Order, OrderKind, Side, Transaction
from .matching import Marginal


class EventType(str, Enum):
    CONFIGURED = "Configured"
    SUBMITTED = "Submitted"
    CANCELED = "Canceled"
    EXPIRED = "Expired"
    RESIDUAL_SCHEDULED = "ResidualScheduled"
    RESIDUAL_ACTIVATED = "ResidualActivated"
    MATCHED = "Matched"
    MATCH_FAILED = "MatchFailed"
    OPENED = "Opened"
    ADVISORY = "Advisory"


class CorruptLogError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    index: int
    time: int
    type: EventType
    payload: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {"index": self.index, "time": self.time, "type": self.type.value, "payload": self.payload},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "Event":
        try:
            raw = json.loads(line)
            return cls(int(raw["index"]), int(raw["time"]), EventType(raw["type"]), raw["payload"])
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptLogError(f"unreadable event line: {line[:80]!r}") from exc


def order_to_json(order: Order, config: MarketConfig) -> dict[str, Any]:
    return {
        "Order ID": order.order_id,
        "Device ID": order.device_id,
        "Timestamp": order.timestamp,
        "Quantity": order.signed_quantity,
        "Price": config.price_str(order.limit_price),
        "isPowerFlexible": order.flexible,
        "Duration": order.duration,
        "Expiration": order.expiration,
        "Kind": order.kind.value,
        "Seq": order.seq,
        "Activation": order.activation_time,
        "Ancestor ID": order.ancestor_id,
        "Origin": None if order.origin is None else list(order.origin),
    }


def order_from_json(raw: dict[str, Any], config: MarketConfig) -> Order:
    q = raw["Quantity"]
    return Order(
        order_id=raw["Order ID"],
        device_id=raw["Device ID"],
        side=Side.BUY if q > 0 else Side.SELL,
        quantity=abs(q),
        duration=raw["Duration"],
        flexible=raw["isPowerFlexible"],
        kind=OrderKind(raw["Kind"]),
        limit_price=None if raw["Price"] is None else config.ticks(raw["Price"]),
        expiration=raw["Expiration"],
        timestamp=raw["Timestamp"],
        seq=raw["Seq"],
        activation_time=raw["Activation"],
        ancestor_id=raw["Ancestor ID"],
        origin=None if raw["Origin"] is None else tuple(raw["Origin"]),
    )


def transaction_to_json(t: Transaction, config: MarketConfig) -> dict[str, Any]:
    return {
        "Seller Device ID": t.seller_device,
        "Buyer Device ID": t.buyer_device,
        "Seller Order ID": t.seller_order,
        "Buyer Order ID": t.buyer_order,
        "Quantity": t.quantity,
        "Price": config.price_str(t.clearing_price),
        "Duration": t.duration,
        "Start": t.start_time,
    }


def dispatch_to_json(d: Dispatch, config: MarketConfig) -> dict[str, Any]:
    return {
        "Round ID": d.round_id,
        "Time": d.time,
        "Clearing Price": config.price_str(d.clearing_price),
        "Trigger Order": d.trigger_order,
        "Transactions": [transaction_to_json(t, config) for t in d.transactions],
    }


def dispatch_from_json(raw: dict[str, Any], config: MarketConfig) -> Dispatch:
    price = config.ticks(raw["Clearing Price"])
    return Dispatch(
        round_id=raw["Round ID"],
        time=raw["Time"],
        clearing_price=price,
        trigger_order=raw["Trigger Order"],
        transactions=tuple(
            Transaction(
                seller_device=t["Seller Device ID"],
                buyer_device=t["Buyer Device ID"],
                seller_order=t["Seller Order ID"],
                buyer_order=t["Buyer Order ID"],
                quantity=t["Quantity"],
                clearing_price=config.ticks(t["Price"]),
                duration=t["Duration"],
                start_time=t["Start"],
            )
            for t in raw["Transactions"]
        ),
    )


def marginal_to_json(m: Marginal) -> dict[str, Any]:
    return {"Order ID": m.order_id, "Cut": m.cut_quantity, "Excluded": list(m.excluded)}


def write_jsonl(events: Iterable[Event]) -> str:
    return "".join(e.to_json() + "\n" for e in events)


def read_jsonl(lines: Iterable[str]) -> Iterator[Event]:
    expected = 0
    for line in lines:
        if not line.strip():
            continue
        event = Event.from_json(line)
        if event.index != expected:
            raise CorruptLogError(f"event index {event.index} where {expected} was expected")
        expected += 1
        yield event
