"""Discrete-event loop around the book.

The engine is the only writer of the :class:`~telob.book.Book`.  Pending work
sits in an :class:`EventQueue` ordered by ``(time, rank, seq)``: at equal
times expirations run first, then residual activations, then arrivals, and
the opening call last.  Every state change is appended to the event log.

An optional ``open_at`` gives a call phase: orders arriving up to and
including that instant rest without matching, and the whole book is cleared
once when the market opens.  Expiration clocks start at the open.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Sequence

from .agents import AGENT_ID_BASE, AgentSpec, emit_orders, wakeup_plan
from .book import Book
from .domain import Dispatch, MarketConfig, Order
from .events import (
    CorruptLogError,
    Event,
    EventType,
    dispatch_to_json,
    marginal_to_json,
    order_from_json,
    order_to_json,
    read_jsonl,
)
from .matching import RESIDUAL_ID_BASE, MatchOutcome, clear_book, process_order
from .settlement import SettlementReport, TariffSchedule, settle

EXPIRY, ACTIVATION, ARRIVAL, OPEN = range(4)

LOG_VERSION = 1


class EngineError(RuntimeError):
    pass


class TimeRegression(EngineError):
    pass


class EventQueue:
    """Min-heap of pending work keyed by ``(time, rank, seq)``."""

    def __init__(self):
        self._heap: list[tuple[int, int, int, str, Any]] = []
        self._seq = itertools.count()

    def push(self, time: int, rank: int, kind: str, data: Any = None) -> None:
        heapq.heappush(self._heap, (time, rank, next(self._seq), kind, data))

    def pop(self) -> tuple[int, int, int, str, Any]:
        return heapq.heappop(self._heap)

    def peek_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class RunResult:
    events: list[Event]
    dispatches: list[Dispatch]
    reports: list[SettlementReport]
    book: Book
    orders: dict[int, Order]

    def jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    @property
    def prices(self) -> list[int]:
        return [d.clearing_price for d in self.dispatches]


@dataclass(frozen=True)
class Cancel:
    order_id: int
    time: int


class Engine:
    def __init__(
        self,
        config: MarketConfig | None = None,
        *,
        tariff: TariffSchedule | None = None,
        open_at: int | None = None,
        stop_time: int | None = None,
        agents: Sequence[AgentSpec] = (),
        seed: int | None = None,
        epoch: str | None = None,
        equilibrium_check: bool = False,
    ):
        self.config = config or MarketConfig()
        self.tariff = tariff or TariffSchedule()
        self.open_at = open_at
        self.stop_time = stop_time
        self.agents = list(agents)
        self.seed = seed
        self.epoch = epoch
        self.equilibrium_check = equilibrium_check
        self.book = Book(now=0, opened_at=open_at)
        self.queue = EventQueue()
        self.log: list[Event] = []
        self.dispatches: list[Dispatch] = []
        self.reports: list[SettlementReport] = []
        self.orders: dict[int, Order] = {}
        self.now: int | None = None
        self._residual_ids = itertools.count(RESIDUAL_ID_BASE)
        self._agent_ids = itertools.count(AGENT_ID_BASE)
        self._rounds = itertools.count(1)
        self._last_admitted: int | None = None
        self._open = open_at is None
        self._emit(self.book.now, EventType.CONFIGURED, self.header())
        if open_at is not None:
            self.queue.push(open_at, OPEN, "open")
        for t, i in wakeup_plan(self.agents, stop_time):
            self.queue.push(t, ARRIVAL, "wakeup", i)

    # inputs

    def header(self) -> dict[str, Any]:
        c = self.config
        return {
            "version": LOG_VERSION,
            "tick_size": c.price_str(1),
            "power_unit_kw": str(c.power_unit_kw),
            "rounding": c.rounding.value,
            "residual_mode": c.residual_mode.value,
            "tariff_per_kwh": c.price_str(self.tariff.per_kwh),
            "tariff_flat_fee": str(self.tariff.flat_fee),
            "open_at": self.open_at,
            "stop_time": self.stop_time,
            "seed": self.seed,
            "epoch": self.epoch,
        }

    def submit(self, order: Order) -> None:
        if order.activation_time is not None:
            raise EngineError(f"order {order.order_id}: only residuals carry an activation time")
        self.queue.push(order.timestamp, ARRIVAL, "arrival", order)

    def cancel(self, order_id: int, time: int) -> None:
        self.queue.push(time, ARRIVAL, "cancel", order_id)

    def load(self, orders: Iterable[Order], cancels: Iterable[Cancel] = ()) -> "Engine":
        for o in orders:
            self.submit(o)
        for c in cancels:
            self.cancel(c.order_id, c.time)
        return self

    # loop

    def run(self) -> RunResult:
        while self.queue:
            nxt = self.queue.peek_time()
            if self.stop_time is not None and nxt > self.stop_time:
                break
            self.step()
        return self.result()

    def run_until(self, before: int) -> RunResult:
        """Process only work strictly earlier than ``before``."""
        while self.queue and self.queue.peek_time() < before:
            if self.stop_time is not None and self.queue.peek_time() > self.stop_time:
                break
            self.step()
        return self.result()

    def result(self) -> RunResult:
        return RunResult(self.log, self.dispatches, self.reports, self.book, self.orders)

    def step(self) -> None:
        time, _, _, kind, data = self.queue.pop()
        if self.now is not None and time < self.now:
            raise TimeRegression(f"event at t={time} after clock t={self.now}")
        self.now = time
        expired = self.book.expire_due(time)
        for oid in expired:
            self._emit(time, EventType.EXPIRED, {"Order ID": oid})
        if expired:
            self._restore(time, expired[-1])
        getattr(self, f"_on_{kind}")(time, data)
        if self.equilibrium_check and self._open and not self.book.is_equilibrium():
            raise EngineError(f"book left out of equilibrium at t={time}")

    def _on_expiry(self, time: int, order_id: int) -> None:
        pass  # expire_due already ran for this instant

    def _on_arrival(self, time: int, order: Order) -> None:
        if order.order_id in self.orders:
            raise EngineError(f"duplicate order id {order.order_id}")
        self.orders[order.order_id] = order
        self._emit(time, EventType.SUBMITTED, {"order": order_to_json(order, self.config)})
        self._last_admitted = order.order_id
        if not self._open:
            if order.is_market:
                raise EngineError(f"market order {order.order_id} arrived before the open")
            self.book.insert(order)
            return
        outcome = process_order(self.book, order, time, config=self.config,
                                ids=self._residual_ids, rounds=self._rounds)
        self._schedule_expiry(order)
        self._record(time, outcome)

    def _on_activation(self, time: int, order: Order) -> None:
        self._emit(time, EventType.RESIDUAL_ACTIVATED, {"Order ID": order.order_id})
        outcome = process_order(self.book, order, time, config=self.config,
                                ids=self._residual_ids, rounds=self._rounds)
        self._schedule_expiry(order)
        self._record(time, outcome)

    def _on_cancel(self, time: int, order_id: int) -> None:
        if order_id in self.book:
            order = self.book.cancel(order_id)
            self._emit(time, EventType.CANCELED,
                       {"Order ID": order_id, "reason": "user", "Quantity": order.quantity})
            self._restore(time, order_id)
        else:
            self._emit(time, EventType.CANCELED,
                       {"Order ID": order_id, "reason": "not_found", "Quantity": 0})

    def _on_wakeup(self, time: int, index: int) -> None:
        snapshot = self.book.copy()
        for order in emit_orders(self.agents[index], snapshot, time, lambda: next(self._agent_ids)):
            self.queue.push(time, ARRIVAL, "arrival", order)

    def _on_open(self, time: int, _: Any) -> None:
        self._open = True
        self._emit(time, EventType.OPENED, {"resting": len(self.book)})
        for order in list(self.book):
            self._schedule_expiry(order)
        trigger = self._last_admitted if self._last_admitted is not None else 0
        outcome = clear_book(self.book, time, trigger, config=self.config,
                             ids=self._residual_ids, rounds=self._rounds)
        self._record(time, outcome)

    def _restore(self, time: int, trigger: int) -> None:
        # removing a blocking inflexible order can leave a crossable pair behind
        if self._open and not self.book.is_equilibrium():
            outcome = clear_book(self.book, time, trigger, config=self.config,
                                 ids=self._residual_ids, rounds=self._rounds)
            self._record(time, outcome)

    # outputs

    def _schedule_expiry(self, order: Order) -> None:
        deadline = self.book.deadline(order)
        if deadline is not None and order.order_id in self.book:
            self.queue.push(deadline + 1, EXPIRY, "expiry", order.order_id)

    def _record(self, time: int, outcome: MatchOutcome) -> None:
        for dispatch, marginal in zip(outcome.dispatches, outcome.marginals):
            self.dispatches.append(dispatch)
            self.reports.append(settle(dispatch, self.orders, self.tariff, self.config))
            self._emit(time, EventType.MATCHED, {
                "dispatch": dispatch_to_json(dispatch, self.config),
                "marginal": marginal_to_json(marginal),
            })
        for oid, note in outcome.advisories:
            self._emit(time, EventType.ADVISORY, {"Order ID": oid, "note": note})
        for oid, qty in outcome.canceled:
            self._emit(time, EventType.CANCELED, {"Order ID": oid, "reason": "ioc", "Quantity": qty})
        if outcome.failed:
            self._emit(time, EventType.MATCH_FAILED, {"Order ID": outcome.trigger})
        for residual in outcome.residuals:
            self.orders[residual.order_id] = residual
            self._emit(time, EventType.RESIDUAL_SCHEDULED,
                       {"order": order_to_json(residual, self.config)})
            self.queue.push(residual.active_from, ACTIVATION, "activation", residual)

    def _emit(self, time: int, etype: EventType, payload: dict[str, Any]) -> None:
        self.log.append(Event(len(self.log), time, etype, payload))


# replay


@dataclass(frozen=True)
class ReplayResult:
    verified: bool
    events_checked: int
    divergence: int | None = None
    truncated: bool = False
    expected: str | None = None
    found: str | None = None

    def __bool__(self) -> bool:
        return self.verified


def _engine_from_header(header: Event) -> Engine:
    if header.type is not EventType.CONFIGURED:
        raise CorruptLogError("log does not start with a Configured event")
    h = header.payload
    try:
        if h["version"] != LOG_VERSION:
            raise CorruptLogError(f"unsupported log version {h['version']}")
        config = MarketConfig(
            tick_size=h["tick_size"],
            power_unit_kw=h["power_unit_kw"],
            rounding=h["rounding"],
            residual_mode=h["residual_mode"],
        )
        tariff = TariffSchedule(config.ticks(h["tariff_per_kwh"]), h["tariff_flat_fee"])
        return Engine(config, tariff=tariff, open_at=h["open_at"], stop_time=h["stop_time"],
                      seed=h["seed"], epoch=h["epoch"])
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, CorruptLogError):
            raise
        raise CorruptLogError(f"bad Configured header: {exc}") from exc


def engine_from_log(events: Sequence[Event]) -> Engine:
    """A fresh engine loaded with the inputs recorded in ``events``.

    Inputs are the Submitted orders (file and agent orders alike) and user
    cancels; agents are not re-run because their orders are already logged.
    """
    if not events:
        raise CorruptLogError("empty log")
    engine = _engine_from_header(events[0])
    for e in events[1:]:
        try:
            if e.type is EventType.SUBMITTED:
                order = order_from_json(e.payload["order"], engine.config)
                engine.queue.push(e.time, ARRIVAL, "arrival", order)
            elif e.type is EventType.CANCELED and e.payload["reason"] in ("user", "not_found"):
                engine.cancel(e.payload["Order ID"], e.time)
        except (KeyError, ValueError, TypeError) as exc:
            raise CorruptLogError(f"event {e.index}: unreadable input ({exc})") from exc
    return engine


def read_log(lines: Iterable[str]) -> tuple[list[str], list[Event]]:
    raw = [line.rstrip("\n") for line in lines if line.strip()]
    return raw, list(read_jsonl(raw))


def replay(lines: Iterable[str]) -> ReplayResult:
    """Re-execute a log's inputs and compare every line of the output.

    A log that ends early but agrees on its whole prefix is reported as
    verified with ``truncated=True``.
    """
    raw, events = read_log(lines)
    rerun = [e.to_json() for e in engine_from_log(events).run().events]
    for i, (mine, theirs) in enumerate(zip(rerun, raw)):
        if mine != theirs:
            return ReplayResult(False, i, i, expected=mine, found=theirs)
    if len(raw) > len(rerun):
        return ReplayResult(False, len(rerun), len(rerun), found=raw[len(rerun)])
    return ReplayResult(True, len(raw), truncated=len(rerun) > len(raw))


def book_at(lines: Iterable[str], at: int) -> tuple[Book, Engine]:
    """The book as it stood just before time ``at``, rebuilt from a log."""
    raw, events = read_log(lines)
    if at < 0:
        raise ValueError(f"time must be nonnegative, got {at}")
    last = events[-1].time if events else 0
    if at > last:
        raise ValueError(f"time {at} is beyond the end of the log (t={last})")
    engine = engine_from_log(events)
    engine.run_until(at)
    return engine.book, engine


def run_orders(
    orders: Iterable[Order],
    config: MarketConfig | None = None,
    **kwargs,
) -> RunResult:
    cancels = kwargs.pop("cancels", ())
    return Engine(config, **kwargs).load(orders, cancels).run()


def iter_lines(text: str) -> Iterator[str]:
    return iter(text.splitlines())
