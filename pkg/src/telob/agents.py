"""Schedule-driven device agents.

Agents are open-loop stubs: each has fixed reservation prices and a wake-up
schedule, and every wake-up produces the same orders for the same
``(seed, now, book)``.  The archetype alone decides power flexibility.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .book import Book
from .domain import MarketConfig, Order, OrderKind, Side

AGENT_ID_BASE = 1 << 40


class Archetype(str, Enum):
    HVAC = "HVAC"
    WATER_HEATER = "WaterHeater"
    EV_V0G = "EV_V0G"
    EV_V1G = "EV_V1G"
    EV_V2G = "EV_V2G"
    PV = "PV"
    BATTERY = "Battery"
    FEEDER = "Feeder"


LOADS = {Archetype.HVAC, Archetype.WATER_HEATER, Archetype.EV_V0G, Archetype.EV_V1G}
TWO_SIDED = {Archetype.BATTERY, Archetype.EV_V2G}


def is_flexible(archetype: Archetype, curtailable: bool = False) -> bool:
    """Thermostatic loads, V0G chargers and uncurtailed PV are all-or-nothing."""
    archetype = Archetype(archetype)
    if archetype is Archetype.PV:
        return curtailable
    return archetype not in {Archetype.HVAC, Archetype.WATER_HEATER, Archetype.EV_V0G}


class AgentError(ValueError):
    pass


@dataclass(frozen=True)
class FeederParams:
    """Pseudo market maker: bids the wholesale price, asks the locational marginal price."""

    wholesale: int
    lmp: int
    depth: int

    def __post_init__(self):
        if self.lmp < self.wholesale:
            raise AgentError(f"feeder ask {self.lmp} below bid {self.wholesale} would self-cross")
        if self.depth < 1:
            raise AgentError("feeder depth must be at least 1 unit")


@dataclass(frozen=True)
class AgentSpec:
    """One device and its bidding template.

    Prices are in ticks.  ``price`` is the reservation price of a load, the
    floor of a PV array, or unused for two-sided devices, which quote
    ``band = (buy below, sell above)``.  ``jitter`` adds a seeded uniform
    offset of up to that many ticks to each quote.
    """

    device_id: int
    archetype: Archetype
    quantity: int
    duration: int
    price: int | None = None
    band: tuple[int, int] | None = None
    feeder: FeederParams | None = None
    curtailable: bool = False
    expiration: int | None = None
    start: int = 0
    interval: int | None = None
    count: int = 1
    jitter: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "archetype", Archetype(self.archetype))
        a = self.archetype
        if self.quantity < 1 or self.duration < 1:
            raise AgentError(f"agent {self.device_id}: quantity and duration must be positive")
        if a is Archetype.FEEDER:
            if self.feeder is None:
                raise AgentError(f"agent {self.device_id}: feeder needs wholesale/lmp prices")
        elif a in TWO_SIDED:
            if self.band is None or self.band[0] > self.band[1]:
                raise AgentError(f"agent {self.device_id}: {a.value} needs a band (low <= high)")
        elif self.price is None:
            raise AgentError(f"agent {self.device_id}: {a.value} needs a price")
        if self.curtailable and a is not Archetype.PV:
            raise AgentError(f"agent {self.device_id}: only PV can be curtailable")
        if self.count < 1:
            raise AgentError(f"agent {self.device_id}: count must be positive")
        if self.count > 1 and not self.interval:
            raise AgentError(f"agent {self.device_id}: repeated wake-ups need an interval")
        if self.jitter < 0:
            raise AgentError(f"agent {self.device_id}: jitter must be nonnegative")

    @property
    def flexible(self) -> bool:
        return is_flexible(self.archetype, self.curtailable)

    def wakeups(self, stop_time: int | None = None) -> list[int]:
        times = [self.start + k * (self.interval or 0) for k in range(self.count)]
        return [t for t in times if stop_time is None or t <= stop_time]


def _rng(agent: AgentSpec, now: int) -> random.Random:
    return random.Random(f"{agent.seed}:{agent.device_id}:{now}")


def emit_orders(
    agent: AgentSpec,
    snapshot: Book | None,
    now: int,
    next_id: Callable[[], int],
) -> list[Order]:
    """Orders for one wake-up of ``agent``.

    Loads buy at their reservation price and PV sells at its floor.  A
    battery or V2G charger buys at the bottom of its band when the best ask
    is already there, sells at the top when the best bid reaches it, and
    otherwise picks a side by coin flip.  The feeder posts both quotes.
    """
    rng = _rng(agent, now)

    def jitter(price: int) -> int:
        return price + (rng.randint(-agent.jitter, agent.jitter) if agent.jitter else 0)

    def order(side: Side, price: int, quantity: int, expiration=agent.expiration) -> Order:
        oid = next_id()
        return Order(
            order_id=oid,
            device_id=agent.device_id,
            side=side,
            quantity=quantity,
            duration=agent.duration,
            flexible=agent.flexible,
            kind=OrderKind.LIMIT,
            limit_price=price,
            expiration=expiration,
            timestamp=now,
            seq=oid,
        )

    a = agent.archetype
    if a is Archetype.FEEDER:
        f = agent.feeder
        return [order(Side.BUY, f.wholesale, f.depth), order(Side.SELL, f.lmp, f.depth)]
    if a in LOADS:
        return [order(Side.BUY, jitter(agent.price), agent.quantity)]
    if a is Archetype.PV:
        return [order(Side.SELL, jitter(agent.price), agent.quantity)]
    low, high = agent.band
    best_ask = snapshot.best_ask if snapshot is not None else None
    best_bid = snapshot.best_bid if snapshot is not None else None
    coin = rng.random() < 0.5
    if best_ask is not None and not best_ask.is_market and best_ask.limit_price <= low:
        side = Side.BUY
    elif best_bid is not None and not best_bid.is_market and best_bid.limit_price >= high:
        side = Side.SELL
    else:
        side = Side.BUY if coin else Side.SELL
    return [order(side, jitter(low if side is Side.BUY else high), agent.quantity)]


# Static curves and the convergence experiment.

Curve = Sequence[tuple[int, int]]  # (price in ticks, units)


def _units(curve: Curve, descending: bool) -> list[int]:
    prices = [p for p, q in curve for _ in range(q)]
    return sorted(prices, reverse=descending)


def equilibrium(demand: Curve, supply: Curve) -> tuple[int, int]:
    """Competitive quantity and price where the two step curves cross.

    The price is the midpoint of the price interval that supports the
    competitive quantity.  Raises :class:`AgentError` if the curves do not
    cross or the crossing price is not unique on the tick grid.
    """
    d, s = _units(demand, True), _units(supply, False)
    if not d or not s:
        raise AgentError("both curves need at least one unit")
    q = 0
    while q < min(len(d), len(s)) and d[q] >= s[q]:
        q += 1
    if q == 0:
        raise AgentError("supply lies above demand everywhere: the curves do not cross")
    # price range supporting q: at least the last traded ask and the first
    # untraded bid, at most the last traded bid and the first untraded ask
    lo = max(s[q - 1], d[q] if q < len(d) else s[q - 1])
    hi = min(d[q - 1], s[q] if q < len(s) else d[q - 1])
    if lo > hi:
        raise AgentError("curves cross without a supporting price")
    if (lo + hi) % 2:
        raise AgentError(f"crossing interval [{lo}, {hi}] has no unique midpoint tick")
    return q, (lo + hi) // 2


@dataclass(frozen=True)
class ConvergenceScenario:
    orders: tuple[Order, ...]
    p_star: int
    q_star: int
    config: MarketConfig = field(default_factory=MarketConfig)


def convergence_scenario(
    demand: Curve,
    supply: Curve,
    seed: int,
    *,
    periods: int = 5,
    spacing: int = 1,
    duration: int = 1,
    config: MarketConfig | None = None,
) -> ConvergenceScenario:
    """Randomized arrivals of flexible unit orders drawn from two static curves.

    Every curve unit is submitted once per period at its curve price.  The
    units of all periods are shuffled together and arrive ``spacing``
    seconds apart.  Unfilled orders never expire.
    """
    q_star, p_star = equilibrium(demand, supply)
    rng = random.Random(seed)
    units = [(Side.BUY, p) for p, q in demand for _ in range(q)]
    units += [(Side.SELL, p) for p, q in supply for _ in range(q)]
    stream = units * periods
    rng.shuffle(stream)
    orders = tuple(
        Order(
            order_id=i,
            device_id=i,
            side=side,
            quantity=1,
            duration=duration,
            flexible=True,
            limit_price=price,
            timestamp=i * spacing,
            seq=i,
        )
        for i, (side, price) in enumerate(stream, 1)
    )
    return ConvergenceScenario(orders, p_star, q_star, config or MarketConfig())


def tail_within(prices: Sequence[int], p_star: int, tolerance: int = 1, fraction: Fraction = Fraction(1, 5)) -> bool:
    """True if the last ``fraction`` of the price sequence stays within ``tolerance`` ticks of ``p_star``."""
    if not prices:
        return False
    n = max(1, int(len(prices) * fraction))
    return all(abs(p - p_star) <= tolerance for p in prices[-n:])


def wakeup_plan(agents: Iterable[AgentSpec], stop_time: int | None) -> list[tuple[int, int]]:
    """(time, agent index) pairs in time order, ties by agent index."""
    plan = [(t, i) for i, a in enumerate(agents) for t in a.wakeups(stop_time)]
    return sorted(plan)
