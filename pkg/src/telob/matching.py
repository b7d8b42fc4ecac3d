"""Flexibility-aware quantity matching.

One clearing round takes the crossing region of the book, equalizes demand
and supply by cutting or skipping marginal orders, pairs the stacks and
prices the whole round at a single price.  Rounds repeat until the book is in
equilibrium: either the spread is positive, or every remaining crossing is
blocked by inflexible marginal orders.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator

from .book import Book
from .domain import Dispatch, MarketConfig, Order, ResidualMode, Side, Transaction
from .settlement import clearing_price

# Fresh ids for split residuals live far above anything a scenario may use.
RESIDUAL_ID_BASE = 1 << 48


@dataclass(frozen=True)
class StackEntry:
    order: Order
    quantity: int


@dataclass
class PriceFilteredStacks:
    b_prime: list[StackEntry] = field(default_factory=list)
    s_prime: list[StackEntry] = field(default_factory=list)

    @property
    def d_tot(self) -> int:
        return sum(e.quantity for e in self.b_prime)

    @property
    def s_tot(self) -> int:
        return sum(e.quantity for e in self.s_prime)

    def __bool__(self) -> bool:
        return bool(self.b_prime and self.s_prime)

    def entry(self, order_id: int) -> StackEntry:
        for e in itertools.chain(self.b_prime, self.s_prime):
            if e.order.order_id == order_id:
                return e
        raise KeyError(order_id)


@dataclass(frozen=True)
class Marginal:
    """The price-setting unit of a round.

    ``order_id`` is set when exactly one order had its quantity cut; it is
    None when the stacks matched with whole orders only.  ``excluded`` lists
    orders dropped whole while the stacks were being cut.
    """

    order_id: int | None = None
    side: Side | None = None
    cut_quantity: int = 0
    excluded: tuple[int, ...] = ()

    @property
    def cut(self) -> bool:
        return self.order_id is not None


@dataclass(frozen=True)
class Pairing:
    bid: Order
    ask: Order
    quantity: int


@dataclass(frozen=True)
class Fill:
    order_id: int
    quantity: int
    duration: int
    start_time: int


@dataclass
class MatchOutcome:
    trigger: int | None = None
    dispatches: list[Dispatch] = field(default_factory=list)
    marginals: list[Marginal] = field(default_factory=list)
    fills: list[Fill] = field(default_factory=list)
    residuals: list[Order] = field(default_factory=list)
    rested: list[int] = field(default_factory=list)
    # (order id, unfilled quantity) of market remainders
    canceled: list[tuple[int, int]] = field(default_factory=list)
    # (order id, note) for inflexible orders served for less than their duration
    advisories: list[tuple[int, str]] = field(default_factory=list)
    failed: bool = False

    @property
    def dispatch(self) -> Dispatch | None:
        return self.dispatches[0] if self.dispatches else None

    @property
    def marginal(self) -> Marginal | None:
        return self.marginals[0] if self.marginals else None

    def merge(self, other: "MatchOutcome") -> None:
        self.dispatches += other.dispatches
        self.marginals += other.marginals
        self.fills += other.fills
        self.residuals += other.residuals
        self.canceled += other.canceled
        self.advisories += other.advisories


def price_filter(book: Book) -> PriceFilteredStacks:
    """Largest crossing prefixes of both sides of the book.

    Walks both priority stacks unit by unit, admitting a bid/ask unit pair
    while the two orders cross.  If one side runs out of units, the other side
    keeps growing with every order that still crosses the exhausted side's
    least competitive order.
    """
    bids, asks = book.bids, book.asks
    nb = na = 0
    i = j = 0
    rb = bids[0].quantity if bids else 0
    ra = asks[0].quantity if asks else 0
    while i < len(bids) and j < len(asks):
        if not bids[i].crosses(asks[j]):
            break
        nb, na = i + 1, j + 1
        take = min(rb, ra)
        rb -= take
        ra -= take
        if rb == 0:
            i += 1
            rb = bids[i].quantity if i < len(bids) else 0
        if ra == 0:
            j += 1
            ra = asks[j].quantity if j < len(asks) else 0
    if nb:
        if i == len(bids):
            floor = bids[nb - 1]
            while na < len(asks) and floor.crosses(asks[na]):
                na += 1
        elif j == len(asks):
            ceiling = asks[na - 1]
            while nb < len(bids) and bids[nb].crosses(ceiling):
                nb += 1
    return PriceFilteredStacks(
        [StackEntry(o, o.quantity) for o in bids[:nb]],
        [StackEntry(o, o.quantity) for o in asks[:na]],
    )


def stack_cut(stacks: PriceFilteredStacks) -> tuple[PriceFilteredStacks, Marginal] | None:
    """Equalize demand and supply from the bottom of the larger stack.

    A flexible marginal order larger than the excess is cut and becomes the
    marginal unit.  Anything else at the bottom (inflexible, or flexible but
    no larger than the excess) is dropped whole.  Returns None when a side
    runs dry first, which is the inflexible-marginal equilibrium.
    """
    bids, asks = list(stacks.b_prime), list(stacks.s_prime)
    d, s = stacks.d_tot, stacks.s_tot
    excluded: list[int] = []
    while d != s:
        if not bids or not asks:
            return None
        if d > s:
            larger, excess, side = bids, d - s, Side.BUY
        else:
            larger, excess, side = asks, s - d, Side.SELL
        last = larger[-1]
        if last.order.flexible and last.quantity > excess:
            larger[-1] = StackEntry(last.order, last.quantity - excess)
            marginal = Marginal(last.order.order_id, side, excess, tuple(excluded))
            return PriceFilteredStacks(bids, asks), marginal
        larger.pop()
        excluded.append(last.order.order_id)
        if side is Side.BUY:
            d -= last.quantity
        else:
            s -= last.quantity
    if not bids or not asks:
        return None
    return PriceFilteredStacks(bids, asks), Marginal(excluded=tuple(excluded))


def match_stacks(stacks: PriceFilteredStacks) -> list[Pairing]:
    """Pair balanced stacks: each bid in priority order takes asks in priority order."""
    if stacks.d_tot != stacks.s_tot:
        raise ValueError(f"unbalanced stacks: demand {stacks.d_tot} != supply {stacks.s_tot}")
    remaining = [[e.order, e.quantity] for e in stacks.s_prime]
    k = 0
    pairs: list[Pairing] = []
    for entry in stacks.b_prime:
        need = entry.quantity
        while need:
            ask, left = remaining[k]
            take = min(need, left)
            pairs.append(Pairing(entry.order, ask, take))
            need -= take
            remaining[k][1] -= take
            if remaining[k][1] == 0:
                k += 1
    return pairs


def split_partial(
    order: Order,
    filled_q: int,
    filled_d: int,
    t0: int,
    *,
    new_id: int,
    mode: ResidualMode = ResidualMode.DEFERRED,
) -> tuple[Fill, Order | None]:
    """Split a partially served flexible order into its fill and a residual.

    The residual keeps the parent's price-time priority.  It carries the
    unserved quantity, or the full quantity when only the duration fell
    short, and the unserved duration, or the full duration when only the
    quantity fell short.  It activates once the fill ends.

    With ``mode=IMMEDIATE`` an unserved quantity is re-offered at ``t0`` for
    the full duration instead of waiting for the fill to end.
    """
    if not 1 <= filled_q <= order.quantity:
        raise ValueError(f"filled quantity {filled_q} outside 1..{order.quantity}")
    if not 1 <= filled_d <= order.duration:
        raise ValueError(f"filled duration {filled_d} outside 1..{order.duration}")
    if not order.flexible and filled_q < order.quantity:
        raise ValueError(f"order {order.order_id} is inflexible and cannot be partially filled")
    fill = Fill(order.order_id, filled_q, filled_d, t0)
    short_q = filled_q < order.quantity
    short_d = filled_d < order.duration
    if not (short_q or short_d):
        return fill, None
    quantity = order.quantity - filled_q if short_q else order.quantity
    duration = order.duration - filled_d if short_d else order.duration
    activation: int | None = t0 + filled_d
    if mode is ResidualMode.IMMEDIATE and short_q:
        duration, activation = order.duration, None
    residual = order.replace(
        order_id=new_id,
        quantity=quantity,
        duration=duration,
        timestamp=t0,
        activation_time=activation,
        ancestor_id=order.order_id,
        origin=(order.priority.origin_timestamp, order.priority.origin_seq),
    )
    return fill, residual


def resolve(book: Book) -> tuple[PriceFilteredStacks, Marginal] | None:
    """Balanced stacks for the next round, or None if nothing can clear."""
    stacks = price_filter(book)
    if not stacks:
        return None
    return stack_cut(stacks)


def is_equilibrium(book: Book) -> bool:
    if not book.crossed():
        return True
    return resolve(book) is None


def clear_round(
    book: Book,
    now: int,
    trigger: int,
    *,
    config: MarketConfig,
    ids: Iterator[int],
    round_id: int,
) -> MatchOutcome | None:
    """Run one clearing round on ``book`` in place; None if nothing clears."""
    resolved = resolve(book)
    if resolved is None:
        return None
    return _apply_round(book, resolved, now, trigger, config, ids, round_id)


def _apply_round(book, resolved, now, trigger, config, ids, round_id) -> MatchOutcome:
    stacks, marginal = resolved
    pairs = match_stacks(stacks)
    price = clearing_price(stacks, marginal, config.rounding)
    transactions = [
        Transaction(
            seller_device=p.ask.device_id,
            buyer_device=p.bid.device_id,
            seller_order=p.ask.order_id,
            buyer_order=p.bid.order_id,
            quantity=p.quantity,
            clearing_price=price,
            duration=min(p.bid.duration, p.ask.duration),
            start_time=now,
        )
        for p in pairs
    ]
    out = MatchOutcome(trigger=trigger)
    out.dispatches.append(Dispatch(round_id, now, price, trigger, transactions))
    out.marginals.append(marginal)

    served: dict[int, list[int]] = {}
    for t in transactions:
        for oid in (t.buyer_order, t.seller_order):
            q_d = served.setdefault(oid, [0, 0])
            q_d[0] += t.quantity
            q_d[1] = max(q_d[1], t.duration)

    for entry in itertools.chain(stacks.b_prime, stacks.s_prime):
        order = book.remove(entry.order.order_id)
        fq, fd = served[order.order_id]
        if fq == order.quantity and fd == order.duration:
            out.fills.append(Fill(order.order_id, fq, fd, now))
        elif not order.flexible:
            out.fills.append(Fill(order.order_id, fq, fd, now))
            out.advisories.append(
                (order.order_id, f"inflexible order served for {fd}s of {order.duration}s")
            )
        elif order.is_market and fq < order.quantity:
            out.fills.append(Fill(order.order_id, fq, fd, now))
            out.canceled.append((order.order_id, order.quantity - fq))
        else:
            fill, residual = split_partial(
                order, fq, fd, now, new_id=next(ids), mode=config.residual_mode
            )
            out.fills.append(fill)
            if residual is not None:
                out.residuals.append(residual)
    return out


def clear_book(
    book: Book,
    now: int,
    trigger: int,
    *,
    config: MarketConfig | None = None,
    ids: Iterator[int] | None = None,
    rounds: Iterator[int] | None = None,
) -> MatchOutcome:
    """Clear rounds until the book is back in equilibrium."""
    config = config or MarketConfig()
    ids = ids if ids is not None else itertools.count(RESIDUAL_ID_BASE)
    rounds = rounds if rounds is not None else itertools.count(1)
    outcome = MatchOutcome(trigger=trigger)
    while book.crossed():
        resolved = resolve(book)
        if resolved is None:
            break
        outcome.merge(_apply_round(book, resolved, now, trigger, config, ids, next(rounds)))
    return outcome


def process_order(
    book: Book,
    incoming: Order,
    now: int,
    *,
    config: MarketConfig | None = None,
    ids: Iterator[int] | None = None,
    rounds: Iterator[int] | None = None,
) -> MatchOutcome:
    """Admit ``incoming`` and restore equilibrium, mutating ``book`` in place.

    The incoming order joins the book at its priority position and takes part
    in clearing like any resting order, so it may itself be cut or skipped.
    Market orders never rest: an unfilled remainder is canceled, and an
    inflexible market order that does not fill completely is canceled whole.
    """
    opposite = book.side(incoming.side.opposite)
    marketable = incoming.is_market or (bool(opposite) and incoming.crosses(opposite[0]))
    book.insert(incoming)
    outcome = clear_book(book, now, incoming.order_id, config=config, ids=ids, rounds=rounds)
    if incoming.is_market and incoming.order_id in book:
        book.remove(incoming.order_id)
        outcome.canceled.append((incoming.order_id, incoming.quantity))
    filled = any(f.order_id == incoming.order_id for f in outcome.fills)
    outcome.failed = marketable and not filled
    if incoming.order_id in book:
        outcome.rested.append(incoming.order_id)
    return outcome
