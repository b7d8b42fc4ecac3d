"""Brute-force reference for small books.

Enumerates every legal clearing of a book: a price-compatible prefix of each
side, optionally with the last order of one prefix cut if it is flexible, and
equal quantity on both sides.  The matcher's priority-ordered exclusion
procedure always ends on the legal clearing with the largest traded quantity
(each side's reachable totals form a set; repeatedly dropping from the larger
side walks both sets downward and stops at their largest common value), so
that is the clearing :func:`check` expects.

Nothing here shares code with :mod:`telob.matching`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .book import Book
from .domain import Order, Rounding

if TYPE_CHECKING:
    from .matching import MatchOutcome

MAX_ORDERS = 8
MAX_QUANTITY = 6


class OracleCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class LegalClearing:
    bids: tuple[tuple[int, int], ...]  # (order id, included quantity), priority order
    asks: tuple[tuple[int, int], ...]
    cut: tuple[int, int] | None  # (order id, units cut)
    transactions: tuple[tuple[int, int, int], ...]  # (bid id, ask id, quantity)
    price: int | None

    @property
    def quantity(self) -> int:
        return sum(q for _, q in self.bids)

    def allocation(self) -> dict[int, int]:
        return dict(self.bids + self.asks)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    kind: str = "pass"
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _compatible(bid: Order, ask: Order) -> bool:
    if bid.is_market or ask.is_market:
        return True
    return bid.limit_price >= ask.limit_price


def _pairings(bids, asks) -> tuple[tuple[int, int, int], ...]:
    # unit expansion, then run-length encode consecutive identical pairs
    bid_units = [oid for oid, q in bids for _ in range(q)]
    ask_units = [oid for oid, q in asks for _ in range(q)]
    out: list[list[int]] = []
    for b, a in zip(bid_units, ask_units):
        if out and out[-1][0] == b and out[-1][1] == a:
            out[-1][2] += 1
        else:
            out.append([b, a, 1])
    return tuple(tuple(x) for x in out)


def _price(bids, asks, cut, orders: dict[int, Order], rounding: Rounding) -> int | None:
    if cut is not None and not orders[cut[0]].is_market:
        return orders[cut[0]].limit_price
    hi = [orders[o].limit_price for o, _ in bids if not orders[o].is_market]
    lo = [orders[o].limit_price for o, _ in asks if not orders[o].is_market]
    if hi and lo:
        b, s = min(hi), max(lo)
        twice = b + s
        if twice % 2 == 0:
            return twice // 2
        if rounding is Rounding.HALF_UP:
            return (twice + 1) // 2
        if rounding is Rounding.HALF_DOWN:
            return (twice - 1) // 2
        down = (twice - 1) // 2
        return down if down % 2 == 0 else down + 1
    if hi:
        return min(hi)
    if lo:
        return max(lo)
    return None


def enumerate_clearings(
    book: Book,
    rounding: Rounding = Rounding.HALF_UP,
    max_orders: int = MAX_ORDERS,
    max_quantity: int = MAX_QUANTITY,
) -> list[LegalClearing]:
    bids, asks = list(book.bids), list(book.asks)
    if len(bids) + len(asks) > max_orders:
        raise OracleCapExceeded(f"book has {len(bids) + len(asks)} orders, cap is {max_orders}")
    if any(o.quantity > max_quantity for o in bids + asks):
        raise OracleCapExceeded(f"order quantity above cap {max_quantity}")
    orders = {o.order_id: o for o in bids + asks}
    found: list[LegalClearing] = []
    for i in range(1, len(bids) + 1):
        for j in range(1, len(asks) + 1):
            pb, pa = bids[:i], asks[:j]
            if not _compatible(pb[-1], pa[-1]):
                continue
            d = sum(o.quantity for o in pb)
            s = sum(o.quantity for o in pa)
            options = []
            if d == s:
                options.append(None)
            # the cut may only fall on the lowest-priority included order
            if d > s and pb[-1].flexible and d - pb[-1].quantity < s:
                options.append((pb[-1].order_id, d - s))
            if s > d and pa[-1].flexible and s - pa[-1].quantity < d:
                options.append((pa[-1].order_id, s - d))
            for cut in options:
                inc_b = tuple((o.order_id, o.quantity) for o in pb)
                inc_a = tuple((o.order_id, o.quantity) for o in pa)
                if cut is not None:
                    oid, c = cut
                    inc_b = tuple((x, q - c if x == oid else q) for x, q in inc_b)
                    inc_a = tuple((x, q - c if x == oid else q) for x, q in inc_a)
                found.append(LegalClearing(
                    inc_b, inc_a, cut, _pairings(inc_b, inc_a),
                    _price(inc_b, inc_a, cut, orders, rounding),
                ))
    return found


def expected_clearing(book: Book, rounding: Rounding = Rounding.HALF_UP, **caps) -> LegalClearing | None:
    clearings = enumerate_clearings(book, rounding, **caps)
    if not clearings:
        return None
    best = max(c.quantity for c in clearings)
    top = [c for c in clearings if c.quantity == best]
    assert len(top) == 1, "the largest legal clearing is unique"
    return top[0]


def _violation(book: Book, alloc: dict[int, int]) -> Verdict | None:
    for side in (list(book.bids), list(book.asks)):
        seen_gap = None
        for o in side:
            q = alloc.get(o.order_id, 0)
            if q and not o.flexible and q != o.quantity:
                return Verdict(False, "atomicity", f"inflexible order {o.order_id} filled {q} of {o.quantity}")
            if q > o.quantity:
                return Verdict(False, "overfill", f"order {o.order_id} filled {q} of {o.quantity}")
            if q and seen_gap is not None:
                return Verdict(False, "priority",
                               f"order {o.order_id} matched while better order {seen_gap} was skipped")
            if q < o.quantity and seen_gap is None:
                seen_gap = o.order_id
    return None


def check(book: Book, outcome: "MatchOutcome", rounding: Rounding = Rounding.HALF_UP) -> Verdict:
    """Compare the first round of ``outcome`` against the oracle.

    ``book`` is the book as it stood before that round (incoming order
    included).
    """
    expected = expected_clearing(book, rounding)
    dispatch = outcome.dispatch
    if dispatch is None:
        if expected is None:
            return Verdict(True)
        return Verdict(False, "missed", f"legal clearing of {expected.quantity} units exists")
    bought, sold = dispatch.bought(), dispatch.sold()
    if sum(bought.values()) != sum(sold.values()):
        return Verdict(False, "conservation",
                       f"bought {sum(bought.values())} != sold {sum(sold.values())}")
    if outcome.fills:
        if any(f.order_id not in book for f in outcome.fills):
            return Verdict(False, "unknown", "fill for an order that is not in the book")
        buy = sum(f.quantity for f in outcome.fills if book.get(f.order_id).is_buy)
        sell = sum(f.quantity for f in outcome.fills if not book.get(f.order_id).is_buy)
        if buy != sell:
            return Verdict(False, "conservation", f"filled {buy} units bought against {sell} sold")
    if any(t.clearing_price != dispatch.clearing_price for t in dispatch.transactions):
        return Verdict(False, "price", "transactions do not share one price")
    alloc = {**bought, **sold}
    unknown = [oid for oid in alloc if oid not in book]
    if unknown:
        return Verdict(False, "unknown", f"orders {unknown} not in book")
    bad = _violation(book, alloc)
    if bad is not None:
        return bad
    for t in dispatch.transactions:
        bid, ask = book.get(t.buyer_order), book.get(t.seller_order)
        for o in (bid, ask):
            if not o.is_market:
                ok = (o.limit_price >= t.clearing_price) if o.is_buy else (o.limit_price <= t.clearing_price)
                if not ok:
                    return Verdict(False, "price", f"price {t.clearing_price} violates limit of order {o.order_id}")
    legal = [c for c in enumerate_clearings(book, rounding) if c.allocation() == alloc]
    if not legal:
        return Verdict(False, "illegal", "allocation is not a legal clearing")
    if expected is None or expected.allocation() != alloc:
        return Verdict(False, "rule", "allocation differs from the priority-ordered exclusion result")
    pairs = tuple((t.buyer_order, t.seller_order, t.quantity) for t in dispatch.transactions)
    if pairs != expected.transactions:
        return Verdict(False, "pairing", f"pairings {pairs} != {expected.transactions}")
    if dispatch.clearing_price != expected.price:
        return Verdict(False, "price", f"price {dispatch.clearing_price} != {expected.price}")
    return Verdict(True)
