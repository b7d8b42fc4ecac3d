"""Random event streams and the invariants every run must satisfy.

Shared by the hypothesis suite and the acceptance runner.
"""
from fractions import Fraction

from telob import Engine, MarketConfig, TariffSchedule, make_order
from telob.engine import Cancel
from telob.settlement import SECONDS_PER_HOUR

MODES = ("deferred", "immediate")
ROUNDINGS = ("half_up", "half_down", "half_even")


def random_stream(rng, max_orders=12):
    """(orders, cancels, market config) with prices on a 10-tick grid."""
    config = MarketConfig(rounding=rng.choice(ROUNDINGS), residual_mode=rng.choice(MODES))
    orders, t = [], 0
    for k in range(rng.randint(1, max_orders)):
        t += rng.choice((0, 0, 1, 2, 5))
        market = rng.random() < 0.1
        orders.append(make_order(
            order_id=k + 1,
            device_id=rng.randint(1, 6),
            quantity=rng.choice((1, -1)) * rng.randint(1, 4),
            duration=rng.randint(1, 20),
            flexible=rng.random() < 0.5,
            price=None if market else Fraction(rng.randint(1, 10) * 10, 100),
            expiration=None if market or rng.random() < 0.3 else rng.randint(0, 15),
            kind="market" if market else "limit",
            timestamp=t,
            seq=k + 1,
        ))
    cancels = [Cancel(rng.randint(1, len(orders) + 1), rng.randint(0, t + 5))
               for _ in range(rng.randint(0, 2))]
    return orders, cancels, config


def run_checked(orders, cancels, config, tariff=None):
    """Run a stream, checking the book after every step; returns the engine."""
    engine = Engine(config, tariff=tariff).load(orders, cancels)
    while engine.queue:
        engine.step()
        assert engine.book.is_equilibrium(), f"book out of equilibrium at t={engine.now}"
    return engine


def conservation(engine):
    filled = {}
    for d in engine.dispatches:
        assert sum(d.bought().values()) == sum(d.sold().values())
        for t in d.transactions:
            assert t.quantity > 0
            for oid in (t.buyer_order, t.seller_order):
                filled[oid] = filled.get(oid, 0) + t.quantity
    for oid, q in filled.items():
        assert q <= engine.orders[oid].quantity, f"order {oid} overfilled"


def price_feasible(engine):
    for d in engine.dispatches:
        for t in d.transactions:
            bid, ask = engine.orders[t.buyer_order], engine.orders[t.seller_order]
            assert bid.is_market or bid.limit_price >= t.clearing_price
            assert ask.is_market or ask.limit_price <= t.clearing_price
            assert t.duration <= min(bid.duration, ask.duration)


def atomic(engine):
    seen = {}
    for d in engine.dispatches:
        per = {**d.bought(), **d.sold()}
        for oid, q in per.items():
            o = engine.orders[oid]
            if not o.flexible:
                assert q == o.quantity, f"inflexible order {oid} filled {q} of {o.quantity}"
                assert oid not in seen, f"inflexible order {oid} traded twice"
                seen[oid] = d.round_id


def single_price(engine):
    for d in engine.dispatches:
        assert {t.clearing_price for t in d.transactions} == {d.clearing_price}


def budget_balanced(engine):
    price_of = {d.round_id: d.clearing_price for d in engine.dispatches}
    cfg = engine.config
    for d, r in zip(engine.dispatches, engine.reports):
        assert r.imbalance == 0
        value = sum(cfg.currency(price_of[d.round_id]) * t.quantity * cfg.power_unit_kw
                    * Fraction(t.duration, SECONDS_PER_HOUR) for t in d.transactions)
        assert r.seller_receipts == value
        if engine.tariff.is_zero:
            assert r.buyer_payments == r.seller_receipts
        else:
            assert r.buyer_payments > r.seller_receipts


PROPERTIES = {
    "conservation": conservation,
    "price feasibility": price_feasible,
    "inflexible atomicity": atomic,
    "single-price settlement": single_price,
}


def check_stream(rng):
    """Every property on one random stream, run with and without a tariff."""
    orders, cancels, config = random_stream(rng)
    plain = run_checked(orders, cancels, config)
    for prop in PROPERTIES.values():
        prop(plain)
    budget_balanced(plain)
    taxed = run_checked(orders, cancels, config,
                        TariffSchedule(rng.randint(1, 50), Fraction(rng.randint(1, 5), 100)))
    assert [d for d in taxed.dispatches] == [d for d in plain.dispatches]
    budget_balanced(taxed)
    return plain
