from fractions import Fraction

import pytest

from telob import MarketConfig, OrderError, OrderKind, Rounding, Side, make_order
from telob.domain import MARKET_RANK, Dispatch, OrderFactory, Transaction, format_ticks, midpoint, to_ticks

from conftest import order


def test_signed_quantity_sets_side():
    bid = order(2, "4")
    ask = order(-3, "1")
    assert bid.side is Side.BUY and bid.quantity == 2 and bid.signed_quantity == 2
    assert ask.side is Side.SELL and ask.quantity == 3 and ask.signed_quantity == -3


def test_prices_are_ticks():
    assert to_ticks("2.50") == 250
    assert to_ticks(2.5) == 250
    assert to_ticks(4) == 400
    assert to_ticks("0.07", Fraction(1, 100)) == 7
    assert format_ticks(250) == "2.50"
    assert format_ticks(-5) == "-0.05"


@pytest.mark.parametrize("bad", ["2.505", 0.001, "abc", True])
def test_off_grid_or_junk_price(bad):
    with pytest.raises(OrderError):
        to_ticks(bad)


def test_coarse_tick():
    cfg = MarketConfig(tick_size="0.05")
    assert cfg.ticks("2.50") == 50
    assert cfg.price_str(50) == "2.50"
    with pytest.raises(OrderError):
        cfg.ticks("2.51")


def test_config_rejects_bad_tick():
    with pytest.raises(ValueError):
        MarketConfig(tick_size=Fraction(1, 3))
    with pytest.raises(ValueError):
        MarketConfig(tick_size=0)


def test_midpoint_rounding():
    # exact rational midpoint of 3.01 and 3.00 is 3.005
    assert midpoint(301, 300, Rounding.HALF_UP) == 301
    assert midpoint(301, 300, Rounding.HALF_DOWN) == 300
    assert midpoint(301, 300, Rounding.HALF_EVEN) == 300
    assert midpoint(303, 300, Rounding.HALF_EVEN) == 302
    assert midpoint(400, 200) == 300
    # negative totals round the same way
    assert midpoint(1, -2, Rounding.HALF_UP) == 0
    assert midpoint(1, -2, Rounding.HALF_DOWN) == -1


def test_midpoint_matches_rational_oracle():
    for hi in range(-20, 21):
        for lo in range(-20, hi + 1):
            exact = Fraction(hi + lo, 2)
            up = midpoint(hi, lo, Rounding.HALF_UP)
            down = midpoint(hi, lo, Rounding.HALF_DOWN)
            assert abs(up - exact) <= Fraction(1, 2) and up >= exact
            assert abs(down - exact) <= Fraction(1, 2) and down <= exact


def test_market_order_rules():
    m = order(2, None, kind="market")
    assert m.is_market and m.limit_price is None
    with pytest.raises(OrderError):
        order(2, "3", kind="market")
    with pytest.raises(OrderError):
        order(2, None)
    with pytest.raises(OrderError):
        make_order(order_id=1, device_id=1, quantity=1, duration=10, kind="market", expiration=5)


@pytest.mark.parametrize("field,value", [("quantity", 0), ("duration", 0), ("expiration", -1)])
def test_invalid_fields(field, value):
    args = dict(order_id=1, device_id=1, quantity=1, duration=10, price="1", expiration=None)
    args[field] = value
    with pytest.raises(OrderError):
        make_order(**args)


def test_quantity_must_be_integer():
    with pytest.raises(OrderError):
        make_order(order_id=1, device_id=1, quantity=1.5, duration=10, price="1")


def test_priority_key_orders_price_then_time():
    early = order(1, "3", ts=0, seq=1)
    late = order(1, "3", ts=5, seq=2)
    better = order(1, "3.01", ts=9, seq=3)
    assert better.priority < early.priority < late.priority
    a_low = order(-1, "2", ts=9)
    a_high = order(-1, "2.5", ts=0)
    assert a_low.priority < a_high.priority
    assert order(1, None, kind="market").priority.limit_rank == MARKET_RANK


def test_residual_keeps_origin_priority():
    parent = order(-2, "2.5", ts=498, seq=3)
    child = parent.replace(order_id=99, timestamp=727, activation_time=737, origin=(498, 3))
    rival = order(-1, "2.5", ts=600, seq=7)
    assert child.priority < rival.priority


def test_crosses():
    assert order(1, "3").crosses(order(-1, "3"))
    assert not order(1, "2.99").crosses(order(-1, "3"))
    assert order(1, None, kind="market").crosses(order(-1, "100"))


def test_dispatch_single_price():
    t1 = Transaction(4, 1, 4, 1, 2, 250, 10, 0)
    t2 = Transaction(3, 2, 3, 2, 1, 251, 10, 0)
    with pytest.raises(ValueError):
        Dispatch(1, 0, 250, 4, (t1, t2))
    d = Dispatch(1, 0, 250, 4, (t1,))
    assert d.quantity == 2 and d.bought() == {1: 2} and d.sold() == {4: 2}


def test_factory_assigns_monotone_seq():
    f = OrderFactory()
    a = f.make(order_id=1, device_id=1, quantity=1, duration=1, price="1")
    b = f.make(order_id=2, device_id=1, quantity=1, duration=1, price="1")
    assert b.seq == a.seq + 1
    assert a.kind is OrderKind.LIMIT
