import random

import pytest

from telob import Book, BookError, format_table
from telob.domain import MarketConfig

from conftest import book_of, order


def ids(orders):
    return [o.order_id for o in orders]


def test_single_insert():
    b = Book()
    bid = order(2, "4")
    b.insert(bid)
    assert list(b.bids) == [bid] and not b.asks
    assert b.best_bid is bid and b.best_ask is None


def test_table1_sides(table1_book):
    # buy side lists order 1 then 2; sell side lists order 4 then 3
    assert ids(table1_book.bids) == [1, 2]
    assert ids(table1_book.asks) == [4, 3]
    table1_book.check()


def test_duplicate_id(table1_book, table1):
    with pytest.raises(BookError):
        table1_book.insert(table1[0])


def test_insert_before_activation():
    b = Book(now=5)
    o = order(-1, "2", ts=0).replace(activation_time=10)
    with pytest.raises(ValueError):
        b.insert(o)


def test_cancel(table1_book):
    table1_book.cancel(3)
    assert ids(table1_book.asks) == [4]
    with pytest.raises(BookError):
        table1_book.cancel(99)


def test_cancel_then_fresh_insert():
    a = order(1, "3", oid=1, ts=0)
    b1 = book_of(a, order(-1, "5", oid=2))
    b1.cancel(1)
    b1.insert(order(1, "3", oid=3, ts=0))
    b2 = book_of(order(-1, "5", oid=2), order(1, "3", oid=3, ts=0))
    assert ids(b1) == ids(b2)


@pytest.mark.parametrize("now,kept", [(9, True), (10, True), (11, False)])
def test_expiry_deadline_inclusive(now, kept):
    b = book_of(order(1, "3", oid=1, ts=0, expiration=10), now=0)
    expired = b.expire_due(now)
    assert (1 in b) is kept
    assert expired == ([] if kept else [1])


def test_expiry_brute_force_boundary():
    # an order with activation a and expiration e rests on [a, a + e]
    for a in range(0, 4):
        for e in range(0, 4):
            for now in range(a, a + 6):
                b = book_of(order(1, "3", oid=1, ts=a, expiration=e), now=a)
                b.expire_due(now)
                assert (1 in b) == (now <= a + e)


def test_residual_expiry_clock_starts_at_activation():
    r = order(-1, "2", oid=5, ts=0, expiration=10).replace(activation_time=20)
    b = Book(now=20)
    b.insert(r)
    assert b.deadline(r) == 30
    b.expire_due(30)
    assert 5 in b
    b.expire_due(31)
    assert 5 not in b


def test_opened_at_delays_clock():
    b = Book(now=0, opened_at=727)
    o = order(2, "4", oid=1, ts=0, expiration=10)
    b.insert(o)
    assert b.deadline(o) == 737
    assert b.expire_due(700) == []


def test_market_orders_never_expire():
    b = Book()
    b.insert(order(1, None, oid=1, kind="market"))
    assert b.expire_due(10**9) == []


def test_expire_time_regression():
    b = Book(now=7)
    with pytest.raises(ValueError):
        b.expire_due(5)


def test_spread(table1_book):
    assert table1_book.spread() == -300
    assert book_of(order(1, "3"), order(-1, "5")).spread() == 200
    assert book_of(order(1, "3")).spread() is None
    assert Book().spread() is None


def test_spread_single_pair_antisymmetry():
    for pb, pa in [(300, 500), (500, 300), (250, 250)]:
        b = book_of(order(1, pb / 100), order(-1, pa / 100))
        assert b.spread() == pa - pb


def test_equilibrium(table1_book):
    assert book_of(order(1, "3"), order(-1, "5")).is_equilibrium()
    assert not table1_book.is_equilibrium()
    blocked = book_of(order(2, "5", flexible=False), order(-3, "4", flexible=False))
    assert blocked.spread() == -100
    assert blocked.is_equilibrium()
    assert blocked.is_equilibrium()  # stable


def test_random_operations_keep_invariants():
    rng = random.Random(3)
    b = Book()
    live = []
    for k in range(2000):
        op = rng.random()
        if op < 0.6 or not live:
            o = order(rng.choice([1, -1]) * rng.randint(1, 4), rng.randint(1, 9) / 2,
                      oid=10_000 + k, ts=k, expiration=rng.choice([None, 5, 50]))
            b.now = k
            b.insert(o)
            live.append(o.order_id)
        elif op < 0.8:
            oid = live.pop(rng.randrange(len(live)))
            if oid in b:
                b.cancel(oid)
        else:
            b.expire_due(k)
        b.check()


def test_copy_is_independent(table1_book):
    c = table1_book.copy()
    c.cancel(1)
    assert 1 in table1_book and 1 not in c


def test_format_table(table1_book):
    from datetime import datetime

    text = format_table(table1_book, MarketConfig(), datetime(2022, 1, 1))
    lines = text.splitlines()
    assert lines[0].split(" | ")[0].strip() == "Device ID"
    assert lines[1] == "BUY" and lines[4] == "SELL"
    assert "2022-01-01 00:12:07" in lines[5] and "-3" in lines[5]
    assert "2.50" in lines[6] and "TRUE" in lines[6]


def test_format_empty_table():
    assert format_table(Book()).splitlines()[1:] == ["BUY", "SELL"]
