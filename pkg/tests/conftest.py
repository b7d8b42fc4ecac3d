import sys
import itertools

import pytest

from telob import Book, MarketConfig, make_order

_ids = itertools.count(1000)


def order(qty, price=None, *, oid=None, flexible=False, duration=10, expiration=None, ts=0,
          seq=None, kind="limit", device=None):
    """Order shorthand: signed quantity, price in currency (None for market)."""
    oid = next(_ids) if oid is None else oid
    return make_order(
        order_id=oid,
        device_id=oid if device is None else device,
        quantity=qty,
        duration=duration,
        flexible=flexible,
        price=price,
        expiration=expiration,
        kind=kind,
        timestamp=ts,
        seq=oid if seq is None else seq,
    )


def book_of(*orders, now=None):
    b = Book(now=max((o.timestamp for o in orders), default=0) if now is None else now)
    for o in orders:
        b.insert(o)
    return b


# The four-order snapshot with 2022-01-01 00:00:00 as time zero.
TABLE1_TIMES = {1: 0, 2: 385, 3: 498, 4: 727}


def table1_orders():
    return [
        order(2, "4", oid=1, flexible=False, expiration=10, ts=0, seq=1),
        order(2, "3", oid=2, flexible=False, expiration=10, ts=385, seq=2),
        order(-2, "2.5", oid=3, flexible=True, expiration=10, ts=498, seq=3),
        order(-3, "1", oid=4, flexible=False, expiration=10, ts=727, seq=4),
    ]


@pytest.fixture
def table1():
    return table1_orders()


@pytest.fixture
def table1_book(table1):
    return book_of(*table1)


@pytest.fixture
def cfg():
    return MarketConfig()


def pytest_terminal_summary(terminalreporter):
    report = sys.modules.get("test_acceptance")
    if report is None or not report.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(report.REPORT):
        terminalreporter.write_line(report.REPORT[n])
