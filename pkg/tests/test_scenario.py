import json

import pytest

from telob import ConfigError, ResidualMode, bundled, load, loads

BASE = {"version": 1, "orders": []}


def limit(**over):
    o = {"Device ID": 1, "Order ID": 1, "Timestamp": 0, "Quantity": 2, "Price": 4,
         "isPowerFlexible": False, "Duration": 10, "Expiration": 10}
    o.update(over)
    return o


def parse(**over):
    return loads(json.dumps({**BASE, **over}))


def test_table1_file():
    s = load(bundled("table1"))
    assert s.open_at == 727 and s.epoch == "2022-01-01 00:00:00"
    assert [(o.order_id, o.timestamp, o.signed_quantity, o.limit_price, o.flexible) for o in s.orders] == [
        (1, 0, 2, 400, False), (2, 385, 2, 300, False), (3, 498, -2, 250, True), (4, 727, -3, 100, False)]


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="colour"):
        parse(colour="red")
    with pytest.raises(ConfigError, match="orders.0.Colour"):
        parse(orders=[limit(Colour=1)])


def test_market_order_with_price():
    with pytest.raises(ConfigError, match=r"orders\.0\.Price: market order cannot carry a price"):
        parse(orders=[limit(Kind="market", Expiration=None)])


@pytest.mark.parametrize("orders,where", [
    ([limit(), limit()], "orders.1.Order ID"),
    ([limit(Price=None)], "orders.0.Price"),
    ([limit(Quantity=0)], "orders.0.Quantity"),
    ([limit(Duration=0)], "orders.0.Duration"),
    ([limit(Price="1.234")], "orders.0.Price"),
    ([limit(Timestamp="2022-01-01 00:00:00")], "orders.0.Timestamp"),
    ([limit(**{"Order ID": 1 << 40})], "orders.0.Order ID"),
])
def test_field_errors(orders, where):
    with pytest.raises(ConfigError, match=where):
        parse(orders=orders)


def test_version_required():
    with pytest.raises(ConfigError, match="version"):
        loads('{"orders": []}')
    with pytest.raises(ConfigError):
        loads('{"version": 2}')


def test_bad_json():
    with pytest.raises(ConfigError, match="invalid JSON"):
        loads("{")
    with pytest.raises(ConfigError):
        loads("[]")


def test_market_order_before_open():
    m = limit(Kind="market", Price=None, Expiration=None, Timestamp=5)
    with pytest.raises(ConfigError, match="orders.0.Kind"):
        parse(orders=[m], open_at=5)
    assert parse(orders=[m], open_at=4).orders[0].is_market


def test_negative_price_allowed():
    assert parse(orders=[limit(Price="-0.25")]).orders[0].limit_price == -25


def test_cancel_of_unknown_order():
    with pytest.raises(ConfigError, match="cancels.0.Order ID"):
        parse(orders=[limit()], cancels=[{"Order ID": 9, "Time": 3}])


def test_convergence_excludes_orders():
    conv = {"demand": [["3", 1]], "supply": [["2", 1]]}
    with pytest.raises(ConfigError, match="convergence"):
        parse(orders=[limit()], convergence=conv)
    with pytest.raises(ConfigError, match="do not cross"):
        parse(convergence={"demand": [["1", 1]], "supply": [["2", 1]]})


def test_convergence_seed_changes_stream():
    a = load(bundled("convergence"), seed=1)
    b = load(bundled("convergence"), seed=2)
    assert a.p_star == 300 and len(a.orders) == 80
    assert [o.limit_price for o in a.orders] != [o.limit_price for o in b.orders]


def test_duplicate_agent_device():
    a = {"Device ID": 1, "archetype": "HVAC", "duration": 10, "price": 1}
    with pytest.raises(ConfigError, match="agents.1.Device ID"):
        parse(agents=[a, a])


def test_agent_error_has_path():
    with pytest.raises(ConfigError, match="agents.0"):
        parse(agents=[{"Device ID": 1, "archetype": "Battery", "duration": 10}])


def test_with_options():
    s = load(bundled("feeder_day")).with_options(seed=3, residual_mode="immediate", tariff="0.05")
    assert s.seed == 3 and all(a.seed == 3 for a in s.agents)
    assert s.config.residual_mode is ResidualMode.IMMEDIATE and s.tariff.per_kwh == 5


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load(tmp_path / "nope.json")
