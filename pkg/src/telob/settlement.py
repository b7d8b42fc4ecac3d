"""Single-price ex post settlement of a dispatch."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Mapping

from .domain import Dispatch, MarketConfig, Order, Rounding, midpoint

if TYPE_CHECKING:
    from .matching import Marginal, PriceFilteredStacks

SECONDS_PER_HOUR = 3600

CSV_COLUMNS = (
    "round_id",
    "device_id",
    "role",
    "quantity",
    "duration",
    "clearing_price",
    "tariff",
    "payment",
    "surplus",
)


class PriceUndiscoverable(ValueError):
    """No limit order in contract on either side, so there is no price to use."""


class SettlementError(KeyError):
    pass


def clearing_price(
    stacks: "PriceFilteredStacks", marginal: "Marginal", rounding: Rounding = Rounding.HALF_UP
) -> int:
    """The one price every order in contract pays or receives.

    A single cut limit order sets the price at its own limit.  Otherwise the
    price splits the difference between the lowest bid limit and the highest
    ask limit still in contract; market orders carry no limit and are skipped.
    """
    if marginal.order_id is not None:
        cut = stacks.entry(marginal.order_id).order
        if not cut.is_market:
            return cut.limit_price
    bid_limits = [e.order.limit_price for e in stacks.b_prime if not e.order.is_market]
    ask_limits = [e.order.limit_price for e in stacks.s_prime if not e.order.is_market]
    if bid_limits and ask_limits:
        return midpoint(min(bid_limits), max(ask_limits), rounding)
    if bid_limits:
        return min(bid_limits)
    if ask_limits:
        return max(ask_limits)
    raise PriceUndiscoverable("all orders in contract are market orders")


@dataclass(frozen=True)
class TariffSchedule:
    """Network-use charges paid by buyers on top of the clearing price.

    ``per_kwh`` is in ticks per kWh, ``flat_fee`` in currency per transaction.
    """

    per_kwh: int = 0
    flat_fee: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "flat_fee", Fraction(self.flat_fee))
        if self.per_kwh < 0 or self.flat_fee < 0:
            raise ValueError("tariff components must be nonnegative")

    @property
    def is_zero(self) -> bool:
        return self.per_kwh == 0 and self.flat_fee == 0


@dataclass
class SettlementLine:
    round_id: int
    device_id: int
    role: str
    quantity: int = 0
    duration: int = 0
    energy_kwh: Fraction = Fraction(0)
    clearing_price: int = 0
    tariff: Fraction = Fraction(0)
    payment: Fraction = Fraction(0)
    # None when the device traded through a market order
    surplus: Fraction | None = Fraction(0)


@dataclass
class SettlementReport:
    round_id: int
    clearing_price: int
    lines: list[SettlementLine] = field(default_factory=list)

    @property
    def buyer_payments(self) -> Fraction:
        return sum((l.payment for l in self.lines if l.role == "buyer"), Fraction(0))

    @property
    def seller_receipts(self) -> Fraction:
        return sum((l.payment for l in self.lines if l.role == "seller"), Fraction(0))

    @property
    def tariff_total(self) -> Fraction:
        return sum((l.tariff for l in self.lines), Fraction(0))

    @property
    def imbalance(self) -> Fraction:
        """Zero for every valid report."""
        return self.buyer_payments - self.seller_receipts - self.tariff_total

    def line(self, device_id: int, role: str) -> SettlementLine:
        for l in self.lines:
            if l.device_id == device_id and l.role == role:
                return l
        raise KeyError((device_id, role))


def energy_kwh(quantity: int, duration: int, config: MarketConfig) -> Fraction:
    return quantity * config.power_unit_kw * Fraction(duration, SECONDS_PER_HOUR)


def settle(
    dispatch: Dispatch,
    orders: Mapping[int, Order],
    tariff: TariffSchedule | None = None,
    config: MarketConfig | None = None,
) -> SettlementReport:
    """Payments, tariff and surplus per device at the dispatch's clearing price.

    Amounts are exact currency fractions.  One line per (device, role); a
    device trading through several transactions gets them summed.
    """
    tariff = tariff or TariffSchedule()
    config = config or MarketConfig()
    price = config.currency(dispatch.clearing_price)
    adder = config.currency(tariff.per_kwh)
    report = SettlementReport(dispatch.round_id, dispatch.clearing_price)
    by_key: dict[tuple[int, str], SettlementLine] = {}

    def line_for(device: int, role: str) -> SettlementLine:
        key = (device, role)
        if key not in by_key:
            by_key[key] = SettlementLine(dispatch.round_id, device, role,
                                         clearing_price=dispatch.clearing_price)
            report.lines.append(by_key[key])
        return by_key[key]

    for t in dispatch.transactions:
        try:
            bid, ask = orders[t.buyer_order], orders[t.seller_order]
        except KeyError as exc:
            raise SettlementError(f"dispatch {dispatch.round_id} references unknown order {exc}") from None
        energy = energy_kwh(t.quantity, t.duration, config)
        charge = adder * energy + tariff.flat_fee
        for order, role in ((bid, "buyer"), (ask, "seller")):
            line = line_for(order.device_id, role)
            line.quantity += t.quantity
            line.duration = max(line.duration, t.duration)
            line.energy_kwh += energy
            if role == "buyer":
                line.tariff += charge
                line.payment += price * energy + charge
            else:
                line.payment += price * energy
            if order.is_market or line.surplus is None:
                line.surplus = None
            else:
                limit = config.currency(order.limit_price)
                gain = limit - price if role == "buyer" else price - limit
                line.surplus += gain * energy
    return report


def _money(value: Fraction | None, places: int) -> str:
    if value is None:
        return ""
    q = Decimal(value.numerator) / Decimal(value.denominator)
    return str(q.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


def report_rows(
    reports: Iterable[SettlementReport], config: MarketConfig | None = None, places: int | None = None
) -> list[list[str]]:
    config = config or MarketConfig()
    places = config.price_places if places is None else places
    rows = []
    for r in reports:
        for l in r.lines:
            rows.append([
                str(l.round_id),
                str(l.device_id),
                l.role,
                str(l.quantity),
                str(l.duration),
                config.price_str(l.clearing_price),
                _money(l.tariff, places),
                _money(l.payment, places),
                _money(l.surplus, places),
            ])
    return rows


def to_csv(reports: Iterable[SettlementReport], config: MarketConfig | None = None,
           places: int | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(report_rows(reports, config, places))
    return buf.getvalue()
