"""Scenario files.

A scenario is one JSON document with a ``version`` field, market settings,
an explicit order list using the tabular field names (signed ``Quantity``),
optional cancels, optional device agents and an optional convergence
experiment.  Unknown fields are rejected and every error names the field it
came from.

Timestamps are seconds, or ISO date-times when an ``epoch`` is given.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, StrictBool, StrictInt, ValidationError

from .agents import AGENT_ID_BASE, AgentError, AgentSpec, FeederParams, convergence_scenario
from .domain import MarketConfig, Order, OrderError, make_order
from .engine import Cancel, Engine
from .settlement import TariffSchedule

SCENARIO_VERSION = 1

Number = Union[StrictInt, Decimal, str]


class ConfigError(ValueError):
    """A scenario that does not describe a well-formed event stream."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=False, frozen=True)


class TariffModel(_Strict):
    per_kwh: Number = 0
    flat_fee: Number = 0


class MarketModel(_Strict):
    tick_size: Number = "0.01"
    power_unit_kw: Number = 1
    rounding: Literal["half_up", "half_down", "half_even"] = "half_up"
    residual_mode: Literal["deferred", "immediate"] = "deferred"
    tariff: TariffModel = TariffModel()


class OrderModel(_Strict):
    device_id: StrictInt = Field(alias="Device ID", ge=0)
    order_id: StrictInt = Field(alias="Order ID", ge=0, lt=AGENT_ID_BASE)
    timestamp: Union[StrictInt, str] = Field(alias="Timestamp")
    quantity: StrictInt = Field(alias="Quantity")
    price: Union[Number, None] = Field(default=None, alias="Price")
    flexible: StrictBool = Field(alias="isPowerFlexible")
    duration: StrictInt = Field(alias="Duration", ge=1)
    expiration: Union[StrictInt, None] = Field(default=None, alias="Expiration", ge=0)
    kind: Literal["limit", "market"] = Field(default="limit", alias="Kind")


class CancelModel(_Strict):
    order_id: StrictInt = Field(alias="Order ID")
    time: Union[StrictInt, str] = Field(alias="Time")


class FeederModel(_Strict):
    wholesale: Number
    lmp: Number
    depth: StrictInt = Field(ge=1)


class AgentModel(_Strict):
    device_id: StrictInt = Field(alias="Device ID", ge=0)
    archetype: Literal["HVAC", "WaterHeater", "EV_V0G", "EV_V1G", "EV_V2G", "PV", "Battery", "Feeder"]
    quantity: StrictInt = Field(default=1, ge=1)
    duration: StrictInt = Field(ge=1)
    price: Union[Number, None] = None
    band: Union[tuple[Number, Number], None] = None
    feeder: Union[FeederModel, None] = None
    curtailable: StrictBool = False
    expiration: Union[StrictInt, None] = Field(default=None, ge=0)
    start: Union[StrictInt, str] = 0
    interval: Union[StrictInt, None] = Field(default=None, ge=1)
    count: StrictInt = Field(default=1, ge=1)
    jitter: StrictInt = Field(default=0, ge=0)


class ConvergenceModel(_Strict):
    demand: list[tuple[Number, StrictInt]]
    supply: list[tuple[Number, StrictInt]]
    periods: StrictInt = Field(default=5, ge=1)
    spacing: StrictInt = Field(default=1, ge=1)
    duration: StrictInt = Field(default=1, ge=1)


class ScenarioModel(_Strict):
    version: Literal[1]
    description: str = ""
    market: MarketModel = MarketModel()
    epoch: Union[str, None] = None
    open_at: Union[StrictInt, str, None] = None
    stop_time: Union[StrictInt, str, None] = None
    seed: StrictInt = 0
    orders: list[OrderModel] = []
    cancels: list[CancelModel] = []
    agents: list[AgentModel] = []
    convergence: Union[ConvergenceModel, None] = None


@dataclass
class Scenario:
    config: MarketConfig = field(default_factory=MarketConfig)
    tariff: TariffSchedule = field(default_factory=TariffSchedule)
    orders: list[Order] = field(default_factory=list)
    cancels: list[Cancel] = field(default_factory=list)
    agents: list[AgentSpec] = field(default_factory=list)
    open_at: int | None = None
    stop_time: int | None = None
    seed: int = 0
    epoch: str | None = None
    description: str = ""
    p_star: int | None = None

    def engine(self, **overrides) -> Engine:
        return Engine(
            self.config,
            tariff=self.tariff,
            open_at=self.open_at,
            stop_time=self.stop_time,
            agents=self.agents,
            seed=self.seed,
            epoch=self.epoch,
            **overrides,
        ).load(self.orders, self.cancels)

    def with_options(self, *, seed: int | None = None, residual_mode: str | None = None,
                     tariff: Any = None) -> "Scenario":
        """Copy with command-line overrides applied.

        A new seed reseeds the agents; the convergence order stream is fixed
        when the file is loaded, so pass the seed to :func:`load` for that.
        """
        out = replace(self)
        if seed is not None:
            out.seed = seed
            out.agents = [replace(a, seed=seed) for a in self.agents]
        if residual_mode is not None:
            out.config = replace(self.config, residual_mode=residual_mode)
        if tariff is not None:
            out.tariff = TariffSchedule(_ticks(tariff, out.config, "tariff"), self.tariff.flat_fee)
        return out


def _fail(path: str, message: str) -> ConfigError:
    return ConfigError(f"{path}: {message}" if path else message)


def _ticks(value: Any, config: MarketConfig, path: str) -> int:
    try:
        return config.ticks(value)
    except OrderError as exc:
        raise _fail(path, str(exc)) from None


def _fraction(value: Any, path: str) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise _fail(path, f"not a number: {value!r}") from None


class _Clock:
    def __init__(self, epoch: str | None):
        self.epoch = None
        if epoch is not None:
            try:
                self.epoch = datetime.fromisoformat(epoch)
            except ValueError:
                raise _fail("epoch", f"not an ISO date-time: {epoch!r}") from None

    def seconds(self, value: int | str | None, path: str) -> int | None:
        if value is None:
            return None
        if isinstance(value, int):
            t = value
        else:
            if self.epoch is None:
                raise _fail(path, "date-time values need an epoch")
            try:
                delta = datetime.fromisoformat(value) - self.epoch
            except ValueError:
                raise _fail(path, f"not an ISO date-time: {value!r}") from None
            if delta.microseconds:
                raise _fail(path, "times must be whole seconds")
            t = int(delta.total_seconds())
        if t < 0:
            raise _fail(path, f"time {t} precedes the epoch")
        return t


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"])
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse(raw: dict[str, Any], *, seed: int | None = None) -> Scenario:
    try:
        model = ScenarioModel.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None
    m = model.market
    try:
        config = MarketConfig(
            tick_size=_fraction(m.tick_size, "market.tick_size"),
            power_unit_kw=_fraction(m.power_unit_kw, "market.power_unit_kw"),
            rounding=m.rounding,
            residual_mode=m.residual_mode,
        )
    except ValueError as exc:
        raise _fail("market", str(exc)) from None
    try:
        tariff = TariffSchedule(
            _ticks(m.tariff.per_kwh, config, "market.tariff.per_kwh"),
            _fraction(m.tariff.flat_fee, "market.tariff.flat_fee"),
        )
    except ValueError as exc:
        raise _fail("market.tariff", str(exc)) from None
    clock = _Clock(model.epoch)
    seed = model.seed if seed is None else seed
    scenario = Scenario(
        config=config,
        tariff=tariff,
        open_at=clock.seconds(model.open_at, "open_at"),
        stop_time=clock.seconds(model.stop_time, "stop_time"),
        seed=seed,
        epoch=model.epoch,
        description=model.description,
    )

    seen: set[int] = set()
    for i, o in enumerate(model.orders, 1):
        path = f"orders.{i - 1}"
        if o.order_id in seen:
            raise _fail(f"{path}.Order ID", f"duplicate order id {o.order_id}")
        seen.add(o.order_id)
        if o.kind == "market" and o.price is not None:
            raise _fail(f"{path}.Price", "market order cannot carry a price")
        if o.kind == "market" and o.expiration is not None:
            raise _fail(f"{path}.Expiration", "market order cannot carry an expiration")
        if o.kind == "limit" and o.price is None:
            raise _fail(f"{path}.Price", "limit order requires a price")
        if o.quantity == 0:
            raise _fail(f"{path}.Quantity", "quantity must be nonzero")
        t = clock.seconds(o.timestamp, f"{path}.Timestamp")
        if o.kind == "market" and scenario.open_at is not None and t <= scenario.open_at:
            raise _fail(f"{path}.Kind", "market orders cannot arrive before the open")
        if o.price is not None:
            _ticks(o.price, config, f"{path}.Price")
        try:
            order = make_order(order_id=o.order_id, device_id=o.device_id, quantity=o.quantity,
                               duration=o.duration, flexible=o.flexible, price=o.price,
                               expiration=o.expiration, kind=o.kind, timestamp=t, seq=i,
                               tick_size=config.tick_size)
        except OrderError as exc:
            raise _fail(path, str(exc)) from None
        scenario.orders.append(order)

    for i, c in enumerate(model.cancels):
        t = clock.seconds(c.time, f"cancels.{i}.Time")
        if c.order_id not in seen:
            raise _fail(f"cancels.{i}.Order ID", f"unknown order id {c.order_id}")
        scenario.cancels.append(Cancel(c.order_id, t))

    devices: set[int] = set()
    for i, a in enumerate(model.agents):
        path = f"agents.{i}"
        if a.device_id in devices:
            raise _fail(f"{path}.Device ID", f"duplicate agent device {a.device_id}")
        devices.add(a.device_id)
        try:
            feeder = None
            if a.feeder is not None:
                feeder = FeederParams(_ticks(a.feeder.wholesale, config, f"{path}.feeder.wholesale"),
                                      _ticks(a.feeder.lmp, config, f"{path}.feeder.lmp"), a.feeder.depth)
            scenario.agents.append(AgentSpec(
                device_id=a.device_id,
                archetype=a.archetype,
                quantity=a.quantity,
                duration=a.duration,
                price=None if a.price is None else _ticks(a.price, config, f"{path}.price"),
                band=None if a.band is None else (
                    _ticks(a.band[0], config, f"{path}.band.0"), _ticks(a.band[1], config, f"{path}.band.1")),
                feeder=feeder,
                curtailable=a.curtailable,
                expiration=a.expiration,
                start=clock.seconds(a.start, f"{path}.start"),
                interval=a.interval,
                count=a.count,
                jitter=a.jitter,
                seed=seed,
            ))
        except AgentError as exc:
            raise _fail(path, str(exc)) from None

    if model.convergence is not None:
        c = model.convergence
        if model.orders:
            raise _fail("convergence", "cannot be combined with an explicit order list")
        demand = [(_ticks(p, config, f"convergence.demand.{k}"), q) for k, (p, q) in enumerate(c.demand)]
        supply = [(_ticks(p, config, f"convergence.supply.{k}"), q) for k, (p, q) in enumerate(c.supply)]
        try:
            conv = convergence_scenario(demand, supply, seed, periods=c.periods, spacing=c.spacing,
                                        duration=c.duration, config=config)
        except AgentError as exc:
            raise _fail("convergence", str(exc)) from None
        scenario.orders = list(conv.orders)
        scenario.p_star = conv.p_star
    return scenario


def loads(text: str, *, seed: int | None = None) -> Scenario:
    try:
        raw = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("a scenario must be a JSON object")
    return parse(raw, seed=seed)


def load(path: str | Path, *, seed: int | None = None) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, seed=seed)
