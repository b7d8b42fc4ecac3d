"""Limit order book matching and discrete-event simulation for transactive energy markets."""
from .agents import AgentSpec, Archetype, FeederParams, convergence_scenario, emit_orders, equilibrium
from .book import Book, BookError, format_table
from .domain import (
    Dispatch,
    MarketConfig,
    Order,
    OrderError,
    OrderKind,
    ResidualMode,
    Rounding,
    Side,
    Transaction,
    make_order,
)
from .engine import Engine, EventQueue, RunResult, book_at, replay, run_orders
from .events import Event, EventType
from .matching import (
    MatchOutcome,
    clear_book,
    is_equilibrium,
    match_stacks,
    price_filter,
    process_order,
    split_partial,
    stack_cut,
)
from .oracle import check, enumerate_clearings, expected_clearing
from .scenario import ConfigError, Scenario, load, loads
from .settlement import PriceUndiscoverable, SettlementReport, TariffSchedule, clearing_price, settle

__version__ = "0.1.0"

__all__ = [
    "AgentSpec", "Archetype", "FeederParams", "convergence_scenario", "emit_orders", "equilibrium",
    "Book", "BookError", "format_table",
    "Dispatch", "MarketConfig", "Order", "OrderError", "OrderKind", "ResidualMode", "Rounding", "Side",
    "Transaction", "make_order",
    "Engine", "EventQueue", "RunResult", "book_at", "replay", "run_orders",
    "Event", "EventType",
    "MatchOutcome", "clear_book", "is_equilibrium", "match_stacks", "price_filter", "process_order",
    "split_partial", "stack_cut",
    "check", "enumerate_clearings", "expected_clearing",
    "ConfigError", "Scenario", "load", "loads",
    "PriceUndiscoverable", "SettlementReport", "TariffSchedule", "clearing_price", "settle",
]


def bundled(name: str) -> str:
    """Path of a scenario file shipped with the package, e.g. ``bundled("table1")``."""
    from importlib.resources import files

    return str(files("telob.scenarios") / f"{name}.json")
