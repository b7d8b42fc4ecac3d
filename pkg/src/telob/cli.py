"""Command-line driver: ``run``, ``replay`` and ``inspect``.

Exit status is 0 on success, 2 for anything wrong with the input (bad
config, unreadable or corrupt log, bad arguments) and 1 for a runtime
failure or a replay that does not verify.
"""
from __future__ import annotations

import argparse
import csv
import sys
from datetime import datetime
from pathlib import Path
from typing import Sequence

from .book import BookError, format_table
from .domain import MarketConfig, OrderError
from .engine import EngineError, RunResult, book_at, read_log, replay
from .events import CorruptLogError
from .scenario import ConfigError, load
from .settlement import CSV_COLUMNS, PriceUndiscoverable, SettlementError, report_rows

DISPATCH_COLUMNS = (
    "round_id",
    "time",
    "trigger_order",
    "transaction",
    "buyer_device",
    "seller_device",
    "buyer_order",
    "seller_order",
    "quantity",
    "price",
    "duration",
)
PRICE_COLUMNS = ("round_id", "time", "price")

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def dispatch_rows(result: RunResult, config: MarketConfig) -> list[list[str]]:
    rows = []
    for d in result.dispatches:
        for k, t in enumerate(d.transactions, 1):
            rows.append([d.round_id, d.time, d.trigger_order, k, t.buyer_device, t.seller_device,
                         t.buyer_order, t.seller_order, t.quantity, config.price_str(t.clearing_price),
                         t.duration])
    return rows


def write_outputs(result: RunResult, config: MarketConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.jsonl").write_text(result.jsonl())
    _write_csv(out / "dispatches.csv", DISPATCH_COLUMNS, dispatch_rows(result, config))
    _write_csv(out / "settlement.csv", CSV_COLUMNS, report_rows(result.reports, config))
    _write_csv(out / "prices.csv", PRICE_COLUMNS,
               [[d.round_id, d.time, config.price_str(d.clearing_price)] for d in result.dispatches])


def cmd_run(args) -> int:
    try:
        scenario = load(args.config, seed=args.seed)
        scenario = scenario.with_options(seed=args.seed, residual_mode=args.residual_mode,
                                         tariff=args.tariff)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        result = scenario.engine().run()
        write_outputs(result, scenario.config, Path(args.out))
    except (EngineError, BookError, OrderError, PriceUndiscoverable, SettlementError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{len(result.events)} events, {len(result.dispatches)} dispatches -> {args.out}")
    return EXIT_OK


def _read_lines(path: str) -> list[str] | None:
    try:
        return Path(path).read_text().splitlines()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror}", file=sys.stderr)
        return None


def cmd_replay(args) -> int:
    lines = _read_lines(args.log)
    if lines is None:
        return EXIT_INPUT
    try:
        result = replay(lines)
    except CorruptLogError as exc:
        print(f"error: corrupt log: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EngineError, BookError, OrderError, PriceUndiscoverable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if result.verified:
        note = " (log is truncated; its prefix matches)" if result.truncated else ""
        print(f"verified {result.events_checked} events{note}")
        return EXIT_OK
    print(f"divergence at event {result.divergence}", file=sys.stderr)
    if result.expected is not None:
        print(f"  replayed: {result.expected}", file=sys.stderr)
    if result.found is not None:
        print(f"  logged:   {result.found}", file=sys.stderr)
    return EXIT_RUNTIME


def _parse_time(text: str, epoch: datetime | None) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    if epoch is None:
        raise ValueError(f"{text!r} is not a number of seconds and the log has no epoch")
    try:
        delta = datetime.fromisoformat(text) - epoch
    except ValueError:
        raise ValueError(f"{text!r} is neither seconds nor an ISO date-time") from None
    return int(delta.total_seconds())


def cmd_inspect(args) -> int:
    lines = _read_lines(args.log)
    if lines is None:
        return EXIT_INPUT
    try:
        _, events = read_log(lines)
        if not events:
            raise CorruptLogError("empty log")
        raw_epoch = events[0].payload.get("epoch")
        epoch = datetime.fromisoformat(raw_epoch) if raw_epoch else None
        at = _parse_time(args.at, epoch)
        book, engine = book_at(lines, at)
    except CorruptLogError as exc:
        print(f"error: corrupt log: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EngineError, BookError, PriceUndiscoverable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(format_table(book, engine.config, epoch))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="telob", description="Transactive energy limit order book simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write its outputs")
    r.add_argument("--config", required=True, help="scenario JSON file")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--residual-mode", choices=("deferred", "immediate"), default=None)
    r.add_argument("--tariff", default=None, help="per-kWh adder paid by buyers, in currency")
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="re-execute a log and verify it")
    rp.add_argument("--log", required=True)
    rp.set_defaults(func=cmd_replay)

    i = sub.add_parser("inspect", help="print the book as it stood just before a time")
    i.add_argument("--log", required=True)
    i.add_argument("--at", required=True, help="seconds, or a date-time when the log has an epoch")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
