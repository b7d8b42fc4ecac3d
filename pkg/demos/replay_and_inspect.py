"""
Event sourcing: write a log, verify it, tamper with it, look back in time.
"""
from telob import book_at, bundled, format_table, load, replay

text = load(bundled("table1")).engine().run().jsonl()
lines = text.splitlines()
print(f"{len(lines)} events; last: {lines[-1]}")

v = replay(lines)
print(f"replay verified: {v.verified} ({v.events_checked} events)")

# bump one clearing price and the rerun disagrees at exactly that line
tampered = list(lines)
at = next(i for i, line in enumerate(lines) if '"Matched"' in line)
tampered[at] = tampered[at].replace('"Clearing Price":"2.50"', '"Clearing Price":"2.55"')
v = replay(tampered)
print(f"tampered log verified: {v.verified}, divergence at event {v.divergence}")

# a prefix is still consistent, just short
v = replay(lines[:5])
print(f"first five lines: verified={v.verified}, truncated={v.truncated}")

# the book just before order 4 arrived at 00:12:07
book, engine = book_at(lines, 727)
print()
print(format_table(book, engine.config), end="")
