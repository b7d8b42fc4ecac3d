"""
One simulated hour on a feeder.

Loads, PV, an EV fleet and a battery bid around a feeder market maker that
quotes the wholesale price on the bid side and the LMP on the ask side.
Prints the clearing-price series and the busiest devices.
"""
from collections import Counter

from telob import bundled, load

scenario = load(bundled("feeder_day"))
print(scenario.description)
result = scenario.engine(equilibrium_check=True).run()
cfg = scenario.config

# ----------------------------------------------------------------------
# Price series, one mark per round
# ----------------------------------------------------------------------
lo, hi = min(result.prices), max(result.prices)
for d in result.dispatches:
    bar = "#" * (1 + 40 * (d.clearing_price - lo) // max(1, hi - lo))
    print(f"t={d.time:5d}  {cfg.price_str(d.clearing_price):>5}  {bar}")

# ----------------------------------------------------------------------
# Who traded
# ----------------------------------------------------------------------
volume = Counter()
for d in result.dispatches:
    for t in d.transactions:
        volume[("buy", t.buyer_device)] += t.quantity
        volume[("sell", t.seller_device)] += t.quantity
print("\nunits traded by device:")
for (role, dev), q in sorted(volume.items(), key=lambda kv: -kv[1])[:8]:
    print(f"  device {dev:>3} {role:<4} {q}")

kinds = Counter(e.type.value for e in result.events)
print("\nevents:", dict(kinds))
