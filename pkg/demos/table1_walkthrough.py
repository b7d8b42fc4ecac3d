"""
Walkthrough: the four-order snapshot that is not in equilibrium.

Builds the book by hand, shows the price-filtered stacks, the stack cut and
the resulting dispatch, then settles it with and without a network tariff.
"""
from fractions import Fraction

from telob import Book, MarketConfig, TariffSchedule, format_table, make_order, price_filter, settle, stack_cut
from telob.matching import clear_book
from telob.settlement import clearing_price, to_csv

cfg = MarketConfig()

# ----------------------------------------------------------------------
# 1. The snapshot (times in seconds after 00:00:00)
# ----------------------------------------------------------------------
rows = [
    # id, time, signed qty, price, flexible
    (1, 0, 2, "4.00", False),
    (2, 385, 2, "3.00", False),
    (3, 498, -2, "2.50", True),
    (4, 727, -3, "1.00", False),
]
orders = {}
book = Book(now=727)
for oid, t, q, p, flex in rows:
    o = make_order(order_id=oid, device_id=oid, quantity=q, duration=10, flexible=flex,
                   price=p, expiration=10, timestamp=t, seq=oid)
    orders[oid] = o
    book.insert(o)

print(format_table(book, cfg))
print(f"spread: {cfg.price_str(book.spread())}  (negative, so the book may cross)")
print(f"in equilibrium: {book.is_equilibrium()}")

# ----------------------------------------------------------------------
# 2. Price filter and stack cut
# ----------------------------------------------------------------------
stacks = price_filter(book)
print(f"\nB' total {stacks.d_tot}, S' total {stacks.s_tot}")
cut, marginal = stack_cut(stacks)
print(f"marginal order {marginal.order_id}: {marginal.cut_quantity} unit cut")
print(f"clearing price: {cfg.price_str(clearing_price(cut, marginal))}")

# ----------------------------------------------------------------------
# 3. Dispatch
# ----------------------------------------------------------------------
out = clear_book(book, 727, trigger=4)
for t in out.dispatch.transactions:
    print(f"  seller {t.seller_device} -> buyer {t.buyer_device}: {t.quantity} kW "
          f"@ {cfg.price_str(t.clearing_price)} for {t.duration} s")
for r in out.residuals:
    print(f"residual {r.order_id} of order {r.ancestor_id}: {r.quantity} unit(s), "
          f"active from t={r.activation_time}")
print(f"book afterwards in equilibrium: {book.is_equilibrium()}")

# ----------------------------------------------------------------------
# 4. Settlement
# ----------------------------------------------------------------------
plain = settle(out.dispatch, orders)
taxed = settle(out.dispatch, orders, TariffSchedule(per_kwh=cfg.ticks("0.10"), flat_fee=Fraction(0)))
print()
print(to_csv([plain], cfg, places=6), end="")
print(f"with a 0.10/kWh tariff buyers pay {float(taxed.buyer_payments):.6f}, "
      f"sellers receive {float(taxed.seller_receipts):.6f}, network {float(taxed.tariff_total):.6f}")
