"""
Brute force versus the matcher on small random books.
"""
import random

from telob import Book, check, clear_book, enumerate_clearings, make_order

rng = random.Random(5)
agree = cleared = 0
for trial in range(2000):
    book = Book()
    for k in range(rng.randint(2, 6)):
        book.insert(make_order(order_id=k + 1, device_id=k + 1, quantity=rng.choice((1, -1)) * rng.randint(1, 4),
                               duration=10, flexible=rng.random() < 0.5, price=rng.randint(1, 10) / 10,
                               timestamp=k, seq=k + 1))
    before = book.copy()
    options = enumerate_clearings(before)
    verdict = check(before, clear_book(book, 10, 0))
    agree += bool(verdict)
    cleared += bool(options)
    if trial == 0 or not verdict:
        print(f"trial {trial}: {len(options)} legal clearing(s), verdict {verdict}")
print(f"{agree}/2000 agree; {cleared} books had at least one legal clearing")
