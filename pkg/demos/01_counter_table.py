"""Counting activations in a partitioned Count-Min Sketch.

Run: python demos/01_counter_table.py
"""
from cometsim.sketch import HashFamily, SketchTable

# %% A tiny two-partition table with H0(x) = x mod 5 and H1(x) = (x >> 2) mod 5.
fam = HashFamily([(0, 1, 5), (2, 1, 5)])
table = SketchTable(n_hash=2, n_counters=5, cap=250, hash_family=fam)
print("row 12 ->", table.counter_group(12))
print("row 14 ->", table.counter_group(14))  # shares the second counter with row 12

# %% Rows 12 and 14 collide in one counter, but each keeps a private one,
# so the minimum still reports the exact count.
for row in [12] * 3 + [14] * 5:
    table.increment(row)
print("estimates:", table.estimate(12), table.estimate(14))
print(table.as_array())

# %% Conservative updates only bump the counters sitting at the minimum.
plain = SketchTable(2, 5, cap=250, hash_family=fam, conservative=False)
for row in [12] * 3 + [14] * 5:
    plain.increment(row)
print("plain CMS counters:\n", plain.as_array())

# %% The default table: 4 partitions x 512 counters, hashes built from shifts,
# one multiply and a mask.
big = SketchTable(cap=250)
print(big, "hash functions:", big.hash_family)
print("row 77777 ->", big.counter_group(77777))
