"""One bank's tracker step by step: threshold, RAT, capacity misses, early refresh.

Run: python demos/02_tracker_walkthrough.py
"""
from cometsim.tracker import CometBankTracker, CometConfig, EarlyRefreshRequest

# %% N_RH = 1000 with three resets per refresh window gives N_PR = 250.
cfg = CometConfig(n_rh=1000)
t = CometBankTracker(cfg)
print("N_PR =", cfg.n_pr, " EPRT =", cfg.eprt, "capacity misses out of", cfg.history_len)

decisions = [t.on_activation(7) for _ in range(250)]
first = next(i for i, d in enumerate(decisions) if d is not None) + 1
print("first preventive refresh at ACT", first, "->", decisions[first - 1])
print("row 7 is now tracked in the RAT with count", t.rat.get(7))

# %% A small RAT makes aggressors fall out; their CT counters stay pinned,
# so the next ACT to an evicted row refreshes at once and counts as a capacity miss.
small = CometConfig(n_rh=125, n_rat_entries=8, history_len=32)
t = CometBankTracker(small, seed=1)
aggressors = range(0, 64, 2)
early_at = None
for round_no in range(3):
    for row in aggressors:
        for _ in range(small.n_pr):
            d = t.on_activation(row)
            if isinstance(d, EarlyRefreshRequest) and early_at is None:
                early_at = (round_no, row)
print("compulsory misses", t.compulsory_misses, "capacity misses", t.capacity_misses,
      "evictions", t.evictions)
print("first early refresh request (round, row):", early_at)
