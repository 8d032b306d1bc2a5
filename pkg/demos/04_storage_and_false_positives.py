"""Storage cost of the tracker and false positives of partitioned vs shared counters.

Run: python demos/04_storage_and_false_positives.py
"""
from cometsim.experiments import fp_experiment, storage_model
from cometsim.tracker import CometConfig

# %% Counter width follows N_PR, so storage shrinks as the threshold drops.
print("N_RH   CT KiB  RAT KiB  total")
for n_rh in (1000, 500, 250, 125):
    s = storage_model(CometConfig(n_rh=n_rh))
    print(f"{n_rh:>4} {s.ct_kib:>8} {s.rat_kib:>8} {s.total_kib:>6}")

# %% Same 2048-counter budget, 10,000 ACTs spread over a number of rows.
# "threshold" flags rows estimated at >= 125 with a true count below 125;
# "overestimate" flags any row whose estimate exceeds its true count.
for predicate in ("threshold", "overestimate"):
    for rows in (100, 250, 1000):
        r = fp_experiment(rows, trials=20, seed=0, predicate=predicate)
        print(f"{predicate:>12} {rows:>5} rows: partitioned {r.fp_comet:.4f}  shared {r.fp_cbf:.4f}")
