"""Preventive refresh counts across CT size, RAT size and reset period.

Run: python demos/05_parameter_sweeps.py  (about a minute)
"""
from cometsim.dram import Geometry
from cometsim.experiments import sweep, write_csv
from cometsim.tracker import CometConfig
from cometsim.traces import gen_rat_thrash, gen_uniform

one_bank = Geometry(1, 1)
base = CometConfig(n_rh=125)
uniform = gen_uniform(one_bank, 5_000_000, 20, 1000, seed=1)
thrash = gen_rat_thrash(one_bank, 256, base.n_pr, 20, 10_000_000)

# %% More counters per partition means fewer collisions, hence fewer refreshes.
print(write_csv(sweep("ct", [(4, c) for c in (64, 256, 1024)], [uniform], base, geometry=one_bank)))

# %% A bigger RAT absorbs more aggressors before evictions start.
print(write_csv(sweep("rat", [(64,), (128,), (256,)], [thrash], base, geometry=one_bank)))

# %% Resetting more often lowers N_PR as well.
print(write_csv(sweep("k", [(1,), (2,), (3,)], [thrash], base, geometry=one_bank)))
