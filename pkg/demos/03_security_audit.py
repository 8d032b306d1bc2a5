"""Ground-truth auditing: the reset-straddle worst case and an unmitigated hammer.

Run: python demos/03_security_audit.py
"""
from cometsim.dram import Geometry
from cometsim.experiments import run
from cometsim.tracker import CometConfig
from cometsim.traces import gen_hammer, gen_reset_straddle

one_bank = Geometry(ranks=1, banks_per_rank=1)

# %% Hammer just below N_PR before every counter reset in one refresh interval
# of the victim. Nothing triggers, and the victim takes (k+1)(N_PR-1) ACTs.
cfg = CometConfig(n_rh=125, k_reset=3)
stats = run(gen_reset_straddle(cfg, target_row=1000), "comet", cfg, one_bank, audit=True)
print(stats.summary())

# %% One more ACT per burst and every burst triggers a refresh.
stats = run(gen_reset_straddle(cfg, 1000, burst_len=cfg.n_pr), "comet", cfg, one_bank,
            audit=True, record_refreshes=True)
print("refreshes at ACT indices:", [e[0] for e in stats.refresh_log])

# %% A 16-row hammer at one ACT per 20 ns for 4 ms, with and without mitigation.
trace = gen_hammer(one_bank, 16, act_interval_ns=20, duration_ns=4_000_000)
for tracker in ("none", "comet", "graphene", "para"):
    print(run(trace, tracker, CometConfig(n_rh=1000), one_bank).summary())
