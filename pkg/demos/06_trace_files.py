"""Trace files and the command line.

Run: python demos/06_trace_files.py
"""
import subprocess
import sys
import tempfile
from pathlib import Path

from cometsim.dram import Geometry
from cometsim.traces import gen_random_mix, read_trace, write_trace

tmp = Path(tempfile.mkdtemp())

# %% One event per line: time_ns rank bank row. Lines starting with # are comments.
trace = gen_random_mix(Geometry(1, 4), 5000, seed=3)
write_trace(trace, tmp / "mix.trc.gz", header="seeded random mix, 4 banks")
back = read_trace(tmp / "mix.trc.gz")
print(len(back), "events, identical after round trip:", back == trace, flush=True)

# %% The same workflow from the shell.
cli = [sys.executable, "-m", "cometsim"]
subprocess.run(cli + ["generate", "hammer", "--duration-ms", "1", "-o", str(tmp / "h.trc")], check=True)
for tracker in ("comet", "none"):
    rc = subprocess.run(cli + ["simulate", "--trace", str(tmp / "h.trc"), "--tracker", tracker,
                               "--nrh", "125", "--audit"]).returncode
    print(f"{tracker}: exit code {rc}")
subprocess.run(cli + ["storage"], check=True)
