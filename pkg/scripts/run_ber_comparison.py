"""Headline BER sweep: fluid-antenna RSM vs the fixed-antenna baseline,
with all three port-selection strategies. Writes results/ber_comparison.csv."""

import time
from dataclasses import replace
from pathlib import Path

from farsm.simulate import SimConfig, run_ber_sweep, write_ber_csv

TRIALS = 100_000
SNR = (0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0)

base = SimConfig(snr_db=SNR, trials=TRIALS, master_seed=7)
runs = [
    replace(base, baseline=True),
    replace(base, portsel="optimal"),
    replace(base, portsel="tmd"),
    replace(base, portsel="mce-tmd"),
]

out = Path("results")
out.mkdir(exist_ok=True)
sweeps = []
for cfg in runs:
    t0 = time.perf_counter()
    sw = run_ber_sweep(cfg)
    print(f"{sw.variant}: {time.perf_counter() - t0:.1f}s, "
          f"redraws={sw.redraws}")
    sweeps.append(sw)

with open(out / "ber_comparison.csv", "w") as fh:
    write_ber_csv(fh, sweeps)
print(f"wrote {out / 'ber_comparison.csv'}")
