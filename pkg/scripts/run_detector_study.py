"""Detector comparison under both precoders: full ML search vs energy
detection vs the ratio-test hybrid. Writes results/detector_study.csv."""

import time
from pathlib import Path

from farsm.simulate import SimConfig, run_ber_sweep_multi, write_ber_csv

TRIALS = 100_000
SNR = (0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0)

out = Path("results")
out.mkdir(exist_ok=True)
sweeps = []
for precoder in ("zf", "mmse"):
    cfg = SimConfig(precoder=precoder, portsel="optimal", snr_db=SNR,
                    trials=TRIALS, master_seed=7, gamma=0.6,
                    select_snr_db=18.0 if precoder == "mmse" else None)
    t0 = time.perf_counter()
    results = run_ber_sweep_multi(cfg, ("mld", "med", "rttd"))
    print(f"{precoder}: {time.perf_counter() - t0:.1f}s")
    sweeps.extend(results[d] for d in ("mld", "med", "rttd"))

with open(out / "detector_study.csv", "w") as fh:
    write_ber_csv(fh, sweeps)
print(f"wrote {out / 'detector_study.csv'}")
