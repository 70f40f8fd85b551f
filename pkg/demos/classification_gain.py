"""Desk-scale version of the classification-gain experiment.

Sweeps the probability of correctly detecting the interferer's alphabet for
both classifiers with a 4-QAM desired user (reduced trial count; the full
preset lives in configs/classify_ms4.cfg).
"""

import numpy as np

from mumimo import ExperimentConfig, run_classification_sweep
from mumimo.constellation import ConstellationKind as Kind

cfg = ExperimentConfig(
    sweep="classify",
    receivers=("joint-ml", "null-ml"),
    ms=Kind.QAM4,
    mi_true=(Kind.QAM4, Kind.QAM16, Kind.QAM64),
    window_sizes=(24,),
    n_trials=1500,
    snr_db=tuple(np.arange(0.0, 21.0, 2.0)),
    seed=1,
)

records = run_classification_sweep(cfg)
snrs = sorted({r.snr_db for r in records})

print("P(correct interferer alphabet), M_S = 4-QAM, N = 24, SIR 0 dB")
print(f"{'SNR':>5s}  " + "  ".join(f"{rx:>16s}" for rx in cfg.receivers))
for s in snrs:
    row = []
    for rx in cfg.receivers:
        avg = np.mean([r.value for r in records
                       if r.receiver == rx and r.snr_db == s])
        row.append(f"{avg:16.3f}")
    print(f"{s:5.0f}  " + "  ".join(row))

for level in (0.5, 0.9):
    out = []
    for rx in cfg.receivers:
        vals = [np.mean([r.value for r in records
                         if r.receiver == rx and r.snr_db == s]) for s in snrs]
        cross = next((snrs[i - 1] + (level - vals[i - 1]) /
                      (vals[i] - vals[i - 1]) * (snrs[i] - snrs[i - 1])
                      for i in range(1, len(snrs))
                      if vals[i - 1] < level <= vals[i]), None)
        out.append(f"{rx} {cross:.1f} dB" if cross else f"{rx} n/a")
    print(f"P = {level} crossings: " + ", ".join(out))
