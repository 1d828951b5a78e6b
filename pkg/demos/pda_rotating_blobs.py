"""Train a classifier for a future time step from labeled sets that keep rotating.

    python3 demos/pda_rotating_blobs.py
"""

import warnings

import numpy as np

from edd import experiments
from edd.predsvm import ConvergenceWarning

warnings.simplefilter("ignore", ConvergenceWarning)
rows = experiments.run_pda_synthetic(T=6, n=200, repeats=5, seed=0)
for r in rows:
    print(f"{r['method']:28s} {r['mean']:.3f} +- {r['std']:.3f}")
