"""Predict the next distribution of a drifting 1-D sample and herd it into points.

    python3 demos/predict_and_herd.py
"""

import numpy as np

from edd import dynamics, experiments, herding, metrics
from edd.embedding import embed, rkhs_distance

setting = experiments.SyntheticSetting("translation", n=300, seed=1)
sets = experiments.observed_sets(setting)
truth = experiments.generate(setting, setting.T, stream=1)
spec = experiments.EXPERIMENT_KERNEL

model = dynamics.fit(sets, spec, lam=1 / setting.n)
pred = dynamics.extrapolate(model)
print("beta:", np.round(model.beta, 3))
print("HS distance, last observed set:", round(rkhs_distance(embed(sets[-1]), embed(truth), spec), 4))
print("HS distance, extrapolation:    ", round(rkhs_distance(pred, embed(truth), spec), 4))

# Turn the weighted prediction into an ordinary sample.
pool = herding.candidate_pool(sets)
herded = herding.herd(pred, spec, herding.HerdingConfig(setting.n, pool))
report = metrics.evaluate_prediction(herded, truth, spec)
x = herded.points[:, 0]
print("herded median %.3f (target mean 1.0), KL to fresh sample %.4f" % (np.median(x), report.kl))
# The prediction's weights sum to less than one, so herding also places a few
# points far from the target to use up the remaining mass.
print("total predicted mass %.3f, share of herded points above 5: %.2f" % (pred.weights.sum(), (x > 5).mean()))
