"""
Fit a Vecchia GP to a 25-point subsample and predict a held-out field.

The fitted smoothness is picked from the grid {0.5, 1.5}; range, partial
sill and nugget come from a Nelder-Mead search on the log scale.
"""

import numpy as np

from rexsub import VecchiaConfig, fit_mle, make_dataset, make_setting, random_subsample
from rexsub.criteria import validation_metrics

rng = np.random.default_rng(1)
setting = make_setting(1)
print(setting, "phi =", round(setting.phi, 6))

ds = make_dataset(setting, N=3000, n_train=2500, rng=rng)

idx = random_subsample(ds.train, 25, rng)
fit = fit_mle(ds.subset(idx, centered=True), VecchiaConfig(m=10))
print("fitted:", fit.params)
print("truth: ", setting.params)

# held-out accuracy of the 25-point fit
print(validation_metrics(fit, ds.validation_data(), alpha=0.05))
