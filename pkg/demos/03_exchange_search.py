"""
Randomised exchange search against random and Latin-hypercube subsamples.

One replicate of the simulation study on a mid-sized field. The search
swaps one subsample member at a time for the best of n_cand random
candidates, keeping the swap only if test-set MSPE drops.
"""

import numpy as np

from rexsub import lhs_subsample, make_dataset, make_setting, random_subsample
from rexsub.criteria import validation_metrics
from rexsub.exchange import RexsubConfig, rexsub_search, select_test_set
from rexsub.vecchia import fit_mle

rng = np.random.default_rng(2)
ds = make_dataset(make_setting(1), N=4000, n_train=3200, rng=rng)
test, selectable = select_test_set(ds.train, 0.10, rng)
validate = ds.validation_data()

res = rexsub_search(ds.search_view(), test, RexsubConfig(n=25, seed=7), selectable)
path = res.trace.phi_best_path
print(f"test MSPE {path[0]:.3f} -> {path[-1]:.3f} over {len(res.trace.events)} positions")
print("accepted swaps:", sum(e.accepted for e in res.trace.events))

for name, idx in [
    ("random", random_subsample(selectable, 25, rng)),
    ("lhs", lhs_subsample(ds.locations, selectable, 25, rng)),
]:
    fit = fit_mle(ds.subset(idx, centered=True))
    print(name, validation_metrics(fit, validate))
print("rexsub", validation_metrics(res.fit, validate))

for task, sec in res.trace.timings.items():
    print(f"{task:>22}: {sec:.2f}s")
