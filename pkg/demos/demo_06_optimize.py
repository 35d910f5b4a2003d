"""
Training a feature map for low E_noise
======================================

A tanh network in NTK parameterization is trained with AMSGrad on a
ridge-regularized trace objective at a fixed sample size. Desk scale: widths
32 and 200 steps.
"""

import numpy as np

from ridgeless_lab import Activation, EstimatorConfig, NTKParamNN, OptimConfig, estimate_curve_vs_n, train
from ridgeless_lab.featmaps import FixedTheta

spec = NTKParamNN(layer_sizes=(10, 32, 32, 10), activation=Activation("tanh"))
result = train(spec, OptimConfig.desk(target_n=6, seed=0))
losses = np.array([loss for _, loss, _ in result.trajectory])
print(f"median loss, first 20 steps {np.median(losses[:20]):.4f}, last 20 {np.median(losses[-20:]):.4f}")

# compare the trained and untrained maps with the estimator
cfg = EstimatorConfig(reps=200, n_max=20, base_seed=1)
before = estimate_curve_vs_n(FixedTheta(base=spec, theta=result.theta_init), cfg)
after = estimate_curve_vs_n(FixedTheta(base=spec, theta=result.theta), cfg)
for n in (3, 6, 15, 20):
    print(f"n={n:<3} untrained {before.mean[n - 1]:.4f}  trained {after.mean[n - 1]:.4f}")
