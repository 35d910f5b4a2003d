"""
Checking the full-rank assumption
=================================

For analytic maps, full rank either holds almost surely or never. One
feature matrix with inverse condition number clearly above rounding level is
therefore a witness. Maps whose range sits in a subspace never produce one.
"""

import numpy as np

from ridgeless_lab import NTK, Activation, IdentityMap, Polynomial, frk_check

for act in ("sigmoid", "tanh", "softplus", "gelu"):
    rep = frk_check(NTK(layer_sizes=(4, 6, 1), activation=Activation(act)), n=90, samples=500)
    print(f"NTK {act:<9}", rep.summary())

print("poly d=1 m=2 ", frk_check(Polynomial(d=1, m=2, c=1.0), n=10, samples=200).summary())

# inputs confined to a 2-dimensional subspace of R^5
basis = np.array([[1.0, 2.0, 0.0, -1.0, 0.5], [0.0, 1.0, 1.0, 3.0, -2.0]])
confined = IdentityMap(d=5, input_sampler=lambda n, gen: gen.standard_normal((n, 2)) @ basis)
print("confined     ", frk_check(confined, n=10, samples=200).summary())
