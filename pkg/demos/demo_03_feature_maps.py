"""
Feature maps
============

Polynomial kernels, random Fourier features, random networks and NTK
features all produce a ``p``-dimensional feature vector per input.
"""

import numpy as np

from ridgeless_lab import NTK, RFF, Activation, Polynomial, RandomNN, RngStream
from ridgeless_lab.featmaps import poly_feature_map

rng = np.random.default_rng(0)
x, y = rng.standard_normal((2, 3))

# explicit polynomial features reproduce the kernel (x.y + c)^m
phi = poly_feature_map(np.stack([x, y]), m=4, c=1.0)
print("p =", Polynomial(d=3, m=4, c=1.0).dim, " phi(x).phi(y) =", phi[0] @ phi[1], " kernel =", (x @ y + 1) ** 4)

# sin/cos features have squared norm q for every input
rff = RFF(d=3, q=15, kind="sincos")
theta = rff.sample_theta(RngStream(1).generator())
print("RFF |phi(x)|^2 =", np.sum(rff.apply(theta, x[None]) ** 2))

# a random tanh network: pre-activations are kept near N(0, 1)
net = RandomNN(layer_sizes=(10, 32, 32, 30), activation=Activation("tanh"))
theta = net.sample_theta(RngStream(2).generator())
z = net.apply(theta, rng.standard_normal((5, 10)))
print("network features:", z.shape, " mean |z| =", np.abs(z).mean().round(3))

# NTK features: parameter gradient of a two-layer scalar network, p = 4*6 + 6
ntk = NTK(layer_sizes=(4, 6, 1), activation=Activation("tanh"))
theta = ntk.sample_theta(RngStream(3).generator())
print("NTK features:", ntk.apply(theta, rng.standard_normal((2, 4))).shape)

# specs are plain JSON
print(net.to_json())
