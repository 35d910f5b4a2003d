"""
Closed-form label-noise error
=============================

The noise part of the excess risk of ridgeless regression is
``E_noise = sigma^2 E tr((Z^+)^T Sigma Z^+)``. For full-rank feature
distributions it never drops below ``n / (p + 1 - n)`` (``p >= n``), and for
two input distributions the exact value is known.
"""

from ridgeless_lab import closedform as cf

p = 30
print(f"{'n':>3} {'bound':>10} {'sphere':>10} {'gaussian':>10}")
for n in (1, 2, 5, 10, 15, 20, 25, 27):
    row = [cf.lower_bound(n, p).value, cf.sphere_exact(n, p).value, cf.gaussian_exact(n, p).value]
    print(f"{n:>3} " + " ".join(f"{v:>10.4f}" for v in row))

# near the interpolation threshold the exact values blow up
print("sphere at n=29:", cf.sphere_exact(29, p).value, " gaussian at n=30:", cf.gaussian_exact(30, p).value)

# the ordering bound <= sphere < gaussian holds everywhere in p >= n + 2
print("chain at n=15, p=30:", cf.relative_chain(15, 30))

# and the bound is asymptotically sharp along p = 2n
for n in (10, 20, 40, 80, 160):
    b, g = cf.lower_bound(n, 2 * n).value, cf.gaussian_exact(n, 2 * n).value
    print(f"n={n:<4} relative gap {(g - b) / b:.4f}")
