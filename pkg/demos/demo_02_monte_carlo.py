"""
Estimating E_noise by Monte Carlo
=================================

Each repetition samples the feature map's parameters, a held-out set for
``Sigma``, and one ``n_max``-row input matrix whose prefixes give every
``n``. With the exact ``Sigma`` the estimates should match the closed forms.
"""

from ridgeless_lab import EstimatorConfig, GaussianDirect, SphereDirect, estimate_curve_vs_n
from ridgeless_lab.closedform import gaussian_exact, sphere_exact

cfg = EstimatorConfig(reps=2000, n_max=25, exact_sigma=True)
gauss = estimate_curve_vs_n(GaussianDirect(30), cfg)
sphere = estimate_curve_vs_n(SphereDirect(30), cfg)

print(f"{'n':>3} {'gauss MC':>18} {'exact':>8} {'sphere MC':>18} {'exact':>8}")
for n in (1, 5, 10, 15, 20, 25):
    i = n - 1
    print(f"{n:>3} {gauss.mean[i]:>9.4f} +- {gauss.stderr[i]:.4f} {gaussian_exact(n, 30).value:>8.4f}"
          f" {sphere.mean[i]:>9.4f} +- {sphere.stderr[i]:.4f} {sphere_exact(n, 30).value:>8.4f}")

# for the sphere at n = 1 every repetition gives exactly 1/p
print("sphere n=1 stderr:", sphere.stderr[0])

# curves serialize to CSV plus a JSON sidecar
print(gauss.to_csv().splitlines()[:3])
