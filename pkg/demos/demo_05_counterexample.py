"""
Without full rank the bound can fail
====================================

Features drawn uniformly from an orthonormal basis give ``Z^T Z`` diagonal
with binomial counts, and ``E_noise = E[1/m_1]``. For moderate ``n`` this
sits well below the full-rank lower bound.
"""

from ridgeless_lab import EstimatorConfig, OneHotHistogram, estimate_curve_vs_n
from ridgeless_lab.closedform import counterexample_expectation, lower_bound

curve = estimate_curve_vs_n(OneHotHistogram(30), EstimatorConfig(reps=2000, n_max=40, exact_sigma=True))
print(f"{'n':>3} {'bound':>8} {'exact':>8} {'MC':>8}")
for n in (1, 5, 10, 20, 30, 40):
    print(f"{n:>3} {lower_bound(n, 30).value:>8.4f} {counterexample_expectation(n, 30):>8.4f} {curve.mean[n - 1]:>8.4f}")
