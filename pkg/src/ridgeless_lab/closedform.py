"""Closed-form values of the label-noise error E_noise.

All functions assume ``Var(y | z) = sigma2`` (default 1) so that E_noise is
``sigma2 * E tr((Z^+)^T Sigma Z^+)``. Infinite expectations are returned as
``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class BoundValue:
    value: float
    regime: str  # "under" (p < n), "over" (p > n) or "threshold" (p == n)

    def __float__(self) -> float:
        return self.value


def _regime(n: int, p: int) -> str:
    if n == p:
        return "threshold"
    return "over" if p > n else "under"


def _check_np(n: int, p: int):
    if n < 1 or p < 1:
        raise ValueError(f"need n, p >= 1, got n={n}, p={p}")


def lower_bound(n: int, p: int, sigma2: float = 1.0) -> BoundValue:
    """Distribution-free lower bound on E_noise under full-rank features.

    ``sigma2 * n / (p + 1 - n)`` for ``p >= n`` and ``sigma2 * p / (n + 1 - p)``
    for ``p <= n``; both give ``sigma2 * n`` at ``n == p``.
    """
    _check_np(n, p)
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    if p >= n:
        value = sigma2 * n / (p + 1 - n)
    else:
        value = sigma2 * p / (n + 1 - p)
    return BoundValue(value, _regime(n, p))


def sphere_exact(n: int, p: int) -> BoundValue:
    """Exact ``E tr((Z^+)^T Sigma Z^+)`` for rows uniform on the unit sphere.

    Only defined for ``n >= p == 1`` or ``p >= n``; for ``2 <= p < n`` no
    closed form is known and a ``ValueError`` is raised.
    """
    _check_np(n, p)
    if p == 1:
        value = 1.0 / n
    elif n == 1:
        value = 1.0 / p
    elif n > p:
        raise ValueError(f"no closed form for the sphere with 2 <= p < n (n={n}, p={p})")
    elif p <= n + 1:
        value = math.inf
    else:
        value = n / (p - 1 - n) * (p - 2) / p
    return BoundValue(value, _regime(n, p))


def gaussian_exact(n: int, p: int) -> BoundValue:
    """Exact ``E tr((Z^+)^T Sigma Z^+)`` for standard Gaussian rows; symmetric in (n, p)."""
    _check_np(n, p)
    if p >= n + 2:
        value = n / (p - 1 - n)
    elif p <= n - 2:
        value = p / (n - 1 - p)
    else:
        value = math.inf
    return BoundValue(value, _regime(n, p))


def counterexample_expectation(n: int, p: int) -> float:
    """``E[1/m_1]`` with ``m_1 ~ Binomial(n, 1/p)`` and ``1/0 := 0``.

    This is E_noise for features drawn uniformly from an orthonormal basis,
    a distribution that violates the full-rank assumption.
    """
    if n < 1 or p < 2:
        raise ValueError(f"need n >= 1 and p >= 2, got n={n}, p={p}")
    log_q = -math.log(p)
    log_1mq = math.log1p(-1.0 / p)
    lg_n1 = math.lgamma(n + 1)
    terms = []
    for k in range(1, n + 1):
        log_pmf = lg_n1 - math.lgamma(k + 1) - math.lgamma(n - k + 1) + k * log_q + (n - k) * log_1mq
        terms.append(math.exp(log_pmf) / k)
    return math.fsum(terms)


def relative_chain(n: int, p: int) -> tuple[float, float, float]:
    """``(lower bound, sphere, Gaussian)`` in the regime ``p >= n + 2``, ``n >= 2``.

    The ordering ``bound <= sphere < gaussian`` is checked before returning.
    """
    if n < 2 or p < n + 2:
        raise ValueError(f"chain needs n >= 2 and p >= n + 2, got n={n}, p={p}")
    # compare exactly; the float values may round across an equality
    bound = Fraction(n, p + 1 - n)
    sphere = Fraction(n, p - 1 - n) * Fraction(p - 2, p)
    gauss = Fraction(n, p - 1 - n)
    if not bound <= sphere < gauss:
        raise ArithmeticError(f"ordering violated at n={n}, p={p}")
    return float(bound), float(sphere), float(gauss)
