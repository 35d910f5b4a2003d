"""Linear-algebra kernels, erf, and the seeded stream contract.

Every matrix in this package is a C-ordered ``float64`` :class:`numpy.ndarray`.
The SVD and symmetric eigendecomposition are delegated to LAPACK through
numpy; the functions here add input validation, explicit failure on
non-convergence and the regularized trace formulas used by the estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

__all__ = [
    "NumericalFailure",
    "RngStream",
    "Svd",
    "as_mat",
    "svd",
    "pinv_from_svd",
    "pinv_trace_regularized",
    "pinv_trace_batched",
    "regularized_sym_inverse",
    "whitened_trace_over",
    "whitened_trace_batched",
    "inverse_condition_number",
    "erf_accurate",
    "inverse_sq_distance_sum",
    "normal_cdf",
]


class NumericalFailure(ArithmeticError):
    """A decomposition did not converge or produced non-finite output."""


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(base_seed, stream_id)``.

    Backed by the counter-based Philox generator keyed through
    :class:`numpy.random.SeedSequence`. Distinct pairs give independent
    sequences; the same pair gives the same sequence no matter which thread
    consumes it.
    """

    base_seed: int
    stream_id: int = 0

    def generator(self, *sub: int) -> np.random.Generator:
        """Fresh generator for this stream, optionally for a sub-stream."""
        seq = np.random.SeedSequence(
            entropy=int(self.base_seed), spawn_key=(int(self.stream_id), *map(int, sub))
        )
        return np.random.Generator(np.random.Philox(seq))

    def substream(self, stream_id: int) -> "RngStream":
        return RngStream(self.base_seed, stream_id)


class Svd(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def as_mat(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {a.shape}")
    return a


def svd(a) -> Svd:
    """Thin SVD ``a = u @ diag(s) @ vt`` with ``k = min(n, p)`` components.

    Raises
    ------
    ValueError
        If ``a`` has non-finite entries.
    NumericalFailure
        If LAPACK does not converge.
    """
    a = as_mat(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("svd input contains non-finite entries")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge for shape {a.shape}") from exc
    return Svd(u, s, vt)


def pinv_from_svd(dec: Svd) -> np.ndarray:
    # 1/0 := 0 for exactly vanishing singular values
    s = dec.s
    inv = np.divide(1.0, s, out=np.zeros_like(s), where=s > 0)
    return (dec.vt.T * inv) @ dec.u.T


def _check_sigma(sigma, p: int) -> np.ndarray:
    sigma = as_mat(sigma, "sigma")
    if sigma.shape != (p, p):
        raise ValueError(f"sigma must be {p}x{p}, got {sigma.shape}")
    return sigma


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam >= 0.0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    return lam


def _shrink_weights(s: np.ndarray, lam: float) -> np.ndarray:
    # s^2/(s^2+lam)^2; at lam = 0 this is 1/s^2 with 1/0 := 0
    s2 = s * s
    den = (s2 + lam) ** 2
    return np.divide(s2, den, out=np.zeros_like(s2), where=den > 0)


def pinv_trace_regularized(z, sigma, lam: float = 0.0) -> float:
    """Regularized ``tr((Z^+)^T Sigma Z^+)`` evaluated through the SVD of ``z``.

    With ``Z = U diag(s) V^T`` this returns
    ``tr(V diag(s_i^2 / (s_i^2 + lam)^2) V^T Sigma)``, which equals the exact
    pseudoinverse trace for ``lam = 0``.
    """
    z = as_mat(z, "z")
    sigma = _check_sigma(sigma, z.shape[1])
    lam = _check_lambda(lam)
    dec = svd(z)
    w = _shrink_weights(dec.s, lam)
    quad = np.sum((dec.vt @ sigma) * dec.vt, axis=1)
    return float(quad @ w)


def pinv_trace_batched(z: np.ndarray, sigma: np.ndarray, lam: float) -> np.ndarray:
    """Vectorized :func:`pinv_trace_regularized` over a leading batch axis.

    ``z`` has shape ``(m, n, p)`` and ``sigma`` shape ``(m, p, p)``.
    """
    lam = _check_lambda(lam)
    if not np.all(np.isfinite(z)):
        raise ValueError("feature matrices contain non-finite entries")
    try:
        _, s, vt = np.linalg.svd(z, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("batched SVD did not converge") from exc
    w = _shrink_weights(s, lam)
    # diagonal of V^T Sigma V, one entry per singular direction
    quad = np.sum((vt @ sigma) * vt, axis=-1)
    return np.sum(quad * w, axis=-1)


def regularized_sym_inverse(a: np.ndarray, lam: float) -> np.ndarray:
    """``U diag(s_i / (s_i^2 + lam)) U^T`` from the eigendecomposition of ``a``.

    Works on a single symmetric matrix or a stack of them. At ``lam = 0``
    zero eigenvalues map to zero.
    """
    try:
        s, u = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("symmetric eigendecomposition did not converge") from exc
    den = s * s + lam
    w = np.divide(s, den, out=np.zeros_like(s), where=den > 0)
    return (u * w[..., None, :]) @ np.swapaxes(u, -1, -2)


def whitened_trace_over(z, sigma, lam: float = 0.0) -> float:
    """Regularized ``tr((Z Sigma^{-1} Z^T)^{-1})`` for ``n <= p``.

    Both inverses use :func:`regularized_sym_inverse`.
    """
    z = as_mat(z, "z")
    n, p = z.shape
    if n > p:
        raise ValueError(f"whitened trace needs n <= p, got n={n}, p={p}")
    sigma = _check_sigma(sigma, p)
    lam = _check_lambda(lam)
    return float(whitened_trace_batched(z[None], sigma[None], lam)[0])


def whitened_trace_batched(z: np.ndarray, sigma: np.ndarray, lam: float) -> np.ndarray:
    sigma_inv = regularized_sym_inverse(0.5 * (sigma + np.swapaxes(sigma, -1, -2)), lam)
    gram = z @ sigma_inv @ np.swapaxes(z, -1, -2)
    gram = 0.5 * (gram + np.swapaxes(gram, -1, -2))
    inv = regularized_sym_inverse(gram, lam)
    return np.trace(inv, axis1=-2, axis2=-1)


def inverse_condition_number(z) -> float:
    """``s_min / s_max`` over the ``min(n, p)`` singular values; 0 if ``z = 0``."""
    s = svd(z).s
    if s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


def erf_accurate(x):
    """Error function, accurate to a few ulp (Cephes rational approximations).

    Exactly odd, and saturates to +-1 beyond ``|x| ~ 6``.
    """
    if np.ndim(x) == 0:
        return math.erf(float(x))
    return special.erf(np.asarray(x, dtype=np.float64))


def normal_cdf(x):
    """Standard normal CDF, ``(1 + erf(x / sqrt 2)) / 2``.

    Evaluated as ``erfc(-x / sqrt 2) / 2`` so the lower tail keeps full
    relative precision instead of cancelling against 1.
    """
    return 0.5 * special.erfc(-np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


def inverse_sq_distance_sum(w) -> float:
    """``sum_i dist(w_i, span{w_j : j != i})^{-2}`` over the rows of ``w``.

    Each distance is the norm of the residual after orthogonal projection
    onto an orthonormal basis (QR) of the remaining rows.
    """
    w = as_mat(w, "w")
    n = w.shape[0]
    total = 0.0
    for i in range(n):
        others = np.delete(w, i, axis=0)
        r = w[i].copy()
        if others.shape[0]:
            q, _ = np.linalg.qr(others.T)
            for _ in range(2):  # second pass restores orthogonality
                r -= q @ (q.T @ r)
        dist = np.linalg.norm(r)
        total += math.inf if dist == 0.0 else 1.0 / (dist * dist)
    return total
