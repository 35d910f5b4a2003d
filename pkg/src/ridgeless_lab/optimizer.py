"""Training network feature maps to minimize the label-noise error.

The objective for parameters ``theta`` is

    L(theta) = E_X tr((Z^+)^T Sigma_theta Z^+),   Z = phi_theta(X),

where ``Sigma_theta`` is re-estimated every step from fresh inputs. The
pseudoinverse is replaced by its ridge form ``(Z^T Z + lam I)^{-1} Z^T``,
with symmetric inverses taken from an eigendecomposition. Gradients are
propagated by hand through the trace, the inverse, ``Sigma_theta`` and the
network; both the regression inputs and the ``Sigma`` inputs contribute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .featmaps import NTKParamNN, ThetaParams, ntkparam_forward
from .numkit import NumericalFailure, RngStream


@dataclass(frozen=True)
class OptimConfig:
    iterations: int = 1000
    lr_start: float = 1e-3
    batch: int = 1024
    sigma_mc: int = 1000
    lam: float = 1e-12
    target_n: int = 15
    seed: int = 0
    divergence_factor: float = 1e6

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.lr_start >= 0:
            raise ValueError("lr_start must be nonnegative")
        if self.batch < 1 or self.sigma_mc < 1 or self.target_n < 1:
            raise ValueError("batch, sigma_mc and target_n must be >= 1")
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")

    @classmethod
    def paper(cls, target_n: int, seed: int = 0) -> "OptimConfig":
        return cls(target_n=target_n, seed=seed)

    @classmethod
    def desk(cls, target_n: int, seed: int = 0, iterations: int = 200) -> "OptimConfig":
        return cls(iterations=iterations, batch=64, sigma_mc=200, target_n=target_n, seed=seed)

    def lr_at(self, step: int) -> float:
        """Linear decay from ``lr_start`` at step 0 to 0 at ``iterations``."""
        return self.lr_start * (1.0 - step / self.iterations)


class TrainingDiverged(RuntimeError):
    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


# ---------------------------------------------------------------------------
# trace objective and its adjoint


def _sym_inverse(a: np.ndarray) -> np.ndarray:
    try:
        mu, u = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("eigendecomposition failed in loss") from exc
    return (u / mu[..., None, :]) @ np.swapaxes(u, -1, -2)


def trace_objective(z: np.ndarray, sigma: np.ndarray, lam: float):
    """Ridge-regularized ``tr((Z^+)^T Sigma Z^+)`` and its gradients.

    ``z`` is ``(n, p)`` or a stack ``(b, n, p)`` sharing one ``sigma``.
    Returns ``(values, dz, dsigma)`` where ``dsigma`` is summed over the stack.

    For ``n <= p`` the ``n x n`` form ``tr(H Z Sigma Z^T H)`` with
    ``H = (Z Z^T + lam I)^{-1}`` is used, otherwise the ``p x p`` form
    ``tr(Sigma K G K)`` with ``G = Z^T Z`` and ``K = (G + lam I)^{-1}``.
    Both are the same function of ``Z``; the smaller Gram matrix avoids
    squaring away the null space.
    """
    single = z.ndim == 2
    if single:
        z = z[None]
    n, p = z.shape[-2:]
    zt = np.swapaxes(z, -1, -2)
    if n <= p:
        h = _sym_inverse(z @ zt + lam * np.eye(n))
        zs = z @ sigma
        b = zs @ zt
        h2 = h @ h
        values = np.sum(h2 * b, axis=(-2, -1))
        d = h @ (b @ h + h @ b) @ h
        dz = 2.0 * (h2 @ zs) - 2.0 * (d @ z)
        dsigma = np.sum(zt @ h2 @ z, axis=0)
    else:
        g = zt @ z
        k = _sym_inverse(g + lam * np.eye(p))
        kgk = k @ g @ k
        values = np.sum(kgk * sigma, axis=(-2, -1))
        ksk = k @ sigma @ k
        e = ksk - kgk @ sigma @ k - k @ sigma @ kgk
        dz = 2.0 * (z @ e)
        dsigma = np.sum(kgk, axis=0)
    if single:
        return float(values[0]), dz[0], dsigma
    return values, dz, dsigma


# ---------------------------------------------------------------------------
# network adjoint


def _network_grad(theta: ThetaParams, spec: NTKParamNN, cache, g_out):
    scales = spec.layer_scales()
    act = spec.activation
    gw, gb = [None] * len(theta.weights), [None] * len(theta.weights)
    g_h = g_out
    for l in range(len(theta.weights) - 1, -1, -1):
        h_in, pre = cache[l]
        g_pre = g_h * act.derivative(pre)
        gw[l] = scales[l] * (g_pre.T @ h_in)
        gb[l] = g_pre.sum(axis=0)
        if l:
            g_h = scales[l] * (g_pre @ theta.weights[l])
    return ThetaParams(tuple(gw), tuple(gb))


def _add(a: ThetaParams, b: ThetaParams) -> ThetaParams:
    return ThetaParams(
        tuple(x + y for x, y in zip(a.weights, b.weights)),
        tuple(x + y for x, y in zip(a.biases, b.biases)),
    )


def draw_step_inputs(spec: NTKParamNN, config: OptimConfig, rng):
    """Inputs for one loss evaluation: ``(X batch (b, n, d), Sigma inputs (M, d))``."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    x_sigma = spec.sample_inputs(config.sigma_mc, gen)
    x = spec.sample_inputs(config.batch * config.target_n, gen)
    return x.reshape(config.batch, config.target_n, spec.input_dim), x_sigma


def loss_and_grad(theta: ThetaParams, spec: NTKParamNN, config: OptimConfig, rng, need_grad=True):
    """Batch-averaged loss and (optionally) its gradient for one set of draws."""
    x, x_sigma = draw_step_inputs(spec, config, rng)
    b, n, d = x.shape
    z_flat, cache = ntkparam_forward(theta, spec, x.reshape(b * n, d), keep=True)
    zt, cache_t = ntkparam_forward(theta, spec, x_sigma, keep=True)
    sigma = (zt.T @ zt) / config.sigma_mc
    z = z_flat.reshape(b, n, -1)
    values, dz, dsigma = trace_objective(z, sigma, config.lam)
    loss = float(np.mean(values))
    if not math.isfinite(loss):
        seed = (rng.base_seed, rng.stream_id) if isinstance(rng, RngStream) else None
        raise FloatingPointError(f"non-finite loss for draw {seed}")
    if not need_grad:
        return loss, None
    dz = dz / b
    dsigma = dsigma / b
    g_zt = (zt @ (dsigma + dsigma.T)) / config.sigma_mc
    grad = _add(
        _network_grad(theta, spec, cache, dz.reshape(b * n, -1)),
        _network_grad(theta, spec, cache_t, g_zt),
    )
    return loss, grad


def loss_eval(theta, spec, config, rng) -> float:
    return loss_and_grad(theta, spec, config, rng, need_grad=False)[0]


def loss_grad(theta, spec, config, rng) -> ThetaParams:
    """Gradient of :func:`loss_eval` for the same ``rng`` (common random numbers)."""
    return loss_and_grad(theta, spec, config, rng)[1]


# ---------------------------------------------------------------------------
# AMSGrad


@dataclass
class AmsgradState:
    m: np.ndarray
    v: np.ndarray
    v_max: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int) -> "AmsgradState":
        return cls(np.zeros(size), np.zeros(size), np.zeros(size))


def amsgrad_step(state: AmsgradState, theta: np.ndarray, grad: np.ndarray, lr: float):
    """One bias-corrected AMSGrad update on flat arrays; returns ``(state, theta)``."""
    if theta.shape != grad.shape or grad.shape != state.m.shape:
        raise ValueError("state, theta and grad shapes must agree")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    v_max = np.maximum(state.v_max, v)
    m_hat = m / (1.0 - state.beta1 ** t)
    denom = np.sqrt(v_max / (1.0 - state.beta2 ** t)) + state.eps
    new_theta = theta - lr * (m_hat / denom)
    return replace(state, m=m, v=v, v_max=v_max, step=t), new_theta


# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    theta: ThetaParams
    theta_init: ThetaParams
    trajectory: list = field(default_factory=list)  # (step, loss, lr)

    def trajectory_csv(self) -> str:
        from .estimator import format_float

        lines = ["step,loss,lr"]
        lines += [f"{s},{format_float(l)},{format_float(r)}" for s, l, r in self.trajectory]
        return "\n".join(lines) + "\n"


def train(spec: NTKParamNN, config: OptimConfig, theta0: ThetaParams | None = None) -> TrainResult:
    """Run AMSGrad with a linearly decaying learning rate.

    Step ``t`` draws its batch from ``RngStream(seed, t + 1)``; the initial
    parameters come from stream 0.
    """
    if theta0 is None:
        theta0 = spec.sample_theta(RngStream(config.seed, 0).generator())
    theta = theta0
    flat = theta.flat()
    state = AmsgradState.zeros(flat.size)
    trajectory = []
    initial = None
    for step in range(config.iterations):
        lr = config.lr_at(step)
        loss, grad = loss_and_grad(theta, spec, config, RngStream(config.seed, step + 1))
        trajectory.append((step, loss, lr))
        if initial is None:
            initial = loss
        elif loss > config.divergence_factor * initial:
            raise TrainingDiverged(f"loss {loss:.3e} exceeded {config.divergence_factor:g} x initial", trajectory)
        state, flat = amsgrad_step(state, flat, grad.flat(), lr)
        theta = theta.with_flat(flat)
    return TrainResult(theta=theta, theta_init=theta0, trajectory=trajectory)
