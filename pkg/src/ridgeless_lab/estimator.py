"""Monte-Carlo estimation of E_noise curves.

One repetition draws a parameter ``theta``, a held-out sample of ``l`` inputs
for the second-moment estimate and one input matrix with the largest number
of rows needed. Every abscissa then reuses a prefix of that repetition: the
first ``n`` rows for curves over ``n``, the first ``p`` feature columns for
curves over ``p``. Points on one curve are therefore correlated; the reported
standard errors only measure variation across repetitions.

Repetition ``r`` always draws from ``RngStream(base_seed, r)``, so results do
not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .featmaps import FeatureMapSpec, ThetaParams, _gen
from .numkit import (
    RngStream,
    pinv_trace_batched,
    pinv_trace_regularized,
    whitened_trace_batched,
    whitened_trace_over,
)

THREADS_ENV = "RIDGELESS_LAB_THREADS"
CHUNK = 256
HEAVY_TAIL_SHARE = 0.5


@dataclass
class EstimatorConfig:
    """Settings for one Monte-Carlo run.

    ``n_max`` bounds the abscissa of curves over ``n``; curves over ``p``
    use ``p_max`` feature columns at a fixed ``n_fixed`` samples.
    ``exact_sigma`` swaps the estimated second-moment matrix for the analytic
    one (direct samplers only).
    """

    reps: int = 10_000
    test_points: int = 10_000
    lam: float = 1e-12
    n_max: int = 256
    p_max: int = 256
    n_fixed: int = 30
    base_seed: int = 0
    whitened: bool = False
    noise_variance: float = 1.0
    exact_sigma: bool = False
    threads: int = 0

    def __post_init__(self):
        if self.reps < 2:
            raise ValueError("need at least 2 repetitions for a standard error")
        if self.test_points < 1:
            raise ValueError("test_points must be >= 1")
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        if self.n_max < 1 or self.p_max < 1 or self.n_fixed < 1:
            raise ValueError("n_max, p_max and n_fixed must be >= 1")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("threads")
        return out


def resolve_threads(threads: int = 0) -> int:
    if threads == 0:
        threads = int(os.environ.get(THREADS_ENV, "0") or 0)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


@dataclass
class NoiseCurve:
    abscissa: str
    values: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    count: np.ndarray
    flags: list
    config: dict = field(default_factory=dict)
    spec: Optional[dict] = None
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def seed(self) -> int:
        return self.config.get("base_seed", 0)

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["abscissa", "value", "mean", "stderr", "count", "flag"])
        for i, v in enumerate(self.values):
            writer.writerow([
                self.abscissa, int(v), format_float(self.mean[i]),
                format_float(self.stderr[i]), int(self.count[i]), self.flags[i],
            ])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "abscissa": self.abscissa,
            "spec": self.spec,
            "config": self.config,
            "seed": self.seed,
            "notes": "points share theta and inputs within a repetition (prefix reuse); "
                     "stderr = sample std / sqrt(count) over repetitions",
        }

    def write(self, path) -> None:
        path = os.fspath(path)
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())
        with open(os.path.splitext(path)[0] + ".json", "w", newline="") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def format_float(x: float) -> str:
    """Locale-independent shortest round-trip text; infinities as ``inf``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


# ---------------------------------------------------------------------------


def second_moment_estimate(spec: FeatureMapSpec, theta: Optional[ThetaParams], l: int, rng) -> np.ndarray:
    """``(1/l) Zt^T Zt`` for ``l`` fresh input rows mapped through ``theta``."""
    if l < 1:
        raise ValueError("l must be >= 1")
    gen = _gen(rng)
    zt = spec.apply(theta, spec.sample_inputs(l, gen))
    return (zt.T @ zt) / l


def _sigma_for(spec, theta, config: EstimatorConfig, gen) -> np.ndarray:
    if config.exact_sigma:
        sigma = spec.exact_second_moment()
        if sigma is None:
            raise ValueError(f"no analytic second moment for variant {spec.variant!r}")
        return sigma
    return second_moment_estimate(spec, theta, config.test_points, gen)


def draw_repetition(spec: FeatureMapSpec, n_rows: int, config: EstimatorConfig, rng):
    """One repetition: returns ``(Z, Sigma)`` with ``Z`` of shape ``(n_rows, p)``.

    Draw order is theta, the held-out inputs, then ``X``; drawing ``X`` last
    makes a shorter ``X`` an exact prefix of a longer one from the same stream.
    """
    gen = _gen(rng)
    theta = spec.sample_theta(gen)
    sigma = _sigma_for(spec, theta, config, gen)
    z = spec.apply(theta, spec.sample_inputs(n_rows, gen))
    return z, sigma


def single_trace_sample(spec: FeatureMapSpec, n: int, config: EstimatorConfig, rng) -> float:
    """One Monte-Carlo sample of ``tr((Z^+)^T Sigma Z^+)`` with ``n`` rows."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z, sigma = draw_repetition(spec, n, config, rng)
    if config.whitened and n <= z.shape[1]:
        return whitened_trace_over(z, sigma, config.lam)
    return pinv_trace_regularized(z, sigma, config.lam)


def _traces(z: np.ndarray, sigma: np.ndarray, config: EstimatorConfig) -> np.ndarray:
    n, p = z.shape[1], z.shape[2]
    if config.whitened and n <= p:
        return whitened_trace_batched(z, sigma, config.lam)
    return pinv_trace_batched(z, sigma, config.lam)


def _run_chunks(work, reps: int, threads: int) -> np.ndarray:
    starts = list(range(0, reps, CHUNK))
    threads = min(resolve_threads(threads), len(starts))
    if threads <= 1:
        parts = [work(s, min(s + CHUNK, reps)) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: work(s, min(s + CHUNK, reps)), starts))
    return np.concatenate(parts, axis=0)


def _summarize(abscissa, values, samples, config, spec) -> NoiseCurve:
    samples = samples * config.noise_variance
    m = samples.shape[0]
    mean = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(m)
    return NoiseCurve(
        abscissa=abscissa,
        values=np.asarray(values),
        mean=mean,
        stderr=stderr,
        count=np.full(len(values), m),
        flags=[heavy_tail_flag(samples[:, j]) for j in range(samples.shape[1])],
        config=config.to_json(),
        spec=_spec_json(spec),
        samples=samples,
    )


def _spec_json(spec):
    try:
        return spec.to_json()
    except ValueError:
        return {"variant": spec.variant, "custom_input_sampler": True}


def heavy_tail_flag(column: np.ndarray) -> str:
    """``"heavy_tail"`` if the top 1% of samples carry over half of the total."""
    total = column.sum()
    if not np.isfinite(total):
        return "nonfinite"
    if total <= 0:
        return ""
    k = max(1, math.ceil(0.01 * column.size))
    top = np.sort(column)[-k:].sum()
    return "heavy_tail" if top > HEAVY_TAIL_SHARE * total else ""


def estimate_curve_vs_n(spec: FeatureMapSpec, config: EstimatorConfig) -> NoiseCurve:
    """E_noise for ``n = 1 .. n_max`` with prefix reuse of one input matrix per repetition."""
    n_max = config.n_max

    def work(lo, hi):
        zs, sigmas = zip(*(
            draw_repetition(spec, n_max, config, RngStream(config.base_seed, r))
            for r in range(lo, hi)
        ))
        z, sigma = np.stack(zs), np.stack(sigmas)
        return np.stack([_traces(z[:, :n, :], sigma, config) for n in range(1, n_max + 1)], axis=1)

    samples = _run_chunks(work, config.reps, config.threads)
    return _summarize("n", np.arange(1, n_max + 1), samples, config, spec)


def estimate_curve_vs_p(spec: FeatureMapSpec, config: EstimatorConfig) -> NoiseCurve:
    """E_noise for ``p = 1 .. p_max`` using the first ``p`` features at fixed ``n_fixed``."""
    if spec.dim != config.p_max:
        raise ValueError(f"spec output dimension {spec.dim} must equal p_max={config.p_max}")
    n, p_max = config.n_fixed, config.p_max

    def work(lo, hi):
        zs, sigmas = zip(*(
            draw_repetition(spec, n, config, RngStream(config.base_seed, r))
            for r in range(lo, hi)
        ))
        z, sigma = np.stack(zs), np.stack(sigmas)
        return np.stack(
            [_traces(z[:, :, :p], sigma[:, :p, :p], config) for p in range(1, p_max + 1)], axis=1
        )

    samples = _run_chunks(work, config.reps, config.threads)
    return _summarize("p", np.arange(1, p_max + 1), samples, config, spec)
