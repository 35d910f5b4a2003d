"""Monte-Carlo evidence for full-rank feature matrices and an invertible Sigma.

For analytic feature maps, either almost every feature matrix with ``n >= p``
rows has full rank, or none does. A rank-deficient map can only produce
inverse condition numbers ``s_min / s_max`` at rounding level, so one sample
clearly above that level is a witness for full rank. The check below draws
many matrices and reports the largest inverse condition number it saw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .featmaps import FeatureMapSpec
from .estimator import _spec_json, second_moment_estimate
from .numkit import NumericalFailure, RngStream

DEFAULT_THRESHOLD = 1e-3
MACHINE_BAND = 1e-13
CHUNK = 256
HIST_EDGES = tuple(float(e) for e in range(-17, 1))  # log10 bins


@dataclass
class RankReport:
    spec: dict
    n: int
    p: int
    samples: int
    max_icond: float
    min_icond: float
    fraction_above_threshold: float
    threshold: float
    verdict: str  # "FrkSupported", "FrkRefuted" or "Inconclusive"
    histogram: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "spec": self.spec, "n": self.n, "p": self.p, "samples": self.samples,
            "max_icond": self.max_icond, "min_icond": self.min_icond,
            "fraction_above_threshold": self.fraction_above_threshold,
            "threshold": self.threshold, "verdict": self.verdict,
            "histogram": self.histogram,
        }

    def summary(self) -> str:
        return (f"{self.verdict}: n={self.n} p={self.p} samples={self.samples} "
                f"max_icond={self.max_icond:.3e} min_icond={self.min_icond:.3e}")


def _icond_batch(z: np.ndarray) -> np.ndarray:
    try:
        s = np.linalg.svd(z, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("SVD did not converge during rank check") from exc
    top = s[:, 0]
    return np.divide(s[:, -1], top, out=np.zeros_like(top), where=top > 0)


def _histogram(icond: np.ndarray) -> dict:
    logs = np.log10(np.maximum(icond, 1e-300))
    edges = np.array((-np.inf,) + HIST_EDGES[1:-1] + (np.inf,))
    counts, _ = np.histogram(logs, bins=edges)
    labels = [f"<1e{int(HIST_EDGES[1])}"] + [
        f"[1e{int(a)},1e{int(a) + 1})" for a in HIST_EDGES[1:-1]
    ]
    labels[-1] = f">=1e{int(HIST_EDGES[-2])}"
    return dict(zip(labels, counts.tolist()))


def frk_check(
    spec: FeatureMapSpec,
    n: int,
    samples: int = 10_000,
    threshold: float = DEFAULT_THRESHOLD,
    rng: RngStream = RngStream(0),
    machine_band: float = MACHINE_BAND,
) -> RankReport:
    """Sample ``samples`` independent ``(theta, X)`` and summarize ``icond(phi_theta(X))``.

    Verdict is ``FrkSupported`` if the largest inverse condition number
    exceeds ``threshold``, ``FrkRefuted`` if it never leaves the rounding band
    ``machine_band``, and ``Inconclusive`` otherwise. Sample ``s`` uses the
    sub-stream ``rng.generator(s)``.
    """
    if n < 1 or samples < 1:
        raise ValueError("n and samples must be >= 1")
    out = []
    for lo in range(0, samples, CHUNK):
        zs = []
        for s in range(lo, min(lo + CHUNK, samples)):
            gen = rng.generator(s)
            theta = spec.sample_theta(gen)
            zs.append(spec.apply(theta, spec.sample_inputs(n, gen)))
        out.append(_icond_batch(np.stack(zs)))
    icond = np.concatenate(out)
    hi, lo_ = float(icond.max()), float(icond.min())
    if hi > threshold:
        verdict = "FrkSupported"
    elif hi <= machine_band:
        verdict = "FrkRefuted"
    else:
        verdict = "Inconclusive"
    return RankReport(
        spec=_spec_json(spec), n=n, p=spec.dim, samples=samples,
        max_icond=hi, min_icond=lo_,
        fraction_above_threshold=float(np.mean(icond > threshold)),
        threshold=threshold, verdict=verdict, histogram=_histogram(icond),
    )


def cov_check(spec: FeatureMapSpec, l: int, rng: RngStream = RngStream(0)) -> float:
    """Smallest eigenvalue of the ``l``-sample second-moment estimate (clipped at 0)."""
    if l < spec.dim:
        raise ValueError(f"need l >= p = {spec.dim}, got {l}")
    gen = rng.generator()
    theta = spec.sample_theta(gen)
    sigma = second_moment_estimate(spec, theta, l, gen)
    return max(0.0, float(np.linalg.eigvalsh(sigma)[0]))
