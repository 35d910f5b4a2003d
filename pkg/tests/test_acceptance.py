"""Acceptance criteria, one test each.

Every test records a single ``PASS``/``FAIL`` line; the lines are printed as
they happen (visible with ``-s``) and repeated in the pytest terminal summary.
Run directly with ``python3 tests/test_acceptance.py`` for the lines alone.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from ridgeless_lab.activations import Activation
from ridgeless_lab.closedform import counterexample_expectation, gaussian_exact, lower_bound, sphere_exact
from ridgeless_lab.estimator import EstimatorConfig, estimate_curve_vs_n
from ridgeless_lab.featmaps import (
    NTK, RFF, FixedTheta, GaussianDirect, IdentityMap, NTKParamNN, Polynomial, RandomNN, SphereDirect,
    ThetaParams, poly_feature_map,
)
from ridgeless_lab.numkit import RngStream, inverse_sq_distance_sum, pinv_trace_regularized, whitened_trace_over
from ridgeless_lab.optimizer import OptimConfig, loss_eval, loss_grad, train
from ridgeless_lab.rankcheck import frk_check

RESULTS = []


def record(num, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] AC{num:<2} {title}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    assert ok, line


def _oracle_curve(spec, formula, num, title):
    t0 = time.perf_counter()
    curve = estimate_curve_vs_n(spec, EstimatorConfig(reps=10_000, n_max=20, exact_sigma=True))
    parts, ok = [], True
    for n in (5, 10, 20):
        want = formula(n)
        mean, se = curve.mean[n - 1], curve.stderr[n - 1]
        good = abs(mean - want) <= 3 * se and abs(mean - want) <= 0.02 * want
        ok &= good
        parts.append(f"n={n} {mean:.5f} vs {want:.5f} ({(mean - want) / se:+.2f} se)")
    return curve, ok, "; ".join(parts) + f" [{time.perf_counter() - t0:.1f}s]"


def test_ac01_gaussian_oracle():
    _, ok, detail = _oracle_curve(GaussianDirect(30), lambda n: n / (29 - n), 1, "")
    record(1, "Gaussian oracle", ok, detail)


def test_ac02_sphere_oracle():
    curve, ok, detail = _oracle_curve(SphereDirect(30), lambda n: n / (29 - n) * 28 / 30, 2, "")
    dev = float(np.abs(curve.samples[:, 0] - 1 / 30).max())
    ok &= dev <= 1e-12
    record(2, "Sphere oracle", ok, f"{detail}; n=1 max |sample - 1/30| = {dev:.1e}")


@pytest.mark.slow
def test_ac03_bound_dominance():
    t0 = time.perf_counter()
    spec = RandomNN(layer_sizes=(10, 32, 32, 30), activation=Activation("tanh"))
    curve = estimate_curve_vs_n(spec, EstimatorConfig(reps=1000, n_max=100))
    bad, worst = [], math.inf
    for n in range(1, 101):
        if 26 <= n <= 34:
            continue
        margin = (curve.mean[n - 1] + 3 * curve.stderr[n - 1]) - lower_bound(n, 30, 1.0).value
        worst = min(worst, margin)
        if margin < 0:
            bad.append(n)
    record(3, "Bound dominance (tanh NN)", not bad,
           f"violations at {bad or 'none'}; min(mean + 3se - bound) = {worst:.4f} [{time.perf_counter() - t0:.1f}s]")


def test_ac04_counterexample():
    below = all(counterexample_expectation(n, 30) < lower_bound(n, 30).value for n in range(10, 31))
    parts, ok = [], below
    for n in (10, 30, 100):
        m1 = np.random.default_rng(4242 + n).binomial(n, 1 / 30, size=1_000_000)
        inv = np.where(m1 > 0, 1.0 / np.maximum(m1, 1), 0.0)
        se = inv.std(ddof=1) / math.sqrt(inv.size)
        exact = counterexample_expectation(n, 30)
        ok &= abs(exact - inv.mean()) <= 3 * se
        parts.append(f"n={n} exact {exact:.5f} mc {inv.mean():.5f} ({(inv.mean() - exact) / se:+.2f} se)")
    record(4, "Counterexample", ok, f"below bound on [10,30]: {below}; " + "; ".join(parts))


def test_ac05_frk_protocol():
    t0 = time.perf_counter()
    ntk = frk_check(NTK(layer_sizes=(4, 6, 1), activation=Activation("tanh")), 90, samples=1000)
    basis = np.array([[1.0, 2.0, 0.0, -1.0, 0.5], [0.0, 1.0, 1.0, 3.0, -2.0]])
    confined = IdentityMap(d=5, input_sampler=lambda n, gen: gen.standard_normal((n, 2)) @ basis)
    refs = [frk_check(confined, 10, samples=1000, rng=RngStream(s)) for s in (0, 1)]
    ok = (ntk.verdict == "FrkSupported" and ntk.max_icond > 1e-3
          and all(r.verdict == "FrkRefuted" for r in refs))
    record(5, "FRK protocol", ok,
           f"NTK-tanh n=90: {ntk.verdict} max_icond={ntk.max_icond:.3e}; confined identity: "
           f"{refs[0].verdict}/{refs[1].verdict} max_icond={max(r.max_icond for r in refs):.1e} "
           f"[{time.perf_counter() - t0:.1f}s]")


def test_ac06_distance_identity():
    rng = np.random.default_rng(6)
    worst, done = 0.0, 0
    while done < 50:
        p = int(rng.integers(2, 21))
        n = int(rng.integers(2, p + 1))
        w = rng.standard_normal((n, p))
        if np.linalg.matrix_rank(w) < n:
            continue
        want = np.trace(np.linalg.inv(w @ w.T))
        worst = max(worst, abs(inverse_sq_distance_sum(w) - want) / want)
        done += 1
    record(6, "Distance identity", worst <= 1e-8, f"50 instances, max rel err {worst:.2e}")


def test_ac07_whitening():
    rng = np.random.default_rng(7)
    worst_gap, worst_eq, count = -math.inf, 0.0, 0
    for i in range(60):
        p = int(rng.integers(2, 16))
        n = int(rng.integers(1, p + 1))
        if i % 2 == 0:
            # GaussianDirect with its exact Sigma = I
            sigma = GaussianDirect(p).exact_second_moment()
            z = GaussianDirect(p).sample_inputs(n, rng)
        else:
            # correlated Gaussian rows N(0, A A^T) with the exact Sigma
            a = rng.standard_normal((p, p)) + np.eye(p)
            sigma = a @ a.T
            z = rng.standard_normal((n, p)) @ a.T
        w, u = whitened_trace_over(z, sigma, 0.0), pinv_trace_regularized(z, sigma, 0.0)
        if n < p:
            worst_gap = max(worst_gap, w - u)
        else:
            worst_eq = max(worst_eq, abs(w - u) / u)
        count += 1
    ok = worst_gap <= 1e-8 and worst_eq <= 1e-6
    record(7, "Whitening relations", ok,
           f"{count} instances; n<p max(whitened - unwhitened) = {worst_gap:.2e}; n=p max rel diff = {worst_eq:.2e}")


def test_ac08_kernel_identities():
    rng = np.random.default_rng(8)
    x, y = rng.standard_normal((2, 100, 3))
    fx, fy = poly_feature_map(x, 4, 1.0), poly_feature_map(y, 4, 1.0)
    # error measured against |phi(x)||phi(y)|, the scale of the summed terms
    poly_err = np.max(np.abs(np.sum(fx * fy, axis=1) - (np.sum(x * y, axis=1) + 1) ** 4)
                      / (np.linalg.norm(fx, axis=1) * np.linalg.norm(fy, axis=1)))
    errs = {}
    xs, ys = rng.standard_normal((2, 100, 10))
    for kind, q in (("sincos", 15), ("cosbias", 30)):
        spec = RFF(d=10, q=q, kind=kind)
        theta = spec.sample_theta(RngStream(8).generator())
        w = theta.weights[0]
        want = np.cos((xs - ys) @ w.T).sum(axis=1)
        if kind == "cosbias":
            want = want + np.cos((xs + ys) @ w.T + 2 * theta.biases[0]).sum(axis=1)
        zx, zy = spec.apply(theta, xs), spec.apply(theta, ys)
        scale = np.linalg.norm(zx, axis=1) * np.linalg.norm(zy, axis=1)
        errs[kind] = np.max(np.abs(np.sum(zx * zy, axis=1) - want) / scale)
        if kind == "sincos":
            norm_err = np.max(np.abs(np.sum(zx * zx, axis=1) - q)) / q
    ok = poly_err <= 1e-10 and max(errs.values()) <= 1e-10 and norm_err <= 1e-14
    record(8, "Kernel identities", ok,
           f"poly(3,4,1) {poly_err:.1e}; rff sincos {errs['sincos']:.1e}; rff cosbias {errs['cosbias']:.1e}; "
           f"sincos |phi|^2 - q rel {norm_err:.1e}")


def _fd_rel_error(spec, theta, cfg, rng, h=1e-3):
    # fourth-order central stencil: at h=1e-5 the plain two-point quotient is
    # dominated by rounding in ill-conditioned Gram matrices
    flat = theta.flat()
    grad = loss_grad(theta, spec, cfg, rng).flat()

    def f(v):
        return loss_eval(theta.with_flat(v), spec, cfg, rng)

    fd = np.empty_like(flat)
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = h
        fd[i] = (8 * (f(flat + e) - f(flat - e)) - (f(flat + 2 * e) - f(flat - 2 * e))) / (12 * h)
    floor = 1e-6 * np.abs(fd).max()
    return float(np.max(np.abs(grad - fd) / np.maximum(np.abs(fd), floor)))


def test_ac09_optimizer_gate():
    t0 = time.perf_counter()
    acts = ("tanh", "sigmoid", "softplus", "gelu", "silu")
    worst = 0.0
    for i in range(20):
        gen = np.random.default_rng(900 + i)
        spec = NTKParamNN(layer_sizes=(2, 3, 3, 2), activation=Activation(acts[i % len(acts)]))
        theta = spec.sample_theta(gen)
        theta = ThetaParams(theta.weights, tuple(0.3 * gen.standard_normal(b.shape) for b in theta.biases))
        cfg = OptimConfig(batch=4, sigma_mc=7, target_n=(1, 3, 5)[i % 3])
        worst = max(worst, _fd_rel_error(spec, theta, cfg, RngStream(i, 1)))
    spec = NTKParamNN(layer_sizes=(10, 32, 32, 10), activation=Activation("tanh"))
    res = train(spec, OptimConfig.desk(target_n=6, seed=0))
    losses = [l for _, l, _ in res.trajectory]
    first, last = float(np.median(losses[:20])), float(np.median(losses[-20:]))
    ok = worst <= 1e-4 and last < first
    record(9, "Optimizer gradient gate", ok,
           f"20 instances max rel err {worst:.1e}; desk train median loss {first:.4f} -> {last:.4f} "
           f"[{time.perf_counter() - t0:.1f}s]")


def test_ac10_asymptotic_sharpness():
    gaps = [(gaussian_exact(n, 2 * n).value - lower_bound(n, 2 * n).value) / lower_bound(n, 2 * n).value
            for n in (10, 20, 40, 80)]
    ok = all(a > b for a, b in zip(gaps, gaps[1:]))
    record(10, "Asymptotic sharpness", ok, "gaps at p=2n, n=10,20,40,80: " + ", ".join(f"{g:.4f}" for g in gaps))


@pytest.mark.slow
def test_ac11_reproducibility(tmp_path):
    t0 = time.perf_counter()
    outs = []
    for threads in (1, 3):
        out = tmp_path / f"t{threads}"
        subprocess.run([sys.executable, "-m", "ridgeless_lab", "reproduce", "figC1", "--scale", "desk",
                        "--seed", "0", "--threads", str(threads), "--out", str(out), "--quiet"], check=True)
        outs.append(out / "figC1")
    names = sorted(f for f in os.listdir(outs[0]) if f.endswith(".csv"))
    same = [(outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in names]
    ok = bool(names) and all(same) and sorted(f for f in os.listdir(outs[1]) if f.endswith(".csv")) == names
    record(11, "Reproducibility", ok,
           f"figC1 desk, threads 1 vs 3: {sum(same)}/{len(names)} CSVs byte-identical [{time.perf_counter() - t0:.1f}s]")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
