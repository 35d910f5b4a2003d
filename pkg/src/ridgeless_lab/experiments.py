"""Running experiment configs and the built-in figure recipes."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import time

import numpy as np

from . import __version__
from .activations import Activation
from .closedform import counterexample_expectation, gaussian_exact, lower_bound, sphere_exact
from .config import estimator_config, optim_config, validate_config
from .estimator import (
    EstimatorConfig,
    NoiseCurve,
    estimate_curve_vs_n,
    estimate_curve_vs_p,
)
from .featmaps import (
    NTK, RFF, FixedTheta, GaussianDirect, NTKParamNN, OneHotHistogram, Polynomial,
    RandomNN, SphereDirect, spec_from_json,
)
from .optimizer import OptimConfig, train


class UnknownRecipe(KeyError):
    pass


# ---------------------------------------------------------------------------
# curve helpers


def analytic_curve(kind: str, p: int, n_max: int, sigma2: float = 1.0) -> NoiseCurve:
    """Closed-form values for ``n = 1 .. n_max`` as a curve with zero stderr."""
    values = np.arange(1, n_max + 1)
    mean, flags = [], []
    for n in values:
        n = int(n)
        flag = ""
        if kind == "lower_bound":
            v = lower_bound(n, p, sigma2).value
        elif kind == "gaussian_exact":
            v = sigma2 * gaussian_exact(n, p).value
        elif kind == "counterexample":
            v = sigma2 * counterexample_expectation(n, p)
        elif kind == "sphere_exact":
            try:
                v = sigma2 * sphere_exact(n, p).value
            except ValueError:
                v, flag = math.nan, "undefined"
        else:
            raise ValueError(f"unknown analytic kind {kind!r}")
        mean.append(v)
        flags.append(flag)
    return NoiseCurve(
        abscissa="n", values=values, mean=np.array(mean), stderr=np.zeros(n_max),
        count=np.zeros(n_max, dtype=int), flags=flags,
        config={"analytic": kind, "p": p, "sigma2": sigma2},
    )


def relative_curve(numerator: NoiseCurve, denominator: NoiseCurve) -> NoiseCurve:
    """Ratio of means with first-order propagated standard error.

    ``stderr = |r| sqrt((s_num / m_num)^2 + (s_den / m_den)^2)``. Rows with a
    zero or non-finite denominator, or an undefined ratio, are flagged.
    """
    if numerator.abscissa != denominator.abscissa or not np.array_equal(numerator.values, denominator.values):
        raise ValueError("numerator and denominator must share the same abscissa values")
    mean, stderr, flags = [], [], []
    for i in range(len(numerator.values)):
        a, sa = float(numerator.mean[i]), float(numerator.stderr[i])
        b, sb = float(denominator.mean[i]), float(denominator.stderr[i])
        flag = numerator.flags[i] or denominator.flags[i]
        if math.isnan(a) or math.isnan(b):
            r, s, flag = math.nan, math.nan, flag or "undefined"
        elif math.isinf(a) and math.isinf(b):
            r, s, flag = math.nan, math.nan, "inf_over_inf"
        elif b == 0.0:
            r, s, flag = math.nan, math.nan, "zero_denominator"
        elif math.isinf(b):
            r, s, flag = 0.0, 0.0, "inf_denominator"
        elif math.isinf(a):
            r, s, flag = math.inf, math.nan, flag or "inf_numerator"
        else:
            r = a / b
            rel = math.hypot(sa / a, sb / b) if a != 0.0 else sb / abs(b)
            s = abs(r) * rel if a != 0.0 else 0.0
        mean.append(r)
        stderr.append(s)
        flags.append(flag)
    count = np.minimum(numerator.count, denominator.count)
    return NoiseCurve(
        abscissa=numerator.abscissa, values=numerator.values.copy(), mean=np.array(mean),
        stderr=np.array(stderr), count=count, flags=flags,
        config={"numerator": numerator.config, "denominator": denominator.config},
    )


def relative_csv(numerator: NoiseCurve, denominator: NoiseCurve) -> str:
    return relative_curve(numerator, denominator).to_csv()


# ---------------------------------------------------------------------------
# running a config


def config_hash(cfg: dict) -> str:
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _write_json(path, obj):
    with open(path, "w", newline="") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_curve(spec, abscissa, est):
    if abscissa == "p":
        return estimate_curve_vs_p(spec, est)
    return estimate_curve_vs_n(spec, est)


def run_config(cfg: dict, out_dir, threads: int = 0, log=print) -> dict:
    """Execute every entry of a config, writing CSV/JSON into ``out_dir``.

    Returns the run manifest (also written as ``manifest.json``).
    """
    cfg = validate_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    curves: dict[str, NoiseCurve] = {}
    outputs = []

    def emit(name, curve):
        path = os.path.join(out_dir, f"{name}.csv")
        curve.write(path)
        outputs.append(f"{name}.csv")
        outputs.append(f"{name}.json")
        curves[name] = curve

    for entry in cfg.get("analytic", []):
        emit(entry["name"], analytic_curve(entry["kind"], entry["p"], entry["n_max"], entry["sigma2"]))
    for entry in cfg.get("curves", []):
        log(f"estimating {entry['name']}")
        est = dataclasses.replace(estimator_config(entry["estimator"]), threads=threads)
        emit(entry["name"], _run_curve(spec_from_json(entry["spec"]), entry["abscissa"], est))
    for entry in cfg.get("optimize", []):
        log(f"training {entry['name']}")
        spec = spec_from_json(entry["spec"])
        result = train(spec, optim_config(entry["optim"]))
        theta_path = os.path.join(out_dir, f"{entry['name']}_theta.json")
        _write_json(theta_path, {"spec": entry["spec"], "theta": result.theta.to_json()})
        with open(os.path.join(out_dir, f"{entry['name']}_trajectory.csv"), "w", newline="") as fh:
            fh.write(result.trajectory_csv())
        outputs += [f"{entry['name']}_theta.json", f"{entry['name']}_trajectory.csv"]
        est = dataclasses.replace(estimator_config(entry["evaluate"]), threads=threads)
        emit(entry["name"], estimate_curve_vs_n(FixedTheta(base=spec, theta=result.theta), est))
    for entry in cfg.get("relative", []):
        emit(entry["name"], relative_curve(curves[entry["numerator"]], curves[entry["denominator"]]))

    checksums = {}
    for name in outputs:
        with open(os.path.join(out_dir, name), "rb") as fh:
            checksums[name] = hashlib.sha256(fh.read()).hexdigest()
    manifest = {
        "artifact_version": __version__,
        "config_hash": config_hash(cfg),
        "base_seed": cfg.get("seed", 0),
        "wall_time_s": round(time.perf_counter() - start, 3),
        "outputs": checksums,
        "config": cfg,
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


# ---------------------------------------------------------------------------
# recipes

SCALES = ("paper", "desk")


def _est(scale, seed, *, paper_reps, desk_reps, n_max=(256, 60), **kw):
    desk = scale == "desk"
    cfg = EstimatorConfig(reps=desk_reps if desk else paper_reps, n_max=n_max[desk], base_seed=seed, **kw)
    return cfg.to_json()


NN_ACTIVATIONS = ("sigmoid", "tanh", "softplus", "gelu", "silu", "relu")
NTK_ACTIVATIONS = ("sigmoid", "tanh", "softplus", "gelu", "relu")


def _nn_curves(scale, seed, whitened):
    width = 256 if scale == "paper" else 32
    curves = []
    for i, act in enumerate(NN_ACTIVATIONS):
        spec = RandomNN(layer_sizes=(10, width, width, 30), activation=Activation(act))
        heavy = act == "relu"
        curves.append({
            "name": f"nn_{act}", "spec": spec.to_json(), "abscissa": "n",
            "estimator": _est(scale, seed + i, paper_reps=100_000 if heavy else 10_000,
                              desk_reps=200, whitened=whitened),
        })
    return curves


def _sphere_curve(scale, seed, p, name="sphere", n_max=(256, 60)):
    return {"name": name, "spec": SphereDirect(p).to_json(), "abscissa": "n",
            "estimator": _est(scale, seed, paper_reps=100_000, desk_reps=2_000,
                              n_max=n_max, exact_sigma=True)}


def _recipe_figC1(scale, seed, whitened=False):
    curves = _nn_curves(scale, seed, whitened)
    curves.append(_sphere_curve(scale, seed + 100, 30))
    n_max = 256 if scale == "paper" else 60
    return {"curves": curves, "analytic": [{"name": "lower_bound", "kind": "lower_bound", "p": 30, "n_max": n_max, "sigma2": 1.0}]}


def _recipe_figC2(scale, seed):
    return _recipe_figC1(scale, seed, whitened=True)


def _recipe_figC3(scale, seed):
    width, p_max = (256, 256) if scale == "paper" else (32, 64)
    curves = []
    for i, act in enumerate(NN_ACTIVATIONS):
        spec = RandomNN(layer_sizes=(10, width, width, p_max), activation=Activation(act))
        est = _est(scale, seed + i, paper_reps=100_000 if act == "relu" else 10_000, desk_reps=200)
        est["p_max"] = p_max
        est["n_fixed"] = 30
        curves.append({"name": f"nn_{act}", "spec": spec.to_json(), "abscissa": "p", "estimator": est})
    return {"curves": curves}


def _recipe_figC4(scale, seed):
    curves = []
    for i, act in enumerate(NTK_ACTIVATIONS):
        spec = NTK(layer_sizes=(4, 6, 1), activation=Activation(act))
        curves.append({"name": f"ntk_{act}", "spec": spec.to_json(), "abscissa": "n",
                       "estimator": _est(scale, seed + i, paper_reps=100_000, desk_reps=200)})
    curves.append(_sphere_curve(scale, seed + 100, 30))
    return {"curves": curves}


def _rff_curves(scale, seed, weight_scale, paper_reps):
    specs = [("rff_sincos", RFF(d=10, q=15, kind="sincos", weight_scale=weight_scale)),
             ("rff_cosbias", RFF(d=10, q=30, kind="cosbias", weight_scale=weight_scale))]
    return [{"name": name, "spec": spec.to_json(), "abscissa": "n",
             "estimator": _est(scale, seed + i, paper_reps=paper_reps, desk_reps=200)}
            for i, (name, spec) in enumerate(specs)]


def _recipe_figC5(scale, seed):
    return {"curves": _rff_curves(scale, seed, math.sqrt(1.0 / 30.0), 100_000)}


def _recipe_figC6(scale, seed):
    curves = _rff_curves(scale, seed, 1.0, 10_000)
    curves.append(_sphere_curve(scale, seed + 100, 30))
    relative = [{"name": f"{c['name']}_over_sphere", "numerator": c["name"], "denominator": "sphere"}
                for c in curves[:2]]
    return {"curves": curves, "relative": relative}


def _recipe_figC7(scale, seed):
    spec = Polynomial(d=3, m=4, c=1.0)
    n_max = 256 if scale == "paper" else 70
    return {
        "curves": [{"name": "poly", "spec": spec.to_json(), "abscissa": "n",
                    "estimator": _est(scale, seed, paper_reps=10_000, desk_reps=200, n_max=(256, 70))}],
        "analytic": [{"name": "lower_bound", "kind": "lower_bound", "p": 35, "n_max": n_max, "sigma2": 1.0}],
    }


def _recipe_figD1(scale, seed):
    n_max = 256 if scale == "paper" else 100
    return {
        "analytic": [
            {"name": "counterexample", "kind": "counterexample", "p": 30, "n_max": n_max, "sigma2": 1.0},
            {"name": "lower_bound", "kind": "lower_bound", "p": 30, "n_max": n_max, "sigma2": 1.0},
        ],
        "curves": [{"name": "counterexample_mc", "spec": OneHotHistogram(30).to_json(), "abscissa": "n",
                    "estimator": _est(scale, seed, paper_reps=1_000_000, desk_reps=2_000,
                                      n_max=(256, 100), exact_sigma=True)}],
    }


def _recipe_fig1(scale, seed):
    paper = scale == "paper"
    width = 256 if paper else 32
    n_max = (256, 90)
    spec = NTKParamNN(layer_sizes=(30, width, width, 30), activation=Activation("tanh"))
    optimize = []
    for i, target in enumerate((15, 60)):
        make = OptimConfig.paper if paper else OptimConfig.desk
        optim = dataclasses.asdict(make(target_n=target, seed=seed + 10 + i))
        optimize.append({"name": f"optimized_n{target}", "spec": spec.to_json(), "optim": optim,
                         "evaluate": _est(scale, seed + 20 + i, paper_reps=10_000, desk_reps=200, n_max=n_max)})
    nm = 256 if paper else 90
    analytic = [
        {"name": "lower_bound", "kind": "lower_bound", "p": 30, "n_max": nm, "sigma2": 1.0},
        {"name": "gaussian", "kind": "gaussian_exact", "p": 30, "n_max": nm, "sigma2": 1.0},
    ]
    curves = [_sphere_curve(scale, seed, 30, n_max=n_max)]
    relative = [{"name": f"{name}_over_sphere", "numerator": name, "denominator": "sphere"}
                for name in ("lower_bound", "gaussian", "optimized_n15", "optimized_n60")]
    return {"analytic": analytic, "curves": curves, "optimize": optimize, "relative": relative}


RECIPES = {
    "fig1": _recipe_fig1,
    "figC1": _recipe_figC1,
    "figC2": _recipe_figC2,
    "figC3": _recipe_figC3,
    "figC4": _recipe_figC4,
    "figC5": _recipe_figC5,
    "figC6": _recipe_figC6,
    "figC7": _recipe_figC7,
    "figD1": _recipe_figD1,
}


def recipe_config(recipe_id: str, scale: str = "desk", seed: int = 0) -> dict:
    """Fully resolved config for a figure recipe."""
    if recipe_id not in RECIPES:
        raise UnknownRecipe(recipe_id)
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}")
    body = RECIPES[recipe_id](scale, seed)
    cfg = {"version": 1, "id": recipe_id, "scale": scale, "seed": seed}
    for key in ("curves", "analytic", "relative", "optimize"):
        if key in body:
            cfg[key] = body[key]
    return validate_config(cfg)
