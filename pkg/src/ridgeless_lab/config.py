"""Experiment configuration schema (JSON, ``"version": 1``).

A config is an object with these keys; unknown keys are rejected anywhere::

    version   1 (required)
    id        recipe id or free-form name
    scale     "paper" or "desk"
    seed      base seed
    curves    [{name, spec, abscissa: "n"|"p", estimator: {...}}]
    analytic  [{name, kind, p, n_max, sigma2}]   kind in lower_bound,
              sphere_exact, gaussian_exact, counterexample
    relative  [{name, numerator, denominator}]   names of curves above
    optimize  [{name, spec, optim: {...}, evaluate: {...}}]

``validate_config`` returns the config with every default filled in, so a
fully resolved config round-trips unchanged.
"""

from __future__ import annotations

import dataclasses

from .estimator import EstimatorConfig
from .featmaps import spec_from_json
from .optimizer import OptimConfig

VERSION = 1
ANALYTIC_KINDS = ("lower_bound", "sphere_exact", "gaussian_exact", "counterexample")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _check_keys(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected an object, got {type(obj).__name__}")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}.{key}", "missing required field")
    extra = set(obj) - set(required) - set(optional)
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown field")


def _typed(value, kind, path):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected a boolean")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, "expected an integer")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, "expected a number")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    raise TypeError(kind)


def _dataclass_section(cls, obj, path, skip=()):
    fields = {f.name: f for f in dataclasses.fields(cls) if f.name not in skip}
    _check_keys(obj, path, (), fields)
    kinds = {"int": int, "float": float, "bool": bool, "str": str}
    kwargs = {k: _typed(v, kinds[fields[k].type], f"{path}.{k}") for k, v in obj.items()}
    try:
        inst = cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc
    out = dataclasses.asdict(inst)
    for k in skip:
        out.pop(k, None)
    return inst, out


def estimator_config(obj: dict, path: str = "estimator") -> EstimatorConfig:
    return _dataclass_section(EstimatorConfig, obj, path, skip=("threads",))[0]


def optim_config(obj: dict, path: str = "optim") -> OptimConfig:
    return _dataclass_section(OptimConfig, obj, path)[0]


def _spec(obj, path):
    try:
        return spec_from_json(obj).to_json()
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(path, str(exc)) from exc


def validate_config(cfg) -> dict:
    """Check ``cfg`` against the schema; return it with defaults filled in."""
    _check_keys(cfg, "config", ("version",), ("id", "scale", "seed", "curves", "analytic", "relative", "optimize"))
    if cfg["version"] != VERSION:
        raise ConfigError("config.version", f"unsupported version {cfg['version']!r}, expected {VERSION}")
    out = {"version": VERSION}
    if "id" in cfg:
        out["id"] = _typed(cfg["id"], str, "config.id")
    if "scale" in cfg:
        if cfg["scale"] not in ("paper", "desk"):
            raise ConfigError("config.scale", "expected 'paper' or 'desk'")
        out["scale"] = cfg["scale"]
    if "seed" in cfg:
        out["seed"] = _typed(cfg["seed"], int, "config.seed")

    names = set()

    def _name(entry, path):
        name = _typed(entry["name"], str, f"{path}.name")
        if name in names:
            raise ConfigError(f"{path}.name", f"duplicate name {name!r}")
        names.add(name)
        return name

    curves = []
    for i, c in enumerate(cfg.get("curves", [])):
        path = f"config.curves[{i}]"
        _check_keys(c, path, ("name", "spec"), ("abscissa", "estimator"))
        abscissa = c.get("abscissa", "n")
        if abscissa not in ("n", "p"):
            raise ConfigError(f"{path}.abscissa", "expected 'n' or 'p'")
        _, est = _dataclass_section(EstimatorConfig, c.get("estimator", {}), f"{path}.estimator", skip=("threads",))
        curves.append({"name": _name(c, path), "spec": _spec(c["spec"], f"{path}.spec"),
                       "abscissa": abscissa, "estimator": est})
    analytic = []
    for i, a in enumerate(cfg.get("analytic", [])):
        path = f"config.analytic[{i}]"
        _check_keys(a, path, ("name", "kind", "p", "n_max"), ("sigma2",))
        if a["kind"] not in ANALYTIC_KINDS:
            raise ConfigError(f"{path}.kind", f"expected one of {ANALYTIC_KINDS}")
        entry = {"name": _name(a, path), "kind": a["kind"],
                 "p": _typed(a["p"], int, f"{path}.p"), "n_max": _typed(a["n_max"], int, f"{path}.n_max"),
                 "sigma2": _typed(a.get("sigma2", 1.0), float, f"{path}.sigma2")}
        if entry["p"] < 1 or entry["n_max"] < 1:
            raise ConfigError(path, "p and n_max must be >= 1")
        if entry["kind"] == "counterexample" and entry["p"] < 2:
            raise ConfigError(f"{path}.p", "counterexample needs p >= 2")
        analytic.append(entry)
    optimize = []
    for i, o in enumerate(cfg.get("optimize", [])):
        path = f"config.optimize[{i}]"
        _check_keys(o, path, ("name", "spec", "optim"), ("evaluate",))
        spec = _spec(o["spec"], f"{path}.spec")
        if spec["variant"] != "ntk_param_nn":
            raise ConfigError(f"{path}.spec.variant", "optimization needs variant 'ntk_param_nn'")
        _, optim = _dataclass_section(OptimConfig, o["optim"], f"{path}.optim")
        _, evaluate = _dataclass_section(EstimatorConfig, o.get("evaluate", {}), f"{path}.evaluate", skip=("threads",))
        optimize.append({"name": _name(o, path), "spec": spec, "optim": optim, "evaluate": evaluate})
    relative = []
    for i, r in enumerate(cfg.get("relative", [])):
        path = f"config.relative[{i}]"
        _check_keys(r, path, ("name", "numerator", "denominator"))
        for key in ("numerator", "denominator"):
            if r[key] not in names:
                raise ConfigError(f"{path}.{key}", f"no curve named {r[key]!r}")
        relative.append({"name": _name(r, path), "numerator": r["numerator"], "denominator": r["denominator"]})

    for key, val in (("curves", curves), ("analytic", analytic), ("optimize", optimize), ("relative", relative)):
        if key in cfg:
            out[key] = val
    return out
