"""Feature maps, their random parameters, and input distributions.

Each feature-map spec is a frozen dataclass with a ``variant`` tag. They all
share one small protocol used by the estimator and rank checks::

    theta = spec.sample_theta(gen)        # None for deterministic maps
    x = spec.sample_inputs(n, gen)        # rows drawn from P_X
    z = spec.apply(theta, x)              # rows phi_theta(x_i)

The direct samplers (``SphereDirect``, ``GaussianDirect``, ``OneHotHistogram``)
draw feature vectors z themselves: their "inputs" already are features and
``apply`` is the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Optional

import numpy as np

from .activations import Activation, activation_variance
from .numkit import RngStream

InputSampler = Callable[[int, np.random.Generator], np.ndarray]


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class ThetaParams:
    """Sampled feature-map parameters.

    ``weights[l]`` has shape ``(d_{l+1}, d_l)``. For random Fourier features
    ``weights == (W,)`` and ``biases == (b,)`` holds the phases.
    """

    weights: tuple
    biases: Optional[tuple] = None

    def to_json(self) -> dict:
        out = {"weights": [w.tolist() for w in self.weights]}
        if self.biases is not None:
            out["biases"] = [b.tolist() for b in self.biases]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ThetaParams":
        extra = set(obj) - {"weights", "biases"}
        if extra:
            raise ValueError(f"unknown theta fields: {sorted(extra)}")
        weights = tuple(np.array(w, dtype=np.float64, ndmin=2) for w in obj["weights"])
        biases = obj.get("biases")
        if biases is not None:
            biases = tuple(np.array(b, dtype=np.float64, ndmin=1) for b in biases)
        return cls(weights, biases)

    def flat(self) -> np.ndarray:
        parts = list(self.weights) + list(self.biases or ())
        return np.concatenate([np.ravel(a) for a in parts])

    def with_flat(self, vec: np.ndarray) -> "ThetaParams":
        vec = np.asarray(vec, dtype=np.float64)
        out, i = [], 0
        for a in list(self.weights) + list(self.biases or ()):
            out.append(vec[i:i + a.size].reshape(a.shape).copy())
            i += a.size
        if i != vec.size:
            raise ValueError(f"flat vector has {vec.size} entries, expected {i}")
        nw = len(self.weights)
        return ThetaParams(tuple(out[:nw]), tuple(out[nw:]) if self.biases is not None else None)


# ---------------------------------------------------------------------------
# polynomial kernel features


def poly_dim(d: int, m: int) -> int:
    """Feature dimension ``C(m + d, m)`` of the inhomogeneous polynomial kernel."""
    if d < 1 or m < 1:
        raise ValueError(f"need d >= 1 and m >= 1, got d={d}, m={m}")
    p = math.comb(m + d, m)
    if p > 2**63 - 1:
        raise OverflowError(f"C({m + d}, {m}) does not fit in 64 bits")
    return p


def _multi_indices(parts: int, total: int):
    """All tuples of ``parts`` nonnegative ints summing to ``total``, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _multi_indices(parts - 1, total - first):
            yield (first,) + rest


def _poly_tables(d: int, m: int, c: float):
    idx = np.array(list(_multi_indices(d + 1, m)), dtype=np.int64)
    lgam = [math.lgamma(k + 1) for k in range(m + 1)]
    coef = np.array([
        math.exp(0.5 * (lgam[m] - sum(lgam[k] for k in row))) * c ** (row[-1] / 2.0)
        for row in idx.tolist()
    ])
    return idx[:, :d], coef


def poly_feature_map(x, m: int, c: float) -> np.ndarray:
    """Explicit features of ``k(x, x') = (x^T x' + c)^m``.

    Accepts one vector of length ``d`` or an ``(n, d)`` matrix of rows.
    """
    if not c > 0:
        raise ValueError("offset c must be positive")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    exps, coef = _poly_tables(xs.shape[1], m, c)
    z = coef * np.prod(xs[:, None, :] ** exps[None, :, :], axis=2)
    return z[0] if single else z


# ---------------------------------------------------------------------------
# random networks


def _layer_variances(sizes, act: Activation) -> list[float]:
    v = activation_variance(act)
    if v <= 0.0:
        raise ValueError(f"activation {act.kind} has zero output variance under N(0, 1)")
    return [float(sizes[0])] + [sizes[l] * v for l in range(1, len(sizes) - 1)]


def nn_init(spec: "RandomNN", rng) -> ThetaParams:
    """Weights ``W^(l)_ij ~ N(0, 1 / V_l)``, optional biases ``~ N(0, 1)``.

    ``V_0 = d_0`` and ``V_l = d_l Var(sigma(u))`` for ``l >= 1``, so that
    pre-activations are roughly standard normal for unit-norm inputs.
    """
    gen = _gen(rng)
    sizes = spec.layer_sizes
    variances = _layer_variances(sizes, spec.activation)
    weights = tuple(
        gen.standard_normal((sizes[l + 1], sizes[l])) / math.sqrt(variances[l])
        for l in range(len(sizes) - 1)
    )
    biases = None
    if spec.with_bias:
        biases = tuple(gen.standard_normal(sizes[l + 1]) for l in range(len(sizes) - 1))
    return ThetaParams(weights, biases)


def nn_apply(theta: ThetaParams, spec: "RandomNN", x) -> np.ndarray:
    h = np.asarray(x, dtype=np.float64)
    act = spec.activation
    for l, w in enumerate(theta.weights):
        pre = h @ w.T
        if theta.biases is not None:
            pre = pre + theta.biases[l]
        h = act.value(pre)
    if not np.all(np.isfinite(h)):
        raise FloatingPointError(f"non-finite output from {act.kind} network")
    return h


def ntk_init(spec: "NTK", rng) -> ThetaParams:
    gen = _gen(rng)
    d0, d1, d2 = spec.layer_sizes
    return ThetaParams((gen.standard_normal((d1, d0)), gen.standard_normal((d2, d1))))


def ntk_apply(theta: ThetaParams, spec: "NTK", x) -> np.ndarray:
    """Parameter gradient of ``V_1^{-1/2} W1 sigma(V_0^{-1/2} W0 x)``.

    Columns are the ``d1 * d0`` entries of ``W0`` (row-major) followed by the
    ``d1`` entries of ``W1``.
    """
    x = np.asarray(x, dtype=np.float64)
    w0, w1 = theta.weights
    v0, v1 = _layer_variances(spec.layer_sizes, spec.activation)
    s0, s1 = 1.0 / math.sqrt(v0), 1.0 / math.sqrt(v1)
    h = s0 * (x @ w0.T)
    act = spec.activation
    g_w1 = s1 * act.value(h)
    back = (s1 * s0) * w1[0] * act.derivative(h)
    g_w0 = (back[:, :, None] * x[:, None, :]).reshape(x.shape[0], -1)
    return np.hstack([g_w0, g_w1])


# ---------------------------------------------------------------------------
# random Fourier features


def rff_init(spec: "RFF", rng) -> ThetaParams:
    gen = _gen(rng)
    w = spec.weight_scale * gen.standard_normal((spec.q, spec.d))
    if spec.kind == "cosbias":
        return ThetaParams((w,), (gen.uniform(0.0, 2.0 * math.pi, spec.q),))
    return ThetaParams((w,))


def rff_apply(theta: ThetaParams, spec: "RFF", x) -> np.ndarray:
    proj = np.asarray(x, dtype=np.float64) @ theta.weights[0].T
    if spec.kind == "sincos":
        return np.hstack([np.sin(proj), np.cos(proj)])
    return math.sqrt(2.0) * np.cos(proj + theta.biases[0])


# ---------------------------------------------------------------------------
# direct feature distributions


def sphere_sample(p: int, n: int, rng) -> np.ndarray:
    """``n`` i.i.d. rows uniform on the unit sphere in ``R^p``."""
    gen = _gen(rng)
    z = gen.standard_normal((n, p))
    norms = np.linalg.norm(z, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        z[bad] = gen.standard_normal((int(bad.sum()), p))
        norms = np.linalg.norm(z, axis=1)
    return z / norms[:, None]


def onehot_sample(p: int, n: int, rng) -> np.ndarray:
    """``n`` rows, each a uniformly random standard basis vector of ``R^p``."""
    if p < 2:
        raise ValueError("one-hot distribution needs p >= 2")
    gen = _gen(rng)
    z = np.zeros((n, p))
    z[np.arange(n), gen.integers(0, p, size=n)] = 1.0
    return z


# ---------------------------------------------------------------------------
# spec types


@dataclass(frozen=True)
class FeatureMapSpec:
    """Common protocol; concrete maps are the subclasses below."""

    variant: ClassVar[str] = ""
    input_sampler: Optional[InputSampler] = field(default=None, compare=False, repr=False, kw_only=True)

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @property
    def input_dim(self) -> int:
        raise NotImplementedError

    def sample_theta(self, gen: np.random.Generator) -> Optional[ThetaParams]:
        return None

    def sample_inputs(self, n: int, gen: np.random.Generator) -> np.ndarray:
        if self.input_sampler is not None:
            x = np.asarray(self.input_sampler(n, gen), dtype=np.float64)
            if x.shape != (n, self.input_dim):
                raise ValueError(f"input sampler returned {x.shape}, expected {(n, self.input_dim)}")
            return x
        return gen.standard_normal((n, self.input_dim))

    def apply(self, theta: Optional[ThetaParams], x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exact_second_moment(self) -> Optional[np.ndarray]:
        """Analytic ``E[z z^T]`` when known, else None."""
        return None

    def _fields(self) -> dict:
        return {}

    def to_json(self) -> dict:
        if self.input_sampler is not None:
            raise ValueError("specs with a custom input sampler cannot be serialized")
        return {"variant": self.variant, **self._fields()}


@dataclass(frozen=True)
class IdentityMap(FeatureMapSpec):
    variant: ClassVar[str] = "identity"
    d: int = 1

    @property
    def dim(self):
        return self.d

    @property
    def input_dim(self):
        return self.d

    def apply(self, theta, x):
        return np.array(x, dtype=np.float64)

    def exact_second_moment(self):
        return np.eye(self.d) if self.input_sampler is None else None

    def _fields(self):
        return {"d": self.d}


@dataclass(frozen=True)
class Polynomial(FeatureMapSpec):
    variant: ClassVar[str] = "polynomial"
    d: int = 1
    m: int = 2
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("polynomial offset c must be positive")

    @property
    def dim(self):
        return poly_dim(self.d, self.m)

    @property
    def input_dim(self):
        return self.d

    def apply(self, theta, x):
        return poly_feature_map(np.atleast_2d(x), self.m, self.c)

    def _fields(self):
        return {"d": self.d, "m": self.m, "c": self.c}


@dataclass(frozen=True)
class RandomNN(FeatureMapSpec):
    """Fully connected random network ``x -> sigma(W^(L-1) ... sigma(W^(0) x))``."""

    variant: ClassVar[str] = "random_nn"
    layer_sizes: tuple = (10, 256, 256, 30)
    activation: Activation = Activation("tanh")
    with_bias: bool = False

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.layer_sizes}")

    @property
    def dim(self):
        return self.layer_sizes[-1]

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    def sample_theta(self, gen):
        return nn_init(self, gen)

    def apply(self, theta, x):
        return nn_apply(theta, self, x)

    def _fields(self):
        return {
            "layer_sizes": list(self.layer_sizes),
            "activation": self.activation.to_json(),
            "with_bias": self.with_bias,
        }


@dataclass(frozen=True)
class NTK(FeatureMapSpec):
    """Finite-width NTK features of a two-layer scalar-output network."""

    variant: ClassVar[str] = "ntk"
    layer_sizes: tuple = (4, 6, 1)
    activation: Activation = Activation("tanh")

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) != 3 or self.layer_sizes[2] != 1 or min(self.layer_sizes) < 1:
            raise ValueError(f"NTK maps need layer sizes (d0, d1, 1), got {self.layer_sizes}")

    @property
    def dim(self):
        d0, d1, d2 = self.layer_sizes
        return d0 * d1 + d1 * d2

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    def sample_theta(self, gen):
        return ntk_init(self, gen)

    def apply(self, theta, x):
        return ntk_apply(theta, self, x)

    def _fields(self):
        return {"layer_sizes": list(self.layer_sizes), "activation": self.activation.to_json()}


@dataclass(frozen=True)
class RFF(FeatureMapSpec):
    """Random Fourier features with frequency rows ``~ N(0, weight_scale^2 I)``.

    ``kind="sincos"`` gives ``(sin(Wx), cos(Wx))`` with ``p = 2q``;
    ``kind="cosbias"`` gives ``sqrt(2) cos(Wx + b)`` with ``p = q``.
    """

    variant: ClassVar[str] = "rff"
    d: int = 10
    q: int = 15
    kind: str = "sincos"
    weight_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("sincos", "cosbias"):
            raise ValueError(f"RFF kind must be 'sincos' or 'cosbias', got {self.kind!r}")

    @property
    def dim(self):
        return 2 * self.q if self.kind == "sincos" else self.q

    @property
    def input_dim(self):
        return self.d

    def sample_theta(self, gen):
        return rff_init(self, gen)

    def apply(self, theta, x):
        return rff_apply(theta, self, x)

    def _fields(self):
        return {"d": self.d, "q": self.q, "kind": self.kind, "weight_scale": self.weight_scale}


@dataclass(frozen=True)
class SphereDirect(FeatureMapSpec):
    variant: ClassVar[str] = "sphere"
    p: int = 30

    @property
    def dim(self):
        return self.p

    @property
    def input_dim(self):
        return self.p

    def sample_inputs(self, n, gen):
        return sphere_sample(self.p, n, gen)

    def apply(self, theta, x):
        return x

    def exact_second_moment(self):
        return np.eye(self.p) / self.p

    def _fields(self):
        return {"p": self.p}


@dataclass(frozen=True)
class GaussianDirect(FeatureMapSpec):
    variant: ClassVar[str] = "gaussian"
    p: int = 30

    @property
    def dim(self):
        return self.p

    @property
    def input_dim(self):
        return self.p

    def sample_inputs(self, n, gen):
        return gen.standard_normal((n, self.p))

    def apply(self, theta, x):
        return x

    def exact_second_moment(self):
        return np.eye(self.p)

    def _fields(self):
        return {"p": self.p}


@dataclass(frozen=True)
class OneHotHistogram(FeatureMapSpec):
    variant: ClassVar[str] = "onehot"
    p: int = 30

    @property
    def dim(self):
        return self.p

    @property
    def input_dim(self):
        return self.p

    def sample_inputs(self, n, gen):
        return onehot_sample(self.p, n, gen)

    def apply(self, theta, x):
        return x

    def exact_second_moment(self):
        return np.eye(self.p) / self.p

    def _fields(self):
        return {"p": self.p}


def ntkparam_forward(theta: ThetaParams, spec: "NTKParamNN", x, keep: bool = False):
    """Forward pass ``h <- sigma(b + V^{-1/2} W h)``; optionally returns the layer caches."""
    h = np.asarray(x, dtype=np.float64)
    scales = spec.layer_scales()
    cache = []
    for w, b, s in zip(theta.weights, theta.biases, scales):
        pre = s * (h @ w.T) + b
        if keep:
            cache.append((h, pre))
        h = spec.activation.value(pre)
    return (h, cache) if keep else h


@dataclass(frozen=True)
class NTKParamNN(FeatureMapSpec):
    """Trainable network in NTK parameterization with biases.

    ``W^(l)_ij ~ N(0, 1)`` and ``b^(l) = 0`` at initialization; the layer
    scale ``V_l^{-1/2}`` sits outside the weights.
    """

    variant: ClassVar[str] = "ntk_param_nn"
    layer_sizes: tuple = (30, 256, 256, 30)
    activation: Activation = Activation("tanh")

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.layer_sizes}")

    @property
    def dim(self):
        return self.layer_sizes[-1]

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    def layer_scales(self) -> list[float]:
        return [1.0 / math.sqrt(v) for v in _layer_variances(self.layer_sizes, self.activation)]

    def sample_theta(self, gen):
        sizes = self.layer_sizes
        weights = tuple(gen.standard_normal((sizes[l + 1], sizes[l])) for l in range(len(sizes) - 1))
        biases = tuple(np.zeros(sizes[l + 1]) for l in range(len(sizes) - 1))
        return ThetaParams(weights, biases)

    def apply(self, theta, x):
        return ntkparam_forward(theta, self, x)

    def _fields(self):
        return {"layer_sizes": list(self.layer_sizes), "activation": self.activation.to_json()}


@dataclass(frozen=True)
class FixedTheta(FeatureMapSpec):
    """A feature map with its parameters pinned, e.g. after training."""

    variant: ClassVar[str] = "fixed"
    base: FeatureMapSpec = None
    theta: ThetaParams = None

    @property
    def dim(self):
        return self.base.dim

    @property
    def input_dim(self):
        return self.base.input_dim

    def sample_theta(self, gen):
        return self.theta

    def sample_inputs(self, n, gen):
        return self.base.sample_inputs(n, gen)

    def apply(self, theta, x):
        return self.base.apply(theta, x)

    def exact_second_moment(self):
        return self.base.exact_second_moment()

    def _fields(self):
        return {"base": self.base.to_json(), "theta": self.theta.to_json()}


VARIANTS = {
    cls.variant: cls
    for cls in (IdentityMap, Polynomial, RandomNN, NTK, RFF, SphereDirect, GaussianDirect,
                OneHotHistogram, NTKParamNN, FixedTheta)
}


def spec_from_json(obj: dict) -> FeatureMapSpec:
    """Inverse of ``spec.to_json()``; unknown variants or fields raise ``ValueError``."""
    if not isinstance(obj, dict) or "variant" not in obj:
        raise ValueError("feature map spec must be an object with a 'variant' field")
    name = obj["variant"]
    if name not in VARIANTS:
        raise ValueError(f"unknown feature map variant {name!r}; expected one of {sorted(VARIANTS)}")
    cls = VARIANTS[name]
    kwargs = {k: v for k, v in obj.items() if k != "variant"}
    allowed = {f for f in cls.__dataclass_fields__ if f != "input_sampler"}
    extra = set(kwargs) - allowed
    if extra:
        raise ValueError(f"unknown fields for variant {name!r}: {sorted(extra)}")
    if name == "fixed":
        if "base" not in kwargs or "theta" not in kwargs:
            raise ValueError("variant 'fixed' needs 'base' and 'theta'")
        kwargs["base"] = spec_from_json(kwargs["base"])
        kwargs["theta"] = ThetaParams.from_json(kwargs["theta"])
    if "activation" in kwargs:
        kwargs["activation"] = Activation.from_json(kwargs["activation"])
    if "layer_sizes" in kwargs:
        kwargs["layer_sizes"] = tuple(kwargs["layer_sizes"])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad fields for variant {name!r}: {exc}") from exc
