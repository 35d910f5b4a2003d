import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ridgeless_lab.activations import KINDS, Activation, activation_variance
from ridgeless_lab.featmaps import (
    NTK,
    RFF,
    FixedTheta,
    GaussianDirect,
    IdentityMap,
    OneHotHistogram,
    Polynomial,
    RandomNN,
    SphereDirect,
    ThetaParams,
    nn_apply,
    nn_init,
    ntk_apply,
    onehot_sample,
    poly_dim,
    poly_feature_map,
    rff_apply,
    sphere_sample,
    spec_from_json,
)
from ridgeless_lab.numkit import RngStream


def _activations():
    out = [Activation(k) for k in KINDS]
    out += [Activation("rbf", beta=0.3), Activation("swish", beta=2.5)]
    return out


class TestActivations:
    @pytest.mark.parametrize("act", _activations(), ids=lambda a: f"{a.kind}-{a.beta}")
    def test_derivative_matches_finite_differences(self, act):
        x = np.random.default_rng(3).uniform(-5, 5, 100)
        if act.kind == "relu":
            x = x[np.abs(x) > 1e-3]
        h = 1e-5
        fd = (act.value(x + h) - act.value(x - h)) / (2 * h)
        d = act.derivative(x)
        err = np.abs(fd - d) / np.maximum(np.abs(d), 1e-3)
        assert err.max() <= 1e-6

    def test_relu_derivative_at_zero(self):
        assert Activation("relu").derivative(np.array([0.0]))[0] == 0.0

    def test_analytic_flag(self):
        assert [k for k in KINDS if not Activation(k).analytic] == ["relu"]

    def test_softplus_stable(self):
        v = Activation("softplus").value(np.array([-800.0, 800.0]))
        assert np.all(np.isfinite(v)) and v[1] == 800.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Activation("heaviside")

    def test_tanh_variance(self):
        assert 0.37 <= activation_variance(Activation("tanh")) <= 0.42

    def test_json_roundtrip(self):
        for act in _activations():
            assert Activation.from_json(act.to_json()) == act


class TestPolynomial:
    def test_dims(self):
        assert poly_dim(3, 4) == 35
        assert poly_dim(1, 1) == 2
        assert poly_dim(2, 3) == 10
        assert Polynomial(d=3, m=4, c=1.0).dim == 35

    def test_dim_overflow(self):
        with pytest.raises(OverflowError):
            poly_dim(200, 200)

    def test_enumeration_count(self):
        # oracle: brute-force count of exponent tuples of total degree <= m
        for d, m in [(2, 3), (3, 4), (4, 2)]:
            count = sum(1 for e in itertools.product(range(m + 1), repeat=d) if sum(e) <= m)
            assert poly_dim(d, m) == count == poly_feature_map(np.zeros(d), m, 1.0).size

    def test_scalar_kernel(self):
        assert poly_feature_map([1.0], 2, 1.0) @ poly_feature_map([2.0], 2, 1.0) == pytest.approx(9.0, rel=1e-14)

    def test_zero_input(self):
        c, m = 2.5, 3
        phi = poly_feature_map(np.zeros(3), m, c)
        assert np.count_nonzero(phi) == 1
        assert phi[0] == pytest.approx(c ** (m / 2))
        assert phi @ phi == pytest.approx(c**m)

    def test_kernel_identity(self):
        rng = np.random.default_rng(0)
        x, y = rng.standard_normal((2, 100, 3))
        fx, fy = poly_feature_map(x, 4, 1.0), poly_feature_map(y, 4, 1.0)
        want = (np.sum(x * y, axis=1) + 1.0) ** 4
        # relative to |phi(x)| |phi(y)|: the inner product itself can cancel to ~0
        scale = np.linalg.norm(fx, axis=1) * np.linalg.norm(fy, axis=1)
        assert np.max(np.abs(np.sum(fx * fy, axis=1) - want) / scale) <= 1e-10
        np.testing.assert_allclose(np.sum(fx * fx, axis=1), (np.sum(x * x, axis=1) + 1) ** 4, rtol=1e-10)

    def test_rejects_nonpositive_offset(self):
        with pytest.raises(ValueError):
            poly_feature_map([1.0], 2, 0.0)


class TestRandomNN:
    def test_identity_variance(self):
        v = activation_variance(Activation("identity"))
        assert v == pytest.approx(1.0, abs=0.05)

    def test_first_layer_variance(self):
        spec = RandomNN(layer_sizes=(10, 10_000, 1), activation=Activation("tanh"))
        w0 = nn_init(spec, RngStream(1).generator()).weights[0]
        assert np.var(w0) == pytest.approx(0.1, rel=0.2)

    def test_identity_network(self):
        spec = RandomNN(layer_sizes=(3, 3), activation=Activation("identity"))
        x = np.random.default_rng(0).standard_normal((4, 3))
        np.testing.assert_array_equal(nn_apply(ThetaParams((np.eye(3),)), spec, x), x)

    def test_hand_evaluation(self):
        spec = RandomNN(layer_sizes=(1, 2), activation=Activation("tanh"))
        out = nn_apply(ThetaParams((np.array([[1.0], [2.0]]),)), spec, np.array([[1.0]]))
        np.testing.assert_allclose(out[0], [math.tanh(1), math.tanh(2)], rtol=1e-15)

    def test_duplicate_rows(self):
        spec = RandomNN(layer_sizes=(5, 8, 4), activation=Activation("gelu"), with_bias=True)
        theta = spec.sample_theta(RngStream(2).generator())
        x = np.random.default_rng(0).standard_normal((1, 5)).repeat(2, axis=0)
        out = spec.apply(theta, x)
        np.testing.assert_array_equal(out[0], out[1])
        assert out.shape == (2, spec.dim)

    def test_relu_positive_is_linear(self):
        # all-positive weights and inputs: ReLU never clips, so rank <= d
        d, n, width, p = 3, 20, 15, 12
        rng = np.random.default_rng(5)
        spec = RandomNN(layer_sizes=(d, width, p), activation=Activation("relu"))
        theta = ThetaParams((rng.uniform(0.1, 1, (width, d)), rng.uniform(0.1, 1, (p, width))))
        z = spec.apply(theta, rng.uniform(0.1, 1, (n, d)))
        assert np.linalg.matrix_rank(z) <= d

    def test_overflow_is_error(self):
        spec = RandomNN(layer_sizes=(1, 1), activation=Activation("mish"))
        # exp overflow inside mish yields nan/inf
        with pytest.raises(FloatingPointError), np.errstate(all="ignore"):
            nn_apply(ThetaParams((np.array([[np.inf]]),)), spec, np.array([[-1.0]]))


class TestNTK:
    def test_dim(self):
        assert NTK(layer_sizes=(4, 6, 1), activation=Activation("tanh")).dim == 30

    def test_identity_last_layer(self):
        spec = NTK(layer_sizes=(3, 4, 1), activation=Activation("identity"))
        theta = spec.sample_theta(RngStream(0).generator())
        x = np.random.default_rng(1).standard_normal((2, 3))
        v = activation_variance(Activation("identity"))
        want = (x @ theta.weights[0].T) / math.sqrt(3) / math.sqrt(4 * v)
        np.testing.assert_allclose(ntk_apply(theta, spec, x)[:, 12:], want, rtol=1e-14)

    @pytest.mark.parametrize("kind", ["tanh", "sigmoid", "gelu", "softplus", "sin"])
    def test_finite_difference(self, kind):
        spec = NTK(layer_sizes=(3, 5, 1), activation=Activation(kind))
        theta = spec.sample_theta(RngStream(4).generator())
        x = np.random.default_rng(2).standard_normal((1, 3))
        v0, v1 = 3.0, 5 * activation_variance(spec.activation)

        def net(flat):
            t = theta.with_flat(flat)
            h = spec.activation.value(x @ t.weights[0].T / math.sqrt(v0))
            return float((h @ t.weights[1].T)[0, 0] / math.sqrt(v1))

        flat = theta.flat()
        h = 1e-6
        fd = np.array([(net(flat + h * e) - net(flat - h * e)) / (2 * h) for e in np.eye(flat.size)])
        np.testing.assert_allclose(ntk_apply(theta, spec, x)[0], fd, rtol=1e-6, atol=1e-9)


class TestRFF:
    def test_sincos_norm(self):
        spec = RFF(d=4, q=7, kind="sincos")
        theta = spec.sample_theta(RngStream(0).generator())
        z = spec.apply(theta, np.random.default_rng(0).standard_normal((100, 4)))
        np.testing.assert_allclose(np.sum(z * z, axis=1), 7.0, rtol=1e-13)

    def test_cosbias_zero(self):
        spec = RFF(d=2, q=3, kind="cosbias")
        out = rff_apply(ThetaParams((np.zeros((3, 2)),), (np.zeros(3),)), spec, np.ones((1, 2)))
        np.testing.assert_allclose(out, math.sqrt(2.0), rtol=1e-15)

    def test_sincos_hand(self):
        spec = RFF(d=2, q=1, kind="sincos")
        out = rff_apply(ThetaParams((np.array([[math.pi / 2, 0.0]]),)), spec, np.array([[1.0, 0.0]]))
        np.testing.assert_allclose(out[0], [1.0, 0.0], atol=1e-12)

    def test_sincos_kernel(self):
        spec = RFF(d=5, q=20, kind="sincos")
        theta = spec.sample_theta(RngStream(3).generator())
        x, y = np.random.default_rng(1).standard_normal((2, 100, 5))
        w = theta.weights[0]
        want = np.cos((x - y) @ w.T).sum(axis=1)
        got = np.sum(spec.apply(theta, x) * spec.apply(theta, y), axis=1)
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)

    def test_cosbias_kernel(self):
        # 2 cos(a+b) cos(c+b) = cos(a-c) + cos(a+c+2b)
        spec = RFF(d=5, q=20, kind="cosbias")
        theta = spec.sample_theta(RngStream(3).generator())
        x, y = np.random.default_rng(1).standard_normal((2, 100, 5))
        w, b = theta.weights[0], theta.biases[0]
        want = (np.cos((x - y) @ w.T) + np.cos((x + y) @ w.T + 2 * b)).sum(axis=1)
        got = np.sum(spec.apply(theta, x) * spec.apply(theta, y), axis=1)
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)

    def test_phases_uniform(self):
        b = RFF(d=1, q=10_000, kind="cosbias").sample_theta(RngStream(0).generator()).biases[0]
        assert b.min() >= 0 and b.max() < 2 * math.pi
        assert b.mean() == pytest.approx(math.pi, abs=0.06)


class TestDirect:
    def test_sphere_norms(self):
        z = sphere_sample(7, 1000, RngStream(0).generator())
        np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-12)

    def test_sphere_p1(self):
        assert set(np.unique(sphere_sample(1, 100, RngStream(0).generator()).ravel())) <= {-1.0, 1.0}

    def test_sphere_second_moment(self):
        z = sphere_sample(5, 100_000, RngStream(1).generator())
        assert np.abs(z.T @ z / len(z) - np.eye(5) / 5).max() < 0.01

    def test_gaussian_second_moment(self):
        spec = GaussianDirect(6)
        n = 100_000
        z = spec.apply(None, spec.sample_inputs(n, RngStream(2).generator()))
        m = z.T @ z / n
        # entry variance is 2/n on the diagonal and 1/n off it
        err = np.abs(m - np.eye(6)) / np.sqrt((1 + np.eye(6)) / n)
        assert err.max() < 4.5

    def test_onehot(self):
        z = onehot_sample(30, 100_000, RngStream(3).generator())
        np.testing.assert_array_equal(z.sum(axis=1), 1.0)
        g = z.T @ z
        assert np.count_nonzero(g - np.diag(np.diag(g))) == 0
        assert np.trace(g) == 100_000
        freq = np.diag(g)
        sd = math.sqrt(100_000 * (1 / 30) * (29 / 30))
        assert np.abs(freq - 100_000 / 30).max() < 4 * sd

    def test_onehot_needs_two(self):
        with pytest.raises(ValueError):
            onehot_sample(1, 3, RngStream(0).generator())

    def test_exact_moments(self):
        np.testing.assert_array_equal(SphereDirect(4).exact_second_moment(), np.eye(4) / 4)
        np.testing.assert_array_equal(GaussianDirect(4).exact_second_moment(), np.eye(4))
        np.testing.assert_array_equal(OneHotHistogram(4).exact_second_moment(), np.eye(4) / 4)


SPECS = [
    IdentityMap(d=3),
    Polynomial(d=3, m=4, c=1.0),
    RandomNN(layer_sizes=(10, 32, 32, 30), activation=Activation("tanh"), with_bias=True),
    NTK(layer_sizes=(4, 6, 1), activation=Activation("relu")),
    RFF(d=10, q=15, kind="sincos", weight_scale=0.25),
    RFF(d=10, q=30, kind="cosbias"),
    SphereDirect(30),
    GaussianDirect(12),
    OneHotHistogram(30),
]


class TestSerialization:
    @pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.variant)
    def test_roundtrip(self, spec):
        assert spec_from_json(spec.to_json()) == spec

    def test_fixed_roundtrip(self):
        base = RandomNN(layer_sizes=(2, 3), activation=Activation("tanh"))
        theta = base.sample_theta(RngStream(0).generator())
        back = spec_from_json(FixedTheta(base=base, theta=theta).to_json())
        np.testing.assert_array_equal(back.theta.weights[0], theta.weights[0])

    def test_unknown_field_rejected(self):
        obj = SphereDirect(3).to_json()
        obj["radius"] = 2
        with pytest.raises(ValueError):
            spec_from_json(obj)

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            spec_from_json({"variant": "wavelet"})

    @settings(max_examples=20, deadline=None)
    @given(d=st.integers(1, 6), q=st.integers(1, 20), sc=st.floats(0.01, 10))
    def test_rff_shapes(self, d, q, sc):
        for kind, p in (("sincos", 2 * q), ("cosbias", q)):
            spec = RFF(d=d, q=q, kind=kind, weight_scale=sc)
            z = spec.apply(spec.sample_theta(RngStream(0).generator()), np.ones((3, d)))
            assert z.shape == (3, p) == (3, spec.dim)
