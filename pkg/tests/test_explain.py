"""Shapley attribution tests: exact enumeration, kernel weights, Kernel SHAP."""

import numpy as np
import pytest

import railgate.explain as explain_mod
from railgate.explain import (
    EXACT_MAX_FEATURES,
    coalition_value,
    exact_shapley,
    kernel_shap,
    shap_kernel_weight,
)
from railgate.models import LogisticModel, Mlp2Model


def linear_fn(w, bias=0.0):
    """Single-output linear model_fn (output class 0)."""
    w = np.asarray(w, dtype=float)

    def fn(X):
        return (np.atleast_2d(X) @ w + bias)[:, None]

    return fn


def random_model_fn(rng, d, k=3, mlp=False):
    if mlp:
        h = int(rng.integers(2, 6))
        model = Mlp2Model(
            w1=rng.normal(size=(h, d)),
            b1=rng.normal(size=h),
            w2=rng.normal(size=(k, h)),
            b2=rng.normal(size=k),
        )
    else:
        model = LogisticModel(weights=rng.normal(size=(k, d)), bias=rng.normal(size=k))
    return model.logits_batch


class TestCoalitionValue:
    def test_full_coalition_is_model_output(self):
        fn = linear_fn([2.0, 3.0], bias=1.0)
        x = np.array([1.0, 1.0])
        bg = np.array([[5.0, -5.0]])
        assert coalition_value(fn, x, bg, [0, 1], 0) == pytest.approx(6.0, abs=1e-12)

    def test_empty_coalition_is_background_mean(self):
        fn = linear_fn([2.0, 3.0])
        bg = np.array([[1.0, 0.0], [0.0, 1.0]])
        # mean of f over bg rows: (2 + 3)/2
        assert coalition_value(fn, [9.0, 9.0], bg, [], 0) == pytest.approx(2.5, abs=1e-12)

    def test_linear_single_row_algebraic_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            d = int(rng.integers(2, 7))
            w = rng.normal(size=d)
            bias = float(rng.normal())
            x = rng.normal(size=d)
            b_row = rng.normal(size=d)
            subset = sorted(rng.choice(d, size=int(rng.integers(0, d + 1)), replace=False))
            expected = (
                sum(w[i] * x[i] for i in subset)
                + sum(w[i] * b_row[i] for i in range(d) if i not in subset)
                + bias
            )
            got = coalition_value(linear_fn(w, bias), x, b_row[None, :], subset, 0)
            assert got == pytest.approx(expected, abs=1e-10)


class TestExactShapley:
    def test_linear_two_feature_oracle(self):
        result = exact_shapley(linear_fn([2.0, 3.0]), [1.0, 1.0], np.zeros((1, 2)), 0)
        np.testing.assert_allclose(result.phi, [2.0, 3.0], atol=1e-12)
        assert result.base_value == pytest.approx(0.0, abs=1e-12)

    def test_dummy_axiom(self):
        # feature 2 has zero weight and is constant in the background
        fn = linear_fn([1.5, -2.0, 0.0])
        bg = np.array([[0.3, 0.4, 7.0], [0.1, -0.2, 7.0]])
        result = exact_shapley(fn, [1.0, 1.0, 7.0], bg, 0)
        assert abs(result.phi[2]) < 1e-12

    def test_symmetry_axiom(self):
        # equal weights, identical background marginals
        fn = linear_fn([2.0, 2.0])
        bg = np.array([[0.5, 0.5], [-0.5, -0.5]])
        result = exact_shapley(fn, [1.0, 1.0], bg, 0)
        assert abs(result.phi[0] - result.phi[1]) < 1e-12

    def test_efficiency_on_random_models(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            d = int(rng.integers(1, 9))
            fn = random_model_fn(rng, d, mlp=bool(trial % 2))
            x = rng.normal(size=d)
            bg = rng.normal(size=(int(rng.integers(1, 6)), d))
            target = int(rng.integers(0, 3))
            result = exact_shapley(fn, x, bg, target)
            f_x = float(fn(x[None, :])[0, target])
            assert abs(result.total() - f_x) < 1e-9

    def test_refuses_above_limit(self):
        d = EXACT_MAX_FEATURES + 1
        with pytest.raises(ValueError, match="kernel_shap"):
            exact_shapley(linear_fn(np.ones(d)), np.ones(d), np.zeros((1, d)), 0)


class TestKernelWeight:
    def test_m4_values(self):
        assert shap_kernel_weight(4, 1) == pytest.approx(0.25, abs=1e-15)
        assert shap_kernel_weight(4, 2) == pytest.approx(0.125, abs=1e-15)

    def test_symmetry(self):
        for m in range(2, 12):
            for k in range(1, m):
                assert shap_kernel_weight(m, k) == pytest.approx(
                    shap_kernel_weight(m, m - k), abs=1e-15
                )

    def test_endpoints_rejected(self):
        with pytest.raises(ValueError):
            shap_kernel_weight(4, 0)
        with pytest.raises(ValueError):
            shap_kernel_weight(4, 4)


class TestKernelShap:
    def test_enumeration_reproduces_exact(self):
        rng = np.random.default_rng(7)
        for trial in range(20):
            d = int(rng.integers(2, 8))
            fn = random_model_fn(rng, d, mlp=bool(trial % 2))
            x = rng.normal(size=d)
            bg = rng.normal(size=(4, d))
            target = int(rng.integers(0, 3))
            exact = exact_shapley(fn, x, bg, target)
            kernel = kernel_shap(fn, x, bg, target, n_samples=max(2**d, 2 * d + 4), seed=trial)
            np.testing.assert_allclose(kernel.phi, exact.phi, atol=1e-6)
            assert kernel.base_value == pytest.approx(exact.base_value, abs=1e-9)

    def test_linear_analytic_oracle_any_seed(self):
        # phi_i = w_i * (x_i - mean(background_i)) for linear models, exactly,
        # even on the sampled path: the regression target is linear in the mask.
        rng = np.random.default_rng(8)
        d = 16  # 2^16 - 2 proper coalitions forces sampling at n_samples=2048
        w = rng.normal(size=d)
        x = rng.normal(size=d)
        bg = rng.normal(size=(10, d))
        expected = w * (x - bg.mean(axis=0))
        for seed in (0, 1, 99):
            result = kernel_shap(linear_fn(w, bias=0.4), x, bg, 0, n_samples=2048, seed=seed)
            np.testing.assert_allclose(result.phi, expected, atol=1e-6)

    def test_minimum_samples_enforced(self):
        d = 5
        with pytest.raises(ValueError, match="2\\*d\\+4"):
            kernel_shap(linear_fn(np.ones(d)), np.ones(d), np.zeros((1, d)), 0, n_samples=13)

    def test_seeded_determinism_bit_for_bit(self):
        rng = np.random.default_rng(9)
        d = 14
        fn = random_model_fn(rng, d)
        x = rng.normal(size=d)
        bg = rng.normal(size=(5, d))
        a = kernel_shap(fn, x, bg, 1, n_samples=256, seed=5)
        b = kernel_shap(fn, x, bg, 1, n_samples=256, seed=5)
        assert np.array_equal(a.phi, b.phi)
        assert a.base_value == b.base_value

    def test_efficiency_holds_by_construction(self):
        rng = np.random.default_rng(10)
        for trial in range(50):
            d = int(rng.integers(2, 16))
            fn = random_model_fn(rng, d, mlp=bool(trial % 2))
            x = rng.normal(size=d)
            bg = rng.normal(size=(3, d))
            result = kernel_shap(fn, x, bg, 0, n_samples=max(2 * d + 4, 128), seed=trial)
            f_x = float(fn(x[None, :])[0, 0])
            assert abs(result.total() - f_x) < 1e-6

    def test_single_feature(self):
        result = kernel_shap(linear_fn([3.0]), [2.0], np.array([[0.5]]), 0, n_samples=8)
        np.testing.assert_allclose(result.phi, [4.5], atol=1e-12)
        assert result.base_value == pytest.approx(1.5, abs=1e-12)

    def test_ridge_fallback_on_degenerate_samples(self, monkeypatch):
        # Duplicate coalitions collapse to a rank-deficient design.
        d = 6

        def degenerate(d_, n, rng):
            z = np.zeros(d_, dtype=np.int64)
            z[0] = 1
            return z[None, :], np.array([float(n)])

        monkeypatch.setattr(explain_mod, "_sample_coalitions", degenerate)
        result = kernel_shap(
            linear_fn(np.ones(d)), np.ones(d), np.zeros((1, d)), 0, n_samples=2 * d + 4
        )
        assert result.ridge_fallback is True
        # efficiency still exact via the eliminated constraint
        assert result.total() == pytest.approx(float(d), abs=1e-5)
