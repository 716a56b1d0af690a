import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fsir import smoother
from fsir.smoother import (
    SmootherConfig,
    epanechnikov,
    link_evaluate,
    link_evaluate_many,
    loo_fit,
    loo_predict,
    loo_sse,
)

# Four-point example worked by hand with h = 0.25, K(u) = 0.75 (1 - u^2):
#   j=0: neighbours z=0.1 (u=0.4, K=0.63) and z=0.2 (u=0.8, K=0.27)
#        -> (0.63*2 + 0.27*3) / 0.90 = 2.3
#   j=1: z=0 and z=0.2 both at u=0.4 (K=0.63) -> (1 + 3) / 2 = 2
#   j=2: z=0 (K=0.27), z=0.1 (K=0.63) -> (0.27*1 + 0.63*2) / 0.90 = 1.7
#   j=3: no neighbour within 0.25 -> empty window, dropped
#   criterion over the kept points: (1.3^2 + 0 + 1.3^2) / 3
#   at u=0.05: K = 0.72, 0.72, 0.48 -> (0.72 + 1.44 + 1.44) / 1.92 = 1.875
Z4 = np.array([0.0, 0.1, 0.2, 1.0])
Y4 = np.array([1.0, 2.0, 3.0, 10.0])
HAND_PRED = np.array([2.3, 2.0, 1.7])
HAND_SSE = 1.3**2 + 0.0 + 1.3**2
HAND_U005 = 1.875
LC = SmootherConfig("local_constant", 0.25, 0.0)


def brute_lc(z, y, h, j):
    w = np.array([0.75 * (1 - ((z[i] - z[j]) / h) ** 2) if i != j and abs(z[i] - z[j]) < h else 0.0
                  for i in range(len(z))])
    return (w @ y) / w.sum() if w.sum() > 0 else np.nan


class TestKernel:
    def test_values(self):
        assert epanechnikov(0.0) == 0.75
        assert epanechnikov(1.0) == 0.0
        assert epanechnikov(-1.0) == 0.0
        assert epanechnikov(0.5) == 0.5625
        assert epanechnikov(3.0) == 0.0

    def test_array(self):
        np.testing.assert_array_equal(epanechnikov(np.array([-2, 0, 0.5])), [0, 0.75, 0.5625])


class TestHandOracle:
    def test_brute_force_agrees_with_hand(self):
        np.testing.assert_allclose([brute_lc(Z4, Y4, 0.25, j) for j in range(3)], HAND_PRED, atol=1e-12)

    def test_loo_fit(self, backend):
        fit = loo_fit(Z4, Y4, LC, backend=backend)
        np.testing.assert_allclose(fit.predictions[:3], HAND_PRED, atol=1e-12)
        assert np.isnan(fit.predictions[3])
        np.testing.assert_array_equal(fit.dropped, [False, False, False, True])
        np.testing.assert_allclose(fit.mass, [0.9, 1.26, 0.9, 0.0], atol=1e-12)

    def test_loo_sse(self, backend):
        sse, kept = loo_sse(Z4, Y4, LC, backend=backend)
        assert kept == 3
        assert sse == pytest.approx(HAND_SSE, abs=1e-12)

    def test_link_evaluate(self):
        assert link_evaluate(0.05, Z4, Y4, LC) == pytest.approx(HAND_U005, abs=1e-12)
        assert link_evaluate(0.6, Z4, Y4, LC) is None

    def test_threshold_drops_light_points(self, backend):
        # masses are 0.9, 1.26, 0.9; a threshold of 1 keeps only j=1
        fit = loo_fit(Z4, Y4, SmootherConfig("local_constant", 0.25, 1.0), backend=backend)
        np.testing.assert_array_equal(fit.dropped, [True, False, True, True])


class TestLocalConstant:
    def test_tied_index_gives_mean_of_others(self, backend):
        y = np.array([1.0, 4.0, 2.0, 7.0, 3.0])
        fit = loo_fit(np.zeros(5), y, SmootherConfig("local_constant", 1.0, 0.0), backend=backend)
        np.testing.assert_allclose(fit.predictions, (y.sum() - y) / 4, atol=1e-14)

    @settings(max_examples=60)
    @given(st.integers(0, 2**31))
    def test_within_window_range(self, seed):
        rng = np.random.default_rng(seed)
        z, y = rng.uniform(0, 1, 30), rng.standard_normal(30)
        h = rng.uniform(0.02, 0.5)
        fit = loo_fit(z, y, SmootherConfig("local_constant", h, 0.0))
        for j in np.flatnonzero(~fit.dropped):
            inwin = (np.abs(z - z[j]) < h) & (np.arange(30) != j)
            assert y[inwin].min() - 1e-12 <= fit.predictions[j] <= y[inwin].max() + 1e-12


class TestLocalLinear:
    @settings(max_examples=60)
    @given(st.integers(0, 2**31), st.floats(-5, 5), st.floats(-5, 5))
    def test_exact_on_linear_data(self, seed, a, b):
        rng = np.random.default_rng(seed)
        z = rng.uniform(-1, 1, 40)
        y = a + b * z
        fit = loo_fit(z, y, SmootherConfig("local_linear", 0.6, 0.0))
        ok = ~fit.dropped
        assume(ok.sum() > 0)
        np.testing.assert_allclose(fit.predictions[ok], y[ok], atol=1e-9)
        np.testing.assert_allclose(fit.slopes[ok], b, atol=1e-7)

    def test_exact_both_backends(self, backend):
        z = np.linspace(0, 1, 25) ** 1.5
        y = 3 - 2 * z
        fit = loo_fit(z, y, SmootherConfig("local_linear", 0.3, 0.0), backend=backend)
        assert not fit.dropped.any()
        np.testing.assert_allclose(fit.predictions, y, atol=1e-9)

    def test_single_neighbour_window_is_degenerate(self, backend):
        z = np.array([0.0, 0.1, 5.0, 5.05])
        fit = loo_fit(z, np.arange(4.0), SmootherConfig("local_linear", 0.5, 0.0), backend=backend)
        assert fit.dropped.all()

    def test_link_falls_back_to_constant(self):
        z = np.array([0.0, 0.0, 0.0])
        v = link_evaluate(0.1, z, np.array([1.0, 2.0, 6.0]), SmootherConfig("local_linear", 1.0))
        assert v == pytest.approx(3.0)


def _random_problem(seed, n=40):
    rng = np.random.default_rng(seed)
    z = np.round(rng.standard_normal(n), 1)  # rounding forces ties
    return z, np.sin(z) + 0.3 * rng.standard_normal(n), rng.uniform(0.05, 1.5), rng.uniform(0, 0.5)


class TestInvariances:
    @settings(max_examples=80)
    @given(st.integers(0, 2**31), st.floats(0.01, 100), st.booleans())
    def test_scale_identity(self, seed, c, ll):
        z, y, h, lam = _random_problem(seed)
        kind = "local_linear" if ll else "local_constant"
        a = loo_fit(z, y, SmootherConfig(kind, h, lam))
        b = loo_fit(c * z, y, SmootherConfig(kind, c * h, lam))
        np.testing.assert_array_equal(a.dropped, b.dropped)
        np.testing.assert_allclose(a.predictions, b.predictions, atol=1e-9, equal_nan=True)

    @settings(max_examples=80)
    @given(st.integers(0, 2**31), st.booleans())
    def test_sign_identity(self, seed, ll):
        z, y, h, lam = _random_problem(seed)
        cfg = SmootherConfig("local_linear" if ll else "local_constant", h, lam)
        a, b = loo_fit(z, y, cfg), loo_fit(-z, y, cfg)
        np.testing.assert_array_equal(a.dropped, b.dropped)
        np.testing.assert_allclose(a.predictions, b.predictions, atol=1e-12, equal_nan=True)


@pytest.mark.skipif("cython" not in smoother.available_backends(), reason="extension not built")
class TestBackendParity:
    @settings(max_examples=100)
    @given(st.integers(0, 2**31), st.booleans(), st.integers(2, 80))
    def test_same_results(self, seed, ll, n):
        z, y, h, lam = _random_problem(seed, n)
        cy, py = smoother.available_backends()["cython"], smoother.available_backends()["python"]
        cfg = SmootherConfig("local_linear" if ll else "local_constant", h, lam)
        a, b = loo_fit(z, y, cfg, backend=cy), loo_fit(z, y, cfg, backend=py)
        np.testing.assert_array_equal(a.dropped, b.dropped)
        np.testing.assert_allclose(a.predictions, b.predictions, atol=1e-10, equal_nan=True)
        np.testing.assert_allclose(a.mass, b.mass, atol=1e-12)
        sa, ka = loo_sse(z, y, cfg, backend=cy)
        sb, kb = loo_sse(z, y, cfg, backend=py)
        assert ka == kb
        assert sa == pytest.approx(sb, rel=1e-10, abs=1e-12)


class TestLooPredict:
    def test_never_nan(self):
        p = loo_predict(Z4, Y4, LC)
        np.testing.assert_allclose(p[:3], HAND_PRED, atol=1e-12)
        assert p[3] == 3.0  # nearest other index value is 0.2

    def test_threshold_not_applied(self):
        p = loo_predict(Z4, Y4, SmootherConfig("local_constant", 0.25, 5.0))
        np.testing.assert_allclose(p[:3], HAND_PRED, atol=1e-12)


class TestLinkEvaluate:
    def test_isolated_point(self):
        z = np.array([0.0, 1.0, 2.0])
        assert link_evaluate(1.0, z, np.array([5.0, 6.0, 7.0]), SmootherConfig(bandwidth=0.5)) == 6.0

    @given(arrays(float, 10, elements=st.floats(-3, 3)), st.floats(-3, 3))
    def test_constant_response(self, z, u):
        v = link_evaluate(u, z, np.full(10, 4.2), SmootherConfig("local_linear", 0.7))
        assert v is None or v == pytest.approx(4.2, abs=1e-9)

    def test_many_matches_single(self, rng):
        z, y = rng.standard_normal(30), rng.standard_normal(30)
        cfg = SmootherConfig("local_linear", 0.4)
        u = np.linspace(-3, 3, 13)
        many = link_evaluate_many(u, z, y, cfg)
        for ui, m in zip(u, many):
            s = link_evaluate(ui, z, y, cfg)
            assert (s is None and np.isnan(m)) or s == pytest.approx(m, abs=1e-14)


def test_config_validation():
    with pytest.raises(ValueError):
        SmootherConfig("cubic", 1.0)
    with pytest.raises(ValueError):
        SmootherConfig(bandwidth=0.0)
    with pytest.raises(ValueError):
        SmootherConfig(threshold=-1.0)


def test_pure_python_switch():
    import os
    import subprocess
    import sys

    env = dict(os.environ, FSIR_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import fsir; print(fsir.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
