import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wzlab.errors import DomainError, SingularDesign
from wzlab.regressors import (
    KERNELS,
    bandwidth,
    exact_generalization_error,
    kernel_constants,
    kernel_fit,
    kernel_predict,
    mc_generalization_error,
    ols_expected_error,
    ols_fit,
    ols_generalization_error,
    spectral_ratio,
)
from wzlab.source_model import SampleBatch, SourceModel, channel_params, sample_batch

MODEL = SourceModel()
CH = channel_params(1.0, 0.5)


def noiseless_batch(model, ch, y):
    x = model.f(y)
    z = np.zeros_like(y)
    return SampleBatch(x=x, y=y, u=ch.alpha * x, n_noise=z, phi=z, seed=0, key=())


def test_ols_exact_recovery():
    y = np.linspace(-1, 1, 9)
    fit = ols_fit(noiseless_batch(MODEL, CH, y), CH, MODEL)
    np.testing.assert_allclose(fit.beta_hat, MODEL.beta, atol=1e-9)
    assert ols_generalization_error(fit, MODEL) == pytest.approx(1.0, abs=1e-15)


def test_ols_underdetermined():
    with pytest.raises(SingularDesign):
        ols_fit(sample_batch(MODEL, CH, 2, seed=1), CH, MODEL)


def test_ols_ill_conditioned():
    y = np.array([0.5, 0.5, 0.5, 0.5])
    with pytest.raises(SingularDesign):
        ols_fit(noiseless_batch(MODEL, CH, y), CH, MODEL)


def test_ols_unbiased():
    fits = np.array([ols_fit(sample_batch(MODEL, CH, 100, 3, t), CH, MODEL).beta_hat for t in range(2000)])
    se = fits.std(axis=0, ddof=1) / math.sqrt(fits.shape[0])
    assert np.all(np.abs(fits.mean(axis=0) - MODEL.beta) <= 3 * se)


def test_ols_sigma_matrices():
    fit = ols_fit(sample_batch(MODEL, CH, 50, seed=2), CH, MODEL)
    np.testing.assert_allclose(fit.sigma_emp, fit.sigma_emp.T)
    assert np.all(np.linalg.eigvalsh(fit.sigma_emp) > 0)
    np.testing.assert_allclose(fit.sigma_tilde, MODEL.sigma_tilde())


def test_ols_expected_error_matches_trace_oracle():
    n, trials = 1000, 2000
    gens, traces = [], []
    for t in range(trials):
        fit = ols_fit(sample_batch(MODEL, CH, n, 4, t), CH, MODEL)
        gens.append(ols_generalization_error(fit, MODEL))
        traces.append(np.trace(fit.sigma_tilde @ np.linalg.inv(fit.sigma_emp)))
    oracle = ols_expected_error(MODEL, CH, n, np.mean(traces))
    assert oracle == pytest.approx(1.006, abs=1e-3)
    assert np.mean(gens) == pytest.approx(oracle, abs=0.005)


@pytest.mark.parametrize("n", [20, 100, 1000])
def test_ols_upper_bound(n):
    gens = [ols_generalization_error(ols_fit(sample_batch(MODEL, CH, n, 5, t), CH, MODEL), MODEL)
            for t in range(400)]
    bound = MODEL.sigma2 + CH.s2 * MODEL.k * spectral_ratio(MODEL) / n
    assert np.mean(gens) <= bound


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(3, 60))
def test_ols_gen_at_least_noise_floor(seed, n):
    try:
        fit = ols_fit(sample_batch(MODEL, CH, n, seed), CH, MODEL)
    except SingularDesign:
        return
    assert ols_generalization_error(fit, MODEL) >= MODEL.sigma2


def test_kernel_constants_default():
    c = kernel_constants(MODEL, CH)
    assert c.C1 == pytest.approx(8.0, rel=1e-12)
    assert c.C2 == pytest.approx(2 / math.sqrt(math.pi), rel=1e-12)


def test_kernel_constants_scaling():
    c = kernel_constants(MODEL, CH)
    c2 = kernel_constants(SourceModel(beta=(2.0, 1.0, 2.0)), CH)
    assert c2.C1 == pytest.approx(4 * c.C1)
    assert c2.C2 == pytest.approx(c.C2)


@pytest.mark.parametrize("name", sorted(KERNELS))
def test_kernel_moment_conditions(name):
    from scipy import integrate

    K = KERNELS[name]
    total = integrate.quad(lambda z: float(K(np.array(z))), -np.inf, np.inf)[0]
    first = integrate.quad(lambda z: z * float(K(np.array(z))), -np.inf, np.inf)[0]
    second = integrate.quad(lambda z: z * z * float(K(np.array(z))), -np.inf, np.inf)[0]
    rough = integrate.quad(lambda z: float(K(np.array(z))) ** 2, -np.inf, np.inf)[0]
    assert total == pytest.approx(1.0, abs=1e-8)
    assert first == pytest.approx(0.0, abs=1e-8)
    assert second == pytest.approx(K.second_moment, abs=1e-8)
    assert rough == pytest.approx(K.roughness, abs=1e-8)


def test_bandwidth_values():
    c = kernel_constants(MODEL, CH)
    assert bandwidth(500, c, CH) == pytest.approx(0.3716, abs=1e-4)
    assert bandwidth(32 * 500, c, CH) / bandwidth(500, c, CH) == pytest.approx(0.5, rel=1e-12)
    hs = [bandwidth(n, c, CH) for n in (10, 1e3, 1e6, 1e9)]
    assert all(a > b for a, b in zip(hs, hs[1:]))
    assert 1e9 * hs[-1] > 1e6 * hs[-2]
    with pytest.raises(DomainError):
        bandwidth(0, c, CH)


def test_kernel_constant_function():
    m = SourceModel(beta=(1.5, 0.0, 0.0))
    y = np.random.default_rng(0).uniform(-1, 1, 50)
    fit = kernel_fit(noiseless_batch(m, CH, y), CH, 0.2)
    np.testing.assert_allclose(kernel_predict(fit, np.linspace(-1, 1, 11)), 1.5, rtol=1e-12)


def test_kernel_localization():
    y = np.array([-0.5, 0.0, 0.5])
    b = noiseless_batch(MODEL, CH, y)
    fit = kernel_fit(b, CH, 1e-3)
    np.testing.assert_allclose(kernel_predict(fit, y), b.u / CH.alpha, rtol=1e-12)


def test_kernel_fallback_when_mass_underflows():
    y = np.array([-0.9, 0.9])
    b = noiseless_batch(MODEL, CH, y)
    fit = kernel_fit(b, CH, 1e-4)
    val = kernel_predict(fit, 0.0)
    assert val == pytest.approx(np.mean(b.u / CH.alpha))
    eps = kernel_fit(b, CH, 1e-4, kernel="epanechnikov")
    assert kernel_predict(eps, 0.0) == pytest.approx(np.mean(b.u / CH.alpha))


def test_kernel_scalar_and_shape():
    fit = kernel_fit(sample_batch(MODEL, CH, 100, seed=1), CH, 0.3)
    assert isinstance(kernel_predict(fit, 0.1), float)
    assert kernel_predict(fit, np.zeros((2, 3))).shape == (2, 3)


def test_mc_generalization_error():
    g = mc_generalization_error(MODEL.f, MODEL, 200_000, seed=1)
    assert abs(g - 1.0) <= 3 * math.sqrt(2.0 / 200_000)
    assert mc_generalization_error(MODEL.f, MODEL, 500, seed=7) == mc_generalization_error(MODEL.f, MODEL, 500, seed=7)


def test_zero_predictor_error():
    from scipy import integrate

    ef2 = integrate.quad(lambda y: MODEL.f(y) ** 2 * 0.5, -1, 1)[0]
    assert ef2 == pytest.approx(88 / 15, rel=1e-12)
    zero = lambda y: np.zeros_like(y)  # noqa: E731
    assert exact_generalization_error(zero, MODEL) == pytest.approx(1 + 88 / 15, rel=1e-12)
    g = mc_generalization_error(zero, MODEL, 200_000, seed=2)
    assert g == pytest.approx(1 + 88 / 15, rel=0.02)


def test_kernel_interior_matches_pointwise_expansion():
    # away from the edges of the support the bias^2 + variance expansion holds
    n, trials = 5000, 200
    c = kernel_constants(MODEL, CH)
    h = bandwidth(n, c, CH)
    x, w = np.polynomial.legendre.leggauss(64)
    y = 0.5 * x
    got = []
    for t in range(trials):
        fit = kernel_fit(sample_batch(MODEL, CH, n, 31, t), CH, h)
        got.append(0.25 * w @ (MODEL.f(y) - fit(y)) ** 2)
    # P(|Y| < 1/2) (h^4 (f''/2)^2 + s2 R(K) / (n h p_Y))
    pred = 0.5 * (h**4 + CH.s2 * KERNELS["gaussian"].roughness / (n * h * 0.5))
    assert np.mean(got) == pytest.approx(pred, rel=0.15)


def test_kernel_excess_decreases():
    c = kernel_constants(MODEL, CH)
    ex = []
    for n in (200, 1000, 5000):
        h = bandwidth(n, c, CH)
        ex.append(np.mean([exact_generalization_error(kernel_fit(sample_batch(MODEL, CH, n, 9, t), CH, h), MODEL)
                           for t in range(50)]) - 1.0)
    assert ex[0] > ex[1] > ex[2] > 0
