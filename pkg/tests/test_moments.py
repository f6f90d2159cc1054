import json

import numpy as np
import pytest

from wzlab.errors import ConfigError, InsufficientSamples
from wzlab.info_density import DensityTable, mutual_informations
from wzlab.moments import (
    MomentCache,
    MomentSummary,
    TrialSettings,
    compute_moments,
    estimate_moments,
    moment_key,
    sample_info_vectors,
    with_analytic_means,
)
from wzlab.source_model import SourceModel, channel_params

MODEL = SourceModel()
CH = channel_params(1.0, 0.5)


@pytest.fixture(scope="module")
def table():
    return DensityTable.build(MODEL, CH)


@pytest.fixture(scope="module")
def vectors(table):
    return sample_info_vectors(MODEL, CH, 200, n_trials=400, seed=11, table=table)


def test_identical_vectors_zero_covariance():
    s = estimate_moments([[1.0, 2.0, 3.0, 4.0]] * 5)
    np.testing.assert_allclose(s.j, [1, 2, 3, 4])
    np.testing.assert_allclose(s.v, 0.0, atol=1e-15)


def test_unbiased_divisor():
    s = estimate_moments([[0, 0, 0, 0], [2, 0, 0, 0]])
    assert s.v[0, 0] == pytest.approx(2.0)


def test_too_few_vectors():
    with pytest.raises(InsufficientSamples):
        estimate_moments([[1, 2, 3, 4]])
    with pytest.raises(InsufficientSamples):
        estimate_moments([])
    with pytest.raises(InsufficientSamples):
        sample_info_vectors(MODEL, CH, 2, n_trials=10)
    with pytest.raises(InsufficientSamples):
        sample_info_vectors(MODEL, CH, 20, n_trials=1)


def test_settings_validation():
    with pytest.raises(ConfigError):
        TrialSettings(mode="spline")
    with pytest.raises(ConfigError):
        TrialSettings(reconstruction="magic")


def test_json_round_trip(vectors):
    s = estimate_moments(vectors, n=200, mode="parametric", seed=11, distortion=0.5, meta={"sigma2": 1.0})
    back = MomentSummary.from_dict(json.loads(s.to_json()))
    np.testing.assert_array_equal(back.j, s.j)
    np.testing.assert_array_equal(back.v, s.v)
    assert (back.n, back.n_trials, back.regression_mode, back.seed) == (200, 400, "parametric", 11)
    assert back.meta["sigma2"] == 1.0


def test_covariance_is_psd(vectors):
    s = estimate_moments(vectors)
    np.testing.assert_allclose(s.v, s.v.T)
    assert np.linalg.eigvalsh(s.v).min() >= -1e-12


def test_means_near_analytic(vectors):
    s = estimate_moments(vectors)
    se = np.sqrt(np.diag(s.v) / s.n_trials)
    mi = mutual_informations(MODEL, CH)
    assert abs(s.j[0] + mi.i_uy_bits) <= 4 * se[0]
    assert abs(s.j[1] - mi.i_ux_bits) <= 4 * se[1]
    assert abs(s.j[2] - 0.5) <= 4 * se[2]
    assert s.j[3] > 1.0


def test_thread_invariance(table):
    a = sample_info_vectors(MODEL, CH, 50, n_trials=40, seed=3, table=table, threads=1)
    b = sample_info_vectors(MODEL, CH, 50, n_trials=40, seed=3, table=table, threads=4)
    assert a == b


def test_kernel_mode_runs(table):
    st = TrialSettings(mode="kernel", n_test=200)
    vec = sample_info_vectors(MODEL, CH, 100, n_trials=20, seed=3, settings=st, table=table)
    assert all(v.gen > 0.9 for v in vec)


def test_plugin_reconstruction_is_worse_or_equal_on_average(table):
    oracle = sample_info_vectors(MODEL, CH, 30, n_trials=300, seed=5, table=table)
    plug = sample_info_vectors(MODEL, CH, 30, n_trials=300, seed=5, table=table,
                               settings=TrialSettings(reconstruction="plugin"))
    assert np.mean([v.dist for v in plug]) >= np.mean([v.dist for v in oracle]) - 0.05
    assert [v.iota_ux for v in plug] == [v.iota_ux for v in oracle]


def test_analytic_means(vectors, table):
    s = estimate_moments(vectors, distortion=0.5)
    a = with_analytic_means(s, MODEL, CH, table)
    mi = mutual_informations(MODEL, CH, table)
    np.testing.assert_allclose(a.j[:3], [-mi.i_uy_bits, mi.i_ux_bits, 0.5])
    assert a.j[3] == s.j[3]
    np.testing.assert_array_equal(a.v, s.v)
    assert a.meta["j_sampled"] == [float(x) for x in s.j]


def test_generalization_decreases_with_n(table):
    g = [estimate_moments(sample_info_vectors(MODEL, CH, n, n_trials=200, seed=1, table=table)).j[3]
         for n in (20, 200)]
    assert g[0] > g[1]


def test_cache_memory_and_disk(tmp_path, table):
    st = TrialSettings()
    c = MomentCache(tmp_path)
    s1 = compute_moments(MODEL, CH, 30, 20, seed=2, settings=st, cache=c, table=table)
    assert compute_moments(MODEL, CH, 30, 20, seed=2, settings=st, cache=c) is s1
    files = list(tmp_path.glob("*.json"))
    assert len(files) == 1
    s2 = compute_moments(MODEL, CH, 30, 20, seed=2, settings=st, cache=MomentCache(tmp_path))
    np.testing.assert_array_equal(s2.j, s1.j)
    np.testing.assert_array_equal(s2.v, s1.v)


def test_moment_key_sensitivity():
    st = TrialSettings()
    k = moment_key(MODEL, CH, 30, 20, 2, st)
    assert k == moment_key(MODEL, CH, 30, 20, 2, st)
    assert k != moment_key(MODEL, CH, 30, 20, 3, st)
    assert k != moment_key(MODEL, channel_params(1.0, 0.4), 30, 20, 2, st)
    assert k != moment_key(MODEL, CH, 30, 20, 2, st, analytic_means=True)
    assert k != moment_key(MODEL, CH, 30, 20, 2, TrialSettings(mode="kernel"))
