import math

import pytest

from wzlab.codec_sim import CAUSES, CodecConfig, default_thresholds, run_codec, run_trial, theorem3_bound
from wzlab.errors import ConfigError
from wzlab.info_density import DensityTable
from wzlab.source_model import SourceModel, channel_params

MODEL = SourceModel()
CH = channel_params(1.0, 0.5)


@pytest.fixture(scope="module")
def table():
    return DensityTable.build(MODEL, CH)


def test_default_thresholds():
    gp, gc = default_thresholds(10, 2**12, 2**8)
    assert gp == pytest.approx(4 + math.log2(10))
    assert gp == pytest.approx(7.32, abs=5e-3)
    assert gc == pytest.approx(12 - math.log2(10))
    assert gc == pytest.approx(8.68, abs=5e-3)
    assert default_thresholds(1, 4, 2) == (1.0, 2.0)
    with pytest.raises(ConfigError):
        default_thresholds(0, 4, 2)


def test_sizes_and_additive_terms(table):
    cfg = CodecConfig(n=10, r1=1.2, r=0.8)
    assert (cfg.n_cb, cfg.m) == (4096, 256)
    b = theorem3_bound(MODEL, CH, cfg, 0.5, 1.2, mc_samples=50, table=table)
    assert b.covering == pytest.approx(1 / 10)
    assert b.packing == pytest.approx(1 / (2 * math.sqrt(10)))
    assert 0.0 <= b.bound <= 1.0


def test_config_validation():
    with pytest.raises(ConfigError):
        CodecConfig(r1=0.8, r=0.8)
    with pytest.raises(ConfigError):
        CodecConfig(n=30, r1=1.0, r=0.5)
    with pytest.raises(ConfigError):
        CodecConfig(encoder="greedy")
    with pytest.raises(ConfigError):
        CodecConfig(n=0)


def test_one_codeword_per_bin_is_never_ambiguous(table):
    cfg = CodecConfig(n=4, r1=1.5, r=1.5 - 1e-9, trials=40, gamma_p=-1e9)
    assert cfg.m == cfg.n_cb
    for t in range(cfg.trials):
        o = run_trial(MODEL, CH, cfg, 1, 0.5, 1.2, t, table)
        assert o.cause in ("none", "no-typical-codeword")


def test_permissive_decoder_threshold_is_ambiguous(table):
    cfg = CodecConfig(n=6, r1=1.5, r=0.5, trials=20, gamma_p=-1e9)
    causes = [run_trial(MODEL, CH, cfg, 1, 0.5, 1.2, t, table).cause for t in range(cfg.trials)]
    assert causes.count("ambiguous") >= 15


def test_outcome_fields(table):
    cfg = CodecConfig(n=8, r1=1.2, r=0.8, trials=30)
    for t in range(cfg.trials):
        o = run_trial(MODEL, CH, cfg, 2, 0.5, 1.2, t, table)
        assert o.cause in CAUSES
        if o.cause == "none":
            assert o.encode_ok and o.debin_ok and o.distortion >= 0 and o.gen_error >= 1.0
        else:
            assert o.excess and not o.debin_ok and math.isnan(o.distortion)


def test_first_encoder(table):
    cfg = CodecConfig(n=8, r1=1.2, r=0.8, trials=10, encoder="first")
    assert all(run_trial(MODEL, CH, cfg, 2, 0.5, 1.2, t, table).cause in CAUSES for t in range(10))


def test_determinism_and_threads():
    cfg = CodecConfig(n=8, r1=1.2, r=0.8, trials=12)
    a = run_codec(MODEL, CH, cfg, 0.5, 1.2, seed=9, threads=1, bound_samples=30)
    b = run_codec(MODEL, CH, cfg, 0.5, 1.2, seed=9, threads=3, bound_samples=30)
    assert a.outcomes == b.outcomes
    assert a.summary() == b.summary()
    assert sum(a.summary()["causes"].values()) == 12


def test_more_bins_reduce_ambiguity(table):
    def ambiguous(r):
        cfg = CodecConfig(n=8, r1=1.4, r=r, trials=60)
        return sum(run_trial(MODEL, CH, cfg, 5, 0.5, 1.2, t, table).cause == "ambiguous" for t in range(60))

    assert ambiguous(0.4) >= ambiguous(1.2)


def test_kernel_mode(table):
    cfg = CodecConfig(n=8, r1=1.2, r=1.0, trials=10, mode="kernel", n_test=100)
    for t in range(cfg.trials):
        o = run_trial(MODEL, CH, cfg, 3, 0.5, 1.2, t, table)
        if o.cause == "none":
            assert o.gen_error > 1.0


def test_bins_are_balanced():
    import numpy as np
    from wzlab.codec_sim import _bins

    cfg = CodecConfig(n=10, r1=1.2, r=0.8)
    counts = np.bincount(_bins(cfg, np.random.default_rng(0)), minlength=cfg.m)
    assert counts.min() == counts.max() == cfg.n_cb // cfg.m


def test_bound_reduces_to_additive_terms(table):
    cfg = CodecConfig(n=6, r1=1.2, r=0.8, gamma_p=-1e9, gamma_c=1e9)
    b = theorem3_bound(MODEL, CH, cfg, 1e9, 1e9, mc_samples=100, table=table)
    assert b.probability == 0.0
    assert b.bound == 1.0  # 2^gamma_c blows up the packing term


def test_decoded_distortion_concentrates(table):
    # the default gamma_p exceeds n I(U;Y) at this length, so lower it to get decodes
    cfg = CodecConfig(n=12, r1=1.2, r=1.0, trials=100, gamma_p=1.0)
    d = [o.distortion for o in (run_trial(MODEL, CH, cfg, 8, 0.5, 1.2, t, table) for t in range(cfg.trials))
         if o.debin_ok]
    assert len(d) >= 10
    assert sum(d) / len(d) == pytest.approx(0.5, rel=0.25)
