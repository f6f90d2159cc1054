"""Small-block quantize-and-bin simulator.

The encoder draws a random codebook of ``N_cb`` length-``n`` sequences from
``P_U``, randomly partitions it into ``M`` bins of (near) equal size, picks a codeword for the
source block and sends its bin index.  The decoder looks in that bin for the
unique codeword whose block information density with the side information
``y`` reaches ``gamma_p``, reconstructs ``x`` and refits the regression on
the decoded sequence.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
import math
from typing import Optional

import numpy as np

from .errors import ConfigError
from .info_density import DensityTable, LN2, info_density_ux, info_density_uy
from .regressors import (
    bandwidth,
    kernel_constants,
    kernel_fit,
    mc_generalization_error,
    ols_fit,
    ols_generalization_error,
)
from .errors import SingularDesign
from .rng import stream
from .source_model import SampleBatch, mmse_reconstruct, sample_batch

MAX_SYMBOLS = 2**24
NAMESPACE = 2
CAUSES = ("none", "no-typical-codeword", "no-candidate", "ambiguous")


def _pow2_ceil(x):
    # ceil(2**x) that ignores float noise just above an integer
    v = 2.0**x
    r = round(v)
    return int(r) if abs(v - r) < 1e-9 * max(1.0, v) else int(math.ceil(v))


def _pow2(x):
    return math.inf if x > 1023 else 2.0**x


def default_thresholds(n, n_cb, m):
    """``gamma_p = log2(N_cb / M) + log2 n`` and ``gamma_c = log2 N_cb - log2 n``."""
    if min(n, n_cb, m) < 1:
        raise ConfigError("codec", "sizes must be >= 1")
    return math.log2(n_cb / m) + math.log2(n), math.log2(n_cb) - math.log2(n)


@dataclass(frozen=True)
class CodecConfig:
    n: int = 10
    r1: float = 1.2
    r: float = 0.8
    gamma_p: Optional[float] = None
    gamma_c: Optional[float] = None
    trials: int = 200
    encoder: str = "likelihood"  # or "first"
    shared_codebook: bool = False
    mode: str = "parametric"
    kernel: str = "gaussian"
    n_test: int = 500

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("codec.n", "must be >= 1")
        if not self.r1 > self.r > 0:
            raise ConfigError("codec.r1", f"need r1 > r > 0, got r1={self.r1}, r={self.r}")
        if self.n_cb * self.n > MAX_SYMBOLS:
            raise ConfigError("codec.n", f"codebook of {self.n_cb} x {self.n} exceeds the {MAX_SYMBOLS}-symbol cap")
        if self.encoder not in ("likelihood", "first"):
            raise ConfigError("codec.encoder", "must be 'likelihood' or 'first'")
        if self.mode not in ("parametric", "kernel"):
            raise ConfigError("codec.mode", "must be 'parametric' or 'kernel'")
        if self.trials < 1:
            raise ConfigError("codec.trials", "must be >= 1")

    @property
    def n_cb(self):
        return _pow2_ceil(self.n * self.r1)

    @property
    def m(self):
        return _pow2_ceil(self.n * self.r)

    def thresholds(self):
        gp, gc = default_thresholds(self.n, self.n_cb, self.m)
        return (gp if self.gamma_p is None else self.gamma_p,
                gc if self.gamma_c is None else self.gamma_c)


@dataclass(frozen=True)
class TrialOutcome:
    trial_id: int
    encode_ok: bool
    debin_ok: bool
    cause: str
    distortion: float
    gen_error: float
    excess: bool


def _codebook(model, channel, cfg, seed, key):
    shape = (cfg.n_cb, cfg.n)
    y = model.sample_y(stream(seed, "codebook", 0, *key), shape)
    w = model.f(y) + math.sqrt(model.sigma2) * stream(seed, "codebook", 1, *key).standard_normal(shape)
    return channel.alpha * (w + channel.sigma_phi * stream(seed, "codebook", 2, *key).standard_normal(shape))


def _bins(cfg, rng):
    # balanced random partition: bin sizes differ by at most one
    bins = np.empty(cfg.n_cb, dtype=np.int64)
    bins[rng.permutation(cfg.n_cb)] = np.arange(cfg.n_cb) % cfg.m
    return bins


def _block_gen(u, y, model, channel, cfg, seed, key, h):
    b = SampleBatch(x=u / channel.alpha, y=y, u=u, n_noise=np.zeros_like(u), phi=np.zeros_like(u),
                    seed=seed, key=key)
    if cfg.mode == "parametric":
        try:
            return ols_generalization_error(ols_fit(b, channel, model), model)
        except SingularDesign:
            return math.inf
    fit = kernel_fit(b, channel, h, cfg.kernel)
    return mc_generalization_error(fit, model, cfg.n_test, seed, key=(NAMESPACE,) + tuple(key))


def _bandwidth(model, channel, cfg):
    if cfg.mode != "kernel":
        return None
    return bandwidth(cfg.n, kernel_constants(model, channel, cfg.kernel), channel)


def run_trial(model, channel, cfg, seed, D, G, trial_id=0, table=None):
    """One encode/debin/decode round.  Failures are outcomes, not exceptions."""
    table = table or DensityTable.build(model, channel)
    gamma_p, gamma_c = cfg.thresholds()
    src = sample_batch(model, channel, cfg.n, seed, batch_id=trial_id, namespace=NAMESPACE)
    key = (0,) if cfg.shared_codebook else (trial_id + 1,)
    book = _codebook(model, channel, cfg, seed, key)
    bins = _bins(cfg, stream(seed, "bins", *key))

    iota_x = info_density_ux(book, src.x[None, :], model, channel, table, on_underflow="sentinel").sum(axis=1)
    admissible = np.flatnonzero(iota_x <= gamma_c)

    def fail(cause, enc):
        return TrialOutcome(trial_id, enc, False, cause, math.nan, math.nan, True)

    if admissible.size == 0:
        return fail("no-typical-codeword", False)
    if cfg.encoder == "first":
        idx = int(admissible[0])
    else:
        logw = iota_x[admissible] * LN2
        p = np.exp(logw - logw.max())
        idx = int(stream(seed, "encoder", trial_id).choice(admissible, p=p / p.sum()))

    mates = np.flatnonzero(bins == bins[idx])
    iota_y = info_density_uy(book[mates], src.y[None, :], model, channel, table,
                             on_underflow="sentinel").sum(axis=1)
    cand = mates[iota_y >= gamma_p]
    if cand.size > 1:
        return fail("ambiguous", True)
    if cand.size == 0 or cand[0] != idx:
        return fail("no-candidate", True)

    u_hat = book[idx]
    x_hat = mmse_reconstruct(u_hat, src.y, model, channel)
    dist = float(np.mean((x_hat - src.x) ** 2))
    gen = float(_block_gen(u_hat, src.y, model, channel, cfg, seed, (trial_id,), _bandwidth(model, channel, cfg)))
    return TrialOutcome(trial_id, True, True, "none", dist, gen, dist >= D or gen >= G)


@dataclass(frozen=True)
class BoundTerms:
    probability: float
    probability_se: float
    covering: float  # N_cb / (2^gamma_p M)
    packing: float  # sqrt(2^gamma_c / N_cb) / 2
    bound: float


def theorem3_bound(model, channel, cfg, D, G, mc_samples=20000, seed=0, table=None):
    """Monte-Carlo estimate of the three-term excess-probability bound.

    The first term is ``P[T_p^c or T_c^c or T_d^c or T_g^c]`` under i.i.d.
    blocks from the test channel; ``T_g`` is evaluated per block.
    """
    table = table or DensityTable.build(model, channel)
    gamma_p, gamma_c = cfg.thresholds()
    h = _bandwidth(model, channel, cfg)
    bad = np.zeros(mc_samples, dtype=bool)
    for t in range(mc_samples):
        b = sample_batch(model, channel, cfg.n, seed, batch_id=t, namespace=NAMESPACE + 1)
        iy = info_density_uy(b.u, b.y, model, channel, table, on_underflow="sentinel").sum()
        ix = info_density_ux(b.u, b.x, model, channel, table, on_underflow="sentinel").sum()
        if iy < gamma_p or ix > gamma_c:
            bad[t] = True
            continue
        d = float(np.mean((mmse_reconstruct(b.u, b.y, model, channel) - b.x) ** 2))
        if d >= D:
            bad[t] = True
            continue
        bad[t] = _block_gen(b.u, b.y, model, channel, cfg, seed, (mc_samples + t,), h) >= G
    p = float(bad.mean())
    covering = _pow2(math.log2(cfg.n_cb) - gamma_p - math.log2(cfg.m))
    packing = 0.5 * _pow2(0.5 * (gamma_c - math.log2(cfg.n_cb)))
    return BoundTerms(
        probability=p,
        probability_se=math.sqrt(p * (1.0 - p) / mc_samples),
        covering=covering,
        packing=packing,
        bound=min(1.0, max(0.0, p + covering + packing)),
    )


@dataclass(frozen=True)
class CodecResult:
    outcomes: list
    eps_hat: float
    eps_se: float
    bound: BoundTerms
    config: CodecConfig

    def summary(self):
        causes = {c: sum(o.cause == c for o in self.outcomes) for c in CAUSES}
        return {
            "trials": len(self.outcomes),
            "eps_hat": self.eps_hat,
            "eps_se": self.eps_se,
            "bound": self.bound.bound,
            "bound_probability_term": self.bound.probability,
            "bound_covering_term": self.bound.covering,
            "bound_packing_term": self.bound.packing,
            "within_bound": bool(self.eps_hat <= self.bound.bound + 2.0 * self.eps_se),
            "causes": causes,
            "n_cb": self.config.n_cb,
            "m": self.config.m,
            "gamma_p": self.config.thresholds()[0],
            "gamma_c": self.config.thresholds()[1],
            "codec": asdict(self.config),
        }


def run_codec(model, channel, cfg, D, G, seed=0, threads=1, bound_samples=20000):
    """Run ``cfg.trials`` trials and the bound estimate."""
    table = DensityTable.build(model, channel)

    def one(t):
        return run_trial(model, channel, cfg, seed, D, G, trial_id=t, table=table)

    if threads <= 1:
        outcomes = [one(t) for t in range(cfg.trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(cfg.trials)))
    k = sum(o.excess for o in outcomes)
    eps = k / len(outcomes)
    bound = theorem3_bound(model, channel, cfg, D, G, bound_samples, seed, table)
    return CodecResult(outcomes, eps, math.sqrt(eps * (1.0 - eps) / len(outcomes)), bound, cfg)
