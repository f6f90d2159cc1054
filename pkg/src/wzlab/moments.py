"""Monte-Carlo moments of the information-density / distortion / generalization vector.

Each trial draws a fresh length-``n`` block, trains a predictor on ``(U, Y)``
and records

    [-iota(U_1; Y_1), iota(U_1; X_1), d(X_1, X_hat_1), G(f_hat)]

where index 1 is the first symbol of the block.  ``G`` is the conditional
generalization error given the block: the exact quadratic form for OLS and a
500-point Monte-Carlo test average for the kernel predictor.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict, replace
import hashlib
import json
import math
import os
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import InsufficientSamples, NumericalError, ConfigError
from .info_density import DensityTable, info_density_uy, info_density_ux, mutual_informations
from .regressors import (
    bandwidth,
    exact_generalization_error,
    kernel_constants,
    kernel_fit,
    mc_generalization_error,
    ols_fit,
    ols_generalization_error,
)
from .source_model import mmse_reconstruct, sample_batch

MODES = ("parametric", "kernel")
# namespace of the batch streams used by moment trials
NAMESPACE = 1
MAX_ATTEMPTS = 64
PSD_TOL = 1e-9


@dataclass(frozen=True)
class InfoVector:
    neg_iota_uy: float
    iota_ux: float
    dist: float
    gen: float
    rejected: int = 0  # underflow resamples before this vector was accepted

    def as_array(self):
        return np.array([self.neg_iota_uy, self.iota_ux, self.dist, self.gen])


@dataclass(frozen=True)
class TrialSettings:
    mode: str = "parametric"
    kernel: str = "gaussian"
    n_test: int = 500
    reconstruction: str = "oracle"  # or "plugin"
    kernel_gen: str = "mc"  # or "quadrature"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError("regression.mode", f"must be one of {MODES}, got {self.mode!r}")
        if self.reconstruction not in ("oracle", "plugin"):
            raise ConfigError("regression.reconstruction", "must be 'oracle' or 'plugin'")
        if self.kernel_gen not in ("mc", "quadrature"):
            raise ConfigError("regression.kernel_gen", "must be 'mc' or 'quadrature'")
        if self.n_test < 1:
            raise ConfigError("regression.n_test", "must be >= 1")


def _one_trial(model, channel, n, seed, trial, settings, table, h):
    for attempt in range(MAX_ATTEMPTS):
        b = sample_batch(model, channel, n, seed, batch_id=trial, namespace=NAMESPACE, attempt=attempt)
        u0, x0, y0 = b.u[:1], b.x[:1], b.y[:1]
        neg_uy = -info_density_uy(u0, y0, model, channel, table, on_underflow="sentinel")[0]
        ux = info_density_ux(u0, x0, model, channel, table, on_underflow="sentinel")[0]
        if np.isfinite(neg_uy) and np.isfinite(ux):
            break
    else:
        raise NumericalError(f"trial {trial}: p_U underflow persisted over {MAX_ATTEMPTS} draws")

    if settings.mode == "parametric":
        fit = ols_fit(b, channel, model)
        predictor = fit.predict
        gen = ols_generalization_error(fit, model, channel)
    else:
        fit = kernel_fit(b, channel, h, settings.kernel)
        predictor = fit
        if settings.kernel_gen == "mc":
            gen = mc_generalization_error(fit, model, settings.n_test, seed, key=(NAMESPACE, trial, attempt))
        else:
            gen = exact_generalization_error(fit, model)

    f_hat = None if settings.reconstruction == "oracle" else predictor
    xh = mmse_reconstruct(u0, y0, model, channel, f_hat)
    dist = float((xh[0] - x0[0]) ** 2)
    return InfoVector(float(neg_uy), float(ux), dist, float(gen), rejected=attempt)


def sample_info_vectors(model, channel, n, mode="parametric", n_trials=500, seed=0,
                        settings: Optional[TrialSettings] = None, table=None, threads=1):
    """Draw ``n_trials`` independent information vectors.

    Trial ``t`` uses batch id ``t``, so the output does not depend on
    ``threads``.  Trials whose first symbol lands where ``p_U`` underflows are
    redrawn with a new attempt counter.
    """
    settings = settings or TrialSettings(mode=mode)
    if settings.mode == "parametric" and n < model.k:
        raise InsufficientSamples(f"parametric mode needs n >= k={model.k}")
    if n_trials < 2:
        raise InsufficientSamples("need at least 2 trials")
    table = table or DensityTable.build(model, channel)
    h = None
    if settings.mode == "kernel":
        h = bandwidth(n, kernel_constants(model, channel, settings.kernel), channel)

    def run(t):
        return _one_trial(model, channel, n, seed, t, settings, table, h)

    if threads <= 1:
        return [run(t) for t in range(n_trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(n_trials)))


@dataclass(frozen=True)
class MomentSummary:
    j: np.ndarray
    v: np.ndarray
    n_trials: int
    regression_mode: str
    n: int
    seed: Optional[int] = None
    distortion: Optional[float] = None
    rejected: int = 0
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        d = {
            "j": [float(x) for x in self.j],
            "v": [float(x) for x in np.asarray(self.v).ravel()],
            "n_trials": int(self.n_trials),
            "regression_mode": self.regression_mode,
            "n": int(self.n),
            "seed": None if self.seed is None else int(self.seed),
            "distortion": self.distortion,
            "rejected": int(self.rejected),
            "version": __version__,
        }
        d.update(self.meta)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        core = {
            "j": np.asarray(d.pop("j"), float),
            "v": np.asarray(d.pop("v"), float).reshape(4, 4),
            "n_trials": d.pop("n_trials"),
            "regression_mode": d.pop("regression_mode"),
            "n": d.pop("n"),
            "seed": d.pop("seed", None),
            "distortion": d.pop("distortion", None),
            "rejected": d.pop("rejected", 0),
        }
        d.pop("version", None)
        return cls(meta=d, **core)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @property
    def corr(self):
        sd = np.sqrt(np.diag(self.v))
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.v / np.outer(sd, sd)


def estimate_moments(vectors, n=None, mode=None, seed=None, distortion=None, meta=None):
    """Sample mean and unbiased sample covariance (divisor ``n_trials - 1``).

    The covariance is reported raw; it must be PSD to within ``1e-9`` relative
    to its largest eigenvalue.
    """
    if not len(vectors):
        raise InsufficientSamples("no vectors")
    if isinstance(vectors[0], InfoVector):
        arr = np.array([v.as_array() for v in vectors])
        rejected = sum(v.rejected for v in vectors)
    else:
        arr = np.asarray(vectors, dtype=float)
        rejected = 0
    if arr.shape[0] < 2:
        raise InsufficientSamples("covariance needs at least 2 vectors")
    j = arr.mean(axis=0)
    c = arr - j
    v = (c.T @ c) / (arr.shape[0] - 1)
    v = 0.5 * (v + v.T)
    ev = np.linalg.eigvalsh(v)
    if ev[0] < -PSD_TOL * max(1.0, ev[-1]):
        raise NumericalError(f"covariance estimate not PSD (min eigenvalue {ev[0]:.3g})")
    return MomentSummary(j=j, v=v, n_trials=arr.shape[0], regression_mode=mode or "unknown",
                         n=int(n or 0), seed=seed, distortion=distortion, rejected=rejected,
                         meta=dict(meta or {}))


def moment_key(model, channel, n, n_trials, seed, settings, analytic_means=False):
    payload = {
        "beta": list(model.beta), "sigma2": model.sigma2, "y": [model.y_low, model.y_high],
        "D": channel.distortion, "n": int(n), "n_trials": int(n_trials), "seed": int(seed),
        "settings": asdict(settings), "analytic_means": bool(analytic_means),
        "version": __version__,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class MomentCache:
    """Memoizes moment summaries in memory and optionally as JSON files on disk."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        self._mem = {}
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)

    def get(self, key):
        if key in self._mem:
            return self._mem[key]
        if self.directory:
            p = self.directory / f"{key}.json"
            if p.exists():
                s = MomentSummary.from_dict(json.loads(p.read_text()))
                self._mem[key] = s
                return s
        return None

    def put(self, key, summary):
        self._mem[key] = summary
        if self.directory:
            p = self.directory / f"{key}.json"
            tmp = p.with_suffix(".tmp")
            tmp.write_text(summary.to_json())
            os.replace(tmp, p)


def with_analytic_means(summary, model, channel, table=None):
    """Replace the sampled ``J_1, J_2, J_3`` by ``-I(U;Y)``, ``I(U;X)`` and ``D``.

    ``J_4`` and the covariance stay Monte Carlo.
    """
    mi = mutual_informations(model, channel, table)
    j = summary.j.copy()
    j[:3] = (-mi.i_uy_bits, mi.i_ux_bits, channel.distortion)
    meta = dict(summary.meta, j_sampled=[float(x) for x in summary.j], means="analytic")
    return replace(summary, j=j, meta=meta)


def compute_moments(model, channel, n, n_trials=500, seed=0, settings=None, threads=1,
                    cache=None, table=None, analytic_means=False):
    """Sample and summarize, going through ``cache`` when given."""
    settings = settings or TrialSettings()
    key = moment_key(model, channel, n, n_trials, seed, settings, analytic_means)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    table = table or DensityTable.build(model, channel)
    vecs = sample_info_vectors(model, channel, n, n_trials=n_trials, seed=seed,
                               settings=settings, table=table, threads=threads)
    s = estimate_moments(vecs, n=n, mode=settings.mode, seed=seed, distortion=channel.distortion,
                         meta={"cache_key": key, "sigma2": model.sigma2, "means": "sampled"})
    if analytic_means:
        s = with_analytic_means(s, model, channel, table)
    if cache is not None:
        cache.put(key, s)
    return s
