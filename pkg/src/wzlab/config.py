"""Experiment configuration: a JSON file with fixed sections.

Unknown keys are rejected so that typos fail loudly.  Every value is checked
against the preconditions of the module that consumes it before any work
starts.
"""

import copy
import hashlib
import json
from pathlib import Path

from .errors import ConfigError, DomainError
from .source_model import SourceModel, channel_from_parameters, channel_params

DEFAULTS = {
    "seed": 20240601,
    "model": {
        "beta": [2.0, 1.0, 1.0],
        "sigma2": 1.0,
        "y_law": {"type": "uniform", "low": -1.0, "high": 1.0},
    },
    "channel": {"D": 0.5, "alpha": None, "sigma_phi2": None},
    "regression": {
        "mode": "parametric",
        "kernel": "gaussian",
        "n_test": 500,
        "reconstruction": "oracle",
        "kernel_gen": "mc",
    },
    "moments": {"n": 1000, "n_trials": 500, "analytic_means": False},
    "region": {
        "modes": ["parametric", "kernel"],
        "n_grid": [200, 1000, 5000],
        "epsilon_grid": [0.05, 0.1, 0.2],
        "D": 0.5,
        "g_grid": [1.0, 1.01, 1.02, 1.03, 1.05, 1.075, 1.1, 1.15, 1.2, 1.3],
        "d_grid": [0.5, 0.6, 0.7, 0.8, 0.9],
        "rate_grid": [0.3, 1.0],
        "channel_gaps": [0.02, 0.05, 0.1, 0.2, 0.35, 0.5],
        "n_trials": 500,
        "analytic_means": True,
        "mc_samples": 262144,
        "sampler": "sobol",
        "s_grid": 129,
        "refine": 2,
    },
    "codec": {
        "n": 10,
        "r1": 1.2,
        "r": 0.8,
        "trials": 200,
        "D": 0.5,
        "G": 1.2,
        "gamma_p": None,
        "gamma_c": None,
        "encoder": "likelihood",
        "shared_codebook": False,
        "bound_samples": 20000,
    },
    "asymptotic": {
        "d_grid": [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
        "rate_grid": [0.1, 0.3, 0.5, 1.0, 1.5, 2.0, 3.0],
        "G": 1.0,
    },
}


def _merge(base, override, path):
    out = copy.deepcopy(base)
    for k, v in override.items():
        key = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(key, "unknown key")
        if isinstance(base[k], dict) and k != "y_law":
            if not isinstance(v, dict):
                raise ConfigError(key, "expected an object")
            out[k] = _merge(base[k], v, key)
        elif k == "y_law":
            if not isinstance(v, dict):
                raise ConfigError(key, "expected an object")
            extra = set(v) - set(base[k])
            if extra:
                raise ConfigError(f"{key}.{sorted(extra)[0]}", "unknown key")
            out[k] = dict(base[k], **v)
        else:
            out[k] = v
    return out


def _number(d, key, path, positive=False, integer=False, low=None, high=None):
    v = d[key]
    name = f"{path}.{key}"
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(name, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(name, "expected an integer")
    if positive and not v > 0:
        raise ConfigError(name, f"must be positive, got {v}")
    if low is not None and v < low:
        raise ConfigError(name, f"must be >= {low}, got {v}")
    if high is not None and v > high:
        raise ConfigError(name, f"must be <= {high}, got {v}")
    return int(v) if integer else float(v)


def _number_list(d, key, path, **kw):
    v = d[key]
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{path}.{key}", "expected a nonempty list")
    return [_number({key: x}, key, path, **kw) for x in v]


class ExperimentConfig:
    """Validated configuration.  ``raw`` holds the merged dictionary."""

    def __init__(self, raw):
        self.raw = raw
        self._validate()

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
        return cls(_merge(DEFAULTS, d, ""))

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
        return cls.from_dict(d)

    def with_seed(self, seed):
        raw = copy.deepcopy(self.raw)
        raw["seed"] = seed
        return ExperimentConfig(raw)

    # ------------------------------------------------------------------

    def _validate(self):
        r = self.raw
        seed = r["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {seed!r}")

        m = r["model"]
        beta = m["beta"]
        if not isinstance(beta, list) or not beta:
            raise ConfigError("model.beta", "expected a nonempty list of numbers")
        _number_list(m, "beta", "model")
        _number(m, "sigma2", "model", positive=True)
        law = m["y_law"]
        if law.get("type") != "uniform":
            raise ConfigError("model.y_law.type", "only 'uniform' is supported")
        _number(law, "low", "model.y_law")
        _number(law, "high", "model.y_law")
        try:
            self.model = SourceModel(beta=tuple(beta), sigma2=m["sigma2"], y_low=law["low"], y_high=law["high"])
        except DomainError as exc:
            raise ConfigError("model", str(exc)) from None

        c = r["channel"]
        try:
            if c["alpha"] is not None or c["sigma_phi2"] is not None:
                if c["alpha"] is None or c["sigma_phi2"] is None:
                    raise ConfigError("channel", "give both alpha and sigma_phi2, or neither")
                self.channel = channel_from_parameters(self.model.sigma2, c["alpha"], c["sigma_phi2"])
            else:
                _number(c, "D", "channel", positive=True)
                self.channel = channel_params(self.model.sigma2, c["D"])
        except DomainError as exc:
            raise ConfigError("channel.D" if c["alpha"] is None else "channel.alpha", str(exc)) from None

        g = r["regression"]
        if g["mode"] not in ("parametric", "kernel"):
            raise ConfigError("regression.mode", "must be 'parametric' or 'kernel'")
        if g["kernel"] not in ("gaussian", "epanechnikov"):
            raise ConfigError("regression.kernel", "must be 'gaussian' or 'epanechnikov'")
        _number(g, "n_test", "regression", positive=True, integer=True)
        if g["reconstruction"] not in ("oracle", "plugin"):
            raise ConfigError("regression.reconstruction", "must be 'oracle' or 'plugin'")
        if g["kernel_gen"] not in ("mc", "quadrature"):
            raise ConfigError("regression.kernel_gen", "must be 'mc' or 'quadrature'")

        mo = r["moments"]
        n = _number(mo, "n", "moments", positive=True, integer=True)
        if g["mode"] == "parametric" and n < self.model.k:
            raise ConfigError("moments.n", f"parametric mode needs n >= k={self.model.k}")
        _number(mo, "n_trials", "moments", integer=True, low=2)
        if not isinstance(mo["analytic_means"], bool):
            raise ConfigError("moments.analytic_means", "expected true or false")

        rg = r["region"]
        for mode in rg["modes"]:
            if mode not in ("parametric", "kernel"):
                raise ConfigError("region.modes", f"unknown mode {mode!r}")
        _number_list(rg, "n_grid", "region", integer=True, low=max(2, self.model.k))
        _number_list(rg, "epsilon_grid", "region", positive=True, high=1.0 - 1e-12)
        _number(rg, "D", "region", positive=True, high=self.model.sigma2)
        _number_list(rg, "g_grid", "region", positive=True)
        _number_list(rg, "d_grid", "region", positive=True, high=self.model.sigma2)
        _number_list(rg, "rate_grid", "region", positive=True)
        _number_list(rg, "channel_gaps", "region", positive=True, high=1.0 - 1e-12)
        _number(rg, "n_trials", "region", integer=True, low=2)
        _number(rg, "mc_samples", "region", integer=True, low=16)
        _number(rg, "s_grid", "region", integer=True, low=5)
        _number(rg, "refine", "region", integer=True, low=0)
        if rg["sampler"] not in ("sobol", "pseudo"):
            raise ConfigError("region.sampler", "must be 'sobol' or 'pseudo'")
        if not isinstance(rg["analytic_means"], bool):
            raise ConfigError("region.analytic_means", "expected true or false")

        co = r["codec"]
        _number(co, "n", "codec", integer=True, positive=True, high=14)
        _number(co, "r1", "codec", positive=True)
        _number(co, "r", "codec", positive=True)
        _number(co, "trials", "codec", integer=True, positive=True)
        _number(co, "D", "codec", positive=True)
        _number(co, "G", "codec", positive=True)
        _number(co, "bound_samples", "codec", integer=True, positive=True)
        for k in ("gamma_p", "gamma_c"):
            if co[k] is not None:
                _number(co, k, "codec")
        if co["encoder"] not in ("likelihood", "first"):
            raise ConfigError("codec.encoder", "must be 'likelihood' or 'first'")
        if not isinstance(co["shared_codebook"], bool):
            raise ConfigError("codec.shared_codebook", "expected true or false")
        from .codec_sim import CodecConfig  # local: codec_sim imports heavy modules

        self.codec = CodecConfig(
            n=int(co["n"]), r1=float(co["r1"]), r=float(co["r"]),
            gamma_p=co["gamma_p"], gamma_c=co["gamma_c"], trials=int(co["trials"]),
            encoder=co["encoder"], shared_codebook=co["shared_codebook"],
            mode=g["mode"], kernel=g["kernel"], n_test=int(g["n_test"]),
        )

        a = r["asymptotic"]
        _number_list(a, "d_grid", "asymptotic", positive=True, high=self.model.sigma2)
        _number_list(a, "rate_grid", "asymptotic", positive=True)
        _number(a, "G", "asymptotic", low=self.model.sigma2)

    # ------------------------------------------------------------------

    @property
    def seed(self):
        return int(self.raw["seed"])

    def canonical_json(self):
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def trial_settings(self, mode=None):
        from .moments import TrialSettings

        g = self.raw["regression"]
        return TrialSettings(mode=mode or g["mode"], kernel=g["kernel"], n_test=int(g["n_test"]),
                             reconstruction=g["reconstruction"], kernel_gen=g["kernel_gen"])

    def solver(self):
        from .region import SolverConfig

        rg = self.raw["region"]
        return SolverConfig(mc_samples=int(rg["mc_samples"]), seed=self.seed, sampler=rg["sampler"],
                            s_grid=int(rg["s_grid"]), refine=int(rg["refine"]))
