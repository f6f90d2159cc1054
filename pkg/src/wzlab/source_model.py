"""Source model ``X = f(Y) + N``, the Gaussian test channel, and sampling.

The regression function is a polynomial ``f(y) = sum_i beta_i * y**i``
(monomial basis ``h_i(y) = y**i``) and ``Y`` is uniform on a bounded
interval.  The test channel maps ``X`` to ``U = alpha * (X + Phi)`` with
``Phi ~ N(0, sigma_phi2)`` independent of everything else.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DomainError
from .rng import stream

# Channel identity (alpha - 1)^2 sigma^2 + alpha^2 sigma_phi^2 = D holds to
# this relative precision; looser means the channel was built inconsistently.
_CHANNEL_RTOL = 1e-9


@dataclass(frozen=True)
class SourceModel:
    """Joint law of ``(X, Y)``.

    Parameters
    ----------
    beta : tuple of float
        Polynomial coefficients, lowest order first.
    sigma2 : float
        Variance of the Gaussian noise ``N``.
    y_low, y_high : float
        Support of the uniform law of ``Y``.
    """

    beta: tuple = (2.0, 1.0, 1.0)
    sigma2: float = 1.0
    y_low: float = -1.0
    y_high: float = 1.0
    _beta_arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        if len(beta) == 0:
            raise DomainError("beta must have at least one coefficient")
        if not all(np.isfinite(beta)):
            raise DomainError("beta must be finite")
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.y_low < self.y_high:
            raise DomainError("y_low must be smaller than y_high")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "_beta_arr", np.array(beta))

    @property
    def k(self):
        """Regression order (number of basis functions)."""
        return len(self.beta)

    @property
    def min_loss(self):
        """Minimum expected loss over the model class, which is ``sigma2``."""
        return self.sigma2

    @property
    def y_density(self):
        return 1.0 / (self.y_high - self.y_low)

    def basis(self, y):
        """Design matrix ``Y*`` of shape ``(k, n)`` with rows ``y**i``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return np.vander(y, self.k, increasing=True).T

    def f(self, y):
        return P.polyval(y, self._beta_arr)

    def df(self, y):
        return P.polyval(y, P.polyder(self._beta_arr)) + 0.0 * np.asarray(y, float)

    def d2f(self, y):
        return P.polyval(y, P.polyder(self._beta_arr, 2)) + 0.0 * np.asarray(y, float)

    def p_y(self, y):
        y = np.asarray(y, dtype=float)
        inside = (y >= self.y_low) & (y <= self.y_high)
        return np.where(inside, self.y_density, 0.0)

    def dp_y(self, y):
        return np.zeros_like(np.asarray(y, dtype=float))

    def y_moment(self, m):
        """``E[Y**m]`` for the uniform law."""
        a, b = self.y_low, self.y_high
        return (b ** (m + 1) - a ** (m + 1)) / ((m + 1) * (b - a))

    def sigma_tilde(self):
        """Second-moment matrix ``E[h(Y) h(Y)^T]`` of the basis vector."""
        k = self.k
        return np.array([[self.y_moment(i + j) for j in range(k)] for i in range(k)])

    def sample_y(self, rng, n):
        return rng.uniform(self.y_low, self.y_high, size=n)

    def is_constant(self):
        return all(b == 0.0 for b in self.beta[1:])


@dataclass(frozen=True)
class TestChannel:
    """Gaussian test channel ``U = alpha (X + Phi)`` designed for distortion ``D``."""

    distortion: float
    alpha: float
    sigma_phi2: float
    sigma2: float

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not (self.alpha > 0 and self.sigma_phi2 > 0):
            raise DomainError("alpha and sigma_phi2 must be strictly positive")
        resid = (self.alpha - 1.0) ** 2 * self.sigma2 + self.alpha**2 * self.sigma_phi2
        if abs(resid - self.distortion) > _CHANNEL_RTOL * max(1.0, self.distortion):
            raise DomainError("channel parameters inconsistent with the distortion target")

    @property
    def sigma_phi(self):
        return float(np.sqrt(self.sigma_phi2))

    @property
    def s2(self):
        """Variance of ``U / alpha`` given ``Y``: ``sigma2 + sigma_phi2``."""
        return self.sigma2 + self.sigma_phi2


def channel_params(sigma2, D):
    """Build the test channel that reaches distortion ``D`` for noise ``sigma2``.

    ``alpha = (sigma2 - D) / sigma2`` and ``sigma_phi2 = D sigma2 / (sigma2 - D)``.
    Raises :class:`DomainError` unless ``0 < D < sigma2``.
    """
    sigma2 = float(sigma2)
    D = float(D)
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    if not 0.0 < D < sigma2:
        raise DomainError(f"distortion must lie in (0, sigma2={sigma2}), got {D}")
    alpha = (sigma2 - D) / sigma2
    sigma_phi2 = D * sigma2 / (sigma2 - D)
    return TestChannel(distortion=D, alpha=alpha, sigma_phi2=sigma_phi2, sigma2=sigma2)


def channel_from_parameters(sigma2, alpha, sigma_phi2):
    """Channel given explicit ``(alpha, sigma_phi2)``; they must be the MMSE pair."""
    D = (alpha - 1.0) ** 2 * sigma2 + alpha**2 * sigma_phi2
    ch = channel_params(sigma2, D)
    if not (np.isclose(ch.alpha, alpha, rtol=1e-9) and np.isclose(ch.sigma_phi2, sigma_phi2, rtol=1e-9)):
        raise DomainError(
            "alpha/sigma_phi2 do not form an MMSE test channel "
            f"(expected sigma_phi2={ch.sigma_phi2:.6g} for alpha={alpha:.6g})"
        )
    return ch


@dataclass(frozen=True)
class SampleBatch:
    """``n`` i.i.d. realizations of ``(X, Y, U)`` with their noise terms."""

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    n_noise: np.ndarray
    phi: np.ndarray
    seed: int
    key: tuple

    def __len__(self):
        return self.x.shape[0]


def sample_batch(model, channel, n, seed, batch_id=0, namespace=0, attempt=0):
    """Draw a reproducible batch of length ``n``.

    Each of ``Y``, ``N`` and ``Phi`` has its own stream keyed by
    ``(namespace, batch_id, attempt)``, so the first ``m`` samples of a batch
    do not depend on ``n`` and do not depend on the channel beyond scaling.
    """
    n = int(n)
    if n < 1:
        raise DomainError("batch size must be at least 1")
    key = (namespace, batch_id, attempt)
    y = model.sample_y(stream(seed, "y", *key), n)
    noise = np.sqrt(model.sigma2) * stream(seed, "noise", *key).standard_normal(n)
    phi = channel.sigma_phi * stream(seed, "phi", *key).standard_normal(n)
    x = model.f(y) + noise
    u = channel.alpha * (x + phi)
    return SampleBatch(x=x, y=y, u=u, n_noise=noise, phi=phi, seed=int(seed), key=key)


def mmse_reconstruct(u, y, model, channel, f_hat: Optional[Callable] = None):
    """Decoder estimate ``x_hat = u + (1 - alpha) f(y)``.

    With the true ``f`` the residual is ``(alpha - 1) N + alpha Phi`` and the
    mean squared error equals the channel distortion.  Passing ``f_hat``
    substitutes a fitted regression function (plug-in reconstruction).
    """
    f = model.f if f_hat is None else f_hat
    return np.asarray(u, dtype=float) + (1.0 - channel.alpha) * f(y)
