"""Regression on compressed pairs ``(U, Y)``: OLS and Nadaraya-Watson.

Both predictors regress ``U / alpha`` on ``Y``; since ``U / alpha = X + Phi``
the target has the same conditional mean ``f(y)`` as ``X`` with extra
variance ``sigma_phi2``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, linalg

from .errors import SingularDesign, DomainError
from .rng import stream

COND_LIMIT = 1e12
MASS_FLOOR = 1e-300

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


# --------------------------------------------------------------------------
# OLS


@dataclass(frozen=True)
class OlsFit:
    beta_hat: np.ndarray
    sigma_tilde: np.ndarray
    sigma_emp: np.ndarray
    n: int

    def predict(self, y):
        return np.polynomial.polynomial.polyval(y, self.beta_hat)


def ols_fit(batch, channel, model):
    """Least squares of ``u / alpha`` on the basis ``h(y)``.

    Solves ``(Y* Y*^T) beta_hat = Y* u / alpha`` with a Cholesky factorization.

    Raises
    ------
    SingularDesign
        If ``n < k`` or the Gram matrix has condition number above ``1e12``.
    """
    y = np.asarray(batch.y, dtype=float)
    n, k = y.size, model.k
    if n < k:
        raise SingularDesign(f"need n >= k for OLS, got n={n}, k={k}")
    ys = model.basis(y)
    gram = ys @ ys.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularDesign(f"design matrix ill-conditioned (cond={cond:.3g})")
    try:
        factor = linalg.cho_factor(gram)
    except linalg.LinAlgError as exc:
        raise SingularDesign("Gram matrix is not positive definite") from exc
    beta_hat = linalg.cho_solve(factor, ys @ np.asarray(batch.u, float)) / channel.alpha
    return OlsFit(beta_hat=beta_hat, sigma_tilde=model.sigma_tilde(), sigma_emp=gram / n, n=n)


def ols_generalization_error(fit, model, channel=None):
    """``(beta - beta_hat)^T Sigma_tilde (beta - beta_hat) + sigma2``, exact given the fit."""
    d = np.asarray(model.beta) - fit.beta_hat
    return float(d @ fit.sigma_tilde @ d) + model.sigma2


def ols_expected_error(model, channel, n, trace_term=None):
    """``sigma2 + s2 * E[Tr(Sigma_tilde Sigma^-1)] / n``; the trace defaults to ``k``."""
    t = model.k if trace_term is None else trace_term
    return model.sigma2 + channel.s2 * t / n


def spectral_ratio(model):
    """``lambda_max / lambda_min`` of ``Sigma_tilde``."""
    ev = np.linalg.eigvalsh(model.sigma_tilde())
    return float(ev[-1] / ev[0])


# --------------------------------------------------------------------------
# Kernels


@dataclass(frozen=True)
class Kernel:
    name: str
    second_moment: float  # int u^2 K(u) du
    roughness: float  # int K(u)^2 du

    def __call__(self, z):
        if self.name == "gaussian":
            return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        return np.where(np.abs(z) < 1.0, 0.75 * (1.0 - z * z), 0.0)


KERNELS = {
    "gaussian": Kernel("gaussian", 1.0, 1.0 / (2.0 * math.sqrt(math.pi))),
    "epanechnikov": Kernel("epanechnikov", 0.2, 0.6),
}


def get_kernel(kernel):
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return KERNELS[kernel]
    except KeyError:
        raise DomainError(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}") from None


@dataclass(frozen=True)
class KernelConstants:
    C1: float
    C2: float


def kernel_constants(model, channel=None, kernel="gaussian"):
    """Bias and variance constants of the kernel error expansion.

    ``C1 = int (2 f' p_Y' / p_Y + f'')^2 dy * (int u^2 K)^2`` and
    ``C2 = int 1 / p_Y dy * int K^2``, both over the support of ``Y``.
    """
    K = get_kernel(kernel)
    a, b = model.y_low, model.y_high

    def bias_sq(y):
        p = model.p_y(y)
        g = 2.0 * model.df(y) * model.dp_y(y) / p + model.d2f(y)
        return float(g * g)

    c1, _ = integrate.quad(bias_sq, a, b, epsabs=1e-13, epsrel=1e-12)
    c2, _ = integrate.quad(lambda y: 1.0 / float(model.p_y(y)), a, b, epsabs=1e-13, epsrel=1e-12)
    return KernelConstants(C1=c1 * K.second_moment**2, C2=c2 * K.roughness)


def bandwidth(n, constants, channel):
    """``h_n = (s2 * C2 / C1 * n) ** (-1/5)``."""
    if n < 1:
        raise DomainError("bandwidth needs n >= 1")
    if not constants.C1 > 0:
        raise DomainError("bandwidth rule needs C1 > 0 (f must be curved)")
    return (channel.s2 * constants.C2 / constants.C1 * n) ** -0.2


def kernel_expected_error(model, channel, n, kernel="gaussian", h=None):
    """Leading-order ``sigma2 + h^4 C1 / 4 + s2 C2 / (n h)``."""
    c = kernel_constants(model, channel, kernel)
    h = bandwidth(n, c, channel) if h is None else h
    return model.sigma2 + h**4 * c.C1 / 4.0 + channel.s2 * c.C2 / (n * h)


@dataclass(frozen=True)
class KernelFit:
    y_train: np.ndarray
    target: np.ndarray  # u / alpha
    h: float
    kernel: Kernel
    fallback: float

    def __call__(self, y):
        return kernel_predict(self, y)


def kernel_fit(batch, channel, h, kernel="gaussian"):
    if not h > 0:
        raise DomainError("bandwidth must be positive")
    target = np.asarray(batch.u, float) / channel.alpha
    return KernelFit(
        y_train=np.asarray(batch.y, float).copy(),
        target=target,
        h=float(h),
        kernel=get_kernel(kernel),
        fallback=float(np.mean(target)),
    )


def kernel_predict(fit, y, chunk=512):
    """Nadaraya-Watson estimate at ``y``; global mean where kernel mass underflows."""
    y = np.asarray(y, dtype=float)
    flat = np.atleast_1d(y).ravel()
    out = np.empty_like(flat)
    for start in range(0, flat.size, chunk):
        q = flat[start:start + chunk]
        w = fit.kernel((q[:, None] - fit.y_train[None, :]) / fit.h)
        mass = w.sum(axis=1)
        ok = mass >= MASS_FLOOR
        num = w @ fit.target
        out[start:start + chunk] = np.where(ok, num / np.where(ok, mass, 1.0), fit.fallback)
    return out.reshape(y.shape) if y.ndim else float(out[0])


# --------------------------------------------------------------------------
# Generalization error


def mc_generalization_error(predictor, model, n_test=500, seed=0, key=()):
    """Mean of ``(x - f_hat(y))^2`` over ``n_test`` fresh pairs from ``P_XY``."""
    if n_test < 1:
        raise DomainError("n_test must be >= 1")
    rng = stream(seed, "test", *key)
    y = model.sample_y(rng, n_test)
    x = model.f(y) + math.sqrt(model.sigma2) * rng.standard_normal(n_test)
    r = x - predictor(y)
    return float(np.mean(r * r))


def exact_generalization_error(predictor, model, panels=16):
    """``sigma2 + E[(f(Y) - f_hat(Y))^2]`` by Gauss-Legendre over the support of ``Y``."""
    edges = np.linspace(model.y_low, model.y_high, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    y = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel() * model.y_density
    r = model.f(y) - predictor(y)
    return model.sigma2 + float(w @ (r * r))
