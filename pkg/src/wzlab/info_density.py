"""Densities of ``W = f(Y)`` and ``U``, and the information densities.

``U = alpha (W + N + Phi)`` so ``p_U`` is the convolution of ``p_W`` with a
centered Gaussian of variance ``s2 = sigma2 + sigma_phi2`` (in ``U / alpha``
units).  For a quadratic ``f`` with positive leading coefficient the
convolution is integrated adaptively over the compact support of ``W``.  The
change of variables ``w = w_vertex + t**2`` removes the inverse square-root
singularity of ``p_W`` at the vertex, leaving a piecewise constant weight.

All information densities are returned in bits.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, interpolate, special

from .errors import DomainError, IntegrationError

LN2 = math.log(2.0)
UNDERFLOW = 1e-300
LOG_UNDERFLOW = math.log(UNDERFLOW)
# p_U support is truncated this many conditional standard deviations
# beyond alpha * [w_min, w_max].
SUPPORT_SIGMAS = 6.0
QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-11
# Stated per-evaluation accuracy; quadrature reports above this raise.
QUAD_TOL = 1e-8

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _quadratic_geometry(model):
    """Vertex value and constant-multiplicity pieces of ``W = f(Y)``.

    Returns ``(w_vertex, pieces)`` with ``pieces`` a list of
    ``(w_lo, w_hi, n_roots)``.
    """
    if model.k != 3 or not model.beta[2] > 0:
        raise DomainError("closed-form p_W needs a quadratic f with beta_2 > 0")
    b0, b1, b2 = model.beta
    a, b = model.y_low, model.y_high
    y_vertex = -b1 / (2.0 * b2)
    w_vertex = b0 - b1 * b1 / (4.0 * b2)
    fa, fb = float(model.f(a)), float(model.f(b))
    lo_end, hi_end = min(fa, fb), max(fa, fb)
    if a < y_vertex < b:
        pieces = [(w_vertex, lo_end, 2), (lo_end, hi_end, 1)]
    else:
        pieces = [(lo_end, hi_end, 1)]
    return w_vertex, [p for p in pieces if p[1] > p[0]]


def w_support(model):
    """``[min f, max f]`` over the support of ``Y``."""
    a, b = model.y_low, model.y_high
    cands = [float(model.f(a)), float(model.f(b))]
    if model.k >= 3:
        crit = np.polynomial.polynomial.polyroots(np.polynomial.polynomial.polyder(model.beta))
        cands += [float(model.f(r.real)) for r in crit if abs(r.imag) < 1e-12 and a < r.real < b]
    return min(cands), max(cands)


def pdf_w(w, model):
    """Density of ``W = beta_0 + beta_1 Y + beta_2 Y**2`` for uniform ``Y``.

    Each root of ``f(y) = w`` inside the support contributes
    ``p_Y / |f'(y)| = p_Y / sqrt(disc)``; for ``Y ~ U[-1, 1]`` this gives
    ``1/sqrt(disc)`` with two roots and half of that with one.
    """
    if model.k != 3 or not model.beta[2] > 0:
        raise DomainError("pdf_w formula needs a quadratic f with beta_2 > 0")
    b0, b1, b2 = model.beta
    w = np.asarray(w, dtype=float)
    disc = b1 * b1 + 4.0 * b2 * (w - b0)
    root = np.sqrt(np.where(disc > 0, disc, 0.0))
    y1 = (-b1 - root) / (2.0 * b2)
    y2 = (-b1 + root) / (2.0 * b2)
    a, b = model.y_low, model.y_high
    count = ((y1 >= a) & (y1 <= b)).astype(float) + ((y2 >= a) & (y2 <= b)).astype(float)
    with np.errstate(divide="ignore"):
        dens = np.where(disc > 0, count * model.y_density / np.where(disc > 0, root, 1.0), 0.0)
    return dens if dens.ndim else float(dens)


def _log_normal(x, mean, var):
    return -0.5 * (x - mean) ** 2 / var - 0.5 * np.log(2.0 * np.pi * var)


def _log_pdf_v_wconv(v, model, s2):
    """``log p_V(v)`` for ``V = W + N + Phi`` by adaptive quadrature over W."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    w_vertex, pieces = _quadratic_geometry(model)
    w_min, w_max = pieces[0][0], pieces[-1][1]
    d = np.where(v < w_min, w_min - v, np.where(v > w_max, v - w_max, 0.0))
    d2 = d * d
    weight = model.y_density / math.sqrt(model.beta[2])

    def integrand(t):
        w = w_vertex + t * t
        return np.exp(-((v - w) ** 2 - d2) / (2.0 * s2))

    total = np.zeros_like(v)
    for w_lo, w_hi, mult in pieces:
        t_lo = math.sqrt(max(w_lo - w_vertex, 0.0))
        t_hi = math.sqrt(w_hi - w_vertex)
        res, err = integrate.quad_vec(
            integrand, t_lo, t_hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, norm="max"
        )
        if err > QUAD_TOL:
            raise IntegrationError(f"p_U quadrature error estimate {err:.3g} exceeds {QUAD_TOL}")
        total += mult * res
    with np.errstate(divide="ignore"):
        return np.log(weight * total) - d2 / (2.0 * s2) - 0.5 * math.log(2.0 * math.pi * s2)


def _log_pdf_v_yquad(v, model, s2, panels=64):
    """``log p_V(v)`` by composite Gauss-Legendre over the support of ``Y``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    edges = np.linspace(model.y_low, model.y_high, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    y = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    logw = np.log((half[:, None] * _GL_WEIGHTS[None, :]).ravel() * model.y_density)
    fy = model.f(y)
    out = np.empty_like(v)
    for start in range(0, v.size, 2048):
        chunk = v[start:start + 2048]
        out[start:start + 2048] = special.logsumexp(
            logw[None, :] + _log_normal(chunk[:, None], fy[None, :], s2), axis=1
        )
    return out


def _density_method(model):
    if model.is_constant():
        return "gaussian"
    if model.k == 3 and model.beta[2] > 0:
        return "w-convolution"
    return "y-quadrature"


def log_pdf_u_direct(u, model, channel, method=None):
    """Natural-log density of ``U`` evaluated without interpolation."""
    method = method or _density_method(model)
    alpha, s2 = channel.alpha, channel.s2
    v = np.atleast_1d(np.asarray(u, dtype=float)) / alpha
    if method == "gaussian":
        lp = _log_normal(v, model.beta[0], s2)
    elif method == "w-convolution":
        lp = _log_pdf_v_wconv(v, model, s2)
    elif method == "y-quadrature":
        lp = _log_pdf_v_yquad(v, model, s2)
    else:
        raise ValueError(f"unknown density method {method!r}")
    return lp - math.log(alpha)


@dataclass(frozen=True)
class DensityTable:
    """Cached ``log p_U`` on the truncated support, interpolated by a cubic spline.

    Points outside ``[u_lo, u_hi]`` fall back to direct quadrature.
    """

    model: object
    channel: object
    method: str
    u_lo: float
    u_hi: float
    grid: np.ndarray
    log_values: np.ndarray
    spline: object

    @classmethod
    def build(cls, model, channel, n_grid=None):
        method = _density_method(model)
        w_min, w_max = w_support(model)
        s = math.sqrt(channel.s2)
        alpha = channel.alpha
        u_lo = alpha * (w_min - SUPPORT_SIGMAS * s)
        u_hi = alpha * (w_max + SUPPORT_SIGMAS * s)
        if n_grid is None:
            # at most alpha*s/50 between nodes
            n_grid = max(1025, int(math.ceil((u_hi - u_lo) / (alpha * s / 50.0))) + 1)
        grid = np.linspace(u_lo, u_hi, n_grid)
        logp = log_pdf_u_direct(grid, model, channel, method)
        spline = interpolate.CubicSpline(grid, logp)
        return cls(model, channel, method, u_lo, u_hi, grid, logp, spline)

    @property
    def normalization(self):
        """``int p_U`` over the truncated support."""
        val, _ = integrate.quad(
            lambda u: float(np.exp(self.spline(u))), self.u_lo, self.u_hi,
            limit=400, epsabs=1e-12, epsrel=1e-10,
        )
        return val

    def log_pdf(self, u):
        u = np.asarray(u, dtype=float)
        flat = np.atleast_1d(u).ravel()
        out = np.empty_like(flat)
        inside = (flat >= self.u_lo) & (flat <= self.u_hi)
        out[inside] = self.spline(flat[inside])
        if not inside.all():
            out[~inside] = log_pdf_u_direct(flat[~inside], self.model, self.channel, self.method)
        return out.reshape(u.shape) if u.ndim else float(out[0])

    def pdf(self, u):
        lp = self.log_pdf(u)
        return np.where(lp < LOG_UNDERFLOW, 0.0, np.exp(lp)) if np.ndim(lp) else (
            0.0 if lp < LOG_UNDERFLOW else math.exp(lp)
        )

    def cdf(self, u, panels=64):
        """``P(U <= u)`` by Gauss-Legendre over ``Y`` (independent of the spline)."""
        model, ch = self.model, self.channel
        v = np.atleast_1d(np.asarray(u, dtype=float)) / ch.alpha
        edges = np.linspace(model.y_low, model.y_high, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        y = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel() * model.y_density
        fy = model.f(y)
        s = math.sqrt(ch.s2)
        out = np.empty_like(v)
        for start in range(0, v.size, 2048):
            chunk = v[start:start + 2048]
            out[start:start + 2048] = special.ndtr((chunk[:, None] - fy[None, :]) / s) @ w
        return out


def pdf_u(u, model, channel, table=None):
    """Density of ``U``; uses ``table`` when given, direct quadrature otherwise."""
    if table is not None:
        return table.pdf(u)
    lp = log_pdf_u_direct(u, model, channel)
    out = np.where(lp < LOG_UNDERFLOW, 0.0, np.exp(lp))
    return out if np.ndim(u) else float(out[0])


def _finish(cond, lp, on_underflow):
    cond = np.asarray(cond, dtype=float)
    lp = np.asarray(lp, dtype=float)
    bad = lp < LOG_UNDERFLOW
    if np.any(bad):
        if on_underflow == "raise":
            raise DomainError("p_U underflows at the requested point")
        val = np.where(bad, np.copysign(np.inf, cond - lp), (cond - lp) / LN2)
    else:
        val = (cond - lp) / LN2
    return val if val.ndim else float(val)


def info_density_uy(u, y, model, channel, table, on_underflow="raise"):
    """``iota(u; y) = log2 p(u | y) / p_U(u)`` with ``U | Y ~ N(alpha f(y), alpha^2 s2)``.

    ``on_underflow="sentinel"`` returns signed infinities where ``p_U`` is
    below ``1e-300`` instead of raising.
    """
    a = channel.alpha
    cond = _log_normal(np.asarray(u, float), a * model.f(y), a * a * channel.s2)
    return _finish(cond, table.log_pdf(u), on_underflow)


def info_density_ux(u, x, model, channel, table, on_underflow="raise"):
    """``iota(u; x)`` with ``U | X ~ N(alpha x, alpha^2 sigma_phi2)``."""
    a = channel.alpha
    cond = _log_normal(np.asarray(u, float), a * np.asarray(x, float), a * a * channel.sigma_phi2)
    return _finish(cond, table.log_pdf(u), on_underflow)


@dataclass(frozen=True)
class RateIdentities:
    binning_rate_bits: float
    r_wz_bits: float
    r_cond_bits: float


def analytic_rate_identities(model, channel):
    """Binning rate ``h(U|Y) - h(U|X)`` against ``R_WZ(D) = R_{X|Y}(D)``, in bits."""
    binning = 0.5 * math.log2(channel.s2 / channel.sigma_phi2)
    r_cond = 0.5 * math.log2(model.sigma2 / channel.distortion)
    if abs(binning - r_cond) > 1e-12:
        raise DomainError(f"rate identity violated: {binning} != {r_cond}")
    return RateIdentities(binning_rate_bits=binning, r_wz_bits=r_cond, r_cond_bits=r_cond)


@dataclass(frozen=True)
class MutualInformations:
    h_u_bits: float
    i_uy_bits: float
    i_ux_bits: float


def mutual_informations(model, channel, table=None):
    """``I(U;Y)`` and ``I(U;X)`` from the differential entropy of ``U`` by quadrature.

    ``h(U|X)`` and ``h(U|Y)`` are Gaussian so only ``h(U)`` needs integration.
    """
    table = table or DensityTable.build(model, channel)

    def integrand(u):
        lp = float(table.spline(u))
        return -math.exp(lp) * lp

    h_nat, _ = integrate.quad(integrand, table.u_lo, table.u_hi, limit=400, epsabs=1e-12, epsrel=1e-10)
    h_u = h_nat / LN2
    a2 = channel.alpha**2
    h_ux = 0.5 * math.log2(2.0 * math.pi * math.e * a2 * channel.sigma_phi2)
    h_uy = 0.5 * math.log2(2.0 * math.pi * math.e * a2 * channel.s2)
    return MutualInformations(h_u_bits=h_u, i_uy_bits=h_u - h_uy, i_ux_bits=h_u - h_ux)
