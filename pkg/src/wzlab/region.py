"""Asymptotic and finite block-length achievable regions.

The finite-length bound minimizes ``b_1 + b_2`` over shift vectors ``b`` with
``P(B <= b) >= 1 - eps`` for ``B ~ N(0, V)``, subject to

    b_3 <= sqrt(n) (D - J_3 - 2 log2(n) / n)
    b_4 <= sqrt(n) (G - J_4 - 2 log2(n) / n)

and reports ``R = J_1 + J_2 + (b_1 + b_2) / sqrt(n) + 4 log2(n) / n``.

Because the lower-orthant probability is componentwise nondecreasing, ``b_3``
and ``b_4`` can be pinned at their largest allowed values.  What remains is a
two-dimensional problem that is solved exactly on a fixed set of Gaussian
samples (common random numbers): writing ``b_1 = t + s`` and ``b_2 = t - s``,
the smallest feasible ``t`` for a given ``s`` is the ``ceil((1 - eps) N)``-th
order statistic of ``max(Z_1 - s, Z_2 + s)`` over samples with
``Z_3 <= b_3`` and ``Z_4 <= b_4``.  The outer minimization over ``s`` uses a
coarse grid followed by two rounds of local refinement.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
import math
from typing import Optional

import numpy as np
from scipy import special
from scipy.stats import qmc

from .errors import DomainError, Infeasible, SolverNoConverge
from .rng import stream

DEFAULT_MC_SAMPLES = 2**18
S_GRID = 129
S_REFINE = 2


# --------------------------------------------------------------------------
# Asymptotic quantities


def r_wz(D, sigma2):
    """Wyner-Ziv rate ``0.5 log2(sigma2 / D)`` in bits; zero at ``D = sigma2``."""
    if not 0.0 < D <= sigma2:
        raise DomainError(f"distortion must lie in (0, sigma2={sigma2}], got {D}")
    return 0.5 * math.log2(sigma2 / D)


def r_d_g(D, G, sigma2):
    """Asymptotic rate at distortion ``D`` and generalization error ``G``.

    Any ``G >= sigma2`` costs nothing beyond the Wyner-Ziv rate.
    """
    if G < sigma2:
        raise Infeasible(f"G={G} is below the minimum expected loss {sigma2}")
    return r_wz(D, sigma2)


@dataclass(frozen=True)
class RaginskyBounds:
    lower: float
    upper: float


def raginsky_bounds(R, sigma2):
    """Root-loss bounds ``sigma`` and ``sigma + 2 sqrt(D_{X|Y}(R))`` with ``D_{X|Y}(R) = sigma2 4^-R``."""
    if R < 0:
        raise DomainError("rate must be nonnegative")
    s = math.sqrt(sigma2)
    return RaginskyBounds(lower=s, upper=s + 2.0 * math.sqrt(sigma2 * 2.0 ** (-2.0 * R)))


def achievable_root_loss(R, sigma2):
    """Root generalization error reached by the test-channel scheme at any ``R > 0``."""
    if not R > 0:
        raise DomainError("achievable loss is stated for R > 0")
    return math.sqrt(sigma2)


# --------------------------------------------------------------------------
# Gaussian samples and orthant probabilities


@lru_cache(maxsize=16)
def _standard_normals(dim, log2_n, seed, sampler):
    n = 2**log2_n
    if sampler == "sobol":
        eng = qmc.Sobol(d=dim, scramble=True, seed=stream(seed, "gauss", dim))
        u = eng.random_base2(log2_n)
        u = np.clip(u, 2.0**-53, 1.0 - 2.0**-53)
        z = special.ndtri(u)
    elif sampler == "pseudo":
        z = stream(seed, "gauss", dim).standard_normal((n, dim))
    else:
        raise DomainError(f"unknown sampler {sampler!r}")
    z.setflags(write=False)
    return z


def psd_sqrt(v):
    """Symmetric square root factor ``L`` with ``L L^T = V`` (negative eigenvalues clipped)."""
    v = 0.5 * (np.asarray(v, float) + np.asarray(v, float).T)
    w, q = np.linalg.eigh(v)
    return q * np.sqrt(np.clip(w, 0.0, None))


def gaussian_samples(v, mc_samples=DEFAULT_MC_SAMPLES, seed=0, sampler="sobol"):
    """``N(0, V)`` samples built from a fixed standard-normal base for ``seed``.

    ``mc_samples`` is rounded up to a power of two.
    """
    v = np.asarray(v, float)
    log2_n = max(1, int(math.ceil(math.log2(mc_samples))))
    z = _standard_normals(v.shape[0], log2_n, int(seed), sampler)
    return z @ psd_sqrt(v).T


@dataclass(frozen=True)
class OrthantEstimate:
    p: float
    se: float
    n_samples: int


def mvn_lower_orthant_prob(v, b, mc_samples=DEFAULT_MC_SAMPLES, seed=0, sampler="sobol"):
    """``P(B <= b)`` for ``B ~ N(0, V)`` with a binomial standard error."""
    s = gaussian_samples(v, mc_samples, seed, sampler)
    b = np.asarray(b, float)
    p = float(np.mean(np.all(s <= b, axis=1)))
    n = s.shape[0]
    return OrthantEstimate(p=p, se=math.sqrt(p * (1.0 - p) / n), n_samples=n)


# --------------------------------------------------------------------------
# Finite-length bound


@dataclass(frozen=True)
class SolverConfig:
    mc_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0
    sampler: str = "sobol"
    s_grid: int = S_GRID
    refine: int = S_REFINE


@dataclass(frozen=True)
class RegionPoint:
    n: int
    epsilon: float
    d_target: Optional[float]
    g_target: Optional[float]
    rate_bits: float
    regime: str
    delta: Optional[float]
    channel_distortion: Optional[float] = None
    b: tuple = field(default=(), compare=False)


def penalty(n):
    """``2 log2(n) / n``."""
    return 2.0 * math.log2(n) / n


def _kth(values, k):
    """``k``-th smallest (1-based) along the last axis."""
    return np.partition(values, k - 1, axis=-1)[..., k - 1]


def _min_t(z1, z2, k, scale, grid=S_GRID, refine=S_REFINE):
    """Minimize over ``s`` the ``k``-th order statistic of ``max(z1 - s, z2 + s)``."""

    def evaluate(s_vals):
        out = np.empty(s_vals.size)
        for i in range(0, s_vals.size, 16):
            s = s_vals[i:i + 16, None]
            out[i:i + 16] = _kth(np.maximum(z1[None, :] - s, z2[None, :] + s), k)
        return out

    for half_width in (4.0 * scale, 8.0 * scale):
        s_vals = np.linspace(-half_width, half_width, grid)
        t_vals = evaluate(s_vals)
        i = int(np.argmin(t_vals))
        if 0 < i < grid - 1:
            break
    else:
        raise SolverNoConverge("optimal asymmetry lies outside +-8 standard deviations")
    best_s, best_t = s_vals[i], t_vals[i]
    step = s_vals[1] - s_vals[0]
    for _ in range(refine):
        s_vals = np.linspace(best_s - step, best_s + step, grid)
        t_vals = evaluate(s_vals)
        j = int(np.argmin(t_vals))
        if t_vals[j] <= best_t:
            best_s, best_t = s_vals[j], t_vals[j]
        step = s_vals[1] - s_vals[0]
    return float(best_t), float(best_s)


def _slack(n, target, mean, name):
    if target is None:
        return math.inf
    sl = target - mean - penalty(n)
    if not sl > 0:
        raise Infeasible(f"{name} slack {sl:.4g} is not positive at n={n}")
    return math.sqrt(n) * sl


def _required_count(epsilon, total):
    # smallest count with count / total >= 1 - eps, guarding float round-off
    return int(math.ceil((1.0 - epsilon) * total - 1e-9))


def rate_bound_finite(summary, n, epsilon, D=None, G=None, solver: Optional[SolverConfig] = None):
    """Second-order achievable rate at block length ``n``.

    ``D`` or ``G`` set to ``None`` drops that constraint.

    Raises
    ------
    Infeasible
        If a slack is nonpositive or no shift vector reaches ``1 - eps``.
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    if n < 1:
        raise DomainError("n must be >= 1")
    solver = solver or SolverConfig()
    j = np.asarray(summary.j, float)
    b3 = _slack(n, D, j[2], "distortion")
    b4 = _slack(n, G, j[3], "generalization")
    z = gaussian_samples(summary.v, solver.mc_samples, solver.seed, solver.sampler)
    k = _required_count(epsilon, z.shape[0])
    keep = (z[:, 2] <= b3) & (z[:, 3] <= b4)
    if keep.sum() < k:
        raise Infeasible(f"constraints leave probability {keep.mean():.4f} < 1 - eps")
    scale = math.sqrt(max(summary.v[0, 0], summary.v[1, 1], 1e-300))
    t, s = _min_t(z[keep, 0], z[keep, 1], k, scale, solver.s_grid, solver.refine)
    rate = j[0] + j[1] + 2.0 * t / math.sqrt(n) + 2.0 * penalty(n)
    return RegionPoint(
        n=int(n), epsilon=float(epsilon), d_target=D, g_target=G,
        rate_bits=float(max(rate, 0.0)), regime="finite",
        delta=None if G is None else G - summary_sigma2(summary),
        channel_distortion=summary.distortion, b=(t + s, t - s, b3, b4),
    )


def summary_sigma2(summary):
    return float(summary.meta.get("sigma2", 1.0))


def g_floor(summary, n, epsilon, D, R, solver: Optional[SolverConfig] = None):
    """Smallest ``G`` whose finite-length rate bound is at most ``R``.

    With ``b_1 + b_2`` capped at ``2 t_R`` the best ``b_4`` for an asymmetry
    ``s`` is an order statistic of ``Z_4`` over the samples satisfying the
    other three constraints; the floor is minimized over ``s``.
    """
    solver = solver or SolverConfig()
    j = np.asarray(summary.j, float)
    t_r = math.sqrt(n) * (R - j[0] - j[1] - 2.0 * penalty(n)) / 2.0
    b3 = _slack(n, D, j[2], "distortion")
    z = gaussian_samples(summary.v, solver.mc_samples, solver.seed, solver.sampler)
    k = _required_count(epsilon, z.shape[0])
    z = z[z[:, 2] <= b3]
    if z.shape[0] < k:
        raise Infeasible("distortion constraint alone exceeds the excess budget")
    scale = math.sqrt(max(summary.v[0, 0], summary.v[1, 1], 1e-300))

    def evaluate(s_vals):
        out = np.full(s_vals.size, np.inf)
        for i, s in enumerate(s_vals):
            ok = (z[:, 0] <= t_r + s) & (z[:, 1] <= t_r - s)
            if ok.sum() >= k:
                out[i] = _kth(z[ok, 3], k)
        return out

    s_vals = np.linspace(-8.0 * scale, 8.0 * scale, solver.s_grid)
    vals = evaluate(s_vals)
    i = int(np.argmin(vals))
    if not np.isfinite(vals[i]):
        raise Infeasible(f"rate {R} is below the finite-length bound for any G")
    best_s, best_v = s_vals[i], vals[i]
    step = s_vals[1] - s_vals[0]
    for _ in range(solver.refine):
        s_vals = np.linspace(best_s - step, best_s + step, 33)
        vals = evaluate(s_vals)
        m = int(np.argmin(vals))
        if vals[m] <= best_v:
            best_s, best_v = s_vals[m], vals[m]
        step = s_vals[1] - s_vals[0]
    return float(j[3] + penalty(n) + best_v / math.sqrt(n))


@dataclass(frozen=True)
class TradeoffGap:
    r_joint: float
    r_d_only: float
    r_g_only: float
    gap: float


def tradeoff_gap(summary, n, epsilon, D, G, solver=None):
    """Excess of the joint rate over the larger single-constraint rate."""
    rj = rate_bound_finite(summary, n, epsilon, D, G, solver).rate_bits
    rd = rate_bound_finite(summary, n, epsilon, D, None, solver).rate_bits
    rg = rate_bound_finite(summary, n, epsilon, None, G, solver).rate_bits
    return TradeoffGap(r_joint=rj, r_d_only=rd, r_g_only=rg, gap=rj - max(rd, rg))


# --------------------------------------------------------------------------
# Optimizing over the test channel


def channel_grid(d_targets, sigma2, gaps=(0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.35, 0.5),
                 absolute=None):
    """Candidate channel distortions shared by every target in ``d_targets``.

    Each target contributes ``D (1 - gap)``; a shared grid keeps the optimized
    rate monotone in ``D``.
    """
    pts = {round(d * (1.0 - g), 12) for d in d_targets for g in gaps}
    if absolute:
        pts |= {round(float(a), 12) for a in absolute}
    return sorted(p for p in pts if 0.0 < p < sigma2)


def best_rate(provider, grid, n, epsilon, D=None, G=None, solver=None):
    """Smallest finite-length rate over test channels with distortion in ``grid``.

    ``provider(d_channel)`` returns the moment summary for that channel.
    Channels that are infeasible for this target are skipped.
    """
    best = None
    for dc in grid:
        if D is not None and dc >= D:
            continue
        try:
            p = rate_bound_finite(provider(dc), n, epsilon, D, G, solver)
        except Infeasible:
            continue
        if best is None or p.rate_bits < best.rate_bits:
            best = p
    if best is None:
        raise Infeasible(f"no channel in the grid meets D={D}, G={G} at n={n}, eps={epsilon}")
    return best


def best_g_floor(provider, grid, n, epsilon, D, R, solver=None):
    """Smallest ``g_floor`` over the channel grid; returns ``(G, d_channel)``."""
    best = None
    for dc in grid:
        if dc >= D:
            continue
        try:
            g = g_floor(provider(dc), n, epsilon, D, R, solver)
        except Infeasible:
            continue
        if best is None or g < best[0]:
            best = (g, dc)
    if best is None:
        raise Infeasible(f"no channel reaches rate {R} with D={D} at n={n}")
    return best


def asymptotic_point(D, G, sigma2):
    return RegionPoint(n=0, epsilon=0.0, d_target=D, g_target=G, rate_bits=r_d_g(D, G, sigma2),
                       regime="asymptotic", delta=G - sigma2)
