"""Classical Fisher information and Cramer-Rao bounds for separation estimation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .spade import MeasurementDistribution

F_MAX = 4.0  # noiseless bi-SPADE Fisher information at d -> 0
SKIP_BELOW = 1e-12


class InvalidStep(ValueError):
    pass


@dataclass(frozen=True)
class FisherResult:
    d: float
    value: float
    method: str
    h: float | None = None
    skipped_mass: float = 0.0


def fisher_noiseless(d):
    """``4 d^2 exp(-d^2) / (1 - exp(-d^2))``; equals 4 at ``d = 0``."""
    x = d * d
    if x == 0.0:
        return F_MAX
    return 4.0 * x / math.expm1(x)


def fisher_bispade_analytic(d, sigma=0.0):
    """Bi-SPADE Fisher information under Gaussian displacement noise of spread ``sigma``.

    ``4 d^2 g^3 exp(-g d^2) / (1 - g exp(-g d^2))`` with ``g = 1/(1+sigma^2)``.
    ``d = 0`` returns the limit: 4 without noise, 0 otherwise.
    """
    d = abs(d)
    if sigma == 0.0:
        return fisher_noiseless(d)
    if d == 0.0:
        return 0.0
    s = sigma * sigma
    g = 1.0 / (1.0 + s)
    x = g * d * d
    # 1 - g e^{-x} = (1 - g) + g (1 - e^{-x}), both terms >= 0
    denom = s * g - g * math.expm1(-x)
    return 4.0 * d * d * g ** 3 * math.exp(-x) / denom


def _as_probs(dist):
    if isinstance(dist, MeasurementDistribution):
        return np.asarray(dist.probs, dtype=float)
    return np.asarray(dist, dtype=float)


def _central(distribution_fn, d, h):
    return (_as_probs(distribution_fn(d + h)) - _as_probs(distribution_fn(d - h))) / (2.0 * h)


def fisher_numeric(distribution_fn: Callable, d, h=1e-4):
    """Fisher information of ``distribution_fn(d)`` by central differences.

    The derivative uses one Richardson step, ``(4 D(h/2) - D(h)) / 3``.
    Outcomes with probability below 1e-12 are left out and their mass is
    reported in ``skipped_mass``.
    """
    if not h > 0:
        raise InvalidStep(f"step must be positive, got {h!r}")
    probs = _as_probs(distribution_fn(d))
    deriv = (4.0 * _central(distribution_fn, d, h / 2) - _central(distribution_fn, d, h)) / 3.0
    keep = probs >= SKIP_BELOW
    value = float(np.sum(deriv[keep] ** 2 / probs[keep]))
    return FisherResult(d, value, "finite_difference", h, float(probs[~keep].sum()))


def weak_noise_prefactor(d):
    """Coefficient of ``sigma^2 F_0(d)`` in the weak-noise expansion; diverges as ``-1/d^2``."""
    x = d * d
    return (x - 3.0 + 2.0 * math.exp(-x)) / -math.expm1(-x)


def fisher_weak_noise(d, sigma_tilde):
    """Second-order expansion ``F_0(d) (1 + prefactor(d) sigma^2)``; valid for d not small."""
    f0 = fisher_noiseless(d)
    if sigma_tilde == 0.0:
        return f0
    return f0 + weak_noise_prefactor(d) * f0 * sigma_tilde ** 2


@dataclass
class LimitOrderReport:
    sigma_grid: list
    d_grid: list
    table: list  # table[i][j] = F(d_grid[j] | sigma_grid[i])
    sigma_first: list  # lim_{sigma->0} F(d|sigma) = F(d|0), one entry per d
    d_first: list  # lim_{d->0} F(d|sigma), one entry per sigma
    limit_sigma_then_d: float
    limit_d_then_sigma: float
    non_commuting: bool


def limit_order_check(sigma_grid, d_grid, tol=1e-3):
    """Tabulate F(d|sigma) toward the origin along both iterated-limit orders.

    Each inner limit is taken exactly (``F(d|0)`` by continuity in sigma,
    ``F(0|sigma)`` by the explicit d -> 0 limit) and the outer limit is read
    at the smallest grid value. ``table`` holds the finite-grid values that
    show both approaches.
    """
    sigma_grid = [float(s) for s in sigma_grid]
    d_grid = [float(d) for d in d_grid]
    for grid in (sigma_grid, d_grid):
        if len(grid) < 2 or any(b >= a for a, b in zip(grid, grid[1:])) or grid[-1] <= 0:
            raise ValueError("grids must be strictly decreasing and positive")
    table = [[fisher_bispade_analytic(d, s) for d in d_grid] for s in sigma_grid]
    sigma_first = [fisher_bispade_analytic(d, 0.0) for d in d_grid]
    d_first = [fisher_bispade_analytic(0.0, s) for s in sigma_grid]
    a, b = sigma_first[-1], d_first[-1]
    return LimitOrderReport(sigma_grid, d_grid, table, sigma_first, d_first, a, b, abs(a - b) > tol)


def direct_imaging_density(x, d):
    """Image-plane intensity of the two-source mixture: Gaussians of variance 1/2 at +-d."""
    return 0.5 * (np.exp(-((x - d) ** 2)) + np.exp(-((x + d) ** 2))) / math.sqrt(math.pi)


def fisher_direct_imaging(d, x_max=10.0, epsabs=1e-10):
    """Fisher information of position counting, by adaptive quadrature over ``[-x_max, x_max]``."""
    d = abs(d)
    if d == 0.0:
        return 0.0

    def integrand(x):
        a = np.exp(-((x - d) ** 2))
        b = np.exp(-((x + d) ** 2))
        dens = 0.5 * (a + b)
        if dens == 0.0:
            return 0.0
        dd = (x - d) * a - (x + d) * b
        return dd * dd / dens / math.sqrt(math.pi)

    value, _ = quad(integrand, -x_max, x_max, epsabs=epsabs, epsrel=1e-10, limit=200, points=[-d, d])
    return value


def cramer_rao(F):
    """Variance lower bound ``1/F``; ``inf`` signals an unbounded variance."""
    if F < 0:
        raise ValueError("Fisher information cannot be negative")
    if F == 0:
        return math.inf
    return 1.0 / F
