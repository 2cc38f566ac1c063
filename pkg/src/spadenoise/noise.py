"""Seeded samplers for measurement-noise configurations.

Displacement draws are complex amplitudes ``z = (x + i p) / sqrt(2)``; the
noise strength ``sigma_tilde`` is the standard deviation of each real
quadrature ``x`` and ``p``. :func:`quadratures` maps back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NOISE_MODES = ("identical", "fresh-per-step", "fresh-per-cycle")


class InvalidCorrelation(ValueError):
    pass


def make_rng(seed, *spawn_key):
    """Generator for ``seed`` restricted to the substream ``spawn_key``.

    Substreams with distinct keys are statistically independent, and the same
    (seed, key) pair always reproduces the same stream.
    """
    if isinstance(seed, np.random.Generator):
        if spawn_key:
            raise TypeError("substreams need an integer seed, not a Generator")
        return seed
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.default_rng(ss)


def quadratures(z):
    """``(x, p)`` quadratures of complex amplitude(s) ``z``."""
    z = np.asarray(z)
    return math.sqrt(2) * z.real, math.sqrt(2) * z.imag


def _from_quadratures(x, p):
    return (x + 1j * p) / math.sqrt(2)


@dataclass(frozen=True)
class GaussianDisplacementModel:
    """Isotropic Gaussian displacement noise of quadrature spread ``sigma_tilde``."""

    sigma_tilde: float

    def __post_init__(self):
        if not self.sigma_tilde >= 0:
            raise ValueError(f"sigma_tilde must be >= 0, got {self.sigma_tilde!r}")

    def sample(self, rng, size=None):
        rng = make_rng(rng)
        x = rng.normal(0.0, self.sigma_tilde, size)
        p = rng.normal(0.0, self.sigma_tilde, size)
        return _from_quadratures(x, p)


def effective_sigma(sigma_tilde, epsilon):
    """Spread of ``z2 - z1`` for a correlated pair: ``sigma_tilde * sqrt(2 (1 - sqrt(1 - eps^2)))``."""
    # 1 - sqrt(1 - e^2) == e^2 / (1 + sqrt(1 - e^2)) without cancellation at small e
    e2 = epsilon * epsilon
    return sigma_tilde * math.sqrt(2.0 * e2 / (1.0 + math.sqrt(1.0 - e2)))


@dataclass(frozen=True)
class CorrelatedPairModel:
    """Bivariate Gaussian law for the noise at two consecutive demultiplexer passes.

    Each marginal is :class:`GaussianDisplacementModel` with the same
    ``sigma_tilde``. ``epsilon -> 0`` freezes the configuration, ``epsilon = 1``
    makes the two passes independent.
    """

    sigma_tilde: float
    epsilon: float

    def __post_init__(self):
        if not self.sigma_tilde >= 0:
            raise ValueError(f"sigma_tilde must be >= 0, got {self.sigma_tilde!r}")
        if not 0 < self.epsilon <= 1:
            raise InvalidCorrelation(f"epsilon must lie in (0, 1], got {self.epsilon!r}")

    @property
    def sigma_eps(self):
        return effective_sigma(self.sigma_tilde, self.epsilon)

    @property
    def marginal(self):
        return GaussianDisplacementModel(self.sigma_tilde)

    def sample(self, rng, size=None):
        """Return ``(z1, z2)``.

        Sampled in the rotated frame ``xi_pm = z2 +- z1`` whose quadratures are
        independent with variances ``2 sigma^2 (1 -+ sqrt(1 - eps^2))``.
        """
        rng = make_rng(rng)
        s = self.sigma_tilde
        e2 = self.epsilon ** 2
        root = math.sqrt(1.0 - e2)
        sd_plus = s * math.sqrt(2.0 * (1.0 + root))
        sd_minus = self.sigma_eps
        xp, pp = rng.normal(0.0, sd_plus, (2,) + _shape(size))
        xm, pm = rng.normal(0.0, sd_minus, (2,) + _shape(size))
        z1 = _from_quadratures((xp - xm) / 2, (pp - pm) / 2)
        z2 = _from_quadratures((xp + xm) / 2, (pp + pm) / 2)
        if size is None:
            return complex(z1), complex(z2)
        return z1, z2


def _shape(size):
    if size is None:
        return ()
    return (size,) if np.isscalar(size) else tuple(size)


@dataclass(frozen=True)
class PolynomialNoiseModel:
    """Random coefficients ``b_1..b_degree`` of a polynomial noise generator.

    ``b_k`` is a circular complex Gaussian with ``E|b_k|^2 = scales[k-1]^2``
    (unit scale for every k unless given), multiplied by ``lam``.
    ``mode`` controls how draws are shared across protocol slots:

    - ``identical``: one configuration for every slot
    - ``fresh-per-step``: a new configuration for every slot
    - ``fresh-per-cycle``: shared within a cycle, new across cycles
    """

    degree: int
    lam: float = 1.0
    mode: str = "identical"
    scales: Sequence[float] | None = field(default=None)

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError(f"degree must be a positive integer, got {self.degree!r}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam!r}")
        if self.mode not in NOISE_MODES:
            raise ValueError(f"mode must be one of {NOISE_MODES}, got {self.mode!r}")
        if self.scales is not None and len(self.scales) != self.degree:
            raise ValueError("need one coefficient scale per degree")

    def coefficient_scales(self):
        if self.scales is None:
            return np.ones(self.degree)
        return np.asarray(self.scales, dtype=float)

    def substream(self, step_index, cycle_index):
        if self.mode == "identical":
            return (0, 0)
        if self.mode == "fresh-per-cycle":
            return (cycle_index, 0)
        return (cycle_index, step_index)

    def sample(self, step_index, cycle_index, seed):
        rng = make_rng(seed, *self.substream(step_index, cycle_index))
        re, im = rng.normal(0.0, 1.0 / math.sqrt(2), (2, self.degree))
        return self.lam * self.coefficient_scales() * (re + 1j * im)


def sample_displacement(model, rng, size=None):
    return model.sample(rng, size)


def sample_pair(model, rng, size=None):
    return model.sample(rng, size)


def sample_polynomial(model, step_index, cycle_index, seed):
    return model.sample(step_index, cycle_index, seed)
