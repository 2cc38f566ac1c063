"""Mode-sorting (SPADE) measurement probabilities.

The source branch is the coherent state ``D(d)|0>``, with ``d`` the coherent
amplitude, so the noiseless outcome law is Poisson with mean ``d**2``.
Displacement noise shifts the amplitude to ``d + z``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .fock import DEFAULT_DIM, displacement, vacuum
from .noise import CorrelatedPairModel, GaussianDisplacementModel, effective_sigma, make_rng

MC_BLOCK = 1 << 16


class NormalizationError(ValueError):
    pass


class InvalidComposition(ValueError):
    pass


def _poisson(n, x):
    """``exp(-x) x**n / n!``, vectorised over ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.exp(-x)
    with np.errstate(divide="ignore"):
        return np.exp(-x + n * np.log(x) - gammaln(n + 1))


def prob_noiseless(n, d):
    return float(_poisson(n, d * d))


def _derivative_series(n, c, s):
    """Coefficients of ``R_n(w)`` with ``P(n) = exp(-c w) R_n(w)`` at ``w = 1/(1+s)``.

    Differentiating ``exp(-c a/(1+s a)) / (1+s a)`` with respect to ``a``
    keeps the form ``exp(.) * poly(w)`` with ``w = 1/(1+s a)``:
    ``R_{k+1} = w^2 (c R_k + s R_k') / (k+1)`` (sign and ``1/n!`` folded in),
    ``R_0 = w``. All coefficients are nonnegative, so nothing cancels.
    """
    coeffs = np.zeros(2 * n + 2)
    coeffs[1] = 1.0  # index = power of w
    for k in range(n):
        powers = np.arange(coeffs.size)
        deriv = np.zeros_like(coeffs)
        deriv[:-1] = coeffs[1:] * powers[1:]
        nxt = np.zeros_like(coeffs)
        nxt[2:] = (c * coeffs[:-2] + s * deriv[:-2]) / (k + 1)
        coeffs = nxt
    return coeffs


def prob_gaussian_noise(n, d, sigma_tilde):
    """Outcome-``n`` probability averaged over Gaussian displacement noise.

    Closed form obtained by exact ``n``-fold differentiation of
    ``exp(-a d^2 / (1 + a s)) / (1 + a s)`` at ``a = 1`` with
    ``s = sigma_tilde**2``; ``n = 0`` gives ``exp(-d^2/(1+s)) / (1+s)``.
    """
    if n < 0:
        raise ValueError("outcome index must be >= 0")
    if sigma_tilde < 0:
        raise ValueError("sigma_tilde must be >= 0")
    c = d * d
    s = sigma_tilde * sigma_tilde
    if s == 0.0:
        return prob_noiseless(n, d)
    w = 1.0 / (1.0 + s)
    coeffs = _derivative_series(n, c, s)
    # Horner in w; coefficients are >= 0
    acc = 0.0
    for coef in coeffs[::-1]:
        acc = acc * w + coef
    return float(math.exp(-c * w) * acc)


def prob_decoupled(n, d, sigma_tilde, epsilon):
    """Probability after the two-pass parity scheme with pair correlation ``epsilon``."""
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    return prob_gaussian_noise(n, d, effective_sigma(sigma_tilde, epsilon))


def bispade_p0(d, sigma):
    """Fundamental-mode probability ``g exp(-g d^2)`` with ``g = 1/(1+sigma^2)``."""
    g = 1.0 / (1.0 + sigma * sigma)
    return g * math.exp(-g * d * d)


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    se: float
    n_samples: int
    seed: int

    def zscore(self, reference):
        diff = reference - self.mean
        if self.se == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.se


def _effective_amplitudes(sandwich, d, model, rng, size):
    if sandwich == "plain":
        if isinstance(model, CorrelatedPairModel):
            model = model.marginal
        return d + model.sample(rng, size)
    if sandwich == "parity_decoupled":
        if not isinstance(model, CorrelatedPairModel):
            raise TypeError("parity_decoupled sampling needs a CorrelatedPairModel")
        z1, z2 = model.sample(rng, size)
        return d - z2 + z1
    raise ValueError(f"unknown sandwich {sandwich!r}")


def _block_stats(n, d, model, sandwich, seed, block, size, shift):
    rng = make_rng(seed, block)
    w = _effective_amplitudes(sandwich, d, model, rng, size)
    vals = _poisson(n, np.abs(w) ** 2) - shift
    mean = vals.mean()
    return size, mean, float(((vals - mean) ** 2).sum())


def prob_mc(n, d, model, n_samples, sandwich="plain", seed=0, shards=1):
    """Monte Carlo estimate of the noise-averaged probability of outcome ``n``.

    ``plain`` averages ``|<n|D(d + z)|0>|^2``; ``parity_decoupled`` draws
    correlated pairs and averages ``|<n|D(d - z2 + z1)|0>|^2``.

    Draws come in fixed blocks, each from its own substream of ``seed``; the
    merged estimate is bitwise independent of ``shards``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not isinstance(model, (GaussianDisplacementModel, CorrelatedPairModel)):
        raise TypeError(f"unsupported noise model {type(model).__name__}")
    # shifting by the noiseless value keeps the variance update well conditioned
    shift = prob_noiseless(n, d)
    sizes = [MC_BLOCK] * (n_samples // MC_BLOCK)
    if n_samples % MC_BLOCK:
        sizes.append(n_samples % MC_BLOCK)
    jobs = [(n, d, model, sandwich, seed, i, size, shift) for i, size in enumerate(sizes)]
    if shards > 1:
        with ThreadPoolExecutor(max_workers=shards) as pool:
            parts = list(pool.map(lambda job: _block_stats(*job), jobs))
    else:
        parts = [_block_stats(*job) for job in jobs]

    # Chan et al. pairwise merge, in block order
    count, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        total = count + nb
        delta = mb - mean
        mean += delta * nb / total
        m2 += m2b + delta * delta * count * nb / total
        count = total
    var = m2 / (count - 1) if count > 1 else 0.0
    return MonteCarloEstimate(shift + mean, math.sqrt(var / count), count, int(seed))


def prob_operator(n, d, unitaries: Sequence[np.ndarray] = (), dim=None):
    """``|<n| U_1 U_2 ... U_k D(d) |0>|^2`` on the truncated space.

    The list is a matrix product read left to right, so the last entry acts
    first on the displaced state.
    """
    dims = {u.shape for u in unitaries}
    if dim is None:
        dim = unitaries[0].shape[0] if unitaries else DEFAULT_DIM
    if dims - {(dim, dim)}:
        raise InvalidComposition(f"operators of shapes {sorted(dims)} cannot act on dim {dim}")
    state = displacement(d, dim) @ vacuum(dim)
    for u in reversed(list(unitaries)):
        state = u @ state
    return float(abs(state[n]) ** 2)


def prob_mixture(n, d, branch: Callable[[int, float], float]):
    """Outcome probability for the equal mixture of the ``+d`` and ``-d`` sources."""
    return 0.5 * (branch(n, d) + branch(n, -d))


@dataclass(frozen=True)
class Povm:
    """Mode-sorting measurement.

    ``kind`` is ``bi_spade`` (fundamental mode vs rest), ``k_mode`` (``K``
    lowest modes plus a leakage element) or ``full`` (every level up to
    ``K - 1``, defaulting to the truncation).
    """

    kind: str
    K: int | None = None
    dim: int = DEFAULT_DIM

    def __post_init__(self):
        if self.kind not in ("bi_spade", "k_mode", "full"):
            raise ValueError(f"unknown POVM kind {self.kind!r}")
        if self.kind == "k_mode" and (self.K is None or not 1 <= self.K < self.dim):
            raise ValueError("k_mode needs 1 <= K < dim")
        if self.kind == "full" and self.K is not None and not 1 <= self.K <= self.dim:
            raise ValueError("full POVM needs 1 <= K <= dim")

    @property
    def n_modes(self):
        if self.kind == "bi_spade":
            return 1
        if self.kind == "k_mode":
            return self.K
        return self.K or self.dim

    @property
    def labels(self):
        if self.kind == "full":
            return list(range(self.n_modes))
        return list(range(self.n_modes + 1))

    def elements(self):
        """Projectors on the truncated space; the last absorbs the remainder."""
        eye = np.eye(self.dim, dtype=complex)
        projs = [np.outer(eye[n], eye[n]) for n in range(self.n_modes)]
        if self.kind != "full":
            projs.append(eye - sum(projs))
        return projs


@dataclass(frozen=True)
class MeasurementDistribution:
    probs: np.ndarray
    labels: list
    normalization_defect: float

    def __len__(self):
        return len(self.probs)


def distribution(povm: Povm, probability_source, clamp_tol=1e-9):
    """Outcome distribution of ``povm`` from per-level probabilities.

    ``probability_source`` is a callable ``n -> P(n)`` or a sequence indexed
    by ``n``. Negative roundoff is clamped to zero; ``normalization_defect``
    records the clamped magnitude plus, for ``full``, the tail mass beyond
    the measured levels.
    """
    if callable(probability_source):
        levels = np.array([probability_source(n) for n in range(povm.n_modes)], dtype=float)
    else:
        levels = np.asarray(probability_source, dtype=float)[: povm.n_modes]
    clamped = float(-levels[levels < 0].sum())
    levels = np.clip(levels, 0.0, None)
    if povm.kind == "full":
        tail = max(0.0, 1.0 - levels.sum())
        return MeasurementDistribution(levels, povm.labels, clamped + tail)
    leakage = 1.0 - levels.sum()
    if leakage < -clamp_tol:
        raise NormalizationError(f"mode probabilities exceed 1 by {-leakage:.3g}")
    if leakage < 0:
        clamped += -leakage
        leakage = 0.0
    return MeasurementDistribution(np.append(levels, leakage), povm.labels, clamped)
