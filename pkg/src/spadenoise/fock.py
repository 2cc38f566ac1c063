"""Truncated Fock-space operators.

Every operator is a dense complex ``(dim, dim)`` ndarray in the number basis
``|0>, ..., |dim-1>``. Truncation corrupts the last few levels, so identities
that only hold in infinite dimension are checked on the low-energy block
(indices below ``dim // 2``), see :func:`low_block`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

DEFAULT_DIM = 64


class InvalidDimension(ValueError):
    pass


class InvalidDegree(ValueError):
    pass


class InvalidGenerator(ValueError):
    pass


class TruncationWarning(UserWarning):
    """Raised (as a warning) when a displacement is too large for the cutoff."""


def _check_dim(dim):
    if int(dim) != dim or dim < 2:
        raise InvalidDimension(f"truncation dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


def low_block(op, dim=None):
    """Top-left ``dim//2`` block of ``op`` (or of a state vector)."""
    size = (op.shape[0] if dim is None else dim) // 2
    if op.ndim == 1:
        return op[:size]
    return op[:size, :size]


@dataclass(frozen=True)
class PhasePoint:
    """Phase-space shift with ``z0 = (x0 + i p0) / sqrt(2)``."""

    x0: float
    p0: float = 0.0

    @property
    def z0(self) -> complex:
        return complex(self.x0, self.p0) / math.sqrt(2)

    @classmethod
    def from_complex(cls, z0):
        z0 = complex(z0)
        return cls(math.sqrt(2) * z0.real, math.sqrt(2) * z0.imag)


@dataclass(frozen=True)
class FockState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 2:
            raise InvalidDimension("amplitudes must be a vector of length >= 2")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValueError(f"state is not normalised (norm={np.linalg.norm(amps)!r})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size


def number_state(n, dim=DEFAULT_DIM):
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise ValueError(f"level {n} outside truncated space of dimension {dim}")
    vec = np.zeros(dim, dtype=complex)
    vec[n] = 1.0
    return vec


def vacuum(dim=DEFAULT_DIM):
    return number_state(0, dim)


def annihilation(dim=DEFAULT_DIM):
    dim = _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def creation(dim=DEFAULT_DIM):
    return annihilation(dim).conj().T


def number_operator(dim=DEFAULT_DIM):
    dim = _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def _quarter_turns(theta):
    """Return k if theta is (numerically) k * pi/2, else None."""
    k = 2.0 * theta / math.pi
    nearest = round(k)
    if abs(k - nearest) < 1e-12:
        return int(nearest)
    return None


_QUARTER_PHASES = np.array([1.0, -1.0j, -1.0, 1.0j])  # exp(-i k pi/2)


def rotation(theta, dim=DEFAULT_DIM):
    """Phase-space rotation ``exp(-i theta a^dagger a)``.

    Angles that are whole multiples of pi/2 produce exact phases, so
    ``rotation(pi, dim)`` is entrywise identical to :func:`parity`.
    """
    dim = _check_dim(dim)
    n = np.arange(dim)
    k = _quarter_turns(theta)
    if k is not None:
        phases = _QUARTER_PHASES[(k * n) % 4]
    else:
        phases = np.exp(-1j * ((theta * n) % (2 * math.pi)))
    return np.diag(phases.astype(complex))


def parity(dim=DEFAULT_DIM):
    dim = _check_dim(dim)
    return np.diag(np.where(np.arange(dim) % 2 == 0, 1.0, -1.0).astype(complex))


def _displacement_generator(z, dim):
    return z * creation(dim) - np.conj(z) * annihilation(dim)


def _warn_truncation(z, dim):
    if abs(z) ** 2 > dim / 4:
        warnings.warn(
            f"|z|^2 = {abs(z) ** 2:.3g} exceeds dim/4 = {dim / 4:g}; "
            "truncated displacement is unreliable",
            TruncationWarning,
            stacklevel=3,
        )


def displacement(z, dim=DEFAULT_DIM):
    """``D(z) = exp(z a^dagger - conj(z) a)`` by matrix exponential of the truncated generator."""
    dim = _check_dim(dim)
    z = complex(z)
    _warn_truncation(z, dim)
    return expm(_displacement_generator(z, dim))


def displacement_element(m, n, z):
    """Exact matrix element ``<m|D(z)|n>`` (infinite-dimensional), via Laguerre polynomials."""
    z = complex(z)
    x = abs(z) ** 2
    if m >= n:
        lo, hi, amp = n, m, z
    else:
        lo, hi, amp = m, n, -np.conj(z)
    log_ratio = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1))
    return np.exp(log_ratio - x / 2) * amp ** (hi - lo) * eval_genlaguerre(lo, hi - lo, x)


def displacement_analytic(z, dim=DEFAULT_DIM):
    """Displacement matrix built element by element from the Laguerre formula."""
    dim = _check_dim(dim)
    z = complex(z)
    _warn_truncation(z, dim)
    out = np.empty((dim, dim), dtype=complex)
    for m in range(dim):
        for n in range(dim):
            out[m, n] = displacement_element(m, n, z)
    return out


def polynomial_generator(b, dim=DEFAULT_DIM):
    """Hermitian noise generator ``sum_k b_k a^k + conj(b_k) (a^dagger)^k``, k = 1..len(b)."""
    dim = _check_dim(dim)
    b = np.atleast_1d(np.asarray(b, dtype=complex))
    degree = b.size
    if degree < 1:
        raise InvalidDegree("need at least one coefficient")
    if 2 * degree > dim:
        raise InvalidDegree(f"degree {degree} needs dim >= {2 * degree}, got {dim}")
    a = annihilation(dim)
    out = np.zeros((dim, dim), dtype=complex)
    power = np.eye(dim, dtype=complex)
    for bk in b:
        power = power @ a
        out += bk * power
    # add the adjoint half explicitly so the result is Hermitian to the bit
    return out + out.conj().T


def _check_hermitian(H, tol=1e-12):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InvalidGenerator("generator must be a square matrix")
    scale = max(1.0, np.abs(H).max(initial=0.0))
    if np.abs(H - H.conj().T).max(initial=0.0) > tol * scale:
        raise InvalidGenerator("generator is not Hermitian")
    return H


class GeneratorExponential:
    """Cached eigendecomposition of a Hermitian generator.

    Calling the object with a real ``scale`` returns ``exp(i * scale * H)``;
    sweeps over many scales reuse a single diagonalisation.
    """

    def __init__(self, H):
        H = _check_hermitian(H)
        self.eigenvalues, self.eigenvectors = np.linalg.eigh((H + H.conj().T) / 2)

    def __call__(self, scale):
        V = self.eigenvectors
        return (V * np.exp(1j * scale * self.eigenvalues)) @ V.conj().T


def unitary_from_generator(H, scale=1.0):
    """``exp(i * scale * H)`` for Hermitian ``H``."""
    return GeneratorExponential(H)(scale)


def unitarity_defect(U):
    """Spectral norm of ``U^dagger U - I`` restricted to low-energy input columns."""
    cols = U[:, : U.shape[0] // 2]
    return np.linalg.norm(cols.conj().T @ cols - np.eye(cols.shape[1]), 2)
