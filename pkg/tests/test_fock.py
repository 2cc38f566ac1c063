import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spadenoise.fock import (
    FockState,
    GeneratorExponential,
    InvalidDegree,
    InvalidDimension,
    InvalidGenerator,
    PhasePoint,
    TruncationWarning,
    annihilation,
    creation,
    displacement,
    displacement_analytic,
    displacement_element,
    low_block,
    number_operator,
    number_state,
    parity,
    polynomial_generator,
    rotation,
    unitarity_defect,
    unitary_from_generator,
    vacuum,
)

small = st.floats(-1.0, 1.0, allow_nan=False)


def test_annihilation_small_cases():
    assert np.array_equal(annihilation(2), np.array([[0, 1], [0, 0]], dtype=complex))
    assert annihilation(4)[2, 3] == math.sqrt(3)
    assert np.all(annihilation(16) @ vacuum(16) == 0)


def test_ladder_elements_exact():
    dim = 64
    a = annihilation(dim)
    for n in range(dim - 1):
        assert a[n, n + 1] == math.sqrt(n + 1)
    # nothing else is populated
    assert np.count_nonzero(a) == dim - 1


def test_creation():
    assert np.array_equal(creation(2) @ vacuum(2), number_state(1, 2))
    assert np.array_equal(creation(3), annihilation(3).conj().T)
    diag = np.diag(creation(10) @ annihilation(10)).real
    assert np.allclose(diag, np.arange(10), atol=1e-14)
    assert np.array_equal(number_operator(5), np.diag(np.arange(5)).astype(complex))


def test_invalid_dimension():
    with pytest.raises(InvalidDimension):
        annihilation(1)
    with pytest.raises(InvalidDimension):
        parity(2.5)
    with pytest.raises(ValueError):
        number_state(4, 4)


def test_phase_point_map():
    pt = PhasePoint(1.0, -2.0)
    assert pt.z0 == complex(1.0, -2.0) / math.sqrt(2)
    back = PhasePoint.from_complex(pt.z0)
    assert math.isclose(back.x0, 1.0) and math.isclose(back.p0, -2.0)


def test_fock_state_norm_check():
    FockState(np.array([0.6, 0.8]))
    with pytest.raises(ValueError):
        FockState(np.array([0.6, 0.8 + 1e-9]))


def test_displacement_zero_is_identity():
    assert np.allclose(displacement(0.0, 32), np.eye(32), atol=1e-15)


def test_displacement_vacuum_probability():
    amp = (displacement(0.5, 32) @ vacuum(32))[0]
    assert abs(abs(amp) ** 2 - math.exp(-0.25)) < 1e-12
    assert abs(abs(amp) ** 2 - 0.7788007830714049) < 1e-12


@settings(max_examples=25, deadline=None)
@given(small, small)
def test_analytic_vs_expm(x, y):
    z = complex(x, y)
    dim = 32
    num = low_block(displacement(z, dim))
    exact = low_block(displacement_analytic(z, dim))
    assert np.abs(num - exact).max() < 1e-9


def test_displacement_element_conjugate_symmetry():
    z = 0.4 - 0.3j
    # <m|D(z)|n> = conj(<n|D(-z)|m>)
    for m, n in [(0, 3), (5, 2), (4, 4)]:
        assert abs(displacement_element(m, n, z) - np.conj(displacement_element(n, m, -z))) < 1e-15


@settings(max_examples=20, deadline=None)
@given(small, small, small, small)
def test_displacement_composition(x1, y1, x2, y2):
    z1, z2 = complex(x1, y1) * 0.7, complex(x2, y2) * 0.7
    dim = 64
    lhs = displacement(z1, dim) @ displacement(z2, dim)
    phase = np.exp((z1 * np.conj(z2) - np.conj(z1) * z2) / 2)
    rhs = phase * displacement(z1 + z2, dim)
    assert np.abs(low_block(lhs - rhs)).max() < 1e-9


def test_truncation_warning():
    with pytest.warns(TruncationWarning):
        displacement(3.0, 16)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        displacement(1.0, 16)


def test_rotation_special_angles():
    assert np.array_equal(rotation(0.0, 8), np.eye(8, dtype=complex))
    assert np.array_equal(rotation(math.pi, 64), parity(64))
    for m in (1, 2, 3, 5):
        R = rotation(math.pi / m, 24)
        assert np.allclose(np.linalg.matrix_power(R, 2 * m), np.eye(24), atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(-7.0, 7.0, allow_nan=False), st.integers(1, 4))
def test_rotation_conjugation_is_phase(theta, p):
    dim = 20
    R = rotation(theta, dim)
    ap = np.linalg.matrix_power(annihilation(dim), p)
    lhs = R.conj().T @ ap @ R
    # R = exp(-i theta n) lowers every a by the phase exp(-i theta)
    assert np.abs(lhs - np.exp(-1j * p * theta) * ap).max() < 1e-12 * max(1.0, np.abs(ap).max())


def test_parity_basics():
    P = parity(32)
    assert np.array_equal(P @ number_state(1, 32), -number_state(1, 32))
    assert np.array_equal(P @ P, np.eye(32, dtype=complex))


def test_parity_flips_displacement():
    z = 0.3 + 0.2j
    P = parity(32)
    lhs = P @ displacement(z, 32) @ P
    assert np.abs(low_block(lhs - displacement(-z, 32))).max() < 1e-9


def test_polynomial_generator_cases():
    dim = 32
    assert np.array_equal(polynomial_generator([0, 0, 0], dim), np.zeros((dim, dim)))
    z = 0.3 - 0.4j
    H = polynomial_generator([1j * np.conj(z)], dim)
    # iH = z a^dagger - conj(z) a, so exp(iH) = D(z)
    U = unitary_from_generator(H, 1.0)
    assert np.abs(low_block(U - displacement(z, dim))).max() < 1e-9
    a = annihilation(dim)
    squeeze = polynomial_generator([0, 0.5], dim)
    assert np.allclose(squeeze, 0.5 * a @ a + 0.5 * creation(dim) @ creation(dim))
    with pytest.raises(InvalidDegree):
        polynomial_generator([1, 1, 1], 4)


def test_generator_exponential():
    H = polynomial_generator([0.2 + 0.1j, 0.05j], 32)
    assert np.allclose(unitary_from_generator(H, 0.0), np.eye(32), atol=1e-13)
    U = unitary_from_generator(H, 0.7)
    eig = np.linalg.eigvals(low_block(U))
    # low block of a unitary is a contraction; the full matrix is exactly unitary here
    assert unitarity_defect(U) < 1e-9
    assert np.all(np.abs(np.linalg.eigvals(U)) - 1 < 1e-9)
    assert np.all(np.abs(eig) <= 1 + 1e-9)
    exp = GeneratorExponential(H)
    assert np.allclose(exp(0.3) @ exp(0.4), U, atol=1e-12)
    with pytest.raises(InvalidGenerator):
        GeneratorExponential(np.array([[0, 1], [0, 0]], dtype=complex))


def test_truncated_displacement_low_block_unitary():
    assert unitarity_defect(displacement(0.8 + 0.5j, 64)) < 1e-9
