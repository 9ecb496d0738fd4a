import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clonelab.errors import DomainError
from clonelab.quantum_analogy import (clone_1d_subspace, clone_with_blank, kron3, regrouping_suite,
                                      rotate_b_into_subspace, unitarity_residual)

finite = st.floats(-10, 10, allow_nan=False)


def test_real_example_by_hand():
    res = clone_1d_subspace([1, 0], [2, 0])
    assert res.c == 2
    assert np.array_equal(res.machine_out, [0.5])
    # psi (x) b (x) |1> has a single non-zero entry 2 at index 0 of the 4 entries
    expected = np.zeros(4)
    expected[0] = 2.0
    assert np.array_equal(res.left, expected) and np.array_equal(res.right, expected)
    assert res.residual == 0.0


def test_zero_vector_is_copied_trivially():
    res = clone_1d_subspace([1, 2], [0, 0])
    assert res.c == 0 and res.residual == 0.0
    assert not np.any(res.left) and not np.any(res.right)


def test_complex_example_by_hand():
    b = np.array([1, 1j]) / math.sqrt(2)
    res = clone_1d_subspace(b, 1j * b)
    assert abs(res.c - 1j) < 1e-15
    assert abs(res.machine_out[0] - (-1j)) < 1e-15
    assert res.residual < 1e-12


def test_clone_errors():
    with pytest.raises(DomainError):
        clone_1d_subspace([1, 0], [0, 1])
    with pytest.raises(DomainError):
        clone_1d_subspace([0, 0], [0, 0])
    with pytest.raises(DomainError):
        clone_1d_subspace([1, 0], [1, 0, 0])
    with pytest.raises(DomainError):
        clone_1d_subspace([1, math.nan], [1, 0])


@settings(max_examples=100)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=8), finite, finite)
def test_regrouping_identity(amps, cr, ci):
    b = np.array([complex(x, y) for x, y in amps])
    c = complex(cr, ci)
    if np.linalg.norm(b) < 1e-3 or abs(c) < 1e-3:
        return
    res = clone_1d_subspace(b, c * b)
    scale = max(1.0, float(np.max(np.abs(res.left))))
    assert res.residual <= 1e-12 * scale
    # oracle: the right side really is psi (x) psi (x) (1/c)|1>
    psi = c * b
    assert np.allclose(res.right, kron3(psi, psi, [1 / c]), rtol=1e-13, atol=0)


def test_rotation_identity_when_already_on_line():
    assert np.array_equal(rotate_b_into_subspace([1, 1j], [2j, -2]), np.eye(2))


def test_rotation_example():
    u = rotate_b_into_subspace([1, 0], [0, 1])
    ub = u @ np.array([1, 0])
    assert abs(ub[0]) < 1e-12 and abs(abs(ub[1]) - 1) < 1e-12
    assert unitarity_residual(u) < 1e-12


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 8))
def test_rotation_is_unitary_and_lands_on_line(seed, d):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    u = rotate_b_into_subspace(b, v)
    assert unitarity_residual(u) < 1e-12
    ub = u @ b
    vh = v / np.linalg.norm(v)
    assert np.linalg.norm(ub - np.vdot(vh, ub) * vh) < 1e-12 * np.linalg.norm(b)


def test_rotation_errors():
    with pytest.raises(DomainError):
        rotate_b_into_subspace([0, 0], [1, 0])
    with pytest.raises(DomainError):
        rotate_b_into_subspace([1, 0], [0, 0])


def test_clone_with_general_blank():
    v = np.array([1.0, 1.0j, 0.0])
    u, res = clone_with_blank(v, (2 - 1j) * v, [0.0, 0.0, 1.0])
    assert unitarity_residual(u) < 1e-12 and res.residual < 1e-12


def test_regrouping_suite_is_seeded():
    a = regrouping_suite(50, np.random.default_rng(1))
    b = regrouping_suite(50, np.random.default_rng(1))
    assert a == b
    assert a["max_identity_residual"] < 1e-12 and a["max_unitarity_residual"] < 1e-12
