import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sympy.physics.wigner import wigner_3j

from dipolebound.basis import (build_basis, dipole_coupling_matrix, dipole_matrix_element, single_channel,
                               wigner3j)


@pytest.mark.parametrize("args", [(2, 2, 2, 0, 0, 0), (1, 1, 2, 1, -1, 0), (4, 2, 6, 0, 0, 0),
                                  (3, 2, 5, -2, 0, 2), (10, 2, 12, 3, 0, -3), (200, 2, 200, 0, 0, 0)])
def test_against_sympy(args):
    assert wigner3j(*args) == pytest.approx(float(wigner_3j(*args)), rel=1e-13, abs=1e-15)


@given(j1=st.integers(0, 8), j2=st.integers(0, 8), m1=st.integers(-8, 8), m2=st.integers(-8, 8))
@settings(max_examples=60, deadline=None)
def test_random_against_sympy(j1, j2, m1, m2):
    for j3 in range(abs(j1 - j2), j1 + j2 + 1):
        assert wigner3j(j1, j2, j3, m1, m2, -m1 - m2) == pytest.approx(
            float(wigner_3j(j1, j2, j3, m1, m2, -m1 - m2)), abs=1e-13)


@given(j1=st.integers(0, 6), j2=st.integers(0, 6))
@settings(max_examples=30, deadline=None)
def test_orthogonality(j1, j2):
    # sum_{m1 m2} (2 j3 + 1) 3j(j3 m3) 3j(j3' m3) = delta_{j3 j3'}
    for j3 in range(abs(j1 - j2), j1 + j2 + 1):
        for m3 in range(-j3, j3 + 1):
            s = sum((2 * j3 + 1) * wigner3j(j1, j2, j3, m1, m3 - m1, -m3) ** 2
                    for m1 in range(-j1, j1 + 1) if abs(m3 - m1) <= j2)
            assert s == pytest.approx(1.0, abs=1e-12)


def test_selection_rules():
    assert wigner3j(1, 1, 3, 0, 0, 0) == 0.0          # triangle
    assert wigner3j(1, 2, 2, 0, 0, 0) == 0.0          # odd sum with m = 0
    assert wigner3j(2, 2, 2, 1, 1, 0) == 0.0          # m sum


def test_reference_elements():
    assert dipole_matrix_element(0, 2, 0) == pytest.approx(-2 / math.sqrt(5), rel=1e-15)
    assert dipole_matrix_element(2, 2, 0) == pytest.approx(-4 / 7, rel=1e-15)
    assert dipole_matrix_element(0, 0, 0) == 0.0
    assert dipole_matrix_element(1, 1, 0) == pytest.approx(-4 / 5, rel=1e-15)
    assert dipole_matrix_element(1, 1, 1) == pytest.approx(2 / 5, rel=1e-15)


@given(ML=st.integers(-5, 5), parity=st.sampled_from(["even", "odd"]), lmax=st.integers(6, 20))
@settings(max_examples=30, deadline=None)
def test_coupling_properties(ML, parity, lmax):
    b = build_basis(parity, ML, lmax)
    c = dipole_coupling_matrix(b)
    assert np.array_equal(c.W, c.W.T)
    # only |dL| <= 2 couples
    Ls = b.Ls
    far = np.abs(np.subtract.outer(Ls, Ls)) > 2
    assert np.all(c.W[far] == 0)
    # M_L -> -M_L symmetry
    assert np.allclose(dipole_coupling_matrix(build_basis(parity, -ML, lmax)).W, c.W, atol=0)
    assert np.array_equal(c.centrifugal, Ls * (Ls + 1))


def test_basis_construction():
    b = build_basis("odd", 2, 9)
    assert list(b.Ls) == [3, 5, 7, 9]
    assert list(build_basis("even", 0, 6).Ls) == [0, 2, 4, 6]
    assert list(single_channel(4).Ls) == [4]
    with pytest.raises(ValueError):
        build_basis("even", 5, 4)
    with pytest.raises(ValueError):
        build_basis("both", 0, 4)


def test_diagonal_sum_rule():
    # trace of -2 P2 over all M_L of a given L vanishes
    for L in range(1, 8):
        assert sum(dipole_matrix_element(L, L, M) for M in range(-L, L + 1)) == pytest.approx(0, abs=1e-13)
