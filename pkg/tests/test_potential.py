import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dipolebound.basis import build_basis
from dipolebound.potential import (AdiabatModel, adiabat_function, adiabats, converged_lmax, default_lj_wall,
                                   hard_wall_model, lennard_jones_model, lowest_adiabat_second_order)
from dipolebound.units import PhysicalSystem


def hw(parity="even", ML=0, lmax=40, r_min=0.01):
    return hard_wall_model(build_basis(parity, ML, lmax), r_min)


@given(r=st.floats(1e-3, 1e3), ML=st.integers(0, 3), parity=st.sampled_from(["even", "odd"]))
@settings(max_examples=40, deadline=None)
def test_hermitian(r, ML, parity):
    U = hw(parity, ML, 16).potential_matrix(r)
    assert np.array_equal(U, U.T)


def test_nonpositive_radius_rejected():
    with pytest.raises(ValueError):
        hw().potential_matrix(0.0)


def test_derivative_matches_finite_difference():
    m = lennard_jones_model(PhysicalSystem(mass=81.96, mu1=9.93, mu2=9.93, c6=2003.0, de=800.0),
                            build_basis("even", 0, 6)).with_(lam=0.3)
    R, h = 9.0, 1e-5
    fd = (m.potential_matrix(R + h) - m.potential_matrix(R - h)) / (2 * h)
    assert np.allclose(m.derivative_matrices([R])[0], fd, rtol=1e-6, atol=1e-14)


def test_lowest_adiabat_long_range():
    m = hw(lmax=40)
    eps0 = adiabat_function(m, 0)
    assert eps0(30.0)[0] * 30.0**4 == pytest.approx(-4 / 15, rel=0.01)
    # the second-order form becomes exact as r grows
    r = np.array([100.0, 1000.0])
    ratio = lowest_adiabat_second_order(r) / eps0(r)
    assert abs(ratio[1] - 1) < abs(ratio[0] - 1) < 0.01


def test_lowest_adiabat_short_range_asymptote():
    # r^3 eps0 -> -2, approached as -2 + sqrt(6 r) from the zero-point term
    m = hw(lmax=400)
    eps0 = adiabat_function(m, 0)
    for r in (1e-3, 4e-4):
        assert eps0(r)[0] * r**3 == pytest.approx(-2 + math.sqrt(6 * r), abs=0.15 * math.sqrt(6 * r))


def test_boson_fermion_adiabats_coincide_at_short_range():
    e = adiabat_function(hw("even", lmax=60), 0)(0.1)[0]
    o = adiabat_function(hw("odd", lmax=61), 0)(0.1)[0]
    assert e == pytest.approx(o, rel=1e-3)


def test_adiabats_continuity_and_order():
    m = hw(lmax=20)
    r = np.geomspace(0.05, 50, 400)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ac = adiabats(m, r)
    assert not ac.coarse
    # ordering at the largest radius follows the asymptotic L
    assert np.all(np.diff(ac.curves[-1]) > 0)


def test_adiabats_coarse_grid_warns():
    m = hw(lmax=20)
    with pytest.warns(RuntimeWarning):
        adiabats(m, np.geomspace(0.001, 50, 5))


def test_adiabat_model_derivative():
    m = AdiabatModel(hw(lmax=10), 1)
    R, h = 0.7, 1e-6
    fd = (m.potential_matrix(R + h) - m.potential_matrix(R - h)) / (2 * h)
    assert m.derivative_matrices([R])[0, 0, 0] == pytest.approx(fd[0, 0], rel=1e-6)


def test_lj_model():
    s = PhysicalSystem(mass=81.96, mu1=9.93, mu2=9.93, c6=2003.0, de=800.0)
    m = lennard_jones_model(s, build_basis("even", 0, 4))
    assert m.de == pytest.approx(s.de_au, rel=1e-13)
    assert m.r_wall == pytest.approx(default_lj_wall(s.c6, s.c12, s.de_au))
    # minimum of the isotropic part is -De at r_eq
    assert m.short_range(m.r_eq) == pytest.approx(-s.de_au, rel=1e-12)
    off = lennard_jones_model(s, build_basis("even", 0, 4), dipole=False)
    assert off.d1d2 == 0.0


def test_converged_lmax_grows_inward():
    assert converged_lmax("even", 0, 1e-3, tol=1e-4) >= converged_lmax("even", 0, 1e-1, tol=1e-4)
