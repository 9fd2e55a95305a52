import math

import pytest
from hypothesis import given, strategies as st

from dipolebound.units import (FINE_STRUCTURE, PhysicalSystem, compute_scales, debye_to_au, au_to_debye,
                               load_molecules, magnetic_to_electric_dipole, rotational_c6)


def dy():
    return PhysicalSystem(mass=81.96, mu1=9.93, mu2=9.93, c6=2003.0, de=800.0)


def test_magnetic_dipole_conversion():
    assert magnetic_to_electric_dipole(9.93) == pytest.approx(9.93 * FINE_STRUCTURE / 2, rel=1e-15)
    assert magnetic_to_electric_dipole(9.93) == pytest.approx(0.03623, rel=1e-3)


def test_debye_roundtrip():
    assert au_to_debye(debye_to_au(1.234)) == pytest.approx(1.234, rel=1e-15)


def test_dy_scales():
    sc = compute_scales(dy())
    assert sc.r_dip == pytest.approx(196, rel=0.01)
    assert sc.r6 == pytest.approx(154, rel=0.02)
    assert sc.r4 / sc.r_dip == pytest.approx(math.sqrt(8 / 15), rel=1e-15)
    assert sc.e_dip == pytest.approx(1 / (dy().mass_au * sc.r_dip**2), rel=1e-15)


def test_zero_dipole_has_no_dipole_scales():
    sc = compute_scales(PhysicalSystem(mass=10.0, d1=0.0, d2=0.0, c6=100.0))
    assert sc.r_dip == 0 and math.isinf(sc.e_dip) and not sc.dipole_defined


def test_invalid_inputs():
    with pytest.raises(ValueError):
        PhysicalSystem(mass=-1.0, d1=1.0, d2=1.0)
    with pytest.raises(ValueError):
        PhysicalSystem(mass=1.0, d1=1.0, mu1=1.0)
    with pytest.raises(ValueError):
        rotational_c6(1.0, 0.0)


def test_krb_row():
    krb = load_molecules()["KRb"]
    sc = compute_scales(krb.system())
    assert sc.r_dip == pytest.approx(5.7e3, rel=0.05)
    assert sc.e_dip_hz == pytest.approx(1725, rel=0.05)


@given(d=st.floats(0.01, 10.0), m=st.floats(1.0, 300.0), f=st.floats(0.1, 10.0))
def test_dipole_scale_covariance(d, m, f):
    a = compute_scales(PhysicalSystem.from_debye(m, d))
    b = compute_scales(PhysicalSystem.from_debye(m, f * d))
    assert b.r_dip == pytest.approx(f**2 * a.r_dip, rel=1e-12)
    assert b.e_dip == pytest.approx(a.e_dip / f**4, rel=1e-12)


@given(m=st.floats(1.0, 300.0), f=st.floats(0.1, 10.0))
def test_mass_scale_covariance(m, f):
    a = compute_scales(PhysicalSystem.from_debye(m, 1.0, c6=100.0))
    b = compute_scales(PhysicalSystem.from_debye(f * m, 1.0, c6=100.0))
    assert b.r_dip == pytest.approx(f * a.r_dip, rel=1e-12)
    assert b.r6 == pytest.approx(f**0.25 * a.r6, rel=1e-12)
    assert b.e6 == pytest.approx(a.e6 * f**-1.5, rel=1e-12)
