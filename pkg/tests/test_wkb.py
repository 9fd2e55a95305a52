import math

import numpy as np
import pytest

from dipolebound.basis import build_basis
from dipolebound.potential import hard_wall_model
from dipolebound.wkb import count_from_vd, phase_integral, wkb_counts


def test_pure_inverse_cube():
    # int_r0^rc sqrt(4/r^3) dr = 4/sqrt(r0) - 4/sqrt(rc); the missing tail is reported as error
    res = phase_integral(lambda r: -2.0 * np.asarray(r) ** -3, 0.01, 1e6)
    assert res.value == pytest.approx(40.0 - 4e-3, rel=1e-10)
    assert 1e-3 < res.error < 1e-2


def test_turning_point_well():
    # sqrt(1 - (r-2)^2) between turning points 1 and 3: half the unit disc
    res = phase_integral(lambda r: 0.5 * (np.asarray(r) - 2.0) ** 2 - 0.5, 1e-3, 10.0)
    assert res.value == pytest.approx(math.pi / 2, rel=1e-8)
    assert res.turning_points == pytest.approx([1.0, 3.0], rel=1e-10)


def test_repulsive_gives_zero():
    assert phase_integral(lambda r: 3.0 / np.asarray(r) ** 2, 0.01).value == 0.0


def test_inverse_quartic_tail():
    res = phase_integral(lambda r: -0.25 * np.asarray(r) ** -4, 1.0, 5.0, tail_c4=0.25)
    assert res.value == pytest.approx(math.sqrt(0.5) / 1.0, rel=1e-8)


def test_count_convention():
    assert count_from_vd(-0.2) == 0
    assert count_from_vd(0.0) == 1
    assert count_from_vd(2.7) == 3


def test_counts_monotone_in_r_min():
    totals = [wkb_counts(hard_wall_model(build_basis("even", 0, 30), r)).total for r in (3e-3, 1e-2, 0.1, 1.0, 10)]
    assert totals == sorted(totals, reverse=True)
    assert totals[-1] == 0


def test_lowest_adiabat_power_law():
    vs = [wkb_counts(hard_wall_model(build_basis("even", 0, 100), r), n_adiabats=1).v_d[0] for r in (1e-5, 1e-4)]
    assert math.log(vs[1] / vs[0]) / math.log(10) == pytest.approx(-0.5, abs=0.02)


def test_bad_adiabat_count():
    with pytest.raises(ValueError):
        wkb_counts(hard_wall_model(build_basis("even", 0, 4), 0.1), n_adiabats=4)
