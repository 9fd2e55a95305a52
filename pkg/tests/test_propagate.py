import math

import numpy as np
import pytest

from dipolebound.basis import build_basis, dipole_coupling_matrix, single_channel
from dipolebound.potential import InteractionModel, hard_wall_model
from dipolebound.propagate import (PropagationError, PropagationGrid, Propagator, default_grid, logder_inward,
                                   logder_outward, node_count)
from dipolebound.bound import find_bound_states


def free_model(r_wall=1.0):
    b = single_channel(0)
    return InteractionModel(basis=b, coupling=dipole_coupling_matrix(b), r_wall=r_wall, d1d2=0.0)


def free_grid(R_match=3.0):
    return PropagationGrid(R_min=1.0, R_match=R_match, R_mid=4.0, R_max=8.0, dR=1e-3)


@pytest.mark.parametrize("E", [-2.0, -0.02, 0.3, 2.0])
def test_free_particle_outward(E):
    x = 2.0
    Y = logder_outward(free_model(), E, free_grid()).Y[0, 0]
    if E < 0:
        k = math.sqrt(-2 * E)
        exact = k / math.tanh(k * x)
    else:
        k = math.sqrt(2 * E)
        exact = k / math.tan(k * x)
    assert Y == pytest.approx(exact, rel=1e-8, abs=1e-8 * k)


@pytest.mark.parametrize("E", [-2.0, -0.5, -0.02])
@pytest.mark.parametrize("long_range", ["airy", "ld"])
def test_free_particle_inward(E, long_range):
    Y = logder_inward(free_model(), E, free_grid(), long_range=long_range).Y[0, 0]
    assert Y == pytest.approx(-math.sqrt(-2 * E), rel=1e-8)


def test_free_particle_nodes():
    # sin(k (R - 1)) has floor(k x / pi) nodes on (1, 1 + x]
    E = 20.0
    st = logder_outward(free_model(), E, free_grid())
    assert st.nodes == int(math.sqrt(2 * E) * 2.0 / math.pi)


def dipole_model():
    return hard_wall_model(build_basis("even", 0, 10), 0.05)


def test_fourth_order_convergence():
    m = dipole_model()
    E = -3.0
    Ys = []
    for dR in (4e-3, 2e-3, 1e-3):
        g = PropagationGrid(R_min=0.05, R_match=0.5, R_mid=0.6, R_max=3.0, dR=dR)
        Ys.append(logder_outward(m, E, g).Y)
    order = math.log2(np.max(np.abs(Ys[0] - Ys[1])) / np.max(np.abs(Ys[1] - Ys[2])))
    assert order >= 3.5


@pytest.mark.parametrize("E", [-0.01, -1.0, -30.0])
def test_airy_matches_step_doubling(E):
    m = dipole_model()
    g = default_grid(m)
    a = Propagator(m, g, long_range="airy").long_range_only(E)
    b = Propagator(m, g, long_range="ld").long_range_only(E)
    assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-6


def test_log_derivative_symmetric():
    m = dipole_model()
    st = logder_outward(m, -2.0, default_grid(m))
    assert np.array_equal(st.Y, st.Y.T)
    assert st.asymmetry < 1e-8


def test_node_count_is_staircase_of_levels(lj, lj_oracle):
    p = Propagator(lj, default_grid(lj, R_match=lj.r_eq, R_mid=lj.r_eq))
    Es = np.linspace(-lj.de, 0.5 * (lj_oracle[10] + lj_oracle[11]), 60)
    counts = [p.node_count(E) for E in Es]
    assert counts == [int(np.sum(lj_oracle < E)) for E in Es]
    assert node_count(lj, Es[-1]) == counts[-1]


def test_direction_consistency(lj):
    g = default_grid(lj, R_match=lj.r_eq, R_mid=lj.r_eq)
    st = find_bound_states(lj, -lj.de, -0.5 * lj.de, grid=g, tol_E=1e-14)
    p = Propagator(lj, g)
    for s in st:
        yo = p.outward(s.energy).Y[0, 0]
        yi = p.inward(s.energy).Y[0, 0]
        assert yo == pytest.approx(yi, rel=1e-6, abs=1e-6)


def test_grid_validation():
    with pytest.raises(ValueError):
        PropagationGrid(R_min=1.0, R_match=0.5, R_mid=2.0, R_max=3.0, dR=1e-3)
    with pytest.raises(ValueError):
        PropagationGrid(R_min=1.0, R_match=1.5, R_mid=2.0, R_max=3.0, dR=0.0)


def test_r_max_extension():
    m = dipole_model()
    g = default_grid(m).with_(auto_extend=False, R_max=0.7)
    with pytest.raises(PropagationError):
        Propagator(m, g).node_count(-1e-4)
    p = Propagator(m, default_grid(m).with_(R_max=0.7))
    p.node_count(-1e-4)
    assert p.grid.R_max > 0.7
