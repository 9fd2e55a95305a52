"""Bound-state location by log-derivative matching, perturbative shifts and the s-wave scattering length."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .basis import dipole_matrix_element, single_channel, dipole_coupling_matrix
from .potential import InteractionModel
from .propagate import PropagationGrid, Propagator, default_grid

log = logging.getLogger(__name__)

# "0^-": threshold stand-in, in units of the model energy scale. At E = 0 an s-wave
# channel is never classically forbidden, so the inward start needs E < 0.
THRESHOLD_EPS = 1e-10


@dataclass
class BoundStateRecord:
    energy: float
    node_index: int                 # 0 = deepest state found in the window
    count_below: int                # states of the full system below this one
    parameter: Optional[float] = None
    basis: str = ""
    weights: Optional[np.ndarray] = field(default=None, repr=False)  # |channel amplitude|^2 at R_match
    dominant_L: Optional[int] = None
    L_max: Optional[int] = None
    dR: Optional[float] = None
    tol: Optional[float] = None
    complete: bool = True
    degenerate: bool = False


class _Matcher:
    """Matching-matrix evaluations of one propagator, memoized by energy."""

    def __init__(self, prop: Propagator):
        self.prop = prop
        self.cache = {}

    def __call__(self, E):
        if E not in self.cache:
            D, count, out, inn = self.prop.matching(E)
            w, v = np.linalg.eigh(D)
            self.cache[E] = (w, v, count, out.nodes, inn.nodes)
        return self.cache[E]

    def count(self, E):
        return self(E)[2]


def matching_eigenvalue(model, E: float, grid: Optional[PropagationGrid] = None,
                        propagator: Optional[Propagator] = None) -> float:
    """Eigenvalue of Y_out - Y_in at R_match with the smallest magnitude."""
    prop = propagator if propagator is not None else Propagator(model, grid)
    D = prop.matching(E)[0]
    w = np.linalg.eigvalsh(D)
    return float(w[np.argmin(np.abs(w))])


def _refine(match: _Matcher, a, b, tol):
    """Root of the matching eigenvalue that turns negative between a and b (one state inside)."""
    wa, _, ca, oa, ia = match(a)
    wb, _, cb, ob, ib = match(b)
    k = int(np.sum(wa < 0))
    if (oa, ia) != (ob, ib) or not (wa[k] > 0 and k < len(wb) and wb[k] < 0):
        return None

    def f(E):
        return match(E)[0][k]

    try:
        return brentq(f, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    except ValueError:
        return None


def find_bound_states(model, E_lo: float, E_hi: float, tol_E: Optional[float] = None,
                      grid: Optional[PropagationGrid] = None, propagator: Optional[Propagator] = None,
                      parameter: Optional[float] = None) -> list[BoundStateRecord]:
    """All bound states with E_lo < E < E_hi.

    Node counts isolate each state in its own bracket; the matching eigenvalue that
    changes sign there is then converged with Brent's method (bisection plus secant
    and inverse-quadratic steps) to |dE| < tol_E.
    """
    if not E_lo < E_hi:
        raise ValueError("need E_lo < E_hi")
    if E_hi > 0:
        raise ValueError("bound states need E_hi <= 0")
    prop = propagator if propagator is not None else Propagator(model, grid)
    if tol_E is None:
        tol_E = 1e-8 * model.energy_scale
    # a grid valid at the top of the window serves the whole search
    prop.ensure_forbidden(E_hi)
    match = _Matcher(prop)
    n_lo, n_hi = match.count(E_lo), match.count(E_hi)
    found = []
    complete = True
    stack = [(E_lo, E_hi, n_lo, n_hi)]
    while stack:
        a, b, na, nb = stack.pop()
        if nb == na:
            continue
        if nb - na == 1:
            E = _refine(match, a, b, tol_E)
            if E is not None:
                found.append((E, na, False))
                continue
        if b - a <= tol_E:
            found.extend(((0.5 * (a + b)), na + i, nb - na > 1) for i in range(nb - na))
            if nb - na > 1:
                log.warning("%d states within %.3g of E=%.12g", nb - na, b - a, 0.5 * (a + b))
            continue
        c = 0.5 * (a + b)
        nc = match.count(c)
        if not na <= nc <= nb:
            complete = False
            log.warning("node count not monotonic near E=%.12g", c)
            nc = min(max(nc, na), nb)
        stack.append((c, b, nc, nb))
        stack.append((a, c, na, nc))
    found.sort()
    if len(found) != n_hi - n_lo:
        complete = False
    records = []
    Ls = model.basis.Ls
    for i, (E, nbelow, degen) in enumerate(found):
        w, v, *_ = match(E)
        vec = v[:, int(np.argmin(np.abs(w)))]
        weights = vec**2
        records.append(BoundStateRecord(
            energy=E, node_index=i, count_below=nbelow, parameter=parameter,
            basis=model.basis.describe(), weights=weights, dominant_L=int(Ls[np.argmax(weights)]),
            L_max=int(Ls.max()), dR=prop.grid.dR, tol=tol_E, complete=complete, degenerate=degen))
    return records


def nth_state(model, v: int, E_lo: float, E_hi: float = 0.0, tol_E: Optional[float] = None,
              grid: Optional[PropagationGrid] = None, propagator: Optional[Propagator] = None) -> float:
    """Energy of the state with exactly ``v`` states below it (v = 0 is the ground state)."""
    prop = propagator if propagator is not None else Propagator(model, grid)
    if tol_E is None:
        tol_E = 1e-8 * model.energy_scale
    E_hi = min(E_hi, -THRESHOLD_EPS * model.energy_scale)
    prop.ensure_forbidden(E_hi)
    match = _Matcher(prop)
    a, b = E_lo, E_hi
    na, nb = match.count(a), match.count(b)
    if not na <= v < nb:
        raise ValueError(f"state {v} not in window: {na} states below E_lo, {nb} below E_hi")
    while True:
        if na == v and nb == v + 1:
            E = _refine(match, a, b, tol_E)
            if E is not None:
                return E
        if b - a <= tol_E:
            return 0.5 * (a + b)
        c = 0.5 * (a + b)
        nc = match.count(c)
        if nc > v:
            b, nb = c, nc
        else:
            a, na = c, nc


@dataclass
class ScatteringLength:
    a: float
    R_end: float
    change: float          # a(R_end) - a(R_end / 2), convergence estimate
    pole: bool             # |a| effectively infinite at this R_end


def scattering_length(model: InteractionModel, R_end: Optional[float] = None,
                      grid: Optional[PropagationGrid] = None, pole_ratio: float = 1e6) -> ScatteringLength:
    """Zero-energy s-wave scattering length a = R_end - 1/Y(R_end) of a single-channel L=0 model."""
    if model.size != 1 or model.basis.Ls[0] != 0:
        raise ValueError("scattering length needs a single L=0 channel")
    if getattr(model, "d1d2", 0.0) != 0.0 and np.any(model.coupling.W):
        raise ValueError("dipole coupling must be off")
    scale = model.length_scale
    if model.c6 > 0:
        scale = (2.0 * model.mass * model.c6) ** 0.25
    if R_end is None:
        R_end = 200.0 * scale

    prop = Propagator(model, grid if grid is not None else default_grid(model))

    def a_at(R):
        Y = prop.outward_to(R, 0.0).Y[0, 0]
        if Y == 0.0:
            return math.inf
        return R - 1.0 / Y

    a1 = a_at(R_end)
    a2 = a_at(0.5 * R_end)
    pole = not math.isfinite(a1) or abs(a1) > pole_ratio * scale
    return ScatteringLength(a=a1, R_end=R_end, change=a1 - a2, pole=pole)


def first_order_shift(model: InteractionModel, v: int, L: int, ML: int = 0,
                      grid: Optional[PropagationGrid] = None, rel_step: float = 1e-3,
                      return_expectation: bool = False):
    """First-order dipole-dipole shift d1d2 <L M|-2P2|L M> <v L|R^-3|v L> of an unperturbed level.

    <R^-3> comes from a Hellmann-Feynman derivative: an isotropic lam R^-3 term is
    added to the single-channel potential, dE/dlam is taken by symmetric
    differences at two step sizes and Richardson-extrapolated.
    """
    coef = model.d1d2 * dipole_matrix_element(L, L, ML)
    if L == 0 or coef == 0.0:
        return (0.0, 0.0) if return_expectation else 0.0
    basis = single_channel(L, ML)
    m0 = model.with_(basis=basis, coupling=dipole_coupling_matrix(basis), d1d2=0.0, lam=0.0)
    g = grid if grid is not None else default_grid(m0)
    E_lo = -1.01 * m0.de if m0.de > 0 else -1e3 * m0.energy_scale
    E0 = nth_state(m0, v, E_lo, 0.0, grid=g)
    tol = 1e-13 * abs(E0) + 1e-18
    lam0 = rel_step * abs(E0) * m0.r_eq**3 if m0.c12 > 0 else rel_step * abs(E0) * m0.r_wall**3

    def energy(lam):
        m = m0.with_(lam=lam)
        return nth_state(m, v, E_lo, 0.0, tol_E=tol, grid=g)

    def deriv(dl):
        return (energy(dl) - energy(-dl)) / (2.0 * dl)

    d1, d2 = deriv(lam0), deriv(0.5 * lam0)
    expect = (4.0 * d2 - d1) / 3.0
    shift = coef * expect
    return (shift, expect) if return_expectation else shift
