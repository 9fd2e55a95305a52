"""Semiclassical (WKB) count of the bound states supported by each adiabat."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .potential import SECOND_ORDER_C4, adiabat_function


@dataclass
class PhaseIntegral:
    value: float          # radians
    tail: float           # analytic contribution beyond r_cut
    error: float          # quadrature error estimate (plus truncation if no tail model)
    turning_points: list


@dataclass
class PhaseIntegralResult:
    r_min: float
    phase: np.ndarray     # Phi_n
    v_d: np.ndarray       # Phi_n / pi - 1/2
    counts: np.ndarray    # floor(v_d) + 1, or 0 when v_d < 0
    total: int


def _scalar(curve):
    def f(r):
        return float(np.asarray(curve(np.array([r]))).ravel()[0])
    return f


def _piece(f, ra, rb, left_turn, right_turn, epsabs, epsrel):
    """Integral of sqrt(-2 f) over an allowed interval; square-root ends are substituted away."""
    total = 0.0
    err = 0.0
    a, b = ra, rb
    frac = 0.01
    if right_turn:
        d = frac * (b - a)
        u = math.sqrt(d)
        val, e = quad(lambda t: math.sqrt(max(0.0, -2.0 * f(b - t * t))) * 2.0 * t, 0.0, u,
                      epsabs=epsabs, epsrel=epsrel, limit=200)
        total += val
        err += e
        b = b - d
    if left_turn:
        d = frac * (b - a)
        u = math.sqrt(d)
        val, e = quad(lambda t: math.sqrt(max(0.0, -2.0 * f(a + t * t))) * 2.0 * t, 0.0, u,
                      epsabs=epsabs, epsrel=epsrel, limit=200)
        total += val
        err += e
        a = a + d
    # log variable for the (possibly very wide) interior
    val, e = quad(lambda s: math.sqrt(max(0.0, -2.0 * f(math.exp(s)))) * math.exp(s),
                  math.log(a), math.log(b), epsabs=epsabs, epsrel=epsrel, limit=500)
    return total + val, err + e


def phase_integral(curve: Callable, r_min: float, r_cut: float = 50.0, tail_c4: Optional[float] = None,
                   n_sample: int = 4000, epsabs: float = 1e-10, epsrel: float = 1e-10) -> PhaseIntegral:
    """Zero-energy phase integral of Re sqrt(-2 eps(r)) from r_min to infinity.

    ``curve`` maps an array of radii to energies. Beyond ``r_cut`` the curve is
    either -tail_c4 r^-4 (integrated analytically) or taken as classically
    forbidden; if it is still attractive at r_cut without a tail model, the
    missing piece is estimated from an r^-4 extrapolation and added to ``error``.
    """
    if not 0 < r_min < r_cut:
        raise ValueError("need 0 < r_min < r_cut")
    f = _scalar(curve)
    r = np.geomspace(r_min, r_cut, n_sample)
    e = np.asarray(curve(r)).ravel()
    allowed = e < 0
    if not np.any(allowed):
        return PhaseIntegral(0.0, 0.0, 0.0, [])
    turns = []
    edges = np.nonzero(np.diff(allowed.astype(int)))[0]
    for i in edges:
        turns.append(brentq(f, r[i], r[i + 1], xtol=1e-14 * r[i], rtol=1e-14))
    # assemble allowed intervals
    bounds = [r_min] + turns + [r_cut]
    flags = [False] + [True] * len(turns) + [False]
    state = bool(allowed[0])
    total = 0.0
    err = 0.0
    for k in range(len(bounds) - 1):
        if state:
            val, er = _piece(f, bounds[k], bounds[k + 1], flags[k], flags[k + 1], epsabs, epsrel)
            total += val
            err += er
        state = not state
    tail = 0.0
    if allowed[-1]:
        if tail_c4 is not None:
            tail = math.sqrt(2.0 * tail_c4) / r_cut
        else:
            c4 = -e[-1] * r_cut**4
            err += math.sqrt(2.0 * c4) / r_cut
    return PhaseIntegral(total + tail, tail, err, turns)


def tail_cutoff(curve: Callable, c4: float = SECOND_ORDER_C4, rel: float = 1e-4, start: float = 10.0,
                limit: float = 1e7) -> float:
    """Smallest r (doubling from ``start``) where the curve matches -c4 r^-4 to ``rel``."""
    r = start
    while r < limit:
        e = float(np.asarray(curve(np.array([r]))).ravel()[0])
        if abs(e + c4 * r**-4) < rel * abs(e):
            return r
        r *= 2.0
    raise RuntimeError("adiabat never reaches its r^-4 tail")


def count_from_vd(v_d: float) -> int:
    return int(math.floor(v_d)) + 1 if v_d >= 0 else 0


def wkb_counts(model, r_min: Optional[float] = None, n_adiabats: Optional[int] = None,
               r_cut: float = 50.0) -> PhaseIntegralResult:
    """Per-adiabat WKB quantum numbers at dissociation and the implied state counts.

    ``model`` is a reduced (R_dip, E_dip) model; the lowest adiabat of an even-L,
    M_L = 0 basis gets the analytic -4/15 r^-4 tail beyond its cutoff.
    """
    if model.unit_system != "reduced":
        raise ValueError("WKB counts are defined for reduced-unit models")
    r_min = model.r_wall if r_min is None else r_min
    N = model.size
    if n_adiabats is None:
        n_adiabats = N
    if not 0 < n_adiabats <= N:
        raise ValueError(f"n_adiabats must be in 1..{N}")
    has_s_wave = model.basis.Ls[0] == 0
    phases = np.zeros(n_adiabats)
    for n in range(n_adiabats):
        curve = adiabat_function(model, n)
        if n == 0 and has_s_wave:
            rc = max(r_cut, tail_cutoff(curve))
            if r_min >= rc:
                phases[n] = math.sqrt(2.0 * SECOND_ORDER_C4) / r_min
                continue
            phases[n] = phase_integral(curve, r_min, rc, tail_c4=SECOND_ORDER_C4).value
        else:
            if r_min >= r_cut:
                continue
            phases[n] = phase_integral(curve, r_min, r_cut).value
    v_d = phases / math.pi - 0.5
    counts = np.array([count_from_vd(v) for v in v_d], dtype=int)
    return PhaseIntegralResult(r_min=r_min, phase=phases, v_d=v_d, counts=counts, total=int(counts.sum()))
