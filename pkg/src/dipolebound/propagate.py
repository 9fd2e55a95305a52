"""Bidirectional log-derivative propagation of the coupled radial equations.

Outward: fixed-step modified log-derivative propagator (constant diagonal reference
per sector) from the hard wall at R_min to R_match.

Inward: from R_max, where the wavefunction is started in its decaying WKB form,
down to R_mid with a linear-reference (Airy) propagator on a geometrically growing
grid, then to R_match with fixed steps. A step-doubling log-derivative propagator
can replace the Airy leg.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import special

from . import _kernels as K
from .potential import AdiabatModel, InteractionModel

HARD_WALL_D = 1e20
_Z_CONST = 1e4


class PropagationError(RuntimeError):
    """Propagation produced non-finite values or its preconditions failed."""

    def __init__(self, msg, radius=None, energy=None):
        super().__init__(msg)
        self.radius = radius
        self.energy = energy


@dataclass(frozen=True)
class PropagationGrid:
    R_min: float
    R_match: float
    R_mid: float
    R_max: float
    dR: float                 # sector width of the fixed-step legs
    growth: float = 1.1       # sector-width growth factor of the long-range leg
    max_phase: float = 0.1    # max local WKB phase per long-range sector, rad
    max_rel_step: float = 0.05  # long-range sector width <= this * R
    auto_extend: bool = True  # push R_max out when E lies above an adiabat there

    def __post_init__(self):
        if not (0 < self.R_min < self.R_match <= self.R_mid < self.R_max):
            raise ValueError(
                f"grid needs 0 < R_min < R_match <= R_mid < R_max, got "
                f"{self.R_min}, {self.R_match}, {self.R_mid}, {self.R_max}")
        if not self.dR > 0:
            raise ValueError("dR must be positive")
        if not self.growth >= 1.0:
            raise ValueError("growth factor must be >= 1")

    def with_(self, **kw) -> "PropagationGrid":
        return replace(self, **kw)


def default_grid(model, dR: Optional[float] = None, R_match: Optional[float] = None,
                 R_mid: Optional[float] = None, R_max: Optional[float] = None) -> PropagationGrid:
    """Default radial grid in units of the model's length scale (R_dip, or R6 without a dipole).

    Hard wall: R_match = R_min + 1e-3 R_dip. Lennard-Jones: R_match = 8 a0.
    Both: R_mid = 0.2, R_max = 3 and dR = 1e-5 in length-scale units.
    """
    s = model.length_scale
    R_min = model.r_wall
    if R_match is None:
        R_match = R_min + 1e-3 * s if model.variant == "hard_wall" else 8.0
        R_match = max(R_match, R_min + 1e-3 * s)
    R_mid = 0.2 * s if R_mid is None else R_mid
    R_mid = max(R_mid, R_match)
    R_max = 3.0 * s if R_max is None else R_max
    if R_max <= R_mid:
        R_max = 3.0 * R_mid
    dR = 1e-5 * s if dR is None else dR
    return PropagationGrid(R_min=R_min, R_match=R_match, R_mid=R_mid, R_max=R_max, dR=dR)


@dataclass
class LogDerivativeState:
    Y: np.ndarray       # d psi/dR psi^-1 at R (always with respect to increasing R)
    R: float
    direction: str      # "outward" | "inward"
    nodes: int
    asymmetry: float = 0.0


def _const_ref_vec(p, h):
    """Vectorized constant-reference half-sector elements (y1 = y4, y2, reference nodes)."""
    p = np.asarray(p, dtype=float)
    h = np.broadcast_to(h, p.shape).astype(float)
    y1 = np.empty_like(p)
    y2 = np.empty_like(p)
    nref = np.zeros(p.shape, dtype=np.int64)
    x = p * h * h
    small = np.abs(x) < K._SERIES
    pos = (p > 0) & ~small
    neg = (p < 0) & ~small
    y1[small] = 1.0 / h[small] + p[small] * h[small] / 3.0
    y2[small] = 1.0 / h[small] - p[small] * h[small] / 6.0
    k = np.sqrt(p[pos])
    t = np.exp(-2.0 * k * h[pos])
    y1[pos] = k * (1.0 + t) / (1.0 - t)
    y2[pos] = 2.0 * k * np.sqrt(t) / (1.0 - t)
    k = np.sqrt(-p[neg])
    th = k * h[neg]
    y1[neg] = k / np.tan(th)
    y2[neg] = k / np.sin(th)
    nref[neg] = (th / np.pi).astype(np.int64)
    return y1, y1.copy(), y2, nref


def airy_reference(A, B, x1, x2):
    """Propagator elements (y1, y2, y4) of psi'' = (A + B x) psi on [x1, x2], B != 0.

    Uses exponentially scaled Airy functions where the solutions grow or decay, so
    deep classically forbidden intervals do not overflow.
    """
    A, B, x1, x2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (A, B, x1, x2)))
    s = np.cbrt(B)
    z1 = (A + B * x1) / (s * s)
    z2 = (A + B * x2) / (s * s)

    def scaled(z):
        a, ap, b, bp = (np.empty_like(z) for _ in range(4))
        zeta = np.zeros_like(z)
        pos = z > 0
        if np.any(pos):
            a[pos], ap[pos], b[pos], bp[pos] = special.airye(z[pos])
            zeta[pos] = 2.0 / 3.0 * z[pos] ** 1.5
        if np.any(~pos):
            a[~pos], ap[~pos], b[~pos], bp[~pos] = special.airy(z[~pos])
        return a, ap, b, bp, zeta

    a1, a1p, b1, b1p, zt1 = scaled(z1)
    a2, a2p, b2, b2p, zt2 = scaled(z2)
    both = (z1 > 0) & (z2 > 0)
    delta = zt2 - zt1
    if np.any(both):
        # cancellation-free zeta2 - zeta1
        r1, r2 = np.sqrt(z1[both]), np.sqrt(z2[both])
        delta[both] = 2.0 / 3.0 * (z2[both] - z1[both]) * (z1[both] + r1 * r2 + z2[both]) / (r1 + r2)
    e = np.exp(-2.0 * np.abs(delta))
    g = np.exp(-np.abs(delta))
    up = delta >= 0
    den = np.where(up, a1 * b2 - a2 * b1 * e, a1 * b2 * e - a2 * b1)
    y1 = s * np.where(up, b1p * a2 * e - a1p * b2, b1p * a2 - a1p * b2 * e) / den
    y4 = s * np.where(up, b2p * a1 - a2p * b1 * e, b2p * a1 * e - a2p * b1) / den
    y2 = (s / np.pi) * g / den
    return y1, y2, y4


def _residual_sectors(model, bounds, sign):
    """Energy-independent Airy sector data for sector boundaries ``bounds`` (propagation order)."""
    a = bounds[:-1]
    b = bounds[1:]
    c = 0.5 * (a + b)
    h = 0.5 * np.abs(b - a)
    two_m = 2.0 * model.mass
    Uc = two_m * model.potential_matrices(c)
    dUc = sign * two_m * model.derivative_matrices(c)
    A, T = np.linalg.eigh(Uc)
    Tt = np.transpose(T, (0, 2, 1))
    B = np.einsum("kji,kjl,kli->ki", T, dUc, T)
    Ua = Tt @ (two_m * model.potential_matrices(a)) @ T
    Ub = Tt @ (two_m * model.potential_matrices(b)) @ T
    n, N = A.shape
    idx = np.arange(N)
    Ra = Ua.copy()
    Rb = Ub.copy()
    Ra[:, idx, idx] -= A - B * h[:, None]
    Rb[:, idx, idx] -= A + B * h[:, None]
    Q = np.empty_like(T)
    Q[0] = np.eye(N)
    Q[1:] = Tt[:-1] @ T[1:]
    return dict(A=A, B=B, T=T, Q=np.ascontiguousarray(Q), Ra=Ra, Rb=Rb, h=h)


def airy_run(model, d, E, Yd):
    """Propagate the diabatic matrix Yd through precomputed sectors ``d`` at energy E.

    Channels whose Airy argument would be huge (negligible slope) fall back to a
    constant reference, with the linear term moved into the residual.
    """
    A = d["A"] - 2.0 * model.mass * E
    B = d["B"]
    T = d["T"]
    hb = np.broadcast_to(d["h"][:, None], A.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        zmax = np.maximum(np.abs(A - np.abs(B) * hb), np.abs(A + np.abs(B) * hb)) / np.cbrt(B) ** 2
    const = ~(np.isfinite(zmax) & (zmax < _Z_CONST))
    lin = ~const
    ys = [np.empty_like(A) for _ in range(6)]
    Ra, Rb = d["Ra"], d["Rb"]
    if np.any(lin):
        ys[0][lin], ys[1][lin], ys[2][lin] = airy_reference(A[lin], B[lin], -hb[lin], 0.0)
        ys[3][lin], ys[4][lin], ys[5][lin] = airy_reference(A[lin], B[lin], 0.0, hb[lin])
    if np.any(const):
        c1, c4, c2, _ = _const_ref_vec(A[const], hb[const])
        for y, val in zip(ys, (c1, c2, c4, c1, c2, c4)):
            y[const] = val
        idx = np.arange(A.shape[1])
        Ra, Rb = Ra.copy(), Rb.copy()
        shift = np.where(const, B * hb, 0.0)
        Ra[:, idx, idx] -= shift
        Rb[:, idx, idx] += shift
    # reference nodes from the WKB phase of each half-sector (zero under the phase cap)
    phase = hb * np.sqrt(np.maximum(0.0, -(A - np.abs(B) * hb)))
    nref = (2 * np.floor(phase / np.pi)).astype(np.int64).sum(axis=1)
    Y = np.ascontiguousarray(T[0].T @ Yd @ T[0])
    nodes, dev, bad = K.airy_sectors(Y, d["Q"], Ra, Rb, d["h"], *ys, nref)
    if bad >= 0:
        R = d["bounds"][bad + 1]
        raise PropagationError(f"non-finite log-derivative at R={R:g}, E={E:g}", radius=R, energy=E)
    return T[-1] @ Y @ T[-1].T, int(nodes), dev


class Propagator:
    """Log-derivative propagation of one model on one grid, reusable across energies.

    Energy-independent work (local bases of the Airy leg, tabulated potentials) is
    done once per instance.
    """

    def __init__(self, model, grid: Optional[PropagationGrid] = None, long_range: str = "airy",
                 doubling_tol: float = 1e-10):
        if long_range not in ("airy", "ld"):
            raise ValueError(f"unknown long-range propagator {long_range!r}")
        self.model = model
        self.grid = grid if grid is not None else default_grid(model)
        self.long_range = long_range
        self.doubling_tol = doubling_tol
        self._airy = None
        self._tab = {}
        self._analytic = isinstance(model, InteractionModel)

    # ---- grid handling -------------------------------------------------

    def _kmax(self, R):
        w = np.linalg.eigvalsh(self.model.potential_matrices(R))[:, 0]
        return np.sqrt(np.maximum(0.0, -2.0 * self.model.mass * w))

    def growing_bounds(self, R_from: float, R_to: float) -> np.ndarray:
        """Ascending sector boundaries from R_from to R_to, widths growing from dR.

        Each width is capped by the local WKB phase at E = 0 and by a fraction of R.
        """
        g = self.grid
        bounds = [R_from]
        w = g.dR
        R = R_from
        while R < R_to:
            kk = float(self._kmax(np.array([R, R + w])).max())
            cap = g.max_rel_step * R
            if kk > 0:
                cap = min(cap, g.max_phase / kk)
            w = max(min(w * g.growth, cap), g.dR)
            R = R + w
            bounds.append(R)
        bounds = np.array(bounds)
        bounds[-1] = R_to
        if len(bounds) > 2 and bounds[-1] - bounds[-2] < 0.5 * (bounds[-2] - bounds[-3]):
            bounds = np.delete(bounds, -2)
        return bounds

    def long_range_bounds(self) -> np.ndarray:
        """Sector boundaries from R_mid to R_max (ascending)."""
        return self.growing_bounds(self.grid.R_mid, self.grid.R_max)

    def _airy_data(self):
        if self._airy is None:
            bounds = self.long_range_bounds()[::-1].copy()   # propagation order R_max -> R_mid
            self._airy = _residual_sectors(self.model, bounds, sign=-1.0)
            self._airy["bounds"] = bounds
        return self._airy

    def adiabats_at(self, R):
        U = self.model.potential_matrices([R])[0]
        return np.linalg.eigh(U)

    def ensure_forbidden(self, E: float) -> None:
        """Make every adiabat at R_max lie above E, extending R_max when allowed."""
        g = self.grid
        R = g.R_max
        while True:
            eps, _ = self.adiabats_at(R)
            if eps[0] > E:
                break
            if not g.auto_extend:
                raise PropagationError(
                    f"E={E:g} lies above an adiabat ({eps[0]:g}) at R_max={R:g}; enlarge R_max",
                    radius=R, energy=E)
            R *= 1.5
            if R > 1e4 * g.R_max:
                raise PropagationError(f"cannot find a classically forbidden R_max for E={E:g}",
                                       radius=R, energy=E)
        if R != g.R_max:
            self.grid = g.with_(R_max=R)
            self._airy = None
            self._tab = {}

    # ---- fixed-step legs -----------------------------------------------

    def _fixed_leg(self, Y, E, R_start, R_end, direction):
        L = abs(R_end - R_start)
        n = max(1, int(math.ceil(L / self.grid.dR - 1e-9)))
        h = L / (2 * n)
        m = self.model
        e2m = 2.0 * m.mass * E
        if self._analytic:
            nodes, dev, bad = K.ld_fixed_analytic(
                Y, R_start, h, n, direction, m.coupling.centrifugal / (2.0 * m.mass),
                m.d1d2 * m.coupling.W, m.lam, m.c6, m.c12, 2.0 * m.mass, e2m)
        else:
            key = (R_start, R_end)
            if key not in self._tab:
                pts = R_start + direction * h * np.arange(2 * n + 1)
                self._tab[key] = np.ascontiguousarray(2.0 * m.mass * m.potential_matrices(pts))
            nodes, dev, bad = K.ld_fixed_tabulated(Y, self._tab[key], e2m, h)
        if bad >= 0:
            raise PropagationError(
                f"non-finite log-derivative at R={R_start + direction * 2 * h * (bad + 1):g}, E={E:g}",
                radius=R_start + direction * 2 * h * (bad + 1), energy=E)
        return nodes, dev

    # ---- long-range legs -----------------------------------------------

    def _airy_leg(self, E, Yd):
        """Airy propagation R_max -> R_mid of the diabatic inward matrix Yd (s = -R)."""
        return airy_run(self.model, self._airy_data(), E, Yd)

    def _doubling_leg(self, E, Yd):
        """Adaptive step-doubling log-derivative propagation R_max -> R_mid (s = -R)."""
        g = self.grid
        m = self.model
        e2m = 2.0 * m.mass * E
        R = g.R_max
        H = max(g.dR, 1e-3 * R)
        Y = Yd.copy()
        nodes = 0
        dev = 0.0
        tol = self.doubling_tol
        while R > g.R_mid * (1 + 1e-14):
            H = min(H, R - g.R_mid)
            pts = R - 0.25 * H * np.arange(5)
            W0 = np.ascontiguousarray(2.0 * m.mass * m.potential_matrices(pts))
            Y1 = Y.copy()
            K.ld_fixed_tabulated(Y1, W0[::2].copy(), e2m, 0.5 * H)
            Y2 = Y.copy()
            n2, d2, _ = K.ld_fixed_tabulated(Y2, W0, e2m, 0.25 * H)
            err = np.max(np.abs(Y2 - Y1)) / max(np.max(np.abs(Y2)), 1.0)
            if err <= tol or H <= g.dR:
                Y = Y2
                nodes += n2
                dev = max(dev, d2)
                R -= H
                if not np.all(np.isfinite(Y)):
                    raise PropagationError(f"non-finite log-derivative at R={R:g}, E={E:g}", radius=R, energy=E)
                if err < tol / 32:
                    H *= 1.5
            else:
                H *= 0.5
        return Y, nodes, dev

    # ---- public API ----------------------------------------------------

    def outward(self, E: float) -> LogDerivativeState:
        g = self.grid
        N = self.model.size
        Y = HARD_WALL_D * np.eye(N)
        nodes, dev = self._fixed_leg(Y, E, g.R_min, g.R_match, +1)
        return LogDerivativeState(Y=Y, R=g.R_match, direction="outward", nodes=int(nodes), asymmetry=dev)

    def outward_to(self, R_end: float, E: float = 0.0) -> LogDerivativeState:
        """Outward log-derivative at an arbitrary R_end (fixed steps to R_mid, growing beyond)."""
        g = self.grid
        Y = HARD_WALL_D * np.eye(self.model.size)
        R_fixed = min(g.R_mid, R_end)
        nodes, dev = self._fixed_leg(Y, E, g.R_min, R_fixed, +1)
        if R_end > R_fixed:
            bounds = self.growing_bounds(R_fixed, R_end)
            d = _residual_sectors(self.model, bounds, sign=+1.0)
            d["bounds"] = bounds
            Y, n2, d2 = airy_run(self.model, d, E, Y)
            nodes += n2
            dev = max(dev, d2)
        return LogDerivativeState(Y=Y, R=R_end, direction="outward", nodes=int(nodes), asymmetry=dev)

    def initial_inward(self, E: float) -> np.ndarray:
        """Decaying WKB start at R_max: d psi/d(-R) psi^-1 = T diag(kappa) T^T."""
        eps, T = self.adiabats_at(self.grid.R_max)
        if eps[0] <= E:
            raise PropagationError(
                f"E={E:g} lies above an adiabat ({eps[0]:g}) at R_max={self.grid.R_max:g}; enlarge R_max",
                radius=self.grid.R_max, energy=E)
        kappa = np.sqrt(2.0 * self.model.mass * (eps - E))
        return (T * kappa) @ T.T

    def inward(self, E: float) -> LogDerivativeState:
        g = self.grid
        self.ensure_forbidden(E)
        g = self.grid
        Yd = self.initial_inward(E)
        if self.long_range == "airy":
            Y, nodes, dev = self._airy_leg(E, Yd)
        else:
            Y, nodes, dev = self._doubling_leg(E, Yd)
        Y = np.ascontiguousarray(Y)
        if g.R_mid > g.R_match:
            n2, d2 = self._fixed_leg(Y, E, g.R_mid, g.R_match, -1)
            nodes += n2
            dev = max(dev, d2)
        return LogDerivativeState(Y=-Y, R=g.R_match, direction="inward", nodes=int(nodes), asymmetry=dev)

    def long_range_only(self, E: float) -> np.ndarray:
        """Inward log-derivative (w.r.t. R) at R_mid from the long-range leg alone."""
        self.ensure_forbidden(E)
        Yd = self.initial_inward(E)
        if self.long_range == "airy":
            Y, _, _ = self._airy_leg(E, Yd)
        else:
            Y, _, _ = self._doubling_leg(E, Yd)
        return -Y

    def matching(self, E: float):
        """(matching matrix Y_out - Y_in, node count below E, outward state, inward state)."""
        out = self.outward(E)
        inn = self.inward(E)
        D = out.Y - inn.Y
        D = 0.5 * (D + D.T)
        w = np.linalg.eigvalsh(D)
        count = out.nodes + inn.nodes + int(np.sum(w < 0))
        return D, count, out, inn

    def node_count(self, E: float) -> int:
        return self.matching(E)[1]


def logder_outward(model, E: float, grid: Optional[PropagationGrid] = None) -> LogDerivativeState:
    return Propagator(model, grid).outward(E)


def logder_inward(model, E: float, grid: Optional[PropagationGrid] = None,
                  long_range: str = "airy") -> LogDerivativeState:
    return Propagator(model, grid, long_range=long_range).inward(E)


def node_count(model, E: float, grid: Optional[PropagationGrid] = None) -> int:
    """Number of bound states of the coupled system below E (Johnson's multichannel count)."""
    return Propagator(model, grid).node_count(E)
