"""Radial coupled-channel potential matrices and adiabatic potential curves."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .basis import ChannelBasis, CouplingMatrix, dipole_coupling_matrix
from .units import PhysicalSystem, compute_scales

SECOND_ORDER_C4 = 4.0 / 15.0


@dataclass(frozen=True)
class InteractionModel:
    """Coupled-channel radial Hamiltonian.

    The potential matrix in the model's own units is

        U(R) = diag(L(L+1)) / (2 M R^2) + (d1d2 W + lam I) / R^3 + (C12 R^-12 - C6 R^-6) I

    and the radial equations read psi'' = 2 M (U - E) psi. The reduced hard-wall
    model is the special case M = d1d2 = 1, C6 = C12 = 0, lengths in R_dip.
    ``lam`` is an extra isotropic R^-3 term used for Hellmann-Feynman derivatives.
    """

    basis: ChannelBasis
    coupling: CouplingMatrix
    r_wall: float
    mass: float = 1.0
    d1d2: float = 1.0
    c6: float = 0.0
    c12: float = 0.0
    lam: float = 0.0
    variant: str = "hard_wall"           # "hard_wall" | "lennard_jones"
    unit_system: str = "reduced"         # "reduced" | "physical"
    length_scale: float = 1.0            # R_dip (or R6 when the dipole is off), model units
    energy_scale: float = 1.0            # E_dip (or E6), model units

    def __post_init__(self):
        if not self.r_wall > 0:
            raise ValueError(f"wall radius must be positive, got {self.r_wall}")
        if self.coupling.size != self.basis.size:
            raise ValueError("coupling matrix dimension does not match the basis")
        if self.variant == "lennard_jones" and not (self.c12 > 0 and self.c6 >= 0):
            raise ValueError("Lennard-Jones model needs C12 > 0 and C6 >= 0")

    @property
    def size(self) -> int:
        return self.basis.size

    @property
    def de(self) -> float:
        """Lennard-Jones well depth C6^2/(4 C12) (0 without a short-range potential)."""
        return self.c6**2 / (4.0 * self.c12) if self.c12 > 0 else 0.0

    @property
    def r_eq(self) -> float:
        return (2.0 * self.c12 / self.c6) ** (1.0 / 6.0)

    def with_(self, **changes) -> "InteractionModel":
        return replace(self, **changes)

    def short_range(self, R):
        R = np.asarray(R, dtype=float)
        if self.c12 == 0 and self.c6 == 0:
            return np.zeros_like(R)
        r6 = R**-6
        return self.c12 * r6 * r6 - self.c6 * r6

    def potential_matrices(self, R) -> np.ndarray:
        """U at each radius in ``R`` (shape (n,)), returned with shape (n, N, N)."""
        R = np.atleast_1d(np.asarray(R, dtype=float))
        if np.any(R <= 0):
            raise ValueError("radius must be positive")
        N = self.size
        U = np.multiply.outer(R**-3, self.d1d2 * self.coupling.W)
        iso = self.lam * R**-3 + self.short_range(R)
        idx = np.arange(N)
        U[:, idx, idx] += np.multiply.outer(R**-2, self.coupling.centrifugal / (2.0 * self.mass))
        U[:, idx, idx] += iso[:, None]
        return U

    def derivative_matrices(self, R) -> np.ndarray:
        """dU/dR at each radius, shape (n, N, N)."""
        R = np.atleast_1d(np.asarray(R, dtype=float))
        N = self.size
        dU = np.multiply.outer(-3.0 * R**-4, self.d1d2 * self.coupling.W)
        iso = -3.0 * self.lam * R**-4
        if self.c12 or self.c6:
            iso = iso - 12.0 * self.c12 * R**-13 + 6.0 * self.c6 * R**-7
        idx = np.arange(N)
        dU[:, idx, idx] += np.multiply.outer(-2.0 * R**-3, self.coupling.centrifugal / (2.0 * self.mass))
        dU[:, idx, idx] += iso[:, None]
        return dU

    def potential_matrix(self, R: float) -> np.ndarray:
        if not R > 0:
            raise ValueError(f"radius must be positive, got {R}")
        return self.potential_matrices([R])[0]

    def describe(self) -> dict:
        return {
            "variant": self.variant,
            "units": self.unit_system,
            "basis": self.basis.describe(),
            "r_wall": self.r_wall,
            "mass": self.mass,
            "d1d2": self.d1d2,
            "C6": self.c6,
            "C12": self.c12,
        }


def hard_wall_model(basis: ChannelBasis, r_min: float) -> InteractionModel:
    """Reduced dipole-dipole model (lengths in R_dip, energies in E_dip) with psi(r_min) = 0."""
    return InteractionModel(basis=basis, coupling=dipole_coupling_matrix(basis), r_wall=r_min)


def default_lj_wall(c6: float, c12: float, de: float, factor: float = 100.0) -> float:
    """Radius where the R^-12 repulsion reaches ``factor`` times the well depth."""
    return (c12 / (factor * de)) ** (1.0 / 12.0)


def lennard_jones_model(system: PhysicalSystem, basis: ChannelBasis, R_min: Optional[float] = None,
                        dipole: bool = True) -> InteractionModel:
    """Lennard-Jones plus dipole-dipole model in atomic units (a0, hartree).

    ``dipole=False`` switches the dipole-dipole coupling off while keeping the
    same basis and grid scales.
    """
    if system.de is None or system.de <= 0 or system.c6 <= 0:
        raise ValueError("Lennard-Jones model needs C6 > 0 and a positive well depth")
    sc = compute_scales(system)
    c12 = sc.c12
    if R_min is None:
        R_min = default_lj_wall(system.c6, c12, system.de_au)
    length = sc.r_dip if sc.r_dip >= sc.r6 else sc.r6
    energy = 1.0 / (system.mass_au * length**2)
    return InteractionModel(
        basis=basis,
        coupling=dipole_coupling_matrix(basis),
        r_wall=R_min,
        mass=system.mass_au,
        d1d2=system.d1d2 if dipole else 0.0,
        c6=system.c6,
        c12=c12,
        variant="lennard_jones",
        unit_system="physical",
        length_scale=length,
        energy_scale=energy,
    )


@dataclass(frozen=True)
class AdiabatModel:
    """Single-channel model whose potential is adiabat ``index`` of a parent model.

    Adiabats within one symmetry block do not cross, so the index in ascending
    order identifies the continuity-tracked curve. No nonadiabatic corrections.
    """

    parent: InteractionModel
    index: int = 0

    def __post_init__(self):
        if not 0 <= self.index < self.parent.size:
            raise ValueError(f"adiabat index {self.index} outside basis of size {self.parent.size}")

    size = 1

    @property
    def mass(self):
        return self.parent.mass

    @property
    def r_wall(self):
        return self.parent.r_wall

    @property
    def variant(self):
        return self.parent.variant

    @property
    def unit_system(self):
        return self.parent.unit_system

    @property
    def length_scale(self):
        return self.parent.length_scale

    @property
    def energy_scale(self):
        return self.parent.energy_scale

    @property
    def basis(self):
        return self.parent.basis

    def potential_matrices(self, R) -> np.ndarray:
        w = np.linalg.eigvalsh(self.parent.potential_matrices(R))
        return w[:, self.index, None, None]

    def derivative_matrices(self, R) -> np.ndarray:
        w, v = np.linalg.eigh(self.parent.potential_matrices(R))
        vec = v[:, :, self.index]
        dU = self.parent.derivative_matrices(R)
        return np.einsum("ni,nij,nj->n", vec, dU, vec)[:, None, None]

    def potential_matrix(self, R):
        return self.potential_matrices([R])[0]

    def describe(self) -> dict:
        d = dict(self.parent.describe())
        d["adiabat"] = self.index
        return d


def lowest_adiabat_second_order(r):
    """Second-order (long-range) lowest even-L, M_L=0 adiabat, -4/15 r^-4."""
    return -SECOND_ORDER_C4 * np.asarray(r, dtype=float) ** -4


@dataclass
class AdiabatCurves:
    r: np.ndarray                  # ascending
    curves: np.ndarray             # (n_r, N), column n is adiabat n
    vectors: np.ndarray = field(repr=False)   # (n_r, N, N) eigenvectors in curve order
    min_overlap: np.ndarray = field(repr=False)  # per step, smallest matched |overlap|
    coarse: bool = False           # continuity tracking was unreliable somewhere

    def curve(self, n: int) -> np.ndarray:
        return self.curves[:, n]


def _assign(overlap: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, float]:
    """Greedy max-|overlap| matching of previous states (rows) to current ones (cols)."""
    N = overlap.shape[0]
    o = np.abs(overlap).copy()
    perm = np.empty(N, dtype=int)
    worst = 1.0
    for _ in range(N):
        flat = o.max()
        rows, cols = np.nonzero(o == flat)
        # ties: lowest current eigenvalue first
        k = np.argmin(values[cols]) if len(cols) > 1 else 0
        i, j = rows[k], cols[k]
        perm[i] = j
        worst = min(worst, flat)
        o[i, :] = -1.0
        o[:, j] = -1.0
    return perm, worst


def adiabats(model, r_grid, overlap_warn: float = 0.5) -> AdiabatCurves:
    """Eigenvalues of the fixed-r potential matrix, ordered by continuity.

    Tracking starts from ascending order at the largest radius and follows each
    eigenvector inward by maximal overlap with the previous grid point.
    """
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or len(r) < 1 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise ValueError("r_grid must be ascending and positive")
    w, v = np.linalg.eigh(model.potential_matrices(r))
    n_r, N = w.shape
    curves = np.empty_like(w)
    vecs = np.empty_like(v)
    min_ov = np.ones(n_r)
    curves[-1], vecs[-1] = w[-1], v[-1]
    for k in range(n_r - 2, -1, -1):
        ov = vecs[k + 1].T @ v[k]
        perm, worst = _assign(ov, w[k])
        curves[k] = w[k][perm]
        vecs[k] = v[k][:, perm]
        min_ov[k] = worst
    coarse = bool(np.any(min_ov < overlap_warn))
    if coarse:
        warnings.warn("adiabat continuity tracking is unreliable; refine the radial grid", RuntimeWarning)
    return AdiabatCurves(r=r, curves=curves, vectors=vecs, min_overlap=min_ov, coarse=coarse)


def adiabat_function(model, n: int) -> Callable[[np.ndarray], np.ndarray]:
    """Callable r -> adiabat n (ascending index) of ``model``."""

    def eps(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return np.linalg.eigvalsh(model.potential_matrices(r))[:, n]

    return eps


def converged_lmax(parity: str, ML: int, r: float, start: int = 8, tol: float = 1e-6,
                   limit: int = 400) -> int:
    """Double L_max until the lowest adiabat at ``r`` changes by less than ``tol`` (relative)."""
    from .basis import build_basis

    lmax = max(start, abs(ML) + 2)
    prev = None
    while lmax <= limit:
        m = hard_wall_model(build_basis(parity, ML, lmax), r_min=r)
        e0 = np.linalg.eigvalsh(m.potential_matrix(r))[0]
        if prev is not None and abs(e0 - prev) <= tol * abs(e0):
            return lmax
        prev = e0
        lmax *= 2
    raise RuntimeError(f"lowest adiabat at r={r} not converged with L_max <= {limit}")
