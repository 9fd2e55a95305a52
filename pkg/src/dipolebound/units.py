"""Physical constants, unit conversion and the characteristic length/energy scales.

Everything inside the package works in atomic units (hbar = e = m_e = 4 pi eps0 = 1).
Conversions to and from laboratory units happen only at the edges (this module,
config parsing and CSV output).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

# CODATA 2018
FINE_STRUCTURE = 7.2973525693e-3
DEBYE_IN_EA0 = 0.393430269519      # 1 D in e*a0
AMU_IN_ME = 1822.888486209         # unified atomic mass unit in electron masses
HARTREE_IN_HZ = 6.579683920502e15
HARTREE_IN_CM = 219474.6313632     # cm^-1
HARTREE_IN_MHZ = HARTREE_IN_HZ * 1e-6
BOHR_MAGNETON_AU = 0.5             # mu_B = e hbar / 2 m_e


def debye_to_au(d):
    return d * DEBYE_IN_EA0


def au_to_debye(d):
    return d / DEBYE_IN_EA0


def amu_to_au(m):
    return m * AMU_IN_ME


def cm_to_hartree(e):
    return e / HARTREE_IN_CM


def hartree_to_cm(e):
    return e * HARTREE_IN_CM


def hartree_to_hz(e):
    return e * HARTREE_IN_HZ


def mhz_to_hartree(e):
    return e / HARTREE_IN_MHZ


def magnetic_to_electric_dipole(mu_bohr: float) -> float:
    """Effective electric dipole d = mu/c, in e*a0, of a magnetic moment given in Bohr magnetons.

    In atomic units c = 1/alpha, so d = mu[au] * alpha with mu_B = 1/2.
    """
    if mu_bohr < 0:
        raise ValueError(f"magnetic moment must be nonnegative, got {mu_bohr}")
    return mu_bohr * BOHR_MAGNETON_AU * FINE_STRUCTURE


def rotational_c6(d_lim: float, b_rot: float) -> float:
    """Rotational dispersion coefficient C6 = d^4 / (6 B) in atomic units.

    ``d_lim`` in e*a0 and ``b_rot`` in hartree; the result is in E_h a0^6.
    """
    if not b_rot > 0:
        raise ValueError(f"rotational constant must be positive, got {b_rot}")
    return d_lim**4 / (6.0 * b_rot)


@dataclass(frozen=True)
class PhysicalSystem:
    """Two interacting dipoles.

    Dipoles are stored in e*a0. A magnetic moment (Bohr magnetons) may be given in
    place of the electric dipole of either particle, never both.
    """

    mass: float                      # reduced mass, u
    d1: Optional[float] = None       # e*a0
    d2: Optional[float] = None
    mu1: Optional[float] = None      # Bohr magnetons
    mu2: Optional[float] = None
    c6: float = 0.0                  # E_h a0^6
    de: Optional[float] = None       # LJ well depth, cm^-1

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"reduced mass must be positive, got {self.mass}")
        if self.c6 < 0:
            raise ValueError(f"C6 must be nonnegative, got {self.c6}")
        if self.de is not None and self.de < 0:
            raise ValueError(f"well depth must be nonnegative, got {self.de}")
        for i, (d, mu) in enumerate(((self.d1, self.mu1), (self.d2, self.mu2)), start=1):
            if d is not None and mu is not None:
                raise ValueError(f"particle {i}: give either an electric or a magnetic dipole, not both")
            if mu is not None and mu < 0:
                raise ValueError(f"particle {i}: magnetic moment must be nonnegative")

    @classmethod
    def from_debye(cls, mass, d1, d2=None, **kw):
        d2 = d1 if d2 is None else d2
        return cls(mass=mass, d1=debye_to_au(d1), d2=debye_to_au(d2), **kw)

    @property
    def mass_au(self) -> float:
        return amu_to_au(self.mass)

    def dipole(self, i: int) -> float:
        d, mu = (self.d1, self.mu1) if i == 1 else (self.d2, self.mu2)
        if d is not None:
            return d
        if mu is not None:
            return magnetic_to_electric_dipole(mu)
        return 0.0

    @property
    def d1d2(self) -> float:
        """Product of the two (effective) electric dipoles in (e*a0)^2."""
        return self.dipole(1) * self.dipole(2)

    @property
    def de_au(self) -> Optional[float]:
        return None if self.de is None else cm_to_hartree(self.de)

    @property
    def c12(self) -> Optional[float]:
        if self.de is None or self.de == 0:
            return None
        return self.c6**2 / (4.0 * self.de_au)


@dataclass(frozen=True)
class Scales:
    r_dip: float          # a0
    e_dip: float          # hartree; inf when there is no dipole
    r6: float             # a0
    e6: float             # hartree; inf when C6 = 0
    r4: float             # a0
    c12: Optional[float]  # E_h a0^12
    dipole_defined: bool = True

    @property
    def e_dip_hz(self) -> float:
        return hartree_to_hz(self.e_dip)

    @property
    def e6_hz(self) -> float:
        return hartree_to_hz(self.e6)

    def as_row(self) -> dict:
        return {
            "R_dip_a0": self.r_dip,
            "E_dip_hartree": self.e_dip,
            "E_dip_Hz": self.e_dip_hz,
            "R6_a0": self.r6,
            "E6_hartree": self.e6,
            "E6_Hz": self.e6_hz,
            "R4_a0": self.r4,
            "C12_Eh_a0^12": self.c12 if self.c12 is not None else float("nan"),
        }


def compute_scales(system: PhysicalSystem) -> Scales:
    m = system.mass_au
    r_dip = m * system.d1d2
    if r_dip > 0:
        e_dip = 1.0 / (m * r_dip**2)
    else:
        r_dip, e_dip = 0.0, math.inf
    r6 = (2.0 * m * system.c6) ** 0.25
    e6 = 1.0 / (2.0 * m * r6**2) if r6 > 0 else math.inf
    return Scales(
        r_dip=r_dip,
        e_dip=e_dip,
        r6=r6,
        e6=e6,
        r4=math.sqrt(8.0 / 15.0) * r_dip,
        c12=system.c12,
        dipole_defined=r_dip > 0,
    )


@dataclass(frozen=True)
class Molecule:
    name: str
    d_lim: float      # Debye
    mass: float       # molecular mass, u
    b_rot: float      # MHz
    note: str = field(default="", compare=False)

    @property
    def c6(self) -> float:
        return rotational_c6(debye_to_au(self.d_lim), mhz_to_hartree(self.b_rot))

    def system(self, d: Optional[float] = None, de: Optional[float] = None) -> PhysicalSystem:
        """Identical-molecule pair with space-fixed dipole ``d`` (Debye, default d_lim)."""
        d = self.d_lim if d is None else d
        return PhysicalSystem.from_debye(self.mass / 2.0, d, c6=self.c6, de=de)


def load_molecules(path: Optional[str | Path] = None) -> dict[str, Molecule]:
    """Read the molecule table: ``name d[D] mass[u] B_rot[MHz]`` per line, ``#`` comments."""
    if path is None:
        text = resources.files("dipolebound.data").joinpath("molecules.txt").read_text()
    else:
        text = Path(path).read_text()
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line, _, note = raw.partition("#")
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields (name d mass B_rot), got {len(parts)}")
        name = parts[0]
        try:
            d, mass, b = (float(x) for x in parts[1:])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        out[name] = Molecule(name, d, mass, b, note.strip())
    return out
