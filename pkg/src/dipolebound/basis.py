"""Partial-wave channel bases and the dipole-dipole coupling matrix."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np


def _twice(j) -> int:
    tj = 2 * Fraction(j)
    if tj.denominator != 1:
        raise ValueError(f"{j} is not an integer or half-integer")
    return int(tj)


@lru_cache(maxsize=65536)
def _wigner3j_twice(a, b, c, x, y, z) -> float:
    # arguments are 2j and 2m
    if x + y + z != 0:
        return 0.0
    if abs(x) > a or abs(y) > b or abs(z) > c:
        return 0.0
    if (a + x) % 2 or (b + y) % 2 or (c + z) % 2:
        return 0.0
    if c > a + b or c < abs(a - b) or (a + b + c) % 2:
        return 0.0
    f = math.factorial
    # every halved combination below is an integer for admissible (2j, 2m)
    jp = (a + b - c) // 2, (a - b + c) // 2, (-a + b + c) // 2
    tri = Fraction(f(jp[0]) * f(jp[1]) * f(jp[2]), f((a + b + c) // 2 + 1))
    fac = (f((a + x) // 2) * f((a - x) // 2) * f((b + y) // 2) * f((b - y) // 2)
           * f((c + z) // 2) * f((c - z) // 2))
    tmin = max(0, (b - c - x) // 2, (a - c + y) // 2)
    tmax = min((a + b - c) // 2, (a - x) // 2, (b + y) // 2)
    s = Fraction(0)
    for t in range(tmin, tmax + 1):
        den = (f(t) * f((c - b + x) // 2 + t) * f((c - a - y) // 2 + t)
               * f((a + b - c) // 2 - t) * f((a - x) // 2 - t) * f((b + y) // 2 - t))
        s += Fraction(-1 if t % 2 else 1, den)
    if s == 0:
        return 0.0
    phase = -1 if ((a - b - z) // 2) % 2 else 1
    mag = math.sqrt(float(s * s * tri * fac))
    return phase * (mag if s > 0 else -mag)


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol from the Racah sum, evaluated in exact rational arithmetic.

    Returns 0 whenever a selection rule fails instead of raising.
    """
    return _wigner3j_twice(_twice(j1), _twice(j2), _twice(j3), _twice(m1), _twice(m2), _twice(m3))


@dataclass(frozen=True)
class Channel:
    L: int
    ML: int

    def __post_init__(self):
        if self.L < 0 or abs(self.ML) > self.L:
            raise ValueError(f"invalid channel L={self.L}, M_L={self.ML}")


@dataclass(frozen=True)
class ChannelBasis:
    parity: str   # "even" | "odd"
    ML: int
    L_max: int
    channels: tuple[Channel, ...]

    @property
    def size(self) -> int:
        return len(self.channels)

    def __len__(self):
        return len(self.channels)

    @property
    def Ls(self) -> np.ndarray:
        return np.array([ch.L for ch in self.channels], dtype=int)

    def describe(self) -> str:
        Ls = self.Ls
        return f"{self.parity} L={Ls[0]}..{Ls[-1]} M_L={self.ML} N={len(Ls)}"


def build_basis(parity: str, ML: int, L_max: int, L_min: int | None = None) -> ChannelBasis:
    """Channels (L, M_L) of one parity, ascending in L, from the lowest allowed L to ``L_max``.

    ``L_min`` restricts the basis from below (e.g. a single channel {L=2}).
    """
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    p = 0 if parity == "even" else 1
    lo = abs(ML) if L_min is None else max(abs(ML), L_min)
    if lo % 2 != p:
        lo += 1
    Ls = range(lo, L_max + 1, 2)
    if len(Ls) == 0:
        raise ValueError(f"no {parity} L with |M_L|={abs(ML)} <= L <= {L_max}")
    return ChannelBasis(parity, ML, L_max, tuple(Channel(L, ML) for L in Ls))


def single_channel(L: int, ML: int = 0) -> ChannelBasis:
    return build_basis("even" if L % 2 == 0 else "odd", ML, L, L_min=L)


@dataclass(frozen=True)
class CouplingMatrix:
    W: np.ndarray          # coefficient of r^-3
    centrifugal: np.ndarray  # L(L+1)

    @property
    def size(self) -> int:
        return self.W.shape[0]


def dipole_matrix_element(L: int, Lp: int, ML: int) -> float:
    """<L M_L| -2 P2(cos theta) |L' M_L> (the r^-3 coefficient)."""
    w = wigner3j(L, 2, Lp, -ML, 0, ML) * wigner3j(L, 2, Lp, 0, 0, 0)
    if w == 0.0:
        return 0.0
    sign = -1.0 if ML % 2 else 1.0
    return -2.0 * sign * math.sqrt((2 * L + 1) * (2 * Lp + 1)) * w


def dipole_coupling_matrix(basis: ChannelBasis | Sequence[Channel]) -> CouplingMatrix:
    channels = basis.channels if isinstance(basis, ChannelBasis) else tuple(basis)
    n = len(channels)
    W = np.zeros((n, n))
    for i, ci in enumerate(channels):
        for j in range(i, n):
            cj = channels[j]
            if ci.ML != cj.ML or abs(ci.L - cj.L) > 2:
                continue
            W[i, j] = W[j, i] = dipole_matrix_element(ci.L, cj.L, ci.ML)
    Ls = np.array([c.L for c in channels], dtype=float)
    return CouplingMatrix(W=W, centrifugal=Ls * (Ls + 1))
