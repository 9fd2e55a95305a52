"""Parameter sweeps: bound states and state counts versus wall radius, well depth or dipole."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .basis import build_basis
from .bound import find_bound_states
from .potential import hard_wall_model, lennard_jones_model
from .propagate import PropagationError, default_grid, Propagator
from .units import PhysicalSystem, debye_to_au
from .wkb import wkb_counts

log = logging.getLogger(__name__)

PARAMETERS = ("r_min", "D_e", "d", "ML", "parity")


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to build one model; scan parameters override single fields.

    Hard-wall models are reduced (lengths R_dip, energies E_dip) and use only
    ``r_min``. Lennard-Jones models are in atomic units: ``mass`` (reduced, u),
    dipoles ``d`` (Debye) or ``mu`` (Bohr magnetons), ``c6`` and ``de`` (cm^-1);
    ``r_min`` in a0 (default: where the R^-12 wall is 100 D_e).
    """

    variant: str = "hard_wall"
    parity: str = "even"
    ML: int = 0
    L_max: int = 40
    L_min: Optional[int] = None
    r_min: Optional[float] = None
    mass: Optional[float] = None
    d: Optional[float] = None
    mu: Optional[float] = None
    c6: Optional[float] = None
    de: Optional[float] = None
    dipole: bool = True
    # grid overrides, model length units
    R_match: Optional[float] = None
    R_mid: Optional[float] = None
    R_max: Optional[float] = None
    dR: Optional[float] = None

    def __post_init__(self):
        if self.variant not in ("hard_wall", "lennard_jones"):
            raise ValueError(f"variant: unknown value {self.variant!r}")
        if self.variant == "hard_wall":
            if self.r_min is None:
                raise ValueError("r_min: required for the hard-wall model")
        else:
            for name in ("mass", "c6", "de"):
                if getattr(self, name) is None:
                    raise ValueError(f"{name}: required for the Lennard-Jones model")
            if self.d is not None and self.mu is not None:
                raise ValueError("d/mu: give either an electric or a magnetic dipole, not both")

    def with_(self, **kw) -> "ModelSpec":
        return replace(self, **kw)

    def system(self) -> PhysicalSystem:
        if self.mu is not None:
            return PhysicalSystem(mass=self.mass, mu1=self.mu, mu2=self.mu, c6=self.c6, de=self.de)
        d = debye_to_au(self.d or 0.0)
        return PhysicalSystem(mass=self.mass, d1=d, d2=d, c6=self.c6, de=self.de)

    def build(self):
        basis = build_basis(self.parity, self.ML, self.L_max, self.L_min)
        if self.variant == "hard_wall":
            return hard_wall_model(basis, self.r_min)
        return lennard_jones_model(self.system(), basis, R_min=self.r_min, dipole=self.dipole)

    def grid(self, model):
        return default_grid(model, dR=self.dR, R_match=self.R_match, R_mid=self.R_mid, R_max=self.R_max)


def apply_parameter(model: ModelSpec, parameter: str, value) -> ModelSpec:
    if parameter == "r_min":
        return model.with_(r_min=float(value))
    if parameter == "D_e":
        return model.with_(de=float(value))
    if parameter == "d":
        return model.with_(d=float(value), mu=None)
    if parameter == "ML":
        return model.with_(ML=int(value))
    if parameter == "parity":
        return model.with_(parity=str(value))
    raise ValueError(f"parameter: unknown scan parameter {parameter!r}")


@dataclass(frozen=True)
class ScanSpec:
    """A sweep of one model parameter.

    ``spacing`` "inv_sqrt" samples uniformly in r_min^-1/2 (lo/hi are still r_min
    values). The energy window [e_lo, e_hi] is in units of the model's energy
    scale (E_dip, or E6 for a non-dipolar LJ model) and must lie below threshold.
    ``values`` overrides lo/hi/points with an explicit list.
    """

    parameter: str
    lo: float = 0.0
    hi: float = 1.0
    points: int = 2
    model: ModelSpec = field(default_factory=lambda: ModelSpec(r_min=1.0))
    e_lo: float = -100.0
    e_hi: float = -1e-8
    spacing: str = "linear"            # linear | log | inv_sqrt
    values: Optional[tuple] = None
    tol_e: Optional[float] = None      # energy-scale units
    refine: float = 0.0                # insert midpoints where an energy moves > refine*window
    max_points: int = 2000

    def __post_init__(self):
        if self.parameter not in PARAMETERS:
            raise ValueError(f"parameter: must be one of {', '.join(PARAMETERS)}")
        if self.values is None:
            if not self.lo < self.hi:
                raise ValueError("range: need lo < hi")
            if self.points < 2:
                raise ValueError("points: need at least 2")
        if not self.e_lo < self.e_hi < 0:
            raise ValueError("window: need e_lo < e_hi < 0")
        if self.spacing not in ("linear", "log", "inv_sqrt"):
            raise ValueError(f"spacing: unknown value {self.spacing!r}")
        if self.refine < 0:
            raise ValueError("refine: must be nonnegative")

    def grid_values(self) -> list:
        if self.values is not None:
            return list(self.values)
        if self.spacing == "linear":
            v = np.linspace(self.lo, self.hi, self.points)
        elif self.spacing == "log":
            v = np.geomspace(self.lo, self.hi, self.points)
        else:
            x = np.linspace(self.hi**-0.5, self.lo**-0.5, self.points)
            v = np.sort(x**-2.0)
        return [float(a) for a in v]


@dataclass
class PointResult:
    value: object
    states: list                 # BoundStateRecord
    count_lo: Optional[int] = None
    count_hi: Optional[int] = None
    energy_scale: float = 1.0
    error: str = ""

    @property
    def complete(self) -> bool:
        return not self.error and self.count_hi - self.count_lo == len(self.states)


def _x_transform(parameter, value):
    if parameter == "r_min" and isinstance(value, float) and value > 0:
        return value**-0.5
    return value


def scan_point(spec: ScanSpec, value) -> PointResult:
    """All states of one scan point; numerical failures become a row-level error."""
    try:
        ms = apply_parameter(spec.model, spec.parameter, value)
        model = ms.build()
        prop = Propagator(model, ms.grid(model))
        es = model.energy_scale
        tol = None if spec.tol_e is None else spec.tol_e * es
        states = find_bound_states(model, spec.e_lo * es, spec.e_hi * es, tol_E=tol, propagator=prop,
                                   parameter=value if not isinstance(value, str) else None)
        # the search memoizes both end counts; recomputing is cheap relative to the search
        n_lo = prop.node_count(spec.e_lo * es)
        n_hi = prop.node_count(spec.e_hi * es)
        return PointResult(value, states, n_lo, n_hi, es)
    except (PropagationError, ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.warning("scan point %s=%r failed: %s", spec.parameter, value, exc)
        return PointResult(value, [], error=f"{type(exc).__name__}: {exc}")


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class _PointTask:
    def __init__(self, spec):
        self.spec = spec

    def __call__(self, value):
        return scan_point(self.spec, value)


def _needs_refine(a: PointResult, b: PointResult, spec: ScanSpec) -> bool:
    if a.error or b.error:
        return False
    if len(a.states) != len(b.states):
        return True
    width = (spec.e_hi - spec.e_lo)
    ea = np.array([s.energy for s in a.states]) / a.energy_scale
    eb = np.array([s.energy for s in b.states]) / b.energy_scale
    return bool(np.any(np.abs(ea - eb) > spec.refine * width))


def run_scan(spec: ScanSpec, workers: int = 1, max_rounds: int = 6) -> list[PointResult]:
    """Bound states at every scan point, ordered by parameter value.

    Points are independent; with ``workers`` > 1 they run in a process pool and
    are merged back in parameter order. With ``spec.refine`` > 0 midpoints are
    inserted between neighbours whose state count or energies differ by more than
    that fraction of the window, up to ``max_rounds`` rounds.
    """
    values = spec.grid_values()
    task = _PointTask(spec)
    results = dict(zip(values, _map(task, values, workers)))
    numeric = spec.parameter in ("r_min", "D_e", "d")
    if spec.refine > 0 and numeric:
        for _ in range(max_rounds):
            keys = sorted(results)
            new = [0.5 * (a + b) for a, b in zip(keys, keys[1:])
                   if _needs_refine(results[a], results[b], spec)]
            new = [v for v in new if v not in results]
            if not new or len(results) + len(new) > spec.max_points:
                break
            results.update(zip(new, _map(task, new, workers)))
    keys = sorted(results) if numeric else values
    return [results[k] for k in keys]


def jump_flags(points: Sequence[PointResult]) -> list[bool]:
    """True where the threshold count changes by more than one from the previous point."""
    flags = [False]
    for a, b in zip(points, points[1:]):
        ok = a.count_hi is not None and b.count_hi is not None
        flags.append(bool(ok and abs(b.count_hi - a.count_hi) > 1))
    return flags


SCAN_COLUMNS = ("parameter", "value", "x", "energy", "energy_scaled", "node_index", "count_below",
                "dominant_L", "L_max", "dR", "tol", "count_lo", "count_hi", "complete", "degenerate",
                "count_jump", "error")


def scan_rows(spec: ScanSpec, points: Sequence[PointResult]) -> list[dict]:
    """Flatten scan results into CSV rows: one per state, one marker row per empty or failed point."""
    rows = []
    for p, jump in zip(points, jump_flags(points)):
        base = {"parameter": spec.parameter, "value": p.value, "x": _x_transform(spec.parameter, p.value),
                "count_lo": p.count_lo, "count_hi": p.count_hi,
                "complete": int(p.complete) if not p.error else "", "count_jump": int(jump), "error": p.error}
        base = {c: base.get(c) for c in SCAN_COLUMNS}
        if not p.states:
            rows.append(base)
            continue
        for s in p.states:
            r = dict(base)
            r.update(energy=s.energy, energy_scaled=s.energy / p.energy_scale, node_index=s.node_index,
                     count_below=s.count_below, dominant_L=s.dominant_L, L_max=s.L_max, dR=s.dR, tol=s.tol,
                     degenerate=int(s.degenerate))
            rows.append(r)
    return rows


@dataclass
class CountRow:
    value: float
    node_count: Optional[int]
    wkb_total: Optional[int]
    error: str = ""


def _count_point(args):
    model_spec, value, e_hi, n_adiabats = args
    try:
        ms = model_spec.with_(r_min=value)
        model = ms.build()
        n = Propagator(model, ms.grid(model)).node_count(e_hi * model.energy_scale)
        w = wkb_counts(model, n_adiabats=n_adiabats).total if model.unit_system == "reduced" else None
        return CountRow(value, n, w)
    except (PropagationError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        return CountRow(value, None, None, f"{type(exc).__name__}: {exc}")


def count_vs_parameter(spec: ScanSpec, workers: int = 1, n_adiabats: Optional[int] = None) -> list[CountRow]:
    """Node count at E = 0^- (e_hi) next to the WKB total, over an r_min scan."""
    if spec.parameter != "r_min":
        raise ValueError("parameter: count_vs_parameter scans r_min")
    items = [(spec.model, v, spec.e_hi, n_adiabats) for v in spec.grid_values()]
    rows = _map(_count_point, items, workers)
    return sorted(rows, key=lambda r: r.value)


def count_rows(rows: Sequence[CountRow]) -> list[dict]:
    return [{"r_min": r.value, "x": r.value**-0.5, "node_count": r.node_count, "wkb_total": r.wkb_total,
             "error": r.error} for r in rows]


def crossing_value(model: ModelSpec, parameter: str, lo: float, hi: float, e_hi: float = -1e-8,
                   tol: float = 1e-6) -> float:
    """Parameter value in [lo, hi] where the count below e_hi (energy-scale units) steps by one."""
    def count(v):
        ms = apply_parameter(model, parameter, v)
        m = ms.build()
        return Propagator(m, ms.grid(m)).node_count(e_hi * m.energy_scale)

    n_lo, n_hi = count(lo), count(hi)
    if abs(n_hi - n_lo) != 1:
        raise ValueError(f"range: expected one threshold crossing in [{lo}, {hi}], counts {n_lo}, {n_hi}")
    while hi - lo > tol * max(1.0, abs(lo)):
        c = 0.5 * (lo + hi)
        if count(c) == n_lo:
            lo = c
        else:
            hi = c
    return 0.5 * (lo + hi)


__all__ = ["ModelSpec", "ScanSpec", "PointResult", "run_scan", "scan_point", "scan_rows", "jump_flags",
           "count_vs_parameter", "count_rows", "CountRow", "crossing_value", "apply_parameter"]
