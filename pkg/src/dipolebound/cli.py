"""Batch command-line front end: INI config in, CSV with provenance header out.

Exit codes: 0 success (scan rows may still carry per-point error markers),
2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Optional

import numpy as np

from .bound import find_bound_states, scattering_length
from .potential import adiabats, converged_lmax, lowest_adiabat_second_order
from .propagate import PropagationError
from .scan import ModelSpec, ScanSpec, count_rows, count_vs_parameter, run_scan, scan_rows
from .units import compute_scales, load_molecules
from .wkb import wkb_counts

log = logging.getLogger(__name__)

COMMANDS = ("scales", "adiabats", "wkb", "bound", "scatlen", "scan")
CONFIG_BEGIN = "# --- config ---"
CONFIG_END = "# --- end config ---"


class ConfigError(ValueError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# ---- config parsing ----------------------------------------------------------

def _get(cp, section, key, conv=str, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(f"[{section}] {key}", "missing required field")
        return default
    raw = cp.get(section, key).strip()
    if raw == "" and not required:
        return default
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}", f"cannot parse {raw!r} ({exc})") from None


def _bool(s: str) -> bool:
    v = s.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.replace(",", " ").split())


@dataclass
class RunConfig:
    command: str
    model: ModelSpec
    output: Optional[str] = None
    workers: int = 1
    e_lo: float = -100.0
    e_hi: float = -1e-8
    tol_e: Optional[float] = None
    scan: Optional[ScanSpec] = None
    r_grid: tuple = (0.01, 30.0, 200)      # adiabats: r_lo, r_hi, points (log spaced)
    n_curves: int = 5
    R_end: Optional[float] = None
    parser: configparser.ConfigParser = field(default=None, repr=False, compare=False)


def _model_spec(cp) -> ModelSpec:
    s = "model"
    if not cp.has_section(s):
        raise ConfigError("[model]", "missing section")
    variant = _get(cp, s, "variant", default="hard_wall")
    units = _get(cp, s, "units", default="reduced" if variant == "hard_wall" else "atomic")
    expected = "reduced" if variant == "hard_wall" else "atomic"
    if units != expected:
        raise ConfigError("[model] units", f"the {variant} model is set up in {expected} units, got {units!r}")
    kw = {"variant": variant}
    mol = _get(cp, s, "molecule")
    if mol is not None:
        table = load_molecules()
        if mol not in table:
            raise ConfigError("[model] molecule", f"unknown molecule {mol!r}; known: {', '.join(table)}")
        m = table[mol]
        kw.update(mass=m.mass / 2.0, d=m.d_lim, c6=m.c6)
    for key in ("mass", "d", "mu", "c6", "de", "r_min"):
        v = _get(cp, s, key, float)
        if v is not None:
            kw[key] = v
    if "mu" in kw and "d" in kw and mol is not None and not cp.has_option(s, "d"):
        kw.pop("d")
    kw["dipole"] = _get(cp, s, "dipole", _bool, True)
    b = "basis"
    kw["parity"] = _get(cp, b, "parity", default="even") if cp.has_section(b) else "even"
    if kw["parity"] not in ("even", "odd"):
        raise ConfigError("[basis] parity", "must be even or odd")
    if cp.has_section(b):
        kw["ML"] = _get(cp, b, "ML", int, 0)
        kw["L_min"] = _get(cp, b, "L_min", int)
        lmax = _get(cp, b, "L_max", default="40")
    else:
        lmax = "40"
    if lmax == "auto":
        if variant != "hard_wall" or kw.get("r_min") is None:
            raise ConfigError("[basis] L_max", "auto needs the hard-wall model with r_min set")
        kw["L_max"] = converged_lmax(kw["parity"], kw.get("ML", 0), kw["r_min"])
    else:
        try:
            kw["L_max"] = int(lmax)
        except ValueError:
            raise ConfigError("[basis] L_max", f"expected an integer or auto, got {lmax!r}") from None
    if cp.has_section("grid"):
        for key in ("R_match", "R_mid", "R_max", "dR"):
            v = _get(cp, "grid", key, float)
            if v is not None:
                kw[key] = v
    try:
        return ModelSpec(**kw)
    except ValueError as exc:
        name, _, msg = str(exc).partition(": ")
        raise ConfigError(f"[model] {name}", msg or str(exc)) from None


def _scan_spec(cp, model: ModelSpec, e_lo, e_hi, tol_e) -> Optional[ScanSpec]:
    s = "scan"
    if not cp.has_section(s):
        return None
    kw = dict(parameter=_get(cp, s, "parameter", required=True), model=model, e_lo=e_lo, e_hi=e_hi, tol_e=tol_e)
    values = _get(cp, s, "values")
    if values is not None:
        if kw["parameter"] in ("parity",):
            kw["values"] = tuple(values.replace(",", " ").split())
        else:
            try:
                kw["values"] = _floats(values)
            except ValueError as exc:
                raise ConfigError("[scan] values", str(exc)) from None
    else:
        kw.update(lo=_get(cp, s, "lo", float, required=True), hi=_get(cp, s, "hi", float, required=True),
                  points=_get(cp, s, "points", int, required=True))
    kw["spacing"] = _get(cp, s, "spacing", default="linear")
    kw["refine"] = _get(cp, s, "refine", float, 0.0)
    try:
        return ScanSpec(**kw)
    except ValueError as exc:
        name, _, msg = str(exc).partition(": ")
        raise ConfigError(f"[scan] {name}", msg or str(exc)) from None


def parse_config(text: str, overrides: Optional[dict] = None) -> RunConfig:
    """Parse INI text; ``overrides`` maps (section, key) to string values applied first."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        where = f"line {line}" if line else "config"
        raise ConfigError(where, exc.message if hasattr(exc, "message") else str(exc)) from None
    for (sec, key), val in (overrides or {}).items():
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, key, str(val))
    command = _get(cp, "run", "command", required=True) if cp.has_section("run") else None
    if command is None:
        raise ConfigError("[run] command", "missing required field")
    if command not in COMMANDS:
        raise ConfigError("[run] command", f"must be one of {', '.join(COMMANDS)}")
    if command == "scales":
        model = None
    else:
        model = _model_spec(cp)
    w = "window"
    e_lo = _get(cp, w, "e_lo", float, -100.0) if cp.has_section(w) else -100.0
    e_hi = _get(cp, w, "e_hi", float, -1e-8) if cp.has_section(w) else -1e-8
    tol_e = _get(cp, w, "tol_e", float) if cp.has_section(w) else None
    if not e_lo < e_hi < 0:
        raise ConfigError("[window] e_lo/e_hi", "need e_lo < e_hi < 0")
    cfg = RunConfig(command=command, model=model, e_lo=e_lo, e_hi=e_hi, tol_e=tol_e, parser=cp)
    cfg.output = _get(cp, "run", "output")
    cfg.workers = _get(cp, "run", "workers", int, 1)
    if cfg.workers < 1:
        raise ConfigError("[run] workers", "must be at least 1")
    if model is not None:
        cfg.scan = _scan_spec(cp, model, e_lo, e_hi, tol_e)
    if command == "scan" and cfg.scan is None:
        raise ConfigError("[scan]", "missing section")
    if cp.has_section("adiabats"):
        a = "adiabats"
        cfg.r_grid = (_get(cp, a, "r_lo", float, 0.01), _get(cp, a, "r_hi", float, 30.0),
                      _get(cp, a, "points", int, 200))
        cfg.n_curves = _get(cp, a, "n_curves", int, 5)
        if not 0 < cfg.r_grid[0] < cfg.r_grid[1] or cfg.r_grid[2] < 2:
            raise ConfigError("[adiabats] r_lo/r_hi/points", "need 0 < r_lo < r_hi and points >= 2")
    if cp.has_section("scatlen"):
        cfg.R_end = _get(cp, "scatlen", "R_end", float)
    return cfg


def config_text(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue().strip()


def header_config(path) -> str:
    """The config embedded in a CSV header, as INI text."""
    lines, inside = [], False
    for line in Path(path).read_text().splitlines():
        if line == CONFIG_BEGIN:
            inside = True
        elif line == CONFIG_END:
            break
        elif inside:
            lines.append(line[2:] if line.startswith("# ") else line[1:])
    return "\n".join(lines)


# ---- commands ---------------------------------------------------------------

def _physical_system(cp):
    """Scales need only mass, dipole and C6; build the system without model validation."""
    from .units import PhysicalSystem, debye_to_au

    s = "model"
    if not cp.has_section(s):
        raise ConfigError("[model]", "missing section")
    mol = _get(cp, s, "molecule")
    mass = d = c6 = None
    if mol is not None:
        table = load_molecules()
        if mol not in table:
            raise ConfigError("[model] molecule", f"unknown molecule {mol!r}")
        m = table[mol]
        mass, d, c6 = m.mass / 2.0, m.d_lim, m.c6
    mass = _get(cp, s, "mass", float, mass)
    if mass is None:
        raise ConfigError("[model] mass", "missing required field")
    mu = _get(cp, s, "mu", float)
    d = _get(cp, s, "d", float, d)
    c6 = _get(cp, s, "c6", float, c6 if c6 is not None else 0.0)
    de = _get(cp, s, "de", float)
    if mu is None and d is None:
        raise ConfigError("[model] d", "give an electric (d) or magnetic (mu) dipole")
    try:
        if mu is not None:
            return PhysicalSystem(mass=mass, mu1=mu, mu2=mu, c6=c6, de=de)
        return PhysicalSystem(mass=mass, d1=debye_to_au(d), d2=debye_to_au(d), c6=c6, de=de)
    except ValueError as exc:
        raise ConfigError("[model]", str(exc)) from None


def cmd_scales(cfg: RunConfig):
    sc = compute_scales(_physical_system(cfg.parser))
    return [sc.as_row()]


def cmd_adiabats(cfg: RunConfig):
    model = cfg.model.build()
    lo, hi, n = cfg.r_grid
    r = np.geomspace(lo, hi, n)
    ac = adiabats(model, r)
    k = min(cfg.n_curves, model.size)
    rows = []
    e2 = lowest_adiabat_second_order(r)
    for i, ri in enumerate(r):
        row = {"r": ri}
        for j in range(k):
            row[f"eps{j}"] = ac.curves[i, j]
        row["eps0_r3"] = ac.curves[i, 0] * ri**3
        row["eps0_r4"] = ac.curves[i, 0] * ri**4
        row["second_order_r4"] = e2[i] * ri**4
        row["min_overlap"] = ac.min_overlap[i]
        rows.append(row)
    return rows


def cmd_wkb(cfg: RunConfig):
    if cfg.model.variant != "hard_wall":
        raise ConfigError("[model] variant", "wkb needs the hard-wall model")
    if cfg.scan is not None:
        return count_rows(count_vs_parameter(cfg.scan, workers=cfg.workers))
    res = wkb_counts(cfg.model.build())
    Ls = cfg.model.build().basis.Ls
    return [{"adiabat": n, "L_asymptotic": int(Ls[n]), "phase": res.phase[n], "v_D": res.v_d[n],
             "count": int(res.counts[n])} for n in range(len(res.phase))]


def cmd_bound(cfg: RunConfig):
    spec = ScanSpec(parameter="r_min", values=(cfg.model.r_min,), model=cfg.model, e_lo=cfg.e_lo,
                    e_hi=cfg.e_hi, tol_e=cfg.tol_e) if cfg.model.variant == "hard_wall" else \
        ScanSpec(parameter="D_e", values=(cfg.model.de,), model=cfg.model, e_lo=cfg.e_lo, e_hi=cfg.e_hi,
                 tol_e=cfg.tol_e)
    pts = run_scan(spec)
    if pts[0].error:
        raise PropagationError(pts[0].error)
    return scan_rows(spec, pts)


def cmd_scatlen(cfg: RunConfig):
    values = [None] if cfg.scan is None else cfg.scan.grid_values()
    rows = []
    for v in values:
        ms = cfg.model if v is None else cfg.model.with_(de=v)
        ms = ms.with_(parity="even", ML=0, L_max=0, L_min=0, dipole=False)
        model = ms.build()
        r6 = (2.0 * model.mass * model.c6) ** 0.25
        res = scattering_length(model, R_end=cfg.R_end, grid=ms.grid(model))
        rows.append({"D_e": ms.de, "a": res.a, "a_over_R6": res.a / r6, "R_end": res.R_end,
                     "change": res.change, "pole": int(res.pole)})
    return rows


def cmd_scan(cfg: RunConfig):
    return scan_rows(cfg.scan, run_scan(cfg.scan, workers=cfg.workers))


COMMAND_FUNCS = {"scales": cmd_scales, "adiabats": cmd_adiabats, "wkb": cmd_wkb, "bound": cmd_bound,
                 "scatlen": cmd_scatlen, "scan": cmd_scan}


# ---- output -----------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def render_csv(rows: list[dict], cfg: RunConfig) -> str:
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    buf.write(f"# dipolebound {version()}\n")
    buf.write(f"# command: {cfg.command}\n")
    if cfg.model is not None:
        m = cfg.model.build()
        buf.write(f"# units: {m.unit_system}; basis: {m.basis.describe()}\n")
        g = cfg.model.grid(m)
        buf.write(f"# grid: R_min={g.R_min!r} R_match={g.R_match!r} R_mid={g.R_mid!r} "
                  f"R_max={g.R_max!r} dR={g.dR!r}\n")
    buf.write(CONFIG_BEGIN + "\n")
    for line in config_text(cfg.parser).splitlines():
        buf.write(("# " + line).rstrip() + "\n")
    buf.write(CONFIG_END + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dipolebound", description="Bound states of interacting dipoles.")
    p.add_argument("command", choices=COMMANDS, nargs="?", help="overrides [run] command")
    p.add_argument("config", help="INI configuration file")
    p.add_argument("--output", "-o", help="CSV output path (default: [run] output or stdout)")
    p.add_argument("--workers", type=int, help="worker processes for scans")
    p.add_argument("--lmax", help="override [basis] L_max (integer or auto)")
    p.add_argument("--tol-e", type=float, help="override [window] tol_e (energy-scale units)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config field")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.command:
        overrides[("run", "command")] = args.command
    if args.output:
        overrides[("run", "output")] = args.output
    if args.workers is not None:
        overrides[("run", "workers")] = args.workers
    if args.lmax is not None:
        overrides[("basis", "L_max")] = args.lmax
    if args.tol_e is not None:
        overrides[("window", "tol_e")] = args.tol_e
    try:
        for item in args.set:
            key, eq, val = item.partition("=")
            sec, dot, name = key.partition(".")
            if not (eq and dot and sec and name):
                raise ConfigError(f"--set {item}", "expected SECTION.KEY=VALUE")
            overrides[(sec, name)] = val
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(args.config, f"cannot read config ({exc.strerror})") from None
        cfg = parse_config(text, overrides)
        rows = COMMAND_FUNCS[cfg.command](cfg)
        out = render_csv(rows, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PropagationError, np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        ctx = ""
        if isinstance(exc, PropagationError):
            ctx = f" (R={exc.radius}, E={exc.energy})"
        print(f"numerical error: {exc}{ctx}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.output:
        write_atomic(cfg.output, out)
    else:
        sys.stdout.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
