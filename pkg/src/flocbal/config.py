"""Scenario files: TOML with [grid], [fluid], [kernels], [relaxation], [initial],
[scenario], [column], [discrete] and [output] tables."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:            # Python 3.10
    import tomli as tomllib

from .fluid import FluidField
from .kernels import AGGREGATION_FAMILIES, DAUGHTER_FAMILIES, FRAGMENTATION_FAMILIES, make_kernels

MODES = ("zero_d_relax", "zero_d_aggfrag", "column")
OPERATORS = ("relax", "relax_weighted", "gbar")
PROFILES = ("uniform", "exponential", "gaussian", "deq")
SPACINGS = ("uniform", "geometric")


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class ConfigReport:
    path: Path
    data: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


class _Checker:
    def __init__(self, data):
        self.data = data
        self.violations = []

    def table(self, name, required=True):
        t = self.data.get(name)
        if t is None:
            if required:
                self.violations.append(f"[{name}] missing")
            return {}
        if not isinstance(t, dict):
            self.violations.append(f"[{name}] must be a table")
            return {}
        return t

    def number(self, tab, sect, key, default=None, lo=None, lo_open=False, integer=False):
        name = f"{sect}.{key}"
        if key not in tab:
            if default is None:
                self.violations.append(f"{name} missing")
            return default
        v = tab[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
            self.violations.append(f"{name} must be {'an integer' if integer else 'a number'}, got {v!r}")
            return default
        if not math.isfinite(v):
            self.violations.append(f"{name} must be finite")
            return default
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.violations.append(f"{name} must be {'>' if lo_open else '>='} {lo}, got {v!r}")
            return default
        return v

    def choice(self, tab, sect, key, options, default=None):
        if key not in tab:
            if default is None:
                self.violations.append(f"{sect}.{key} missing")
            return default
        v = tab[key]
        if v not in options:
            self.violations.append(f"{sect}.{key}: unknown value {v!r} (expected one of {', '.join(options)})")
            return default
        return v


def _check(data: dict, base: Path) -> tuple[dict, list]:
    c = _Checker(data)
    cfg = {}

    g = c.table("grid")
    cfg["grid"] = {
        "lambda_min": c.number(g, "grid", "lambda_min", lo=0.0, lo_open=True),
        "lambda_max": c.number(g, "grid", "lambda_max", lo=0.0, lo_open=True),
        "bins": c.number(g, "grid", "bins", lo=1, integer=True),
        "spacing": c.choice(g, "grid", "spacing", SPACINGS, "geometric"),
    }
    lmin, lmax = cfg["grid"]["lambda_min"], cfg["grid"]["lambda_max"]
    if lmin is not None and lmax is not None and lmax <= lmin:
        c.violations.append(f"grid.lambda_max ({lmax}) must exceed grid.lambda_min ({lmin})")

    f = c.table("fluid", required=False)
    try:
        cfg["fluid"] = FluidField(**{k: float(v) for k, v in f.items()})
    except TypeError as exc:
        c.violations.append(f"[fluid]: {exc}")
        cfg["fluid"] = FluidField()
    except ValueError as exc:
        c.violations.append(f"[fluid]: {exc}")
        cfg["fluid"] = FluidField()

    s = c.table("scenario")
    mode = c.choice(s, "scenario", "mode", MODES)
    cfg["scenario"] = {
        "mode": mode,
        "operator": c.choice(s, "scenario", "operator", OPERATORS,
                             "gbar" if mode in ("zero_d_aggfrag", "column") else None),
        "t_end": c.number(s, "scenario", "t_end", lo=0.0, lo_open=True),
        "dt": c.number(s, "scenario", "dt", lo=0.0, lo_open=True),
    }
    op = cfg["scenario"]["operator"]
    if mode in ("zero_d_aggfrag", "column") and op not in (None, "gbar"):
        c.violations.append(f"scenario.operator {op!r} is not available in mode {mode!r}")
    if mode == "zero_d_relax" and op == "gbar":
        c.violations.append("scenario.operator 'gbar' needs mode 'zero_d_aggfrag' or 'column'")

    k = c.table("kernels", required=mode in ("zero_d_aggfrag", "column"))
    kc = {
        "d": c.number(k, "kernels", "d", 1.0, lo=1.0),
        "N_d": c.number(k, "kernels", "N_d", 1.0, lo=0.0, lo_open=True),
        "aggregation": c.choice(k, "kernels", "aggregation", tuple(AGGREGATION_FAMILIES), "none"),
        "fragmentation": c.choice(k, "kernels", "fragmentation", tuple(FRAGMENTATION_FAMILIES), "none"),
        "daughter": c.choice(k, "kernels", "daughter", tuple(DAUGHTER_FAMILIES), "uniform"),
        "aggregation_params": k.get("aggregation_params", {}),
        "fragmentation_params": k.get("fragmentation_params", {}),
    }
    cfg["kernels"] = kc
    for key in ("aggregation_params", "fragmentation_params"):
        params = kc[key]
        if not isinstance(params, dict):
            c.violations.append(f"kernels.{key} must be a table")
            kc[key] = {}
            continue
        for name, v in params.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v >= 0.0:
                c.violations.append(f"kernels.{key}.{name} must be a number >= 0, got {v!r}")
                kc[key] = {}
    if lmin is not None and None not in kc.values():
        try:
            cfg["kernel_set"] = make_kernels(lmin, **kc)
        except (TypeError, ValueError) as exc:
            c.violations.append(f"[kernels]: {exc}")

    needs_relax = mode == "zero_d_relax"
    r = c.table("relaxation", required=needs_relax)
    rc = {}
    if r or needs_relax:
        rc = {
            "T_eq": c.number(r, "relaxation", "T_eq", lo=0.0, lo_open=True),
            "sigma0": c.number(r, "relaxation", "sigma0", lo=0.0, lo_open=True),
            "c_k": c.number(r, "relaxation", "c_k", 0.0, lo=0.0),
            "weight": c.choice(r, "relaxation", "weight", ("none", "bio"), "none"),
        }
        if rc["weight"] == "bio":
            rc["lambda_bio"] = c.number(r, "relaxation", "lambda_bio", lo=0.0)
            rc["M_min"] = c.number(r, "relaxation", "M_min", lo=0.0, lo_open=True)
            rc["M_bio"] = c.number(r, "relaxation", "M_bio", lo=0.0)
        if op == "relax_weighted" and rc["weight"] != "bio":
            c.violations.append("scenario.operator 'relax_weighted' needs relaxation.weight = 'bio'")
    cfg["relaxation"] = rc

    i = c.table("initial", required=False)
    cfg["initial"] = {
        "profile": c.choice(i, "initial", "profile", PROFILES, "exponential"),
        "mass": c.number(i, "initial", "mass", 1.0, lo=0.0, lo_open=True),
        "center": c.number(i, "initial", "center", lmin if lmin is not None else 1.0),
        "width": c.number(i, "initial", "width", 1.0, lo=0.0, lo_open=True),
    }

    col = c.table("column", required=mode == "column")
    cc = {}
    if mode == "column":
        st = col.get("settling", {})
        cc = {
            "nz": c.number(col, "column", "nz", lo=1, integer=True),
            "depth": c.number(col, "column", "depth", lo=0.0, lo_open=True),
            "field_file": None,
            "w0": c.number(st, "column.settling", "w0", lo=0.0),
            "exponent": c.number(st, "column.settling", "exponent", 2.0, lo=0.0),
            "r_gel": c.number(st, "column.settling", "r_gel", lo=0.0, lo_open=True),
            "power": c.number(st, "column.settling", "power", 1.0, lo=0.0),
        }
        if "field_file" in col:
            p = base / str(col["field_file"])
            if not p.is_file():
                c.violations.append(f"column.field_file: cannot read {col['field_file']!r}")
            else:
                cc["field_file"] = p
    cfg["column"] = cc

    dsc = c.table("discrete", required=False)
    cfg["discrete"] = {
        "quad_order": c.number(dsc, "discrete", "quad_order", 4, lo=1, integer=True),
        "mode": c.choice(dsc, "discrete", "mode", ("raw", "corrected"), "corrected"),
    }

    o = c.table("output", required=False)
    cfg["output"] = {
        "stride": c.number(o, "output", "stride", 1, lo=1, integer=True),
        "seed": c.number(o, "output", "seed", 0, lo=0, integer=True),
        "budget_tol": c.number(o, "output", "budget_tol", 1e-9, lo=0.0),
        "conservation_tol": c.number(o, "output", "conservation_tol", 1e-12, lo=0.0),
        "trials": c.number(o, "output", "trials", 100, lo=1, integer=True),
    }

    known = {"grid", "fluid", "kernels", "relaxation", "initial", "scenario", "column", "discrete", "output"}
    for extra in sorted(set(data) - known):
        c.violations.append(f"[{extra}]: unknown section")
    return cfg, c.violations


def validate_config(path) -> ConfigReport:
    """Parse and check a scenario file; every problem is listed, nothing is run.

    An unreadable file raises OSError; malformed TOML is reported as a violation.
    """
    path = Path(path)
    raw = path.read_bytes()
    rep = ConfigReport(path)
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        rep.violations.append(f"not valid TOML: {exc}")
        return rep
    rep.data, rep.violations = _check(data, path.parent)
    return rep
