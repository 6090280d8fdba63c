"""`flocbal run <config> --out <dir>`: run a 0-D or column scenario and write CSV series."""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .bioagg import BioParams, weight_function
from .column import SettlingLaw, TransportError, split_step, uniform_column
from .config import ConfigError, validate_config
from .discrete import PositivityError, check_conservation, euler_advance, precompute
from .fluid import read_column_csv, sigma_eq, uniform_field
from .grid import BinDensity, make_grid, number_total, project, total_mass, weighted_mass
from .kernels import make_kernels, validate
from .quadrature import QuadratureError
from .relaxation import RelaxParams, d_eq, integrate_relax

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SERIES_HEADER = ("t", "mass_total", "number_total", "weighted_mass", "deposited", "leak_redirected")
NOTES = (
    "convention: equilibrium profile ((lam - lambda_min)/sigma^2) exp(-(lam - lambda_min)/sigma), decaying tail",
    "convention: large-fragment Jacobian (lam'^d - lam^d)^((1-d)/d) lam^(d-1) applied once",
    "convention: aggregates above lambda_max are redirected into the top bin (leak_redirected)",
)


class NumericalFailure(RuntimeError):
    pass


def _fmt(x) -> str:
    return repr(float(x))


def _initial(cfg, grid) -> BinDensity:
    ini = cfg["initial"]
    lmin, c, w = grid.lambda_min, ini["center"], ini["width"]
    shapes = {
        "uniform": lambda x: np.ones_like(x),
        "exponential": lambda x: np.exp(-(x - lmin) / w),
        "gaussian": lambda x: np.exp(-0.5 * ((x - c) / w) ** 2),
        "deq": lambda x: d_eq(x, lmin, w),
    }
    rho = project(shapes[ini["profile"]], grid)
    m = total_mass(rho)
    if m <= 0.0:
        raise ConfigError([f"initial.profile {ini['profile']!r} has no mass on the grid"])
    return rho.with_values(rho.values * (ini["mass"] / m))


def _weight(cfg, grid):
    rc = cfg["relaxation"]
    if rc.get("weight") == "bio":
        return weight_function(BioParams(grid.lambda_min, rc["lambda_bio"], rc["M_min"], rc["M_bio"],
                                         cfg["kernels"]["d"]))
    return lambda lam: np.ones_like(np.asarray(lam, dtype=float))


def _steps(t_end: float, dt: float) -> list[float]:
    n = int(math.floor(t_end / dt * (1.0 + 1e-12)))
    out = [dt] * n
    if t_end - n * dt > 1e-12 * dt:
        out.append(t_end - n * dt)
    return out


class _Writer:
    def __init__(self, out: Path, grid):
        self.out, self.grid = out, grid
        self.rows = []

    def record(self, t, values, mass, number, weighted, deposited, leak):
        self.rows.append((t, mass, number, weighted, deposited, leak))
        name = self.out / f"dist_{float(t):.10g}.csv"
        with open(name, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(("bin", "lambda_lo", "lambda_hi", "rho"))
            for i, (lo, hi, v) in enumerate(zip(self.grid.lo, self.grid.hi, values)):
                wr.writerow((i, _fmt(lo), _fmt(hi), _fmt(v)))

    def close(self):
        with open(self.out / "series.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(SERIES_HEADER)
            for row in self.rows:
                wr.writerow([_fmt(x) for x in row])


def _tables(cfg, ks, grid, fields, quad_order, mode):
    cache = {}
    out = []
    for F in fields:
        if F not in cache:
            cache[F] = precompute(ks, F, grid, quad_order, mode)
        out.append(cache[F])
    return out


def simulate(cfg, out: Path, quad_order: int, mode: str, report: list) -> float:
    """Run the configured scenario; return the relative drift of its conserved budget."""
    gc = cfg["grid"]
    grid = make_grid(gc["lambda_min"], gc["lambda_max"], gc["bins"], gc["spacing"])
    ks = cfg.get("kernel_set") or make_kernels(grid.lambda_min, cfg["kernels"]["d"], cfg["kernels"]["N_d"])
    F = cfg["fluid"]
    sc = cfg["scenario"]
    stride = cfg["output"]["stride"]
    f = _weight(cfg, grid)
    rho = _initial(cfg, grid)
    writer = _Writer(out, grid)
    steps = _steps(sc["t_end"], sc["dt"])
    report.append(f"scenario: {sc['mode']} / {sc['operator']}, {len(steps)} steps of dt={sc['dt']!r}")
    report.append(f"grid: {grid.n_cells} {gc['spacing']} bins on [{grid.lambda_min!r}, {grid.lambda_max!r}]")

    if sc["mode"] == "zero_d_relax":
        rc = cfg["relaxation"]
        weighted = sc["operator"] == "relax_weighted"
        params = RelaxParams(rc["T_eq"], grid.lambda_min, sigma_eq(F, rc["sigma0"], rc["c_k"]),
                             f if weighted else None)
        report.append(f"relaxation: T_eq={params.T_eq!r}, sigma={params.sigma!r}")
        budget = (lambda r: weighted_mass(r, f)) if weighted else total_mass
        b0 = budget(rho)
        t = 0.0
        writer.record(t, rho.values, total_mass(rho), number_total(rho, ks), weighted_mass(rho, f), 0.0, 0.0)
        for n, h in enumerate(steps, 1):
            y = integrate_relax(rho, params, h, h, "rk4")
            if np.any(y.values < 0.0):
                raise NumericalFailure("relaxation step produced negative densities")
            rho, t = y, t + h
            if n % stride == 0 or n == len(steps):
                writer.record(t, rho.values, total_mass(rho), number_total(rho, ks), weighted_mass(rho, f),
                              0.0, 0.0)
        writer.close()
        return abs(budget(rho) - b0) / b0

    report.extend(validate(ks, F, grid).lines())
    if sc["mode"] == "zero_d_aggfrag":
        (tab,) = _tables(cfg, ks, grid, [F], quad_order, mode)
        report.extend(check_conservation(tab, cfg["output"]["trials"], cfg["output"]["seed"]).lines())
        b0 = total_mass(rho)
        y, t, leak = rho.values, 0.0, 0.0
        writer.record(t, y, b0, number_total(rho, ks), weighted_mass(rho, f), 0.0, 0.0)
        for n, h in enumerate(steps, 1):
            y, _, dl = euler_advance(tab, y, h)
            t, leak = t + h, leak + dl
            if n % stride == 0 or n == len(steps):
                r = rho.with_values(y)
                writer.record(t, y, total_mass(r), number_total(r, ks), weighted_mass(r, f), 0.0, leak)
        writer.close()
        return abs(total_mass(rho.with_values(y)) - b0) / b0

    cc = cfg["column"]
    state = uniform_column(grid, cc["depth"], cc["nz"], rho.values)
    if cc["field_file"] is not None:
        fields = read_column_csv(cc["field_file"])
        if len(fields) != cc["nz"]:
            raise ConfigError([f"column.field_file has {len(fields)} nodes but column.nz = {cc['nz']}"])
    else:
        fields = uniform_field(F, state.z_centers)
    law = SettlingLaw(cc["w0"], cc["exponent"], cc["r_gel"], cc["power"], grid.lambda_min)
    tables = _tables(cfg, ks, grid, fields.fields, quad_order, mode)
    worst = max(check_conservation(tb, cfg["output"]["trials"], cfg["output"]["seed"]).max_relative_residual
                for tb in {id(tb): tb for tb in tables}.values())
    report.append(f"conservation over {len(set(map(id, tables)))} node table(s): max residual {worst:.3e}")

    def column_row(st):
        integrated = st.dz @ st.rho
        r = rho.with_values(integrated)
        return integrated, (total_mass(r), number_total(r, ks), weighted_mass(r, f), float(st.deposited.sum()),
                            st.redirected)

    b0 = state.budget()
    vals, row = column_row(state)
    writer.record(0.0, vals, *row)
    for n, h in enumerate(steps, 1):
        state = split_step(state, tables, fields, law, h)
        if n % stride == 0 or n == len(steps):
            vals, row = column_row(state)
            writer.record(state.time, vals, *row)
    writer.close()
    return abs(state.budget() - b0) / b0


def run(config_path, out_dir, check_conservation_only: bool = False, quad_order: int | None = None,
        mode: str | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        rep = validate_config(config_path)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=stderr)
        return EXIT_CONFIG
    if not rep.ok:
        for v in rep.violations:
            print(f"config error: {v}", file=stderr)
        return EXIT_CONFIG
    cfg = rep.data
    quad_order = quad_order or cfg["discrete"]["quad_order"]
    mode = mode or cfg["discrete"]["mode"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = [f"config: {Path(config_path).name}", f"table mode: {mode}, quadrature order {quad_order}"]
    report.extend(NOTES)
    code = EXIT_OK
    try:
        if check_conservation_only:
            gc = cfg["grid"]
            grid = make_grid(gc["lambda_min"], gc["lambda_max"], gc["bins"], gc["spacing"])
            ks = cfg.get("kernel_set") or make_kernels(grid.lambda_min)
            tab = precompute(ks, cfg["fluid"], grid, quad_order, mode)
            res = check_conservation(tab, cfg["output"]["trials"], cfg["output"]["seed"])
            lines = res.lines()
            passed = res.max_relative_residual <= cfg["output"]["conservation_tol"]
            lines.append(f"threshold {cfg['output']['conservation_tol']:.1e}: {'PASS' if passed else 'FAIL'}")
            print("\n".join(lines), file=stdout)
            report.extend(lines)
            code = EXIT_OK if passed else EXIT_NUMERIC
        else:
            drift = simulate(cfg, out, quad_order, mode, report)
            tol = cfg["output"]["budget_tol"]
            report.append(f"budget drift {drift:.3e} (tolerance {tol:.1e})")
            if not drift <= tol:
                print(f"error: budget drift {drift:.3e} exceeds {tol:.1e}", file=stderr)
                code = EXIT_NUMERIC
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=stderr)
        return EXIT_CONFIG
    except (PositivityError, TransportError, QuadratureError, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=stderr)
        report.append(f"numerical failure: {exc}")
        code = EXIT_NUMERIC
    (out / "report.txt").write_text("\n".join(report) + "\n")
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="flocbal", description="floc population-balance scenarios")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("config")
    r.add_argument("--out", required=True)
    r.add_argument("--check-conservation", action="store_true",
                   help="only check the discrete conservation identity and exit")
    r.add_argument("--quad-order", type=int, default=None)
    r.add_argument("--mode", choices=("raw", "corrected"), default=None)
    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("config")
    args = ap.parse_args(argv)
    if args.command == "validate":
        try:
            rep = validate_config(args.config)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for line in rep.violations:
            print(line)
        return EXIT_OK if rep.ok else EXIT_CONFIG
    if args.quad_order is not None and args.quad_order < 1:
        print("error: --quad-order must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.config, args.out, args.check_conservation, args.quad_order, args.mode)


if __name__ == "__main__":
    sys.exit(main())
