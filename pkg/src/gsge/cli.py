"""Command-line entry points, config parsing, snapshot I/O, and run logs.

Config files are TOML with sections [problem], [grid], [solver], [run]; see
the README for the full schema.  Snapshots are the 8-byte magic "GSGE0001"
followed by little-endian u32 (n, nx, nt) and float64 values, time-major
then lexicographic space, so they parse trivially from any language.

Exit codes: 0 success, 1 solver failure, 2 config/validation error.
"""

import argparse
import csv
import io
import json
import struct
import sys
from pathlib import Path

import numpy as np
import tomli

from . import fields as field_lib
from . import verifier
from .conformal import ProblemParams, preset_params, validate_theorem_regime
from .errors import (ConfigError, GsgeError, InitializationError, SnapshotError,
                     SolveError)
from .grid import GridSpec, SpacetimeField, sup_norms, validate_problem
from .solver import (SolverOptions, SolveTrace, choose_initializer,
                     degenerate_solve, homotopy_solve, slice_stack_solve)

__all__ = ["write_snapshot", "read_snapshot", "load_config", "run", "main"]

MAGIC_PREFIX = b"GSGE"
MAGIC_VERSION = b"0001"
MAGIC = MAGIC_PREFIX + MAGIC_VERSION


def write_snapshot(field: SpacetimeField, path):
    g = field.grid
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", g.n, g.nx, g.nt))
        f.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_snapshot(path) -> SpacetimeField:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 20:
        raise SnapshotError(f"{path}: truncated header")
    if raw[:4] != MAGIC_PREFIX:
        raise SnapshotError(f"{path}: bad magic {raw[:8]!r}")
    if raw[4:8] != MAGIC_VERSION:
        raise SnapshotError(
            f"{path}: unsupported snapshot version {raw[4:8].decode(errors='replace')}")
    n, nx, nt = struct.unpack("<III", raw[8:20])
    grid = GridSpec(n=n, nx=nx, nt=nt)
    expected = 20 + 8 * int(np.prod(grid.shape))
    if len(raw) != expected:
        raise SnapshotError(f"{path}: truncated payload ({len(raw)} != {expected} bytes)")
    values = np.frombuffer(raw[20:], dtype="<f8").reshape(grid.shape).copy()
    return SpacetimeField(grid, values)


def _require(table, key, where):
    if key not in table:
        raise ConfigError(f"missing {where} field {key!r}")
    return table[key]


def _load_spatial(spec, grid, name):
    kind = _require(spec, "kind", name)
    if kind == "constant":
        return np.full(grid.spatial_shape, float(_require(spec, "value", name)))
    if kind == "trig":
        return field_lib.trig_spatial(
            grid, base=float(spec.get("base", 0.0)), amp=float(spec.get("amp", 0.0)),
            modes=tuple(spec.get("modes", (1,) * grid.n)),
            phases=tuple(spec.get("phases", (0.0,) * grid.n)))
    if kind == "file":
        path = Path(_require(spec, "path", name))
        if not path.exists():
            raise ConfigError(f"{name}: file {path} does not exist")
        arr = np.load(path)
        if arr.shape != grid.spatial_shape:
            raise ConfigError(f"{name}: shape {arr.shape} != {grid.spatial_shape}")
        return np.asarray(arr, dtype=float)
    raise ConfigError(f"{name}: unknown kind {kind!r}")


def _load_psi(spec, grid, name="psi"):
    kind = _require(spec, "kind", name)
    t = grid.t_levels.reshape((-1,) + (1,) * grid.n)
    if kind == "constant":
        return np.full(grid.shape, float(_require(spec, "value", name)))
    if kind == "trig":
        spatial = field_lib.trig_spatial(
            grid, base=float(spec.get("base", 0.0)), amp=float(spec.get("amp", 0.0)),
            modes=tuple(spec.get("modes", (1,) * grid.n)),
            phases=tuple(spec.get("phases", (0.0,) * grid.n)))
        tamp = float(spec.get("tamp", 0.0))
        return np.broadcast_to(spatial, grid.shape) * (1.0 + tamp * np.sin(np.pi * t))
    if kind == "file":
        path = Path(_require(spec, "path", name))
        if not path.exists():
            raise ConfigError(f"{name}: file {path} does not exist")
        arr = np.load(path)
        if arr.shape != grid.shape:
            raise ConfigError(f"{name}: shape {arr.shape} != {grid.shape}")
        return np.asarray(arr, dtype=float)
    raise ConfigError(f"{name}: unknown kind {kind!r}")


def _load_A(spec, grid, name="A"):
    kind = _require(spec, "kind", name)
    if kind == "constant-diagonal":
        return field_lib.constant_diagonal_A(grid, float(_require(spec, "value", name)))
    if kind == "file":
        path = Path(_require(spec, "path", name))
        if not path.exists():
            raise ConfigError(f"{name}: file {path} does not exist")
        arr = np.load(path)
        want = grid.spatial_shape + (grid.n, grid.n)
        if arr.shape != want:
            raise ConfigError(f"{name}: shape {arr.shape} != {want}")
        arr = np.asarray(arr, dtype=float)
        if np.abs(arr - np.swapaxes(arr, -1, -2)).max() > 1e-12:
            raise ConfigError(f"{name}: tensor field is not symmetric")
        return arr
    raise ConfigError(f"{name}: unknown kind {kind!r}")


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, "rb") as f:
            return tomli.load(f)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed config: {exc}") from exc


# desk-scale defaults when the grid section leaves sizes unset
DEFAULT_GRIDS = {2: (32, 15), 3: (8, 7)}


def _build(cfg):
    """(ProblemParams, GridSpec, SolverOptions, run section) from raw config."""
    prob = _require(cfg, "problem", "config")
    gsec = dict(cfg.get("grid", {}))
    n = int(_require(prob, "n", "problem"))
    default_nx, default_nt = DEFAULT_GRIDS.get(n, (8, 7))
    grid = GridSpec(n=n, nx=int(gsec.get("nx", default_nx)),
                    nt=int(gsec.get("nt", default_nt)))
    if "preset" in prob:
        s, r, gamma = preset_params(prob["preset"], n=n, tau=prob.get("tau"))
    else:
        s, r, gamma = (float(_require(prob, key, "problem")) for key in ("s", "r", "gamma"))
    p = ProblemParams(
        n=n, k=int(_require(prob, "k", "problem")), gamma=gamma, s=s, r=r,
        A_field=_load_A(_require(prob, "A", "problem"), grid),
        psi=_load_psi(_require(prob, "psi", "problem"), grid),
        u0=_load_spatial(_require(prob, "u0", "problem"), grid, "u0"),
        u1=_load_spatial(_require(prob, "u1", "problem"), grid, "u1"),
    )
    validate_problem(p, grid)
    ssec = dict(cfg.get("solver", {}))
    if "epsilon_schedule" in ssec:
        ssec["epsilon_schedule"] = tuple(float(e) for e in ssec["epsilon_schedule"])
    known = set(SolverOptions.__dataclass_fields__)
    bad = set(ssec) - known
    if bad:
        raise ConfigError(f"unknown solver option(s): {sorted(bad)}")
    opts = SolverOptions(**ssec)
    run_sec = dict(cfg.get("run", {}))
    return p, grid, opts, run_sec


def _write_log(out_dir, trace, notes):
    lines = [json.dumps({"note": note}, sort_keys=True) for note in notes]
    lines += trace.lines() if trace is not None else []
    (out_dir / "run.log").write_text("\n".join(lines) + "\n")


def _write_norms_csv(path, rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    Path(path).write_text(buf.getvalue())


def run(config_path, mode=None, out=None, seed=None, deterministic=None):
    """Execute one run; returns the process exit status."""
    try:
        cfg = load_config(config_path)
        p, grid, opts, run_sec = _build(cfg)
    except GsgeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    mode = mode or run_sec.get("mode", "solve")
    out_dir = Path(out or run_sec.get("out", "out"))
    seed = seed if seed is not None else int(run_sec.get("seed", 0))
    if deterministic is None:
        deterministic = bool(run_sec.get("deterministic", False))
    opts.deterministic = deterministic
    out_dir.mkdir(parents=True, exist_ok=True)

    notes = [f"mode={mode}", validate_theorem_regime(p).message]
    if p.n == 2:
        notes.append("n=2 run: all formulas well defined, but the geometric "
                     "interpretation assumes n >= 3")
    try:
        if mode == "init":
            w = choose_initializer(p, grid, opts)
            write_snapshot(w, out_dir / "initializer.snap")
            _write_log(out_dir, None, notes)
            return 0
        if mode == "solve":
            if not np.all(p.psi[1:-1] > 0):
                print("config error: mode=solve requires psi > 0 on the "
                      "interior (use mode=geodesic)", file=sys.stderr)
                return 2
            trace = SolveTrace(deterministic)
            u, _ = homotopy_solve(p, grid, opts, trace=trace)
            write_snapshot(u, out_dir / "solution.snap")
            _write_log(out_dir, trace, notes)
            _write_norms_csv(out_dir / "norms.csv",
                             [{"quantity": k, "value": repr(v)}
                              for k, v in sup_norms(u, p).as_dict().items()])
            return 0
        if mode == "geodesic":
            eps_mode = run_sec.get("epsilon_mode", "rhs-epsilon")
            result = degenerate_solve(p, grid, opts, mode=eps_mode)
            for i, (eps, fld) in enumerate(zip(result.eps, result.fields)):
                write_snapshot(fld, out_dir / f"geodesic_{i:02d}_eps{eps:.0e}.snap")
            if result.extrapolated is not None:
                write_snapshot(result.extrapolated, out_dir / "geodesic_extrapolated.snap")
            rows = []
            for i, entry in enumerate(result.norm_table):
                row = {k: repr(v) for k, v in entry.items()}
                row["sup_diff_prev"] = repr(result.sup_diffs[i - 1]) if i else ""
                rows.append(row)
            if rows:
                _write_norms_csv(out_dir / "eps_sweep.csv", rows)
            if result.monotone_ok is not None:
                notes.append(f"epsilon-monotonicity ok={result.monotone_ok} "
                             f"worst={result.monotone_worst:.3e}")
            if result.failed:
                notes.append(f"failure: {result.failure}")
            _write_log(out_dir, result.trace, notes)
            return 1 if result.failed else 0
        if mode == "slice":
            if not np.all(p.psi > 0):
                print("config error: mode=slice requires psi > 0", file=sys.stderr)
                return 2
            trace = SolveTrace(deterministic)
            u = slice_stack_solve(p, grid, opts, trace=trace)
            write_snapshot(u, out_dir / "slices.snap")
            _write_log(out_dir, trace, notes)
            return 0
        if mode == "verify":
            samples = int(run_sec.get("samples", 2000))
            trials = int(run_sec.get("trials", 200))
            reports = [
                verifier.check_cone_propagation(seed, samples),
                verifier.check_concavity(seed, samples),
            ]
            snap = run_sec.get("snapshot")
            if snap:
                sol = read_snapshot(snap)
                reports.append(verifier.check_maximum_principle(sol, p, grid))
                reports.append(verifier.monitor_estimates(sol, p, grid))
                reports.append(verifier.viscosity_spot_check(sol, p, grid, seed,
                                                             trials=trials))
            (out_dir / "verify_report.txt").write_text(
                "\n".join(rep.line() for rep in reports) + "\n")
            (out_dir / "verify_summary.json").write_text(
                json.dumps([rep.record() for rep in reports], indent=2,
                           sort_keys=True) + "\n")
            _write_log(out_dir, None, notes)
            return 0 if all(rep.passed for rep in reports) else 1
        print(f"config error: unknown mode {mode!r}", file=sys.stderr)
        return 2
    except (SolveError, InitializationError) as exc:
        trace = getattr(exc, "trace", None)
        notes.append(f"failure: {exc}")
        _write_log(out_dir, trace, notes)
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except GsgeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="gsge",
        description="Solve and certify the sigma_k conformal geodesic "
                    "boundary problem on a flat torus cross [0,1].")
    sub = parser.add_subparsers(dest="mode", required=True)
    for name, help_text in (
        ("init", "build and write the admissible initializer"),
        ("solve", "continuity-method solve of the strict problem"),
        ("geodesic", "epsilon-regularized solve of the degenerate problem"),
        ("slice", "per-time-level elliptic solves (gamma > 0)"),
        ("verify", "run the certification suite"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to the TOML config")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed")
        sp.add_argument("--deterministic", action="store_true", default=None,
                        help="byte-reproducible logs and snapshots")
    args = parser.parse_args(argv)
    return run(args.config, mode=args.mode, out=args.out, seed=args.seed,
               deterministic=args.deterministic)


if __name__ == "__main__":
    sys.exit(main())
