"""Command-line front end.

    oracle-cs sweep white|quant|corr [options]
    oracle-cs check-wishart [options]
    oracle-cs rip [options]
    oracle-cs replay OUT/manifest.json --out DIR
    oracle-cs version

Option precedence is command-line flag, then ``--config`` file (``key = value``
lines, ``#`` comments, list values comma separated), then built-in default.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .mc import ExperimentConfig, SweepResult, run_sweep
from .model import Rng, dct_basis, gen_sensing_matrix
from .noise import Ar1, Quantizer, White
from .theory import DomainError, RipGuardError, rip_constant_search, wishart_pinv_mean_check

THREADS_ENV = "ORACLE_CS_THREADS"
WISHART_MIN_TRIALS = 100

# artifact defaults; the source gives no numeric axis ranges
DEFAULT_SIGMA2Z_GRID = [10.0**e for e in range(-6, 0)]
DEFAULT_DELTA_GRID = [float(f"{c}e{e}") for e in range(-4, 0) for c in (1, 3)] + [1.0]
DEFAULT_RHO = [0.9, 0.999]
DEFAULT_DELTA_K = [0.0, 0.5]

SWEEP_DEFAULTS = {
    "n": 512,
    "k": 16,
    "m": 128,
    "trials": 1000,
    "seed": 1,
    "sigma2_phi": None,
    "sigma2_theta": 1.0,
    "out": "out",
    "threads": None,
    "sigma2z_grid": None,
    "delta_grid": None,
    "rho": None,
    "delta_k": None,
    "gnuplot": False,
}
WISHART_DEFAULTS = {
    "m": 128,
    "k": 16,
    "sigma2_phi": 1.0,
    "trials": 10_000,
    "seed": 1,
    "threads": None,
    "tolerance": 0.03,
    "offdiag_tolerance": 0.10,
    "strict": False,
}
RIP_DEFAULTS = {
    "m": 8,
    "n": 12,
    "k": None,
    "sigma2_phi": None,
    "seed": 1,
    "matrix": None,
    "dct": False,
    "threads": None,
}

LIST_KEYS = {"sigma2z_grid", "delta_grid", "rho", "delta_k"}
INT_KEYS = {"n", "k", "m", "trials", "seed", "threads"}
BOOL_KEYS = {"gnuplot", "strict", "dct"}


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    """Shortest decimal string that round-trips to the same double."""
    return repr(float(x))


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from None


def read_config_file(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    try:
        if key in LIST_KEYS:
            return _float_list(value)
        if key in INT_KEYS:
            return int(value)
        if key in BOOL_KEYS:
            return value.lower() in ("1", "true", "yes", "on")
        if key in ("out", "matrix"):
            return value
        return float(value)
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None


def resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge defaults, config file and explicit flags, in increasing priority."""
    opts = dict(defaults)
    if getattr(args, "config", None):
        for key, value in read_config_file(args.config).items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r}")
            opts[key] = _coerce(key, value)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = _coerce(key, value)
    if opts.get("threads") is None:
        env = os.environ.get(THREADS_ENV)
        opts["threads"] = int(env) if env else 1
    if opts["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    return opts


# ---------------------------------------------------------------------------
# sweep


def _series(kind: str, opts: dict) -> list[tuple[str, ExperimentConfig, str, list[float]]]:
    """(file stem, base config, swept parameter, grid) for each output CSV."""
    m = opts["m"]
    common = dict(
        n=opts["n"],
        k=opts["k"],
        m=m,
        trials=opts["trials"],
        seed=opts["seed"],
        sigma2_theta=opts["sigma2_theta"],
        sigma2_phi=opts["sigma2_phi"],
    )
    sigma2z_grid = opts["sigma2z_grid"] or DEFAULT_SIGMA2Z_GRID
    if kind == "white":
        return [("white", ExperimentConfig(noise=White(m, sigma2z_grid[0]), **common), "sigma2_z", sigma2z_grid)]
    if kind == "quant":
        grid = opts["delta_grid"] or DEFAULT_DELTA_GRID
        return [("quant", ExperimentConfig(noise=Quantizer(grid[0]), **common), "delta", grid)]
    if kind == "corr":
        rhos = opts["rho"] or DEFAULT_RHO
        return [
            (f"corr_rho{fmt(r)}", ExperimentConfig(noise=Ar1(m, sigma2z_grid[0], r), **common), "sigma2_z", sigma2z_grid)
            for r in rhos
        ]
    raise UsageError(f"unknown sweep kind {kind!r}")


def sweep_header(result: SweepResult) -> list[str]:
    cols = [result.parameter, "empirical_mse", "std_error", "predicted_mse"]
    for d in result.delta_k:
        cols += [f"lower_dk{fmt(d)}", f"upper_dk{fmt(d)}"]
    return cols


def sweep_rows(result: SweepResult, correlated: bool) -> list[list[float]]:
    rows = []
    for p in range(len(result)):
        row = [result.grid[p], result.empirical_mse[p], result.std_error[p], result.predicted_mse[p]]
        for b in result.bounds[p]:
            # the white-noise lower bound has no correlated counterpart
            if correlated:
                row += [math.nan, b.rip_upper_corr]
            else:
                row += [b.rip_lower_white, b.rip_upper_white]
        rows.append(row)
    return rows


def write_csv(path: Path, header: list[str], rows: list[list[float]]) -> None:
    text = ",".join(header) + "\n" + "".join(",".join(fmt(v) for v in row) + "\n" for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        rows = [[float(v) for v in line.rstrip("\n").split(",")] for line in fh if line.strip()]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def _gnuplot_script(files: list[str], parameter: str) -> str:
    lines = [
        "# usage: gnuplot -p plot.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale xy",
        f"set xlabel '{parameter}'",
        "set ylabel 'E||x_hat - x||^2'",
    ]
    parts = []
    for f in files:
        parts.append(f"'{f}' using 1:2:3 with yerrorbars title '{f} simulated'")
        parts.append(f"'{f}' using 1:4 with lines title '{f} closed form'")
    lines.append("plot " + ", \\\n     ".join(parts))
    return "\n".join(lines) + "\n"


def run_sweep_command(kind: str, opts: dict, out_dir: Path) -> dict:
    delta_k = opts["delta_k"] if opts["delta_k"] is not None else DEFAULT_DELTA_K
    series = _series(kind, opts)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    files = []
    for stem, cfg, parameter, grid in series:
        result = run_sweep(cfg, parameter, grid, delta_k, workers=opts["threads"])
        name = f"{stem}.csv"
        write_csv(out_dir / name, sweep_header(result), sweep_rows(result, correlated=kind == "corr"))
        files.append(name)
    if opts["gnuplot"]:
        (out_dir / "plot.gp").write_text(_gnuplot_script(files, series[0][2]), encoding="utf-8")

    resolved = {key: opts[key] for key in SWEEP_DEFAULTS if key not in ("out", "threads")}
    resolved.update(
        sigma2_phi=series[0][1].sigma2_phi,
        sigma2z_grid=opts["sigma2z_grid"] or (DEFAULT_SIGMA2Z_GRID if kind != "quant" else None),
        delta_grid=opts["delta_grid"] or (DEFAULT_DELTA_GRID if kind == "quant" else None),
        rho=opts["rho"] or (DEFAULT_RHO if kind == "corr" else None),
        delta_k=list(delta_k),
    )
    manifest = {
        "tool": "oracle-cs",
        "version": __version__,
        "numpy_version": np.__version__,
        "command": "sweep",
        "kind": kind,
        "seed": opts["seed"],
        "config": resolved,
        "duration_seconds": time.perf_counter() - start,
        "outputs": files,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def cmd_sweep(args) -> int:
    opts = resolve(args, SWEEP_DEFAULTS)
    manifest = run_sweep_command(args.kind, opts, Path(opts["out"]))
    for f in manifest["outputs"]:
        print(Path(opts["out"]) / f)
    return 0


def cmd_replay(args) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None
    if manifest.get("command") != "sweep":
        raise UsageError(f"manifest {path} does not describe a sweep")
    if manifest.get("numpy_version") != np.__version__:
        print(
            f"warning: manifest was written with numpy {manifest.get('numpy_version')}, "
            f"running {np.__version__}; random streams may differ",
            file=sys.stderr,
        )
    opts = dict(SWEEP_DEFAULTS)
    opts.update(manifest["config"])
    opts["threads"] = args.threads
    opts = resolve(argparse.Namespace(), opts)
    out = Path(args.out) if args.out else path.parent
    manifest = run_sweep_command(manifest["kind"], opts, out)
    for f in manifest["outputs"]:
        print(out / f)
    return 0


# ---------------------------------------------------------------------------
# check-wishart


def cmd_check_wishart(args) -> int:
    opts = resolve(args, WISHART_DEFAULTS)
    m, k = opts["m"], opts["k"]
    if not m > k + 3:
        print(f"error: the pseudo-inverse mean formula requires M > K + 3 (got M={m}, K={k})", file=sys.stderr)
        return 2
    report = wishart_pinv_mean_check(
        m, k, opts["sigma2_phi"], opts["trials"], Rng(opts["seed"]), workers=opts["threads"]
    )
    print(f"m                     = {report.m}")
    print(f"k                     = {report.k}")
    print(f"sigma2_phi            = {fmt(report.sigma2_phi)}")
    print(f"trials                = {report.trials}")
    print(f"predicted_scale       = {fmt(report.predicted_scale)}")
    print(f"empirical_diag_mean   = {fmt(report.empirical_diag_mean)}")
    print(f"empirical_offdiag_max = {fmt(report.empirical_offdiag_max)}")
    print(f"diag_rel_error        = {report.diag_rel_error:.4%}")
    print(f"offdiag/diag          = {report.offdiag_ratio:.4%}")
    if report.trials < WISHART_MIN_TRIALS:
        verdict = "INCONCLUSIVE"
    elif report.diag_rel_error <= opts["tolerance"] and report.offdiag_ratio < opts["offdiag_tolerance"]:
        verdict = "PASS"
    else:
        verdict = "FAIL"
    print(f"verdict               = {verdict}")
    return 1 if (opts["strict"] and verdict == "FAIL") else 0


# ---------------------------------------------------------------------------
# rip


def cmd_rip(args) -> int:
    opts = resolve(args, RIP_DEFAULTS)
    k = opts["k"]
    if k is None or k < 1:
        raise UsageError("--k must be given and >= 1")
    if opts["matrix"]:
        try:
            a = np.loadtxt(opts["matrix"], delimiter=",", ndmin=2)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read matrix {opts['matrix']}: {exc}") from None
    else:
        m, n = opts["m"], opts["n"]
        s2 = opts["sigma2_phi"] if opts["sigma2_phi"] is not None else 1.0 / m
        a = gen_sensing_matrix(m, n, s2, Rng(opts["seed"]))
    if opts["dct"]:
        a = a @ dct_basis(a.shape[1]).matrix
    if k > a.shape[1]:
        raise UsageError(f"--k={k} exceeds the number of columns {a.shape[1]}")
    res = rip_constant_search(a, k, partitions=max(1, opts["threads"]), workers=opts["threads"])
    print(f"delta_{k} = {fmt(res.delta)}")
    print(f"subset   = {' '.join(map(str, res.subset))}")
    print(f"subsets  = {res.subsets_checked}")
    return 0


def cmd_version(args) -> int:
    print(f"oracle-cs {__version__}")
    return 0


# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, dims=("n", "k", "m")) -> None:
    for d in dims:
        p.add_argument(f"--{d}", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma2-phi", type=float, dest="sigma2_phi")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1); never changes output")
    p.add_argument("--config", metavar="FILE", help="key = value defaults file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oracle-cs", description="Oracle compressed-sensing receiver simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="Monte-Carlo sweep against the closed-form error")
    sw.add_argument("kind", choices=["white", "quant", "corr"])
    _add_common(sw)
    sw.add_argument("--sigma2-theta", type=float, dest="sigma2_theta")
    sw.add_argument("--out", metavar="DIR")
    sw.add_argument("--sigma2z-grid", dest="sigma2z_grid", metavar="LIST", help="comma-separated noise variances")
    sw.add_argument("--delta-grid", dest="delta_grid", metavar="LIST", help="comma-separated quantiser steps")
    sw.add_argument("--rho", type=float, action="append", help="AR(1) coefficient (repeatable)")
    sw.add_argument("--delta-k", type=float, action="append", dest="delta_k", help="RIP constant for bound columns (repeatable)")
    sw.add_argument("--gnuplot", action="store_const", const=True, help="also write plot.gp")
    sw.set_defaults(func=cmd_sweep)

    cw = sub.add_parser("check-wishart", help="empirical mean of the Wishart pseudo-inverse")
    _add_common(cw, dims=("k", "m"))
    cw.add_argument("--tolerance", type=float, help="relative tolerance on the diagonal mean (default 0.03)")
    cw.add_argument("--strict", action="store_const", const=True, help="exit 1 on FAIL")
    cw.set_defaults(func=cmd_check_wishart)

    rp = sub.add_parser("rip", help="brute-force RIP constant of a small matrix")
    rp.add_argument("--m", type=int)
    rp.add_argument("--n", type=int)
    rp.add_argument("--k", type=int)
    rp.add_argument("--seed", type=int)
    rp.add_argument("--sigma2-phi", type=float, dest="sigma2_phi")
    rp.add_argument("--matrix", metavar="CSV", help="comma-separated matrix, one row per line")
    rp.add_argument("--dct", action="store_const", const=True, help="multiply by the DCT basis first")
    rp.add_argument("--threads", type=int)
    rp.add_argument("--config", metavar="FILE")
    rp.set_defaults(func=cmd_rip)

    rep = sub.add_parser("replay", help="re-run a sweep from its manifest.json")
    rep.add_argument("manifest")
    rep.add_argument("--out", metavar="DIR", help="output directory (default: the manifest's directory)")
    rep.add_argument("--threads", type=int)
    rep.set_defaults(func=cmd_replay)

    ver = sub.add_parser("version", help="print the version")
    ver.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (DomainError, RipGuardError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, DomainError) else 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
