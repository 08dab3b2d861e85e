"""Command-line front end.

Subcommands:

* ``bounds table``      evaluate one closed-form bound over a grid
* ``bounds crossover``  locate where the polynomial tail beats the exponential
* ``run``               execute an experiment described by a YAML config
* ``sample``            stream raw draws or their moment summary to CSV/stdout
* ``verify``            re-derive the hashes embedded in a summary file
* ``report``            pretty-print a stored summary

Exit codes for ``run``: 0 success, 2 config schema violation, 3 compute
error, 4 a recorded check failed (files are still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from . import bounds as bnd
from .config import ConfigError, build_rho_factory, load_config, run_from_config, validate_config
from .linalg import DensityMatrix, HilbertDim
from .measures import MeasureSpec, sample_delta_mixture
from .records import load_summary, render_csv, atomic_write_text, write_record, verify_summary
from .rng import stream

_TAG_GRID_PARAM = {"ga_small_norm": "r"}


def _grid_param_for(tag: str) -> str:
    if tag in _TAG_GRID_PARAM:
        return _TAG_GRID_PARAM[tag]
    return "delta" if tag.endswith("_delta") else "eps"


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) == 1:
        return np.array([float(parts[0])])
    if len(parts) not in (3, 4):
        raise ValueError(f"grid must be VALUE or LO:HI:N[:linear], got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if len(parts) == 4 and parts[3] == "linear":
        return np.linspace(lo, hi, n)
    return np.geomspace(lo, hi, n)


def _cmd_bounds_table(args) -> int:
    params = {}
    for name in ("d_a", "p_max", "purity", "eta", "norm_b", "norm_a", "d", "d_r"):
        value = getattr(args, name)
        if value is not None:
            params[name] = value
    grid_param = _grid_param_for(args.tag)
    grid = _parse_grid(args.grid)
    rows = []
    for x in grid:
        bv = bnd.bound_value(bnd.BoundSpec(args.tag, {**params, grid_param: float(x)}))
        rows.append(
            {
                "tag": args.tag,
                grid_param: float(x),
                "log_value": bv.log_value,
                "value": bv.value if bv.kind != "tail" else bv.probability,
                "kind": bv.kind,
                "valid": int(bv.valid),
            }
        )
    columns = ["tag", grid_param, "log_value", "value", "kind", "valid"]
    print(f"# bound {args.tag}  params " + " ".join(f"{k}={v:g}" for k, v in sorted(params.items())))
    print(f"{grid_param:>12}  {'log_value':>16}  {'value':>16}  valid")
    for row in rows:
        print(f"{row[grid_param]:>12.6g}  {row['log_value']:>16.9g}  {row['value']:>16.9g}  {row['valid']}")
    if args.csv:
        atomic_write_text(args.csv, render_csv(columns, rows))
        print(f"wrote {args.csv}")
    return 0


def _cmd_bounds_crossover(args) -> int:
    result = bnd.crossover_solve(args.d_a, args.eps, family=args.family)
    scan = bnd.crossover_scan(args.d_a, args.eps, family=args.family)
    if result.found:
        print(
            f"polynomial tail below exponential tail for "
            f"{result.d_low:.4e} < D < {result.d_high:.4e} "
            f"(d_a={args.d_a:g}, eps={args.eps:g}, family={args.family})"
        )
    else:
        print(f"no crossover window found (d_a={args.d_a:g}, eps={args.eps:g}, family={args.family})")
    if args.csv:
        rows = [
            {
                "log10_d": g,
                "log10_poly": lp / math.log(10.0),
                "log10_exp": le / math.log(10.0),
                "d_low": result.d_low if result.found else None,
                "d_high": result.d_high if result.found else None,
            }
            for g, lp, le in scan
        ]
        atomic_write_text(args.csv, render_csv(["log10_d", "log10_poly", "log10_exp", "d_low", "d_high"], rows))
        print(f"wrote {args.csv}")
    return 0


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = validate_config({**cfg, "seed": args.seed})
        if args.workers is not None:
            cfg = validate_config({**cfg, "workers": args.workers})
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        record = run_from_config(cfg)
    except Exception as exc:  # deliberate: any compute failure maps to exit 3
        print(f"compute error: {exc}", file=sys.stderr)
        return 3
    # workers and output location are execution knobs, not experiment identity;
    # keeping them out of the persisted config makes records byte-identical
    # across worker counts
    record.config = {**record.config, "run_config": {k: v for k, v in cfg.items() if k not in ("workers", "output")}}
    name = (cfg.get("output") or {}).get("name") or f"{cfg['experiment']}_seed{cfg['seed']}"
    csv_path, summary_path = write_record(record, args.out_dir, name)
    n_pass = sum(1 for c in record.checks if c.passed)
    print(
        f"{record.experiment}: rows={len(record.rows)} checks={n_pass}/{len(record.checks)} "
        f"csv={csv_path} summary={summary_path} wall={record.wall_clock:.2f}s"
    )
    for check in record.checks:
        if not check.passed:
            print(f"FAILED check {check.name}: {check.detail}", file=sys.stderr)
    return 0 if record.all_checks_passed else 4


def _parse_rho(text: str, shape: HilbertDim) -> DensityMatrix:
    kind, _, arg = text.partition(":")
    factory_spec = {"kind": kind}
    if kind == "projection":
        factory_spec["d_r"] = int(arg)
    elif kind == "near_pure":
        factory_spec["p"] = float(arg)
    elif kind not in ("uniform", "crossover_sqrt"):
        raise ValueError(f"unsupported rho spec {text!r}; use uniform, projection:D_R, near_pure:P, crossover_sqrt")
    return build_rho_factory(factory_spec, 0)(shape)


def _cmd_sample(args) -> int:
    shape = HilbertDim(args.d_a or args.d, args.d_b or 1) if (args.d_a or args.d_b) else HilbertDim.flat(args.d)
    if shape.total != args.d:
        raise ValueError(f"--d={args.d} must equal d_a*d_b={shape.total}")
    gen = stream(args.seed, 0)
    if args.measure == "vmf":
        mu = np.zeros(args.d)
        mu[0] = 1.0
        spec = MeasureSpec("vmf", mu=mu, kappa=args.kappa)
    else:
        rho = _parse_rho(args.rho, shape)
        spec = MeasureSpec(args.measure, rho=rho)

    if args.measure == "delta_mixture":
        columns = ["atom_index"]
        if args.n:
            _, idx = sample_delta_mixture(spec.rho, gen, size=args.n, return_indices=True)
            rows = [{"atom_index": int(i)} for i in idx]
        else:
            rows = []
        text = render_csv(columns, rows)
        _emit(args.out, text)
        return 0

    draws = spec.sample(gen, size=args.n) if args.n else np.zeros((0, args.d), dtype=complex)
    if args.measure == "vmf":
        columns = [f"x_{i}" for i in range(args.d)]
        rows = [{f"x_{i}": float(v) for i, v in enumerate(row)} for row in np.atleast_2d(draws)]
    else:
        columns = [f"re_{i}" for i in range(args.d)] + [f"im_{i}" for i in range(args.d)]
        rows = [
            {**{f"re_{i}": float(v.real) for i, v in enumerate(row)}, **{f"im_{i}": float(v.imag) for i, v in enumerate(row)}}
            for row in np.atleast_2d(draws)
        ]
    if args.format == "csv":
        _emit(args.out, render_csv(columns, rows))
        return 0
    # running-moment summary instead of raw draws
    if args.n == 0:
        raise ValueError("summary format needs at least one sample")
    if args.measure == "vmf":
        mean = np.atleast_2d(draws).mean(axis=0)
        payload = {"n": args.n, "mean": [float(x) for x in mean], "mean_first_coord": float(mean[0])}
    else:
        mat = np.atleast_2d(draws)
        emp = (mat.conj().T @ mat) / mat.shape[0]
        off = emp - np.diag(np.diag(emp))
        payload = {
            "n": args.n,
            "mean_sq_norm": float(np.mean(np.abs(mat) ** 2) * args.d),
            "empirical_dm_diag": [float(x) for x in np.diag(emp).real],
            "max_offdiag_abs": float(np.abs(off).max()) if args.d > 1 else 0.0,
        }
        if args.d <= 16:
            payload["empirical_dm_re"] = [[float(x) for x in row] for row in emp.real]
            payload["empirical_dm_im"] = [[float(x) for x in row] for row in emp.imag]
    _emit(args.out, json.dumps(payload, sort_keys=True, indent=1) + "\n")
    return 0


def _emit(out_path, text: str):
    if out_path:
        atomic_write_text(out_path, text)
        print(f"wrote {out_path}")
    else:
        sys.stdout.write(text)


def _cmd_verify(args) -> int:
    problems = verify_summary(args.summary)
    if problems:
        for p in problems:
            print(f"verify: {p}", file=sys.stderr)
        return 1
    print(f"{args.summary}: config hash and csv checksum confirmed")
    return 0


def _cmd_report(args) -> int:
    payload = load_summary(args.summary)
    print(f"# {payload['experiment']}  seed={payload['seed']}  version={payload['version']}")
    print(f"# config_hash={payload['config_hash']}")
    columns = payload["columns"]
    print("  ".join(str(c) for c in columns))
    for row in payload["rows"]:
        print("  ".join("" if row.get(c) is None else f"{row.get(c):.6g}" if isinstance(row.get(c), float) else str(row.get(c)) for c in columns))
    for check in payload["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"check {check['name']}: {status} ({check['detail']})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaplab", description="GAP-measure numerical laboratory")
    parser.add_argument("--version", action="version", version=f"gaplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    bounds = sub.add_parser("bounds", help="evaluate closed-form bounds")
    bsub = bounds.add_subparsers(dest="bounds_command", required=True)
    table = bsub.add_parser("table", help="bound values over a grid")
    table.add_argument("--tag", required=True, choices=sorted(bnd.BOUND_TAGS))
    table.add_argument("--grid", required=True, help="VALUE or LO:HI:N[:linear] over eps/delta/r")
    for name in ("d-a", "p-max", "purity", "eta", "norm-b", "norm-a", "d", "d-r"):
        table.add_argument(f"--{name}", dest=name.replace("-", "_"), type=float, default=None)
    table.add_argument("--csv", default=None, help="also write the table as CSV")
    table.set_defaults(func=_cmd_bounds_table)
    crossover = bsub.add_parser("crossover", help="window where the polynomial tail is smaller")
    crossover.add_argument("--d-a", dest="d_a", type=float, required=True)
    crossover.add_argument("--eps", type=float, required=True)
    crossover.add_argument("--family", choices=("sqrt", "uniform"), default="sqrt")
    crossover.add_argument("--csv", default=None, help="write the scan table as CSV")
    crossover.set_defaults(func=_cmd_bounds_crossover)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--workers", type=int, default=None, help="override the worker count")
    run.add_argument("--out-dir", default="results")
    run.set_defaults(func=_cmd_run)

    sample = sub.add_parser("sample", help="stream draws from one measure")
    sample.add_argument(
        "--measure",
        required=True,
        choices=("gap", "gaussian", "gaussian_adjusted", "uniform_sphere", "delta_mixture", "vmf"),
    )
    sample.add_argument("--d", type=int, required=True, help="total dimension")
    sample.add_argument("--d-a", dest="d_a", type=int, default=None)
    sample.add_argument("--d-b", dest="d_b", type=int, default=None)
    sample.add_argument("--rho", default="uniform", help="uniform | projection:D_R | near_pure:P | crossover_sqrt")
    sample.add_argument("--kappa", type=float, default=0.0, help="vmf concentration")
    sample.add_argument("--n", type=int, required=True)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--format", choices=("csv", "summary"), default="csv")
    sample.add_argument("--out", default=None, help="output file (stdout when omitted)")
    sample.set_defaults(func=_cmd_sample)

    verify = sub.add_parser("verify", help="check hashes embedded in a summary")
    verify.add_argument("--summary", required=True)
    verify.set_defaults(func=_cmd_verify)

    report = sub.add_parser("report", help="print a stored summary as a table")
    report.add_argument("--summary", required=True)
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
