"""Command-line entry point.

Subcommands::

    tables      build mmse tables and write their (snr, mmse, mi) CSVs
    run         solve one scenario with a chosen algorithm, export the
                allocation CSV, print a one-line summary
    sweep       MI versus total harvested energy for several strategies
    complexity  solver call-count ensemble over seeded scenarios
    trace       per-access inverse-gain / mercury / water levels CSV
    verify      re-check a stored allocation against the KKT conditions

Exit codes: 0 ok, 2 config error, 3 numeric/range error, 4 verification
failure.  Identical flags and seed produce byte-identical output files.
Energy is in Joules, the symbol duration in seconds, gains linear.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation, offline, online, scenario as scn, tables as tbl
from .constellations import by_name
from .errors import (
    ConvergenceError,
    InvalidInputError,
    MercuryflowError,
    QuadratureAccuracyError,
    SchemaError,
    TableBuildError,
    TableRangeError,
)

ALGORITHMS = ("nda", "fsa", "online", "dwf", "pbp-wf", "pbp-hgwf")

_CONFIG_ERRORS = (SchemaError, InvalidInputError)
_NUMERIC_ERRORS = (TableRangeError, TableBuildError, ConvergenceError, QuadratureAccuracyError)


def _fail(code: int, message: str) -> int:
    print(f"error code={code} message={json.dumps(message)}", file=sys.stderr)
    return code


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scenario(args) -> scn.Scenario:
    with open(args.config, encoding="utf-8") as fh:
        doc = json.load(fh)
    if args.seed is not None:
        doc["seed"] = args.seed
    return scn.loads(json.dumps(doc))


def _load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SchemaError("top level must be a JSON object")
    return doc


def cmd_tables(args) -> int:
    out = _out_dir(args)
    names = [s.strip() for s in args.constellations.split(",") if s.strip()]
    if not names:
        raise InvalidInputError("no constellation names given")
    for name in names:
        tab = tbl.table_for(by_name(name), snr_max=args.snr_max, n_points=args.n_points)
        path = out / f"table_{tab.label}.csv"
        tab.to_csv(path)
        print(
            f"table constellation={tab.label} points={tab.snr_grid.size} "
            f"snr_top={tab.snr_top!r} file={path}"
        )
    return 0


def cmd_run(args) -> int:
    s = _load_scenario(args)
    if args.alg == "online" and (args.window is None or args.window < 1):
        raise InvalidInputError("--window must be >= 1 for the online algorithm")
    name = "mwflow" if args.alg == "nda" else args.alg
    tables = offline.stream_tables(s)
    alloc = evaluation.run_strategy(s, name, f_w=args.window, tables=tables)
    mi = evaluation.evaluate_mi(s, alloc, tables=tables)
    if args.alg in ("nda", "fsa"):
        ok = offline.kkt_verify(s, alloc, tables=tables).passed
    else:
        ok, _ = online.causal_ecc_check(s, alloc)
    out = _out_dir(args)
    path = out / f"allocation_{args.alg}.csv"
    offline.allocation_csv(s, alloc, path)
    levels = alloc.pool_water_levels
    levels_txt = (
        "[" + ",".join(f"{float(w)!r}" for w in levels) + "]" if np.all(np.isfinite(levels)) else "n/a"
    )
    print(
        f"run alg={args.alg} mi_bits={mi!r} hg_calls={alloc.stats.hg_calls} "
        f"kkt_pass={'true' if ok else 'false'} water_levels={levels_txt} file={path}"
    )
    return 0


def cmd_sweep(args) -> int:
    doc = _load_json(args.config)
    for key in ("params", "energy_grid"):
        if key not in doc:
            raise SchemaError(f"missing required field {key!r}", field=key)
    params = dict(doc["params"])
    if args.seed is not None:
        params["seed"] = args.seed
    result = evaluation.sweep_energy(
        params,
        doc["energy_grid"],
        strategies=tuple(doc.get("strategies", ("mwflow", "online", "pbp-hgwf", "pbp-wf", "dwf"))),
        f_w=doc.get("f_w"),
        jobs=args.jobs,
    )
    out = _out_dir(args)
    path = out / "sweep.csv"
    evaluation.sweep_csv(result, path)
    print(f"sweep points={result.energies.size} strategies={len(result.curves)} file={path}")
    return 0


def cmd_complexity(args) -> int:
    doc = _load_json(args.config)
    for key in ("j_grid", "runs"):
        if key not in doc:
            raise SchemaError(f"missing required field {key!r}", field=key)
    ens = evaluation.complexity_ensemble(
        doc["j_grid"],
        int(doc["runs"]),
        params=doc.get("params"),
        base_seed=int(doc.get("base_seed", 1000)) if args.seed is None else args.seed,
        jobs=args.jobs,
    )
    out = _out_dir(args)
    path = out / "complexity.csv"
    evaluation.complexity_csv(ens, path)
    print(
        f"complexity j_grid={list(ens.j_values)} fitted_q={ens.fitted_q!r} "
        f"fitted_p={ens.fitted_p!r} bounds_ok={'true' if ens.bounds_ok() else 'false'} "
        f"file={path}"
    )
    return 0


def cmd_trace(args) -> int:
    s = _load_scenario(args)
    tables = offline.stream_tables(s)
    name = "mwflow" if args.alg == "nda" else args.alg
    alloc = evaluation.run_strategy(s, name, f_w=args.window, tables=tables)
    out = _out_dir(args)
    path = out / "trace.csv"
    evaluation.trace_csv(s, alloc, tables=tables, path_or_buf=path)
    print(f"trace alg={args.alg} accesses={s.n} streams={s.k} file={path}")
    return 0


def cmd_verify(args) -> int:
    s = _load_scenario(args)
    with open(args.allocation, encoding="utf-8") as fh:
        alloc = offline.allocation_from_csv(s, fh.read())
    report = offline.kkt_verify(s, alloc, tol=args.tol)
    print(
        f"verify stationarity={'pass' if report.stationarity_ok else 'fail'} "
        f"ecc={'pass' if report.ecc_ok else 'fail'} "
        f"terminal={'pass' if report.terminal_ok else 'fail'} "
        f"monotone={'pass' if report.monotone_levels_ok else 'fail'} "
        f"empty_battery={'pass' if report.empty_battery_changes_ok else 'fail'} "
        f"max_residual={report.stationarity_max_residual!r}"
    )
    for msg in report.messages:
        print(f"  note: {msg}")
    return 0 if report.passed else 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mercuryflow",
        description="Power allocation for an energy-harvesting transmitter "
        "over parallel Gaussian streams with arbitrary input constellations.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON config path")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--format", choices=("csv",), default="csv")

    sp = sub.add_parser("tables", help="build and persist mmse tables")
    sp.add_argument("--constellations", default="bpsk,4pam,16pam,32pam,gaussian")
    sp.add_argument("--snr-max", type=float, default=tbl.DEFAULT_SNR_MAX)
    sp.add_argument("--n-points", type=int, default=tbl.DEFAULT_N_POINTS)
    common(sp, config_required=False)
    sp.set_defaults(func=cmd_tables)

    sp = sub.add_parser("run", help="solve one scenario")
    sp.add_argument("--alg", required=True, choices=ALGORITHMS)
    sp.add_argument("--window", type=int, default=None, help="flowing window (online)")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="MI versus total harvested energy")
    sp.add_argument("--jobs", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("complexity", help="solver call-count ensembles")
    sp.add_argument("--jobs", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_complexity)

    sp = sub.add_parser("trace", help="per-access level trace CSV")
    sp.add_argument("--alg", default="nda", choices=ALGORITHMS)
    sp.add_argument("--window", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("verify", help="KKT-check a stored allocation")
    sp.add_argument("--allocation", required=True, help="allocation CSV path")
    sp.add_argument("--tol", type=float, default=1e-7)
    common(sp)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        return _fail(2, str(exc))
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        return _fail(2, str(exc))
    except _NUMERIC_ERRORS as exc:
        return _fail(3, str(exc))
    except MercuryflowError as exc:
        return _fail(4, str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
