"""Command line front end: run, sweep, verify, fit.

Exit codes: 0 success, 1 failed invariant or unusable data, 2 config or
schema problem. Every config problem is printed on its own line so a bad
file is fixed in one pass. ORRLAB_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import runner
from .config import load
from .errors import ConfigError, NumericsError, OrrlabError


def _print_problems(exc):
    for problem in exc.problems if isinstance(exc, ConfigError) else [str(exc)]:
        print(f"error: {problem}", file=sys.stderr)


def cmd_run(args):
    cfg = load(args.config)
    result = runner.run(cfg)
    summary = result.summary
    print(f"wrote {summary['output_dir']}")
    for key in ("decay_alpha_psi", "decay_alpha_dpsi", "gevrey_C_ratio_max",
                "dissipation_C_fit", "mono_violations", "support_drift_max",
                "boundary_slope_h2"):
        if summary.get(key) is not None:
            print(f"  {key} = {summary[key]}")
    if summary["errors"]:
        for msg in summary["errors"]:
            print(f"  warning: {msg}", file=sys.stderr)
    if cfg.diagnostics.strict and (summary["mono_violations"] or summary["errors"]):
        print("strict mode: diagnostics flagged a violation", file=sys.stderr)
        return 1
    return 0


def _parse_values(text):
    values = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        try:
            values.append(json.loads(piece))
        except json.JSONDecodeError:
            raise ConfigError([f"--values: {piece!r} is not a JSON scalar"])
    return values


def cmd_sweep(args):
    cfg = load(args.config)
    with open(args.config) as fh:
        raw_json = fh.read()
    # fail on an unknown parameter path before any cell runs
    runner.set_in(json.loads(raw_json), args.param, 0)
    values = _parse_values(args.values)

    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    header = ["param", "value"] + runner._SWEEP_COLUMNS
    rows = []
    if values:
        cells = []
        for value in values:
            tag = str(value).replace("/", "_").replace(" ", "")
            cells.append((raw_json, args.param, value, str(root / f"{args.param}={tag}")))
        workers = int(os.environ.get("ORRLAB_THREADS", "0") or 0)
        if workers <= 0:
            workers = min(len(cells), os.cpu_count() or 1)
        workers = max(1, min(workers, len(cells)))
        if workers == 1:
            results = [runner.sweep_cell(*cell, None) for cell in cells]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(runner.sweep_cell, *cell, None) for cell in cells]
                results = [f.result() for f in futures]
        for row in results:
            rows.append([args.param] + [row["value"]]
                        + [row[c] for c in runner._SWEEP_COLUMNS])

    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else
                              (repr(v) if isinstance(v, float) else str(v))
                              for v in row))
    out = root / "sweep.csv"
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def cmd_verify(args):
    from . import checks

    results = checks.run_quick()
    failed = 0
    for res in results:
        mark = "PASS" if res.passed else "FAIL"
        failed += not res.passed
        print(f"{mark} {res.name}: {res.detail}")
    if args.full:
        from . import acceptance

        for name, ok, detail in acceptance.run_all():
            mark = "PASS" if ok else "FAIL"
            failed += not ok
            print(f"{mark} {name}: {detail}")
    print(f"{'all checks passed' if failed == 0 else f'{failed} check(s) failed'}")
    return 0 if failed == 0 else 1


def _parse_window(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError([f"--window: expected a,b, got {text!r}"])
    try:
        a, b = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError([f"--window: expected numbers, got {text!r}"])
    if not 0 < a < b:
        raise ConfigError([f"--window: need 0 < a < b, got {text!r}"])
    return (a, b)


def cmd_fit(args):
    window = _parse_window(args.window) if args.window else None
    summary = runner.refit_directory(args.directory, window=window, s=args.s)
    print(f"updated {Path(args.directory) / 'summary.json'}")
    for key in ("decay_alpha_psi", "decay_alpha_dpsi", "gevrey_C_ratio_max"):
        if summary.get(key) is not None:
            print(f"  {key} = {summary[key]}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="orrlab",
        description="Shear flow mixing experiments: weighted energies, "
                    "wall traces, decay fits.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured simulation")
    p_run.add_argument("config", help="path to a JSON run config")

    p_sweep = sub.add_parser("sweep", help="rerun a config over parameter values")
    p_sweep.add_argument("config", help="path to a JSON run config")
    p_sweep.add_argument("--param", required=True,
                         help="dotted config path, e.g. profile.params.eps")
    p_sweep.add_argument("--values", required=True,
                         help="comma separated JSON scalars, e.g. 1e-4,1e-3")

    p_verify = sub.add_parser("verify", help="run the self-check battery")
    p_verify.add_argument("--full", action="store_true",
                          help="also run the acceptance criteria")

    p_fit = sub.add_parser("fit", help="refit stored series without re-running")
    p_fit.add_argument("directory", help="a finished run directory")
    p_fit.add_argument("--window", default=None, help="decay fit window a,b")
    p_fit.add_argument("--s", type=float, default=None, help="Gevrey exponent s")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify,
                "fit": cmd_fit}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        _print_problems(exc)
        return 2
    except (NumericsError, OrrlabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
