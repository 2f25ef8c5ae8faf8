#!/usr/bin/env python3
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, NoReturn

from .config import (
    config_path,
    get_key,
    load_config,
    load_study_config,
    reset_config,
    resolve_threads,
    set_key,
)
from .errors import ReserveError
from .examples import InternLocation, Setting, example_table_csv, run_example
from .harness import PRESETS, Method, run_study
from .models import ModelKind, fit, params_to_dict
from .report import ReportLoader, emit_report, format_table
from .triangle import Flavor, Target, Triangle, parse_csv, validate

logger = logging.getLogger("reservebench")


class UsageParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit status 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"error[usage]: {message}\n")


def _add_triangle_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--flavor", choices=[f.value for f in Flavor], default="incremental",
                   help="Whether the CSV holds incremental or cumulative amounts")
    p.add_argument("--skip-header", action="store_true", help="Ignore the first CSV row")


def build_parser() -> argparse.ArgumentParser:
    p = UsageParser(prog="reservebench",
                    description="Stochastic claims-reserving methods and their Monte Carlo scoring")
    p.add_argument("--verbose", "-v", action="store_true", help="Debug logging and tracebacks")
    sub = p.add_subparsers(dest="cmd", required=True)

    # study
    study = sub.add_parser("study", help="Run or inspect a Monte Carlo study")
    study_sub = study.add_subparsers(dest="study_cmd", required=True)

    run = study_sub.add_parser("run", help="Run a study and write the report files")
    run.add_argument("--config", type=Path, help="StudyConfig JSON file")
    run.add_argument("--preset", choices=sorted(PRESETS), help="N / M preset")
    run.add_argument("--seed", type=int, help="Master seed")
    run.add_argument("--out", type=Path, default=Path("results"), help="Output directory")
    run.add_argument("--scenarios", "-n", type=int, help="Override N")
    run.add_argument("--draws", "-m", type=int, help="Override M")
    run.add_argument("--methods", help="Comma-separated subset of: "
                     + ",".join(m.value for m in Method))
    run.add_argument("--beta", type=float, help="Energy score exponent")
    run.add_argument("--target", choices=[t.value for t in Target])
    run.add_argument("--threads", type=int, help="Worker processes (default: $RESERVE_BENCH_THREADS"
                     " or the user default)")
    run.add_argument("--residual-adjustment", choices=["paper", "dof"])
    run.add_argument("--paper-literal-variance", action="store_true",
                     help="Unifnorm variance with un-squared diagonal weights")
    run.add_argument("--paper-literal", action="store_true",
                     help="All verbatim variants (residual numerator n, un-squared variance)")
    run.add_argument("--no-progress", dest="progress", action="store_false",
                     help="Disable the progress bar")
    run.add_argument("--timing", action="store_true", help="Record wall time in summary.json")

    rep = study_sub.add_parser("report", help="Print the per-method table of a finished study")
    rep.add_argument("--dir", type=Path, default=Path("results"), help="Report directory")
    rep.add_argument("--records", metavar="METHOD", help="Also list one method's scenario scores")

    # examples
    ex = sub.add_parser("examples", help="Four-actuary toy examples")
    ex_sub = ex.add_subparsers(dest="ex_cmd", required=True)
    exr = ex_sub.add_parser("run", help="Simulate one setting and print its table as CSV")
    exr.add_argument("--setting", choices=[s.value for s in Setting], required=True)
    exr.add_argument("--sims", type=int, default=10_000)
    exr.add_argument("--draws", type=int, default=1000)
    exr.add_argument("--seed", type=int, default=0)
    exr.add_argument("--intern-location", choices=[v.value for v in InternLocation],
                     default=InternLocation.MIRRORED.value,
                     help="ex1 intern log-location: -mu (mirrored) or -|mu| (absolute)")
    exr.add_argument("--out", type=Path, help="Write the CSV here instead of stdout")

    # triangle
    tri = sub.add_parser("triangle", help="Triangle utilities")
    tri_sub = tri.add_subparsers(dest="tri_cmd", required=True)
    tval = tri_sub.add_parser("validate", help="Parse and check a triangle CSV")
    tval.add_argument("triangle", type=Path)
    tval.add_argument("--non-negative", action="store_true",
                      help="Also require non-negative increments")
    _add_triangle_input(tval)
    tfit = tri_sub.add_parser("fit", help="Fit a model and print its parameters as JSON")
    tfit.add_argument("--model", choices=[k.value for k in ModelKind], required=True)
    tfit.add_argument("--triangle", type=Path, required=True)
    _add_triangle_input(tfit)

    # config
    cfg = sub.add_parser("config", help="Get/set defaults")
    cfg_sub = cfg.add_subparsers(dest="cfg_cmd", required=True)

    cget = cfg_sub.add_parser("get", help="Get a key or entire config")
    cget.add_argument("key", nargs="?", help="Config key")

    cset = cfg_sub.add_parser("set", help="Set a key to value")
    cset.add_argument("key")
    cset.add_argument("value")

    cfg_sub.add_parser("reset", help="Reset to factory defaults")
    cfg_sub.add_parser("path", help="Show config file path")

    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.cmd == "config":
            return handle_config(args)
        if args.cmd == "triangle":
            return handle_triangle(args)
        if args.cmd == "examples":
            return handle_examples(args)
        return handle_study(args)
    except ReserveError as e:
        if args.verbose:
            logger.exception("%s failed", args.cmd)
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error[io]: {e.filename or ''}: {e.strerror}", file=sys.stderr)
        return 2


def _read_triangle(args: argparse.Namespace, path: Path) -> Triangle:
    return parse_csv(path.read_bytes(), Flavor(args.flavor), skip_header=args.skip_header)


def handle_triangle(args: argparse.Namespace) -> int:
    if args.tri_cmd == "validate":
        t = _read_triangle(args, args.triangle)
        validate(t, non_negative=args.non_negative)
        print(f"ok: n={t.n} mask={t.mask.value} flavor={t.flavor.value}")
        return 0
    t = _read_triangle(args, args.triangle)
    params = fit(ModelKind(args.model), t)
    print(json.dumps(params_to_dict(params), indent=2))
    return 0


def handle_examples(args: argparse.Namespace) -> int:
    setting = Setting(args.setting)
    results = run_example(setting, args.sims, args.draws, args.seed,
                          intern=InternLocation(args.intern_location))
    table = example_table_csv(setting, results)
    if args.out:
        args.out.write_text(table, encoding="utf-8")
    else:
        sys.stdout.write(table)
    return 0


def _study_overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {
        "master_seed": args.seed,
        "n_scenarios": args.scenarios,
        "m_draws": args.draws,
        "energy_beta": args.beta,
        "target": args.target,
        "residual_adjustment": args.residual_adjustment,
    }
    if args.methods:
        overrides["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.paper_literal or args.paper_literal_variance:
        overrides["unifnorm_variance"] = "paper"
    if args.paper_literal:
        overrides["residual_adjustment"] = "paper"
    return overrides


def handle_study(args: argparse.Namespace) -> int:
    if args.study_cmd == "report":
        with ReportLoader(args.dir) as loader:
            intervals = loader.intervals()
            methods = list(loader.methods())
            records = list(loader.records(args.records)) if args.records else []
        print(format_table(methods, intervals))
        for rec in records:
            print(f"{rec.scenario:>6} crps={rec.crps} energy={rec.energy} msep={rec.msep}"
                  + (f" failure={rec.failure}" if rec.failure else ""))
        return 0

    user = load_config()
    cfg = load_study_config(args.config, user=user, preset=args.preset,
                            overrides=_study_overrides(args))
    workers = resolve_threads(args.threads, user)
    progress = args.progress and sys.stderr.isatty()
    report = run_study(cfg, workers=workers, progress=progress, timing=args.timing)
    for path in emit_report(report, args.out):
        print(path)
    return 0


def handle_config(args: argparse.Namespace) -> int:
    try:
        if args.cfg_cmd == "get":
            if args.key:
                print(get_key(args.key))
            else:
                for k, v in load_config().items():
                    print(f"{k} = {v}")
        elif args.cfg_cmd == "set":
            set_key(args.key, args.value)
            print(f"{args.key} set to {get_key(args.key)}")
        elif args.cfg_cmd == "reset":
            reset_config()
            print("Config reset to defaults.")
        elif args.cfg_cmd == "path":
            print(config_path())
    except KeyError as e:
        print(f"error[config]: {e.args[0]}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
