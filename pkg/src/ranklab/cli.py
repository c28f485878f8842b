"""Command-line entry point: sweeps, presets, verification checks and oracle runs.

Every command writes ``summary.csv`` (``name,status,metric,value``) plus one
detail CSV into the output directory.  Output depends only on the arguments
and the seed, never on timing.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from pathlib import Path

from . import checks, harness
from .exceptions import ConfigError, RanklabError
from .oracle import compare_with_posterior_mean

SEED_ENV = "RANKLAB_SEED"
SUMMARY_HEADER = ("name", "status", "metric", "value")
DEFAULT_OUT = "ranklab-out"


class _Usage(Exception):
    """Bad arguments or configuration; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(f"{self.prog}: error: {message}")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if isinstance(v, int) or (hasattr(v, "dtype") and v.dtype.kind in "iu"):
        return str(int(v))
    return format(float(v), ".17g")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _seed(args, fallback: int | None):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError as exc:
            raise _Usage(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return fallback


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _sweep_summary(report, name: str):
    failed = sum(len(v) for v in report.failures.values())
    status = "pass" if failed == 0 else "fail"
    rows = [(name, status, "seed", report.seed), (name, status, "failed_replicates", failed)]
    for r in sorted(report.rows, key=lambda r: (r.p, r.ranker)):
        rows.append((name, status, f"loss_mean[p={r.p},ranker={r.ranker}]", r.loss_mean))
    for p in sorted(report.conditions):
        for key in sorted(report.conditions[p]):
            rows.append((name, status, f"{key}[p={p}]", report.conditions[p][key]))
    return rows, failed


def _run_sweep(cfg, out: Path, jobs: int) -> int:
    report = harness.run_sweep(cfg, n_jobs=jobs)
    harness.emit_csv(report, out / f"sweep_{cfg.name}.csv")
    rows, failed = _sweep_summary(report, cfg.name)
    _write_csv(out / "summary.csv", SUMMARY_HEADER, rows)
    if failed:
        for p in sorted(report.failures):
            for rep, err in report.failures[p]:
                print(f"{cfg.name}: p={p} replicate {rep} failed: {err}", file=sys.stderr)
        return 1
    return 0


def cmd_simulate(args) -> int:
    if not args.config:
        raise _Usage("simulate needs --config PATH")
    cfg = harness.load_config(args.config)
    seed = _seed(args, None)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return _run_sweep(cfg, _out_dir(args), args.jobs)


def cmd_preset(args) -> int:
    if args.preset not in harness.PRESETS:
        raise _Usage(f"unknown preset {args.preset!r}; choose from {', '.join(harness.PRESETS)}")
    cfg = harness.PRESETS[args.preset](seed=_seed(args, None))
    return _run_sweep(cfg, _out_dir(args), args.jobs)


def cmd_check(args) -> int:
    if args.preset not in checks.CHECKS:
        raise _Usage(f"unknown check {args.preset!r}; choose from {', '.join(checks.CHECKS)}")
    rep = checks.run_check(args.preset, seed=_seed(args, 0))
    out = _out_dir(args)
    _write_csv(out / f"check_{rep.name}.csv", rep.columns, rep.rows)
    status = "pass" if rep.passed else "fail"
    rows = [(rep.name, status, k, rep.metrics[k]) for k in sorted(rep.metrics)]
    _write_csv(out / "summary.csv", SUMMARY_HEADER, rows)
    if not rep.passed:
        print(f"check {rep.name} failed ({len(rep.failures)} reported cases)", file=sys.stderr)
        for line in rep.failures:
            print(f"  {line}", file=sys.stderr)
        return 1
    return 0


def cmd_oracle_compare(args) -> int:
    if args.p is None or not 2 <= args.p <= 8:
        raise _Usage("oracle-compare needs --p N with 2 <= N <= 8")
    if args.instances < 1:
        raise _Usage("--instances must be >= 1")
    res = compare_with_posterior_mean(args.p, args.instances, _seed(args, 0))
    out = _out_dir(args)
    _write_csv(out / f"oracle_p{args.p}.csv", ("instance", "agree", "loss_gap", "combined_se"), res.rows)
    passed = res.agreement_rate >= 0.99 and res.gaps_within
    status = "pass" if passed else "fail"
    name = f"oracle_p{args.p}"
    rows = [(name, status, "agreement_rate", res.agreement_rate),
            (name, status, "instances", res.instances),
            (name, status, "max_disagreement_gap_in_se", res.max_gap_in_se)]
    _write_csv(out / "summary.csv", SUMMARY_HEADER, rows)
    if not passed:
        print(f"{name}: agreement {res.agreement_rate:.3f}, worst disagreement "
              f"{res.max_gap_in_se:.2f} SE", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ranklab",
        description="Empirical-Bayes ranking experiments and verification checks.",
        epilog=(f"presets: {', '.join(harness.PRESETS)}; "
                f"checks: {', '.join(checks.CHECKS)}. "
                f"{SEED_ENV} supplies the seed when --seed is absent."),
    )
    sub = parser.add_subparsers(dest="command", metavar="<subcommand>", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", default=DEFAULT_OUT, help="output directory (default: %(default)s)")
        sp.add_argument("--seed", type=int, default=None, help="random seed")

    sp = sub.add_parser("simulate", help="run a sweep described by a TOML config")
    sp.add_argument("--config", help="TOML experiment config")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("preset", help=f"run a packaged sweep ({', '.join(harness.PRESETS)})")
    sp.add_argument("--preset", required=True, metavar="NAME", help=", ".join(harness.PRESETS))
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    common(sp)
    sp.set_defaults(func=cmd_preset)

    sp = sub.add_parser("check", help=f"run a verification suite ({', '.join(checks.CHECKS)})")
    sp.add_argument("--preset", required=True, metavar="NAME", help=", ".join(checks.CHECKS))
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("oracle-compare",
                        help="compare posterior-mean ranking with exhaustive search")
    sp.add_argument("--p", type=int, required=True, help="units per instance (2..8)")
    sp.add_argument("--instances", type=int, default=100, help="number of instances")
    common(sp)
    sp.set_defaults(func=cmd_oracle_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _Usage(parser.format_usage().strip() + "\nranklab: error: a subcommand is required")
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (_Usage, ConfigError) as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except RanklabError as exc:
        print(f"ranklab: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ranklab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
