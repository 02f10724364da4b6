"""Command line: ``dnaclab run | compare | sweep``.

Exit codes: 0 success, 2 crash fault, 3 configuration error. Set
``DNACLAB_LOG_LEVEL`` (DEBUG, INFO, WARNING, ...) for log verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ..nn_core import ConfigurationError
from .config import controller_name, dumps, load_config
from .metrics import MetricsReport, compare, mean_report, plot_data
from .runner import run_scenario

EXIT_OK, EXIT_CRASH, EXIT_CONFIG = 0, 2, 3
log = logging.getLogger("dnaclab")


def parse_seeds(text: str) -> list:
    """``"0..9"`` (inclusive), ``"3"`` or ``"1,4,7"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad seed list {text!r}") from exc


def _write_run(out: Path, trace, report):
    out.mkdir(parents=True, exist_ok=True)
    trace.to_csv(out / "trace.csv")
    (out / "report.json").write_text(report.to_json())
    if not report.failed:
        (out / "plot.csv").write_text(plot_data(trace, report))


def _summary(rep: MetricsReport) -> str:
    if rep.failed:
        return f"{rep.controller:<10} seed {rep.seed}: CRASH at t={rep.failure_time:.3f} s"
    return (f"{rep.controller:<10} seed {rep.seed}: attitude {rep.attitude_l2_deg:.3f} deg, "
            f"position {rep.position_l2_cm:.2f} cm, velocity {rep.velocity_l2_cm_s:.2f} cm/s")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.controller:
        over["controller"] = controller_name(args.controller)
    if args.duration is not None:
        over["duration"] = args.duration
    if over:
        cfg = cfg.with_overrides(**over)
    trace, report = run_scenario(cfg)
    if args.out:
        out = Path(args.out)
        _write_run(out, trace, report)
        (out / "scenario.json").write_text(dumps(cfg))
    print(_summary(report))
    return EXIT_CRASH if report.failed else EXIT_OK


def cmd_compare(args) -> int:
    reports = []
    for path in args.reports:
        try:
            reports.append(MetricsReport.from_json(Path(path).read_text()))
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigurationError(f"cannot read report {path}: {exc}") from exc
    cmp = compare(reports, args.labels.split(",") if args.labels else None)
    print(cmp.table())
    if args.csv:
        Path(args.csv).write_text(cmp.to_csv())
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = load_config(args.config)
    controllers = [controller_name(c) for c in args.controllers.split(",")]
    seeds = parse_seeds(args.seeds)
    jobs = [base.with_overrides(controller=c, seed=s) for c in controllers for s in seeds]

    def work(cfg):
        trace, rep = run_scenario(cfg)
        if args.out:
            _write_run(Path(args.out) / f"{cfg.controller.replace('+', '_')}_seed{cfg.seed}", trace, rep)
        return rep

    # numpy releases the GIL only in places, so threads mostly help with I/O
    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        reports = list(pool.map(work, jobs))
    for rep in reports:
        print(_summary(rep))
    means = [mean_report([r for r in reports if r.controller == c], c) for c in controllers]
    if len(means) >= 2:
        cmp = compare(means, controllers)
        print()
        print(cmp.table())
        if args.out:
            Path(args.out, "comparison.csv").write_text(cmp.to_csv())
            Path(args.out, "comparison.txt").write_text(cmp.table() + "\n")
    if args.out:
        Path(args.out, "reports.json").write_text(json.dumps([r.to_dict() for r in reports], default=float))
    return EXIT_CRASH if any(r.failed for r in reports) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dnaclab", description="DNAC quadrotor attitude-control lab")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--controller")
    run.add_argument("--duration", type=float)
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    cmp = sub.add_parser("compare", help="tabulate saved reports")
    cmp.add_argument("--reports", nargs="+", required=True)
    cmp.add_argument("--labels")
    cmp.add_argument("--csv")
    cmp.set_defaults(func=cmd_compare)

    sw = sub.add_parser("sweep", help="run a scenario over controllers and seeds")
    sw.add_argument("--config", required=True)
    sw.add_argument("--controllers", default="pid,mrac,dmrac,dnac")
    sw.add_argument("--seeds", default="0")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    level = os.environ.get("DNACLAB_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
