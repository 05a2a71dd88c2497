"""``mcsim`` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..control.policies import POLICIES
from ..control.qlearning import CheckpointError
from .metrics import MetricsReport, export_metrics, to_csv
from .scenario import ScenarioError, load_scenario, parse_duration
from .simulation import run_simulation
from .training import train_rl

log = logging.getLogger("mcsim")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
DEFAULT_EPISODES = 50


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed {v} outside [0, 2^64)")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mcsim", description="Multi-connectivity RAN simulator")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--seed", type=_u64, required=True)
    r.add_argument("--policy", choices=sorted(POLICIES))
    r.add_argument("--until", help="stop time, e.g. 5s (default: the scenario's sim_duration)")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--format", choices=["csv", "json", "both"], default="both")
    r.add_argument("--events-log", action="store_true", help="write events.log, one line per event")
    r.add_argument("--checkpoint", help="Q-table to evaluate greedily with the rl policy")

    s = sub.add_parser("sweep", help="run seeds master_seed .. master_seed+n-1")
    s.add_argument("--scenario", required=True)
    s.add_argument("--seeds", type=_positive_int, required=True)
    s.add_argument("--parallel", type=_positive_int, default=1)
    s.add_argument("--policy", choices=sorted(POLICIES))
    s.add_argument("--out", required=True)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("--scenario", required=True)

    t = sub.add_parser("train-rl", help="episodic Q-learning, saves a checkpoint")
    t.add_argument("--scenario", required=True)
    t.add_argument("--episodes", type=_positive_int, default=DEFAULT_EPISODES,
                   help=f"training episodes (default {DEFAULT_EPISODES})")
    t.add_argument("--checkpoint", required=True)
    t.add_argument("--seed", type=_u64)
    return p


def _outdir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(e.errno, f"cannot create output directory {out}: {e.strerror}") from None
    return out


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    until = parse_duration(args.until, "--until") if args.until else None
    if until is not None and until <= 0:
        raise ScenarioError("--until", "must be positive")
    out = _outdir(args.out)
    trace_file = open(out / "events.log", "w") if args.events_log else None
    try:
        trace = (lambda line: trace_file.write(line + "\n")) if trace_file else None
        report = run_simulation(scenario, args.seed, args.policy, until, trace, args.checkpoint)
    finally:
        if trace_file:
            trace_file.close()
    if args.format in ("json", "both"):
        export_metrics(report, "json", out / "metrics.json")
    if args.format in ("csv", "both"):
        export_metrics(report, "csv", out / "metrics.csv")
    for f in report.flows:
        print(f"{f.flow_id}: goodput={f.goodput_bps / 1e6:.3f} Mbit/s loss={f.loss_fraction:.6f} "
              f"p95={(f.latency_p95_ns or 0) / 1e6:.3f} ms switches={f.switch_count}")
    return EXIT_OK


def _sweep_one(job) -> dict:
    path, seed, policy = job
    return run_simulation(load_scenario(path), seed, policy).to_dict()


def run_sweep(path, n: int, parallel: int = 1, policy=None) -> list[MetricsReport]:
    base = load_scenario(path).master_seed
    jobs = [(str(path), base + i, policy) for i in range(n)]
    if parallel <= 1:
        dicts = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            dicts = list(ex.map(_sweep_one, jobs))  # map keeps seed order
    return [MetricsReport.from_dict(d) for d in dicts]


def _cmd_sweep(args) -> int:
    reports = run_sweep(args.scenario, args.seeds, args.parallel, args.policy)
    out = _outdir(args.out)
    doc = json.dumps({"runs": [r.to_dict() for r in reports]}, indent=2, sort_keys=True) + "\n"
    (out / "metrics.json").write_text(doc)
    (out / "metrics.csv").write_text(to_csv(reports))
    print(f"{len(reports)} runs written to {out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    print(f"{args.scenario}: ok ({len(sc.legs)} legs, {len(sc.flows)} flows, policy {sc.policy}, hash {sc.hash()})")
    return EXIT_OK


def _cmd_train(args) -> int:
    scenario = load_scenario(args.scenario)
    q, policy = train_rl(scenario, args.episodes, args.checkpoint, args.seed)
    print(f"trained {policy.total_epochs} epochs over {args.episodes} episodes, "
          f"{len(q.values)} states; checkpoint {args.checkpoint}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "validate": _cmd_validate, "train-rl": _cmd_train}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"mcsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, CheckpointError) as e:
        print(f"mcsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"mcsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"mcsim: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001
        log.exception("run failed")
        print(f"mcsim: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
