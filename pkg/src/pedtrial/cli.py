"""Command-line interface.

Subcommands:

  simulate   run seeded synthetic sessions headlessly and store them
  pws        estimate preferred walking speed from measurement sessions
  analyze    derive outcomes and the statistics report from sessions
  serve      run the live session service
  validate   check a scenario file and report violations with line numbers

Exit codes: 0 ok, 1 usage error, 2 data/validation error, 3 internal error.
Defaults honor environment overrides: PEDTRIAL_DT, PEDTRIAL_BIND,
PEDTRIAL_STATE_DIVISOR.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

from . import __version__
from .agents import PROFILES
from .analysis.outcomes import derive_outcomes, pws_estimate
from .analysis.report import analyze, render_report
from .engine import EngineConfig
from .errors import PedTrialError
from .scenario_file import validate_scenario_text
from .session import run_session
from .store import (
    OUTCOMES_NAME,
    read_session,
    session_dir_name,
    write_session,
    write_table,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

OUTCOME_COLUMNS = [
    "subject_id", "trial_id", "group", "kind", "beta_deg", "beta_std", "side",
    "detected", "rt", "response_class", "collided", "mean_yaw_before",
    "mean_yaw_after", "mean_pitch_before", "mean_pitch_after", "trial_mean_speed",
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def engine_config_from_env() -> EngineConfig:
    kwargs = {}
    dt = os.environ.get("PEDTRIAL_DT")
    if dt:
        kwargs["dt"] = float(dt)
    divisor = os.environ.get("PEDTRIAL_STATE_DIVISOR")
    if divisor:
        kwargs["state_divisor"] = int(divisor)
    return EngineConfig(**kwargs)


def build_parser() -> _Parser:
    parser = _Parser(prog="pedtrial", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pedtrial {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run synthetic sessions headlessly")
    sim.add_argument("--profile", choices=sorted(PROFILES), default="nv")
    sim.add_argument("--sessions", type=int, default=1, metavar="N")
    sim.add_argument("--seed", type=int, default=0, metavar="S")
    sim.add_argument("--scenario", choices=["main", "pws"], default="main")
    sim.add_argument("--out", default="sessions", metavar="DIR")
    sim.add_argument("--dt", type=float, default=None)
    sim.add_argument("--config", default=None, metavar="SCENARIO_FILE",
                     help="take subject/policy/engine/trials from a scenario file")

    pws = sub.add_parser("pws", help="estimate preferred walking speed from logs")
    pws.add_argument("sessions", nargs="+", metavar="SESSION_DIR")

    ana = sub.add_parser("analyze", help="derive outcomes and statistics")
    ana.add_argument("sessions", nargs="+", metavar="SESSION_DIR")
    ana.add_argument("--out", default="analysis", metavar="DIR")

    srv = sub.add_parser("serve", help="run the live session service")
    srv.add_argument(
        "--bind",
        default=os.environ.get("PEDTRIAL_BIND", "127.0.0.1:8765"),
        metavar="HOST:PORT",
    )
    srv.add_argument("--store", default=None, metavar="DIR",
                     help="write completed live sessions here")
    srv.add_argument("--dt", type=float, default=None)
    srv.add_argument("--config", default=None, metavar="SCENARIO_FILE",
                     help="take engine defaults from a scenario file")

    val = sub.add_parser("validate", help="validate a scenario file")
    val.add_argument("file", metavar="SCENARIO_FILE")
    return parser


def cmd_simulate(args) -> int:
    config = engine_config_from_env()
    subject = None
    policy_params = None
    profile = args.profile
    scenario_kind = args.scenario
    base_seed = args.seed
    explicit_trials = None
    if args.config:
        from .scenario_file import load_scenario

        scenario = load_scenario(args.config)
        if scenario.profile == "live":
            print("scenario file declares a live profile; use `pedtrial serve`",
                  file=sys.stderr)
            return EXIT_DATA
        profile = scenario.profile
        subject = scenario.subject
        policy_params = scenario.policy
        scenario_kind = scenario.scenario_kind
        base_seed = scenario.seed
        explicit_trials = scenario.trials
        config = scenario.engine
    if args.dt:
        config = EngineConfig(**{**config.__dict__, "dt": args.dt})
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.sessions):
        seed = base_seed + i
        log = run_session(
            profile, seed, scenario_kind=scenario_kind, subject=subject,
            config=config, policy_params=policy_params, trials=explicit_trials,
        )
        directory = os.path.join(args.out, session_dir_name(profile, base_seed, i))
        write_session(log, directory)
        print(f"wrote {directory} ({len(log.trials)} trials, seed {seed})")
    return EXIT_OK


def cmd_pws(args) -> int:
    logs = [read_session(path) for path in args.sessions]
    estimate = pws_estimate(logs)
    print(f"PWS estimate: {estimate:.4f} m/s over {len(logs)} session(s)")
    return EXIT_OK


def _fmt_cell(value):
    if isinstance(value, bool):
        return value
    return value


def cmd_analyze(args) -> int:
    outcomes = []
    for path in args.sessions:
        log = read_session(path)
        sid = os.path.basename(os.path.normpath(path))
        outs = derive_outcomes(log, subject_id=sid)
        outcomes.extend(outs)
        rows = [
            [
                o.subject_id, o.trial_id, o.group, o.kind, o.beta_deg, o.beta_std,
                o.side, o.detected, o.rt, o.response_class, o.collided,
                o.mean_yaw_before, o.mean_yaw_after, o.mean_pitch_before,
                o.mean_pitch_after, o.trial_mean_speed,
            ]
            for o in outs
        ]
        write_table(
            os.path.join(path, OUTCOMES_NAME), OUTCOME_COLUMNS, rows,
            log.schema_version, log.seed,
        )
    os.makedirs(args.out, exist_ok=True)
    report = analyze(outcomes)

    rate_rows = [
        [r["group"], r["kind"], r["beta_std"], r["n"], r["detected"],
         r["detection_rate"], r["collisions"], r["collision_rate"]]
        for r in report["rates_by_condition"]
    ]
    write_table(
        os.path.join(args.out, "rates.csv"),
        ["group", "kind", "beta_std", "n", "detected", "detection_rate",
         "collisions", "collision_rate"],
        rate_rows, "pedtrial.analysis.v1", 0,
    )
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    text = render_report(report)
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    print(f"analysis written to {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve_forever

    host, _, port_s = args.bind.rpartition(":")
    if not host or not port_s.isdigit():
        print(f"invalid --bind {args.bind!r}, expected HOST:PORT", file=sys.stderr)
        return EXIT_USAGE
    config = engine_config_from_env()
    if args.config:
        from .scenario_file import load_scenario

        config = load_scenario(args.config).engine
    if args.dt:
        config = EngineConfig(**{**config.__dict__, "dt": args.dt})
    service_config = ServiceConfig(engine=config, store_dir=args.store)
    try:
        asyncio.run(serve_forever(host, int(port_s), service_config))
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        with open(args.file, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"cannot read {args.file}: {exc}", file=sys.stderr)
        return EXIT_DATA
    scenario, violations = validate_scenario_text(text)
    if violations:
        for v in violations:
            print(f"{args.file}:{v}", file=sys.stderr)
        print(f"{len(violations)} violation(s) found", file=sys.stderr)
        return EXIT_DATA
    trials = "generated (32-trial schedule)" if scenario.trials is None \
        else f"{len(scenario.trials)} explicit"
    print(f"{args.file}: OK (profile {scenario.profile}, seed {scenario.seed}, "
          f"trials: {trials})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "pws":
            return cmd_pws(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "validate":
            return cmd_validate(args)
        parser.error(f"unknown command {args.command!r}")
    except PedTrialError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
