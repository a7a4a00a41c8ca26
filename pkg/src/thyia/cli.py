"""Command-line entry point: batch experiments, reports, and the daemon.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Every subcommand
supports --format json for machine-readable output, and experiment
subcommands take explicit seeds so runs are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .game import ScoreBounds, builtin_games
from .gdf import GdfError, parse_gdf
from .learner import GuidanceModel, load_model
from .ntbea import TuningConfig, TuningProblem, onemax_problem, run_ntbea
from .params import default_params, derive_seed, parameter_set_from_text, shared_default_space
from .planner import RheaPlanner, play_episode
from .runtime import SNAPSHOT_ENV, Runtime, RuntimeConfig, SnapshotError, load_blocklist


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


def _load_params(spec_text: str | None):
    if spec_text in (None, "default"):
        return default_params()
    if not os.path.isfile(spec_text):
        raise CliError(f"params file not found: {spec_text}", 2)
    with open(spec_text, encoding="utf-8") as fh:
        params, ignored = parameter_set_from_text(shared_default_space(), fh.read())
    if ignored:
        print(f"note: ignored unknown parameters: {', '.join(ignored)}", file=sys.stderr)
    return params


def _game_spec(name: str):
    games = builtin_games()
    if name in games:
        return games[name]
    if os.path.isfile(name):
        with open(name, encoding="utf-8") as fh:
            return parse_gdf(fh.read())
    raise CliError(f"unknown game and no such file: {name}", 2)


def _emit(payload, fmt: str, text_lines) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _snapshot_dir(value: str | None) -> str:
    path = value or os.environ.get(SNAPSHOT_ENV)
    if not path:
        raise CliError(f"no snapshot directory given (flag or ${SNAPSHOT_ENV})", 2)
    return path


# ---------------------------------------------------------------------------
# subcommands

def cmd_play(args) -> int:
    spec = _game_spec(args.game)
    params = _load_params(args.params)
    model = None
    if args.model:
        if not os.path.isfile(args.model):
            raise CliError(f"model file not found: {args.model}", 2)
        weights = load_model(args.model, expect_game=spec.name)
        from .learner import FeatureExtractor

        model = GuidanceModel(weights, FeatureExtractor(spec), ScoreBounds())
    bounds = ScoreBounds()
    results = []
    for episode in range(args.episodes):
        planner = RheaPlanner(params, seed=derive_seed(args.seed, "planner", episode),
                              model=model, bounds=bounds)
        result = play_episode(spec, planner, derive_seed(args.seed, "episode", episode))
        bounds.update(result.score)
        results.append({"episode": episode, "game": spec.name, "score": result.score,
                        "outcome": result.outcome, "ticks": result.ticks})
    _emit(results, args.format,
          [f"episode {r['episode']}: {r['outcome']} score={r['score']} ticks={r['ticks']}"
           for r in results])
    return 0


def cmd_run(args) -> int:
    if args.resume:
        runtime = Runtime.restore(_snapshot_dir(args.resume))
    else:
        config = RuntimeConfig(
            master_seed=args.seed,
            params=_load_params(args.params),
            games=args.games.split(",") if args.games else None,
            learning=not args.no_learning,
            tune_interval=args.tune_every,
        )
        runtime = Runtime(config)
    records = []
    for _ in range(args.episodes):
        record = runtime.step_cycle()
        if record is not None:
            records.append({"episode": record.episode, "game": record.game,
                            "score": record.score, "outcome": record.outcome,
                            "ticks": record.ticks})
    if args.snapshot_out:
        runtime.snapshot(args.snapshot_out)
    _emit(records, args.format,
          [f"episode {r['episode']} [{r['game']}]: {r['outcome']} score={r['score']}"
           for r in records] + ([f"snapshot written to {args.snapshot_out}"]
                                if args.snapshot_out else []))
    return 0


def cmd_tune(args) -> int:
    if args.synthetic:
        if args.synthetic != "onemax5":
            raise CliError(f"unknown synthetic problem: {args.synthetic}", 2)
        problem = onemax_problem(5, args.sigma, seed=derive_seed(args.seed, "noise"))
    elif args.game:
        spec = _game_spec(args.game)
        bounds = ScoreBounds()
        counter = [0]

        def evaluate(params) -> float:
            counter[0] += 1
            values = []
            for e in range(args.episodes_per_eval):
                seed = derive_seed(args.seed, "tune", counter[0], e)
                planner = RheaPlanner(params, seed=seed, bounds=bounds)
                result = play_episode(spec, planner, seed)
                bounds.update(result.score)
                values.append(result.final_value)
            return sum(values) / len(values)

        problem = TuningProblem(shared_default_space(), evaluate)
    else:
        raise CliError("tune needs --game or --synthetic", 2)

    result = run_ntbea(problem, TuningConfig(budget=args.budget, seed=args.seed,
                                             log_path=args.log))
    payload = {
        "recommended": {k: v for k, v in result.recommended.items()},
        "estimated_mean": result.recommended_mean,
        "evaluations": len(result.evaluations),
    }
    lines = ["recommended parameters:"]
    lines += [f"  {k} = {v}" for k, v in result.recommended.items()]
    lines.append(f"estimated mean reward: {result.recommended_mean:.4f}")
    _emit(payload, args.format, lines)
    return 0


def cmd_train(args) -> int:
    spec = _game_spec(args.game)
    config = RuntimeConfig(master_seed=args.seed, params=_load_params(args.params),
                           games=[spec.name] if spec.name in builtin_games() else None,
                           learning=True)
    runtime = Runtime(config)
    if spec.name not in runtime.slots:
        raise CliError(f"train currently targets built-in games, got {spec.name}", 2)
    rows = []
    for _ in range(args.episodes):
        record = runtime.step_cycle()
        if record is None:
            continue
        training = [e for e in runtime.events if e.get("type") == "training"]
        last_loss = training[-1]["losses"][-1] if training and training[-1]["losses"] else None
        rows.append({"episode": record.episode, "score": record.score,
                     "outcome": record.outcome, "loss": last_loss})
    if args.out:
        from .learner import save_model

        slot = runtime.slots[spec.name]
        if slot.model is None:
            raise CliError("no model was trained (buffer never filled?)", 1)
        save_model(slot.model, args.out)
    _emit(rows, args.format,
          [f"episode {r['episode']}: {r['outcome']} score={r['score']}"
           + (f" loss={r['loss']:.4f}" if r["loss"] is not None else "")
           for r in rows] + ([f"model written to {args.out}"] if args.out else []))
    return 0


def cmd_stats(args) -> int:
    runtime = Runtime.restore(_snapshot_dir(args.snapshot))
    from .report import collect_reports, write_report

    reports = [runtime.stats(args.game)] if args.game else collect_reports(runtime)
    written = write_report(runtime, args.report_dir) if args.report_dir else []
    payload = {"reports": [r.to_dict() for r in reports], "files": written}
    lines = []
    for r in reports:
        win = "n/a" if r.win_rate is None else f"{r.win_rate:.0%}"
        lines.append(f"{r.scope}: episodes={r.episodes} win_rate={win} "
                     f"mean_score={r.mean_score:.2f} max_score={r.max_score} "
                     f"model_steps={r.model_steps}")
    lines += [f"wrote {path}" for path in written]
    _emit(payload, args.format, lines)
    return 0


def cmd_serve(args) -> int:
    from .server import ControlServer

    snapshot = args.snapshot or os.environ.get(SNAPSHOT_ENV)
    if snapshot and os.path.isdir(snapshot):
        runtime = Runtime.restore(snapshot)
    else:
        config = RuntimeConfig(
            master_seed=args.seed,
            params=_load_params(args.params),
            games=args.games.split(",") if args.games else None,
            tune_interval=args.tune_every,
            blocklist=load_blocklist(args.blocklist) if args.blocklist else [],
            wallclock_ms=args.tick_ms,
        )
        runtime = Runtime(config)
    server = ControlServer(runtime, host=args.host, port=args.port,
                           snapshot_dir=snapshot, static_dir=args.console,
                           max_episodes=args.max_episodes)
    host, port = server.address
    if args.format == "json":
        print(json.dumps({"listening": f"http://{host}:{port}"}), flush=True)
    else:
        print(f"listening on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("shutting down", file=sys.stderr)
        server.stop()
    return 0


def cmd_validate(args) -> int:
    if not os.path.isfile(args.file):
        raise CliError(f"no such file: {args.file}", 2)
    with open(args.file, encoding="utf-8") as fh:
        text = fh.read()
    try:
        spec = parse_gdf(text)
    except GdfError as exc:
        if args.format == "json":
            print(json.dumps({"ok": False, "error": str(exc), "code": exc.code,
                              "line": exc.line, "col": exc.col}, sort_keys=True))
        else:
            print(f"error: {exc}")
        return 1
    _emit({"ok": True, "game": spec.name, "width": spec.width, "height": spec.height},
          args.format, ["ok"])
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thyia", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_format(p):
        p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("play", help="run planner episodes on one game")
    p.add_argument("--game", required=True)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--params", default="default")
    p.add_argument("--model", default=None, help="model file for guidance")
    add_format(p)
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("run", help="bounded always-on cycles over the library")
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", default="default")
    p.add_argument("--games", default=None, help="comma-separated subset")
    p.add_argument("--no-learning", action="store_true")
    p.add_argument("--tune-every", type=int, default=0)
    p.add_argument("--resume", default=None, help="snapshot directory to restore")
    p.add_argument("--snapshot-out", default=None)
    add_format(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tune", help="bandit-tune parameters")
    p.add_argument("--game", default=None)
    p.add_argument("--synthetic", default=None, help="synthetic problem (onemax5)")
    p.add_argument("--sigma", type=float, default=0.0, help="synthetic noise level")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--episodes-per-eval", type=int, default=3)
    p.add_argument("--log", default=None, help="write the evaluation log here")
    add_format(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("train", help="play-record-train loop on one game")
    p.add_argument("--game", required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", default="default")
    p.add_argument("--out", default=None, help="write the trained model here")
    add_format(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("stats", help="reports from a snapshot")
    p.add_argument("--snapshot", default=None)
    p.add_argument("--game", default=None)
    p.add_argument("--report-dir", default=None,
                   help="write stats.csv plus PNG figures here")
    add_format(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="start the always-on daemon")
    p.add_argument("--snapshot", default=None, help="restore and persist here")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", default="default")
    p.add_argument("--games", default=None)
    p.add_argument("--tune-every", type=int, default=100)
    p.add_argument("--blocklist", default=None, help="moderation pattern file")
    p.add_argument("--console", default=None, help="static console directory to serve")
    p.add_argument("--max-episodes", type=int, default=None)
    p.add_argument("--tick-ms", type=float, default=None,
                   help="wall-clock deadline per planned tick (live mode only; "
                        "trades away trace determinism)")
    add_format(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("validate", help="check a GDF file")
    p.add_argument("file")
    add_format(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SnapshotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GdfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # noqa: BLE001 - map everything to exit-code policy
        print(f"error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
