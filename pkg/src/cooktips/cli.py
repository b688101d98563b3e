"""Command line entry point: gen | play | fewshot | aggregate | eval | replay.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 backend failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .engine import ReplayMismatch, Status, Trajectory, replay, run_episode
from .evaluation import evaluate_suite, few_shot_curve, write_report
from .generator import GeneratorConfig, generate, generate_suite, load_spec, load_suite, write_suite
from .model import canonical_json
from .policy import BACKEND_KINDS, DEFAULT_API_KEY_ENV, BackendConfig, PolicyError, base_bundle, make_policy
from .tips import TRIAL_SCENARIOS, NoTipsFound, TipSet, TrialsAborted, aggregate_tips, final_tipset, load_tips

log = logging.getLogger("cooktips")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_BACKEND = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _backend_args(p: argparse.ArgumentParser, default: str) -> None:
    g = p.add_argument_group("backend")
    g.add_argument("--backend", choices=BACKEND_KINDS, default=default, help="policy backend (default: %(default)s)")
    g.add_argument("--endpoint", help="chat-completion URL for remote_chat")
    g.add_argument("--model", help="model name sent to remote_chat")
    g.add_argument("--temperature", type=float, default=0.0, help="sampling temperature (default: 0)")
    g.add_argument("--timeout", type=float, default=60.0, help="seconds per request attempt")
    g.add_argument("--retries", type=int, default=3, help="retries after the first attempt")
    g.add_argument("--api-key-env", default=DEFAULT_API_KEY_ENV, help="env var holding the API key (default: %(default)s)")
    g.add_argument("--max-in-flight", type=int, default=4, help="concurrent remote requests")
    g.add_argument("--char-budget", type=int, default=24000, help="prompt size cap in characters")
    g.add_argument("--script", help="JSON list of replies for the scripted backend")
    g.add_argument("--replay-from", help="trajectory .jsonl whose actions the replay backend repeats")
    g.add_argument("--backend-seed", type=int, default=0, help="seed for random_valid")


def _run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option defaults; flags override it")
    p.add_argument("--run-dir", help="output directory (default: runs/<timestamp>-<command>)")
    p.add_argument("--workers", type=int, default=1, help="parallel episodes (default: serial)")
    p.add_argument("-v", "--verbose", action="store_true")


def _suite_args(p: argparse.ArgumentParser, *, level_required: bool = False) -> None:
    p.add_argument("--suite", help="directory of game .json files")
    p.add_argument("--level", type=int, choices=range(5), required=level_required, help="difficulty level 0-4")
    p.add_argument("--count", type=int, default=20, help="games to generate when no --suite is given")
    p.add_argument("--seed-base", type=int, default=0, help="first seed of a generated suite")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cooktips", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cooktips {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate one game or a numbered suite")
    _run_args(p)
    p.add_argument("--level", type=int, choices=range(5), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--suite", action="store_true", help="write --count games seeded from --seed-base")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--out", required=True, help="output file (single game) or directory (--suite)")

    p = sub.add_parser("play", help="play one game (interactive by default)")
    _run_args(p)
    p.add_argument("--level", type=int, choices=range(5))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec", help="game .json file instead of --level/--seed")
    p.add_argument("--tips", help="tip source: builtin:human, builtin:general or a tip file")
    _backend_args(p, "human_repl")

    p = sub.add_parser("fewshot", help="repeated trials per game with tips carried between trials")
    _run_args(p)
    _suite_args(p)
    p.add_argument("--scenario", choices=TRIAL_SCENARIOS, default="self_history")
    p.add_argument("--max-trials", type=int, default=6)
    p.add_argument("--distill-successes", action="store_true", help="also write tips after a win")
    p.add_argument("--no-plot", action="store_true")
    _backend_args(p, "expert")

    p = sub.add_parser("aggregate", help="merge final tips from several games into general tips")
    _run_args(p)
    p.add_argument("--tips-files", nargs="*", default=[], help="final tip files to merge")
    p.add_argument("--from-run", help="fewshot run directory; uses its final_tips/*.json")
    p.add_argument("--out", help="output tip file (default: <run-dir>/general_tips.json)")
    _backend_args(p, "scripted")

    p = sub.add_parser("eval", help="zero-shot evaluation of a suite with a fixed tip set")
    _run_args(p)
    _suite_args(p)
    p.add_argument("--tips", help="tip source: builtin:human, builtin:general, a tip file, or none")
    p.add_argument("--no-plot", action="store_true")
    _backend_args(p, "expert")

    p = sub.add_parser("replay", help="re-execute a trajectory (or a game's walkthrough) and verify it")
    _run_args(p)
    p.add_argument("--trajectory", help="trajectory .jsonl to verify bitwise")
    p.add_argument("--spec", help="game .json whose walkthrough is replayed")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - set(vars(args)))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


def _backend_config(args, run_dir: Path) -> BackendConfig:
    script: tuple[str, ...] = ()
    if args.script:
        data = json.loads(Path(args.script).read_text(encoding="utf-8"))
        if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
            raise UsageError("--script must be a JSON list of strings")
        script = tuple(data)
    elif args.backend == "scripted":
        raise UsageError("the scripted backend needs --script FILE")
    replay_actions: tuple[str, ...] = ()
    if args.replay_from:
        replay_actions = tuple(Trajectory.load(args.replay_from).actions)
    elif args.backend == "replay":
        raise UsageError("the replay backend needs --replay-from FILE")
    try:
        return BackendConfig(
            kind=args.backend,
            endpoint=args.endpoint,
            model_name=args.model,
            temperature=args.temperature,
            timeout=args.timeout,
            max_retries=args.retries,
            api_key_env_var=args.api_key_env,
            max_in_flight=args.max_in_flight,
            char_budget=args.char_budget,
            log_path=str(run_dir / "requests.jsonl"),
            script=script,
            replay_actions=replay_actions,
            seed=args.backend_seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _suite(args):
    if args.suite:
        specs = load_suite(args.suite)
        if args.level is not None:
            specs = [s for s in specs if s.level == args.level]
            if not specs:
                raise UsageError(f"no level-{args.level} games in {args.suite}")
        return specs
    if args.level is None:
        raise UsageError("give --suite DIR or --level L")
    return generate_suite(args.level, args.count, args.seed_base)


def _write_manifest(run_dir: Path, args, argv) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "cooktips",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "config": {k: v for k, v in sorted(vars(args).items())},
        "started_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (run_dir / "manifest.json").write_text(canonical_json(manifest), encoding="utf-8")


# ---------------------------------------------------------------- commands


def cmd_gen(args, run_dir):
    if args.suite:
        paths = write_suite(generate_suite(args.level, args.count, args.seed_base), args.out)
        print(f"wrote {len(paths)} level-{args.level} games to {args.out}")
    else:
        spec = generate(GeneratorConfig(args.level, args.seed))
        out = Path(args.out)
        if out.parent:
            out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(spec.to_json(), encoding="utf-8")
        print(f"wrote {spec.game_id} (max score {spec.max_score}) to {out}")
    return EXIT_OK


def cmd_play(args, run_dir):
    if args.spec:
        spec = load_spec(args.spec)
    elif args.level is not None:
        spec = generate(GeneratorConfig(args.level, args.seed))
    else:
        raise UsageError("give --spec FILE or --level L")
    config = _backend_config(args, run_dir)
    tips = load_tips(args.tips)
    policy = make_policy(config)
    traj, result = run_episode(spec, policy, base_bundle(config, tips=tips.texts if tips else ()))
    traj.save(run_dir / f"{spec.game_id}.jsonl")
    print(traj.steps[-1].feedback)
    if result.aborted:
        print(f"*** Aborted: {result.diagnostic} ***")
        return EXIT_BACKEND
    banner = "You won!" if result.status is Status.WON else "You lost!"
    print(f"*** {banner} *** score {result.points}/{result.max_score} in {result.turns} turns")
    return EXIT_OK


def cmd_fewshot(args, run_dir):
    specs = _suite(args)
    config = _backend_config(args, run_dir)
    report, records = few_shot_curve(
        specs, config, args.scenario, args.max_trials,
        workers=args.workers, distill_successes=args.distill_successes,
    )
    write_report(report, run_dir, plot=not args.no_plot)
    traj_dir = run_dir / "trajectories"
    traj_dir.mkdir(exist_ok=True)
    with (run_dir / "trials.jsonl").open("w", encoding="utf-8") as fh:
        for game_id, recs in records.items():
            for r in recs:
                fh.write(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
                r.trajectory.save(traj_dir / f"{game_id}_trial{r.trial_index}.jsonl")
            final = final_tipset(recs)
            if final is not None:
                final.save(run_dir / "final_tips" / f"{game_id}.json")
    _print_metrics(report)
    return EXIT_BACKEND if any(m.backend_failures for m in report.per_level.values()) else EXIT_OK


def cmd_aggregate(args, run_dir):
    files = [Path(f) for f in args.tips_files]
    if args.from_run:
        files += sorted((Path(args.from_run) / "final_tips").glob("*.json"))
    if not files:
        raise UsageError("no final tip files given (use --tips-files or --from-run)")
    tipsets = [TipSet.load(f) for f in files]
    config = _backend_config(args, run_dir)
    out = Path(args.out) if args.out else run_dir / "general_tips.json"
    tipset = aggregate_tips(tipsets, config, out_path=out)
    print(f"aggregated {len(tipsets)} tip sets into {len(tipset)} tips at {out}")
    return EXIT_OK


def cmd_eval(args, run_dir):
    specs = _suite(args)
    config = _backend_config(args, run_dir)
    tips = load_tips(args.tips)
    report = evaluate_suite(
        specs, config, tips, workers=args.workers, tip_source=args.tips,
        trajectory_dir=run_dir / "trajectories",
    )
    write_report(report, run_dir, plot=not args.no_plot)
    _print_metrics(report)
    return EXIT_BACKEND if any(m.backend_failures for m in report.per_level.values()) else EXIT_OK


def cmd_replay(args, run_dir):
    if args.trajectory:
        traj, result = replay(Trajectory.load(args.trajectory))
        print(f"verified {len(traj.steps) - 1} turns of {traj.spec.game_id}: bitwise identical feedback")
    elif args.spec:
        spec = load_spec(args.spec)
        policy = make_policy(BackendConfig("expert"))
        traj, result = run_episode(spec, policy)
        traj.save(run_dir / f"{spec.game_id}_walkthrough.jsonl")
        replay(traj)
    else:
        raise UsageError("give --trajectory FILE or --spec FILE")
    print(f"status {result.status.value} score {result.points}/{result.max_score}")
    return EXIT_OK if result.status is Status.WON or args.trajectory else EXIT_RUNTIME


def _print_metrics(report) -> None:
    for lv, m in sorted(report.per_level.items()):
        line = f"level {lv}: normalized_points={m.normalized_points:.3f} success_rate={m.success_rate:.3f} episodes={m.episodes}"
        if m.backend_failures:
            line += f" backend_failures={m.backend_failures}"
        print(line)


COMMANDS = {
    "gen": cmd_gen,
    "play": cmd_play,
    "fewshot": cmd_fewshot,
    "aggregate": cmd_aggregate,
    "eval": cmd_eval,
    "replay": cmd_replay,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"cooktips: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S")
    run_dir = Path(args.run_dir or Path("runs") / f"{stamp}-{args.command}")
    try:
        _write_manifest(run_dir, args, argv)
        return COMMANDS[args.command](args, run_dir)
    except UsageError as exc:
        print(f"cooktips: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PolicyError, TrialsAborted) as exc:
        print(f"cooktips: backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (OSError, ValueError, ReplayMismatch, NoTipsFound) as exc:
        print(f"cooktips: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
