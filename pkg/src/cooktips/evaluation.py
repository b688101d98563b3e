"""Few-shot and zero-shot protocols over game suites, with the two suite metrics:
mean normalized points and success rate."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from .engine import EpisodeResult, Status, Trajectory, run_episode
from .model import GameSpec, canonical_json
from .policy import BackendConfig, BasePolicy, base_bundle, make_policy
from .tips import TipSet, TrialRecord, TrialsAborted, run_trials

log = logging.getLogger(__name__)

REPORT_FORMAT = "cooktips-report/1"


@dataclass(frozen=True)
class Metrics:
    normalized_points: float
    success_rate: float
    episodes: int
    backend_failures: int = 0

    def to_dict(self) -> dict:
        return {
            "normalized_points": self.normalized_points,
            "success_rate": self.success_rate,
            "episodes": self.episodes,
            "backend_failures": self.backend_failures,
        }


@dataclass
class EvalReport:
    per_level: dict[int, Metrics]
    per_trial_curve: dict[int, Metrics]
    per_level_curve: dict[int, dict[int, Metrics]]
    run_metadata: dict
    episodes: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "per_level": {str(k): v.to_dict() for k, v in sorted(self.per_level.items())},
            "per_trial_curve": {str(k): v.to_dict() for k, v in sorted(self.per_trial_curve.items())},
            "per_level_curve": {
                str(lv): {str(k): m.to_dict() for k, m in sorted(curve.items())}
                for lv, curve in sorted(self.per_level_curve.items())
            },
            "run_metadata": self.run_metadata,
            "episodes": self.episodes,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "trial", "normalized_points", "success_rate", "episodes", "backend_failures"])
        for lv, curve in sorted(self.per_level_curve.items()):
            for k, m in sorted(curve.items()):
                w.writerow([lv, k, repr(m.normalized_points), repr(m.success_rate), m.episodes, m.backend_failures])
        return buf.getvalue()


def summarize(results: Sequence[EpisodeResult]) -> Metrics:
    n = len(results)
    if n == 0:
        raise ValueError("no episodes to summarize")
    return Metrics(
        normalized_points=sum(r.normalized for r in results) / n,
        success_rate=sum(1 for r in results if r.success) / n,
        episodes=n,
        backend_failures=sum(1 for r in results if r.aborted),
    )


def _by_level(specs: Sequence[GameSpec], results: Sequence[EpisodeResult]) -> dict[int, Metrics]:
    groups: dict[int, list[EpisodeResult]] = {}
    for spec, res in zip(specs, results):
        groups.setdefault(spec.level, []).append(res)
    return {lv: summarize(rs) for lv, rs in sorted(groups.items())}


def _seeds(specs: Sequence[GameSpec]) -> list[list[int]]:
    return [[s.level, s.seed] for s in specs]


def evaluate_suite(
    specs: Sequence[GameSpec],
    policy_config: BackendConfig,
    tips: TipSet | None = None,
    *,
    workers: int = 1,
    policy_factory: Callable[[], BasePolicy] | None = None,
    tip_source: str | None = None,
    trajectory_dir: str | Path | None = None,
) -> EvalReport:
    """Zero-shot: one episode per game with a fixed tip set in the prompt."""
    if not specs:
        raise ValueError("suite is empty")
    factory = policy_factory or (lambda: make_policy(policy_config))
    context = base_bundle(policy_config, tips=tips.texts if tips else ())

    def play(spec: GameSpec) -> tuple[Trajectory, EpisodeResult]:
        traj, result = run_episode(spec, factory(), context)
        if result.aborted:
            # transport failures score nothing and stay flagged via the diagnostic
            result = replace(result, points=0)
        return traj, result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(play, specs))
    else:
        outcomes = [play(s) for s in specs]

    if trajectory_dir is not None:
        tdir = Path(trajectory_dir)
        tdir.mkdir(parents=True, exist_ok=True)
        for i, (traj, _) in enumerate(outcomes):
            traj.save(tdir / f"{i:03d}_{traj.spec.game_id}.jsonl")

    results = [r for _, r in outcomes]
    per_level = _by_level(specs, results)
    return EvalReport(
        per_level=per_level,
        per_trial_curve={1: summarize(results)},
        per_level_curve={lv: {1: m} for lv, m in per_level.items()},
        run_metadata={
            "mode": "zero_shot",
            "backend": policy_config.kind,
            "model": policy_config.model_name,
            "scenario": None,
            "seeds": _seeds(specs),
            "tip_source": tip_source or ("inline" if tips else None),
            "tips": list(tips.texts) if tips else [],
        },
        episodes=[
            {"game_id": s.game_id, "level": s.level, "trial": 1, **r.to_dict()}
            for s, r in zip(specs, results)
        ],
    )


def few_shot_curve(
    specs: Sequence[GameSpec],
    policy_config: BackendConfig,
    scenario: str = "self_history",
    max_trials: int = 6,
    *,
    workers: int = 1,
    policy_factory: Callable[[], BasePolicy] | None = None,
    distill_successes: bool = False,
) -> tuple[EvalReport, dict[str, list[TrialRecord]]]:
    """Repeated trials per game; a game counts as solved at trial k if any trial <= k won."""
    if not specs:
        raise ValueError("suite is empty")
    factory = policy_factory or (lambda: make_policy(policy_config))

    def play(spec: GameSpec) -> list[TrialRecord]:
        try:
            return run_trials(
                spec, policy_config, scenario, max_trials,
                policy=factory(), distill_successes=distill_successes,
            )
        except TrialsAborted as exc:
            log.warning("%s", exc)
            return exc.records

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_records = list(pool.map(play, specs))
    else:
        all_records = [play(s) for s in specs]

    def at_trial(records: list[TrialRecord], spec: GameSpec, k: int) -> EpisodeResult:
        upto = [r.result for r in records if r.trial_index <= k]
        if not upto:
            return EpisodeResult(0, spec.max_score, False, 0, Status.LOST, "no trial recorded")
        best = max(upto, key=lambda r: (r.success, r.points))
        aborted = next((r.diagnostic for r in upto if r.aborted), None)
        return EpisodeResult(best.points, best.max_score, best.success, best.turns, best.status, aborted)

    curves: dict[int, dict[int, Metrics]] = {}
    overall: dict[int, Metrics] = {}
    for k in range(1, max_trials + 1):
        snapshot = [at_trial(recs, spec, k) for spec, recs in zip(specs, all_records)]
        overall[k] = summarize(snapshot)
        for lv, m in _by_level(specs, snapshot).items():
            curves.setdefault(lv, {})[k] = m

    per_level = {lv: curve[max_trials] for lv, curve in curves.items()}
    episodes = [
        {"game_id": s.game_id, "level": s.level, "trial": r.trial_index, **r.result.to_dict()}
        for s, recs in zip(specs, all_records)
        for r in recs
    ]
    report = EvalReport(
        per_level=per_level,
        per_trial_curve=overall,
        per_level_curve=curves,
        run_metadata={
            "mode": "few_shot",
            "curve": "cumulative",
            "backend": policy_config.kind,
            "model": policy_config.model_name,
            "scenario": scenario,
            "max_trials": max_trials,
            "seeds": _seeds(specs),
            "tip_source": None,
            "tips": [],
        },
        episodes=episodes,
    )
    return report, {s.game_id: recs for s, recs in zip(specs, all_records)}


def write_report(report: EvalReport, directory: str | Path, *, plot: bool = True) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / "report.json", directory / "report.csv"]
    paths[0].write_text(report.to_json(), encoding="utf-8")
    paths[1].write_text(report.to_csv(), encoding="utf-8")
    if plot:
        from .plots import plot_report

        paths.append(plot_report(report, directory / "report.png"))
    return paths
