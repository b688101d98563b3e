"""Tips: extraction from model output, reflection prompts, the trial loop and
cross-game aggregation."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .engine import EpisodeResult, Trajectory, run_episode
from .model import GameSpec, canonical_json
from .parser import action_list_text
from .policy import BackendConfig, BasePolicy, PolicyError, PromptBundle, base_bundle, make_policy

log = logging.getLogger(__name__)

TIPSET_FORMAT = "cooktips-tips/1"
TIPS_MARKER = "Tips to win the game next time:"
MAX_TIPS = 8
REPLAY_MEMORY_CAP = 3

SCENARIOS = ("self_history", "expert_contrast", "aggregated", "human")
TRIAL_SCENARIOS = ("self_history", "expert_contrast", "replay_memory")

REFLECTION_PREAMBLE = (
    "You are an agent that plays text-based cooking games and learns from experience. "
    "The game accepts only these actions (the ActionList):\n"
    f"{action_list_text()}"
)

_MARKER_LINE = re.compile(r"^[\W_]*[\w ,'-]*\btips\b[\w ,'-]*:\s*$", re.IGNORECASE)
_ITEM = re.compile(r"^\s*(?:[-*•]\s*)?(\d{1,3})\s*[.):;]\s*(\S.*)$")


class NoTipsFound(ValueError):
    pass


class TrialsAborted(RuntimeError):
    """A backend failed mid-loop; ``records`` holds every finished trial."""

    def __init__(self, message: str, records: list["TrialRecord"]):
        super().__init__(message)
        self.records = records


@dataclass(frozen=True)
class Tip:
    index: int
    text: str

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("tip indices start at 1")
        if not self.text.strip() or "\n" in self.text:
            raise ValueError("a tip is one non-empty paragraph")


@dataclass(frozen=True)
class Provenance:
    scenario: str
    game_id: str | None = None
    trial_index: int | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown tip scenario {self.scenario!r}")


@dataclass(frozen=True)
class TipSet:
    tips: tuple[Tip, ...]
    provenance: Provenance

    def __post_init__(self):
        if [t.index for t in self.tips] != list(range(1, len(self.tips) + 1)):
            raise ValueError("tip indices must run 1..n")

    @classmethod
    def from_texts(cls, texts: Sequence[str], provenance: Provenance) -> "TipSet":
        return cls(tuple(Tip(i, t) for i, t in enumerate(texts, 1)), provenance)

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(t.text for t in self.tips)

    def __len__(self) -> int:
        return len(self.tips)

    def to_dict(self) -> dict:
        return {
            "format": TIPSET_FORMAT,
            "provenance": {
                "scenario": self.provenance.scenario,
                "game_id": self.provenance.game_id,
                "trial_index": self.provenance.trial_index,
            },
            "tips": [{"index": t.index, "text": t.text} for t in self.tips],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TipSet":
        if d.get("format") != TIPSET_FORMAT:
            raise ValueError("not a tip store")
        prov = Provenance(**d["provenance"])
        return cls(tuple(Tip(t["index"], t["text"]) for t in d["tips"]), prov)

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(canonical_json(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TipSet":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def render_tips(tipset: TipSet) -> str:
    return "\n".join([TIPS_MARKER] + [f"{t.index}. {t.text}" for t in tipset.tips])


def _numbered_items(lines: list[str]) -> list[str]:
    items: list[str] = []
    gap = False
    for line in lines:
        m = _ITEM.match(line)
        if m:
            items.append(m.group(2).strip())
            gap = False
        elif not line.strip():
            gap = True
        elif items and not gap:
            items[-1] = f"{items[-1]} {line.strip()}"
        elif items:
            break
    return items


def extract_tips(model_output: str, provenance: Provenance) -> TipSet:
    lines = model_output.split("\n")
    start = 0
    for i, line in enumerate(lines):
        if _MARKER_LINE.match(line):
            start = i + 1
            break
    else:
        # no marker: take the first numbered list in the text
        for i, line in enumerate(lines):
            if _ITEM.match(line):
                start = i
                break
        else:
            raise NoTipsFound("no numbered tips in model output")
    items = _numbered_items(lines[start:])
    if not items:
        raise NoTipsFound("tips marker found but no numbered items follow it")
    return TipSet.from_texts(items, provenance)


def builtin_tips(name: str) -> TipSet:
    files = {"human": "tips_human.json", "general": "tips_general.json"}
    if name not in files:
        raise ValueError(f"unknown builtin tip set {name!r}; choose from {', '.join(files)}")
    text = resources.files("cooktips.data").joinpath(files[name]).read_text(encoding="utf-8")
    return TipSet.from_dict(json.loads(text))


def load_tips(source: str | None) -> TipSet | None:
    """``builtin:human``, ``builtin:general``, a tip-store path, or None/"none"."""
    if not source or source == "none":
        return None
    if source.startswith("builtin:"):
        return builtin_tips(source.split(":", 1)[1])
    return TipSet.load(source)


# ---------------------------------------------------------------- trials


@dataclass
class TrialRecord:
    trial_index: int
    tips_in: TipSet | None
    trajectory: Trajectory
    result: EpisodeResult
    tips_out: TipSet | None = None
    prompt: str = ""
    final: bool = False

    def to_dict(self) -> dict:
        return {
            "trial_index": self.trial_index,
            "game_id": self.trajectory.spec.game_id,
            "tips_in": self.tips_in.to_dict() if self.tips_in else None,
            "tips_out": self.tips_out.to_dict() if self.tips_out else None,
            "result": self.result.to_dict(),
            "actions": self.trajectory.actions,
            "final": self.final,
        }


def build_reflection_prompt(
    scenario: str,
    spec_observation: str,
    failed_trials: Sequence[TrialRecord],
    expert: Sequence[str] | None = None,
    max_tips: int = MAX_TIPS,
) -> PromptBundle:
    if scenario == "self_history":
        if expert:
            raise ValueError("self_history reflection does not take expert actions")
    elif scenario == "expert_contrast":
        if not expert:
            raise ValueError("expert_contrast reflection needs the expert actions")
    else:
        raise ValueError(f"no reflection prompt for scenario {scenario!r}")
    if not failed_trials:
        raise ValueError("reflection needs at least one failed trial")

    prior = failed_trials[-1].tips_in
    ask = (
        f"Write at most {max_tips} short, general tips as a numbered list under the line "
        f"'{TIPS_MARKER}'."
    )
    if scenario == "expert_contrast":
        lead = (
            "You failed this game. Compare your failed actions with the expert's winning "
            "actions, find where they differ, and learn what you should do instead."
        )
    else:
        lead = "You failed this game. Study the actions that led to failure and find your mistakes."
    if prior:
        lead += " The tips above did not lead to success, so generate more effective tips."
    return PromptBundle(
        system_preamble=REFLECTION_PREAMBLE,
        tips=prior.texts if prior else (),
        failed_actions=tuple(tuple(t.trajectory.actions) for t in failed_trials),
        expert_walkthrough=tuple(expert or ()),
        transcript=(spec_observation,),
        instruction=f"{lead}\n{ask}",
    )


def _success_prompt(record: TrialRecord, max_tips: int = MAX_TIPS) -> PromptBundle:
    return PromptBundle(
        system_preamble=REFLECTION_PREAMBLE,
        tips=record.tips_in.texts if record.tips_in else (),
        expert_walkthrough=tuple(record.trajectory.actions),
        transcript=(record.trajectory.observation,),
        instruction=(
            "The actions above won this game. Distil what made them work into at most "
            f"{max_tips} short, general tips as a numbered list under the line '{TIPS_MARKER}'."
        ),
    )


def run_trials(
    spec: GameSpec,
    policy_config: BackendConfig,
    scenario: str = "self_history",
    max_trials: int = 6,
    *,
    distill_successes: bool = False,
    policy: BasePolicy | None = None,
    tip_writer: BasePolicy | None = None,
) -> list[TrialRecord]:
    """Play ``spec`` repeatedly, writing tips after each failure, until a win."""
    if max_trials < 1:
        raise ValueError("max_trials must be at least 1")
    if scenario not in TRIAL_SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    policy = policy or make_policy(policy_config)
    tip_writer = tip_writer or policy
    expert = [str(a) for a in spec.walkthrough] if scenario == "expert_contrast" else None

    records: list[TrialRecord] = []
    tips: TipSet | None = None
    for k in range(1, max_trials + 1):
        failed = [r for r in records if not r.result.success]
        if scenario == "replay_memory":
            memory = tuple(tuple(r.trajectory.transcript()) for r in records[-REPLAY_MEMORY_CAP:])
            context = base_bundle(policy_config, past_trajectories=memory)
        else:
            context = base_bundle(
                policy_config,
                tips=tips.texts if tips else (),
                failed_actions=tuple(tuple(r.trajectory.actions) for r in failed),
            )
        traj, result = run_episode(spec, policy, context)
        record = TrialRecord(k, tips, traj, result, prompt=context.with_transcript([traj.observation]).serialize())
        records.append(record)
        if result.aborted:
            raise TrialsAborted(f"trial {k} of {spec.game_id}: {result.diagnostic}", records)

        if result.success:
            record.final = True
            if distill_successes and scenario != "replay_memory":
                record.tips_out = _write_tips(tip_writer, _success_prompt(record), spec, k, scenario, records)
            break
        if scenario == "replay_memory":
            continue
        bundle = build_reflection_prompt(scenario, traj.observation, failed + [record], expert)
        new_tips = _write_tips(tip_writer, bundle, spec, k, scenario, records)
        record.tips_out = new_tips
        if new_tips is not None:
            tips = new_tips
    return records


def _write_tips(writer, bundle, spec, k, scenario, records) -> TipSet | None:
    try:
        reply = writer.generate(bundle)
    except PolicyError as exc:
        raise TrialsAborted(f"tip writing after trial {k} of {spec.game_id}: {exc}", records) from exc
    try:
        return extract_tips(reply, Provenance(scenario, spec.game_id, k))
    except NoTipsFound:
        log.warning("no tips in reply after trial %d of %s; keeping previous tips", k, spec.game_id)
        return None


def final_tipset(records: Sequence[TrialRecord]) -> TipSet | None:
    """Tips in effect during the first successful trial, if it had any."""
    for r in records:
        if r.final:
            return r.tips_in
    return None


# ---------------------------------------------------------------- aggregation

AGGREGATE_PREAMBLE = (
    "You summarise advice for an agent that plays text-based cooking games. Every game "
    "shares the same kind of house, commands and objects, but recipes and maps differ. "
    "The game accepts only these actions (the ActionList):\n"
    f"{action_list_text()}"
)


def aggregation_prompt(final_tipsets: Sequence[TipSet], max_tips: int = MAX_TIPS) -> PromptBundle:
    blocks = []
    for ts in final_tipsets:
        label = ts.provenance.game_id or "game"
        blocks.append(f"{label}:\n" + "\n".join(f"{t.index}. {t.text}" for t in ts.tips))
    instruction = (
        "Each list below is the set of tips that led to a successful game.\n\n"
        + "\n\n".join(blocks)
        + f"\n\nCombine them into at most {max_tips} general tips that would help in any of "
        f"these games. Answer with a numbered list under the line '{TIPS_MARKER}'."
    )
    return PromptBundle(system_preamble=AGGREGATE_PREAMBLE, instruction=instruction)


def aggregate_tips(
    final_tipsets: Sequence[TipSet],
    config: BackendConfig,
    *,
    policy: BasePolicy | None = None,
    out_path: str | Path | None = None,
) -> TipSet:
    final_tipsets = [ts for ts in final_tipsets if ts is not None and len(ts)]
    if not final_tipsets:
        raise ValueError("aggregation needs at least one non-empty final tip set")
    policy = policy or make_policy(config)
    reply = policy.generate(aggregation_prompt(final_tipsets))
    tipset = extract_tips(reply, Provenance("aggregated"))
    if out_path is not None:
        tipset.save(out_path)
    return tipset
