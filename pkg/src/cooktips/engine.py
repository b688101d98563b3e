"""Game simulation: world state transitions, feedback text, scoring, episodes.

Feedback strings are frozen (``TEMPLATE_VERSION``); golden-transcript tests
compare them byte for byte, so edit them only together with a version bump.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Protocol

from .model import (
    CUT_VERBS,
    DIRECTIONS,
    HEAT_SOURCES,
    CookState,
    CutState,
    GameSpec,
    Kind,
    required_steps,
)
from .parser import Action, ParseError, first_line, parse

if TYPE_CHECKING:
    from .policy import PromptBundle

log = logging.getLogger(__name__)

TEMPLATE_VERSION = "feedback-v1"
TRAJECTORY_FORMAT = "cooktips-trajectory/1"

INVALID = "Invalid action."
SCORE_LINE = "Your score has just gone up by one point."
CANT_SEE = "You can't see any such thing."
NOT_CARRYING = "You're not carrying that."
GOAL_TEXT = (
    "Find the cookbook and read the recipe. Gather the ingredients, prepare them "
    "as the recipe directs, then prepare the meal and eat it."
)
MEAL = "meal"
INV = "inv"
VOID = "void"


class Status(str, Enum):
    RUNNING = "Running"
    WON = "Won"
    LOST = "Lost"


class GameOver(RuntimeError):
    pass


@dataclass(frozen=True)
class Ingredient:
    name: str
    cut: CutState
    cook: CookState
    location: str
    edible: bool = True


@dataclass
class WorldState:
    spec: GameSpec
    player_room: str
    locations: dict[str, str]
    container_open: dict[str, bool]
    door_open: dict[str, bool]
    cut: dict[str, CutState]
    cook: dict[str, CookState]
    recipe_revealed: bool = False
    scored: frozenset[str] = frozenset()
    score: int = 0
    turn: int = 0
    status: Status = Status.RUNNING
    meal_prepared: bool = False

    @property
    def inventory(self) -> tuple[str, ...]:
        return tuple(n for n, loc in self.locations.items() if loc == INV)

    def ingredient(self, name: str) -> Ingredient:
        return Ingredient(name, self.cut[name], self.cook[name], self.locations[name])

    def copy(self) -> "WorldState":
        return WorldState(
            self.spec,
            self.player_room,
            dict(self.locations),
            dict(self.container_open),
            dict(self.door_open),
            dict(self.cut),
            dict(self.cook),
            self.recipe_revealed,
            self.scored,
            self.score,
            self.turn,
            self.status,
            self.meal_prepared,
        )


@dataclass(frozen=True)
class Feedback:
    text: str
    score_delta: int
    status_after: Status


def new_episode(spec: GameSpec) -> tuple[WorldState, str]:
    locations = {e.name: e.location for e in spec.entities if e.kind.portable}
    locations[MEAL] = VOID
    ingredients = [e.name for e in spec.entities if e.kind is Kind.INGREDIENT]
    state = WorldState(
        spec=spec,
        player_room=spec.start_room,
        locations=locations,
        container_open={e.name: False for e in spec.entities if e.kind is Kind.CONTAINER},
        door_open={d: False for d in spec.map.doors},
        cut={n: CutState.UNCUT for n in ingredients},
        cook={n: CookState.RAW for n in ingredients},
    )
    return state, describe_room(state)


# ---------------------------------------------------------------- helpers


def _norm(text: str) -> str:
    return " ".join(text.split()).lower()


def _kind(state: WorldState, name: str) -> str:
    if name == MEAL:
        return MEAL
    if name in state.door_open:
        return "door"
    return state.spec.entity(name).kind.value


def _resolve(state: WorldState, text: str) -> str | None:
    key = _norm(text)
    for e in state.spec.entities:
        if e.name == key:
            return e.name
    if key in state.door_open:
        return key
    if key == MEAL and state.locations[MEAL] != VOID:
        return MEAL
    return None


def _room_doors(state: WorldState) -> list[str]:
    room = state.spec.map.room(state.player_room)
    return [ex.door for _, ex in room.exits if ex.door]


def _visible(state: WorldState, name: str) -> bool:
    if name in state.door_open:
        return name in _room_doors(state)
    loc = state.locations.get(name)
    if loc is None:
        loc = state.spec.entity(name).location
    prep, _, ref = loc.partition(":")
    if loc == INV:
        return True
    if prep == "room":
        return ref == state.player_room
    if prep == "in":
        return state.container_open[ref] and _visible(state, ref)
    if prep == "on":
        return _visible(state, ref)
    return False


def _display(state: WorldState, name: str) -> str:
    if name in state.cut:
        adj = []
        if state.cut[name] is not CutState.UNCUT:
            adj.append(state.cut[name].value)
        if state.cook[name] is not CookState.RAW:
            adj.append(state.cook[name].value)
        return " ".join(adj + [name])
    if name in state.container_open:
        return f"{name} ({'open' if state.container_open[name] else 'closed'})"
    return name


def _held_by(state: WorldState, loc: str) -> list[str]:
    return [n for n, l in state.locations.items() if l == loc]


def _listing(state: WorldState, names: Iterable[str]) -> str:
    return ", ".join(_display(state, n) for n in names)


def describe_room(state: WorldState) -> str:
    here = state.player_room
    room = state.spec.map.room(here)
    fixed = [e.name for e in state.spec.entities if not e.kind.portable and e.location == f"room:{here}"]
    floor = _held_by(state, f"room:{here}")
    lines = [f"-= {here.title()} =-", f"You are in the {here}."]
    seen = fixed + floor
    lines.append(f"You see: {_listing(state, seen)}." if seen else "You see nothing here.")
    for name in fixed:
        kind = state.spec.entity(name).kind
        if kind is Kind.SUPPORTER or (kind is Kind.CONTAINER and state.container_open[name]):
            items = _held_by(state, f"{'on' if kind is Kind.SUPPORTER else 'in'}:{name}")
            if items:
                prep = "On" if kind is Kind.SUPPORTER else "In"
                lines.append(f"{prep} the {name}: {_listing(state, items)}.")
    exits = []
    for d, ex in room.exits:
        if ex.door:
            exits.append(f"{d} ({ex.door}, {'open' if state.door_open[ex.door] else 'closed'})")
        else:
            exits.append(d)
    lines.append(f"Exits: {', '.join(exits)}." if exits else "There are no exits.")
    return "\n".join(lines)


def _recipe_text(state: WorldState) -> str:
    recipe = state.spec.recipe
    body = ["You open the cookbook and start reading:", "", "Ingredients:"]
    body += [f"  {n}" for n in recipe.names]
    body += ["", "Directions:"]
    body += [f"  {d}" for d in recipe.directions()]
    return "\n".join(body)


# ---------------------------------------------------------------- actions


def _do_go(s: WorldState, direction: str) -> str:
    d = _norm(direction)
    ex = s.spec.map.room(s.player_room).exit(d) if d in DIRECTIONS else None
    if ex is None:
        return "You can't go that way."
    if ex.door and not s.door_open[ex.door]:
        return f"The {ex.door} is closed."
    s.player_room = ex.room
    return describe_room(s)


def _do_examine(s: WorldState, x: str) -> str:
    kind = _kind(s, x)
    if x == "cookbook":
        s.recipe_revealed = True
        return _recipe_text(s)
    if kind == "ingredient":
        return f"The {x} is {s.cut[x].value} and {s.cook[x].value}."
    if kind == "door":
        return f"The {x} is {'open' if s.door_open[x] else 'closed'}."
    if kind == "container":
        if not s.container_open[x]:
            return f"The {x} is closed."
        items = _held_by(s, f"in:{x}")
        return f"In the {x} you see: {_listing(s, items)}." if items else f"The {x} is empty."
    if kind == "supporter":
        items = _held_by(s, f"on:{x}")
        return f"On the {x} you see: {_listing(s, items)}." if items else f"There is nothing on the {x}."
    if kind == "heat_source":
        return f"The {x} is a heat source."
    if kind == MEAL:
        return "A freshly prepared meal."
    return f"You see nothing special about the {x}."


def _do_open(s: WorldState, x: str, opening: bool) -> str:
    kind = _kind(s, x)
    verb = "open" if opening else "close"
    if kind == "door":
        flags = s.door_open
    elif kind == "container":
        flags = s.container_open
    else:
        return f"You can't {verb} that."
    if flags[x] == opening:
        return f"It's already {'open' if opening else 'closed'}."
    flags[x] = opening
    if opening and kind == "container":
        items = _held_by(s, f"in:{x}")
        if items:
            return f"You open the {x}, revealing {_listing(s, items)}."
    return f"You {verb} the {x}."


def _do_take(s: WorldState, x: str) -> str:
    if x in s.door_open or x not in s.locations:
        return "That's fixed in place."
    if s.locations[x] == INV:
        return "You already have that."
    s.locations[x] = INV
    return f"You take the {x}."


def _do_take_from(s: WorldState, x: str, h: str) -> str:
    kind = _kind(s, h)
    if kind not in ("container", "supporter"):
        return "You can't take things from that."
    if kind == "container" and not s.container_open[h]:
        return f"The {h} is closed."
    prep = "in" if kind == "container" else "on"
    if s.locations.get(x) != f"{prep}:{h}":
        return f"You can't see any such thing {prep} the {h}."
    s.locations[x] = INV
    return f"You take the {x} from the {h}."


def _do_drop(s: WorldState, x: str) -> str:
    if s.locations.get(x) != INV:
        return NOT_CARRYING
    s.locations[x] = f"room:{s.player_room}"
    return f"You drop the {x}."


def _do_place(s: WorldState, x: str, h: str, form: str) -> str:
    if s.locations.get(x) != INV:
        return NOT_CARRYING
    kind = _kind(s, h)
    if form == "put":
        if kind != "supporter":
            return "You can't put things on that."
        s.locations[x] = f"on:{h}"
        return f"You put the {x} on the {h}."
    if kind != "container":
        return "You can't put things into that."
    if not s.container_open[h]:
        return f"The {h} is closed."
    s.locations[x] = f"in:{h}"
    return f"You insert the {x} into the {h}."


def _do_lock(s: WorldState, x: str, key: str, form: str) -> str:
    if _kind(s, x) not in ("door", "container"):
        return f"You can't {form} that."
    if s.locations.get(key) != INV:
        return NOT_CARRYING
    # no generated game has a lock
    return "That doesn't fit the lock." if form == "lock" else "It isn't locked."


def _do_eat(s: WorldState, x: str) -> str:
    kind = _kind(s, x)
    if kind not in (MEAL, "ingredient"):
        return "That's plainly inedible."
    if s.locations[x] != INV:
        return f"You need to take the {x} first."
    s.locations[x] = VOID
    if kind == MEAL:
        s.status = Status.WON
        return "You eat the meal. Not bad."
    return f"You eat the {x}. Not bad."


def _do_cook(s: WorldState, food: str, heat: str) -> str:
    if _kind(s, heat) != "heat_source":
        return "You can't cook with that."
    if _kind(s, food) != "ingredient":
        return "You can't cook that."
    if s.locations[food] != INV:
        return f"You need to take the {food} first."
    current = s.cook[food]
    if current is CookState.BURNED:
        return f"The {food} is already burned."
    s.cook[food] = HEAT_SOURCES[heat] if current is CookState.RAW else CookState.BURNED
    return f"You {s.cook[food].value} the {food}."


def _do_cut(s: WorldState, form: str, food: str, tool: str) -> str:
    if _kind(s, tool) != "sharp":
        return "You can't cut with that."
    if _kind(s, food) != "ingredient":
        return "You can't cut that."
    if s.locations[tool] != INV:
        return f"You need to take the {tool} first."
    if s.locations[food] != INV:
        return f"You need to take the {food} first."
    if s.cut[food] is not CutState.UNCUT:
        return f"The {food} is already {s.cut[food].value}."
    s.cut[food] = CUT_VERBS[form]
    return f"You {s.cut[food].value} the {food}."


def _do_prepare(s: WorldState) -> str:
    if s.meal_prepared:
        return "You already prepared the meal."
    if s.player_room != s.spec.map.kitchen:
        return "You can only prepare a meal in the kitchen."
    if not s.recipe_revealed:
        return "You need to read the cookbook first."
    recipe = s.spec.recipe
    if any(s.locations[n] != INV for n in recipe.names):
        return "Some ingredients are missing from your inventory."
    for it in recipe.items:
        if s.cut[it.name] is not it.target_cut or s.cook[it.name] is not it.target_cook:
            return "Some ingredients are not prepared as the recipe says."
    for n in recipe.names:
        s.locations[n] = VOID
    s.locations[MEAL] = INV
    s.meal_prepared = True
    return "Adding the meal to your inventory."


def _apply(s: WorldState, action: Action) -> str:
    form, args = action.form, action.args
    if form == "look":
        return describe_room(s)
    if form == "goal":
        return GOAL_TEXT
    if form == "inventory":
        inv = s.inventory
        return f"You are carrying: {_listing(s, inv)}." if inv else "You are carrying nothing."
    if form == "go":
        return _do_go(s, args[0])
    if form == "prepare_meal":
        return _do_prepare(s)

    names = []
    for arg in args:
        name = _resolve(s, arg)
        if name is None or not _visible(s, name):
            return CANT_SEE
        names.append(name)

    if form == "examine":
        return _do_examine(s, names[0])
    if form in ("open", "close"):
        return _do_open(s, names[0], form == "open")
    if form == "take":
        return _do_take(s, names[0])
    if form == "take_from":
        return _do_take_from(s, *names)
    if form == "drop":
        return _do_drop(s, names[0])
    if form in ("put", "insert"):
        return _do_place(s, names[0], names[1], form)
    if form in ("lock", "unlock"):
        return _do_lock(s, names[0], names[1], form)
    if form == "eat":
        return _do_eat(s, names[0])
    if form == "cook":
        return _do_cook(s, *names)
    if form in CUT_VERBS:
        return _do_cut(s, form, *names)
    raise AssertionError(form)


_required = lru_cache(maxsize=256)(lambda recipe: tuple(required_steps(recipe)))


def _satisfied(s: WorldState, step) -> bool:
    if step.kind == "take":
        return s.locations[step.ingredient] == INV
    item = s.spec.recipe.item(step.ingredient) if step.ingredient else None
    if step.kind == "cut":
        return s.cut[item.name] is item.target_cut
    if step.kind == "cook":
        return s.cook[item.name] is item.target_cook
    if step.kind == "prepare_meal":
        return s.meal_prepared
    return s.status is Status.WON


def _ruined(s: WorldState) -> bool:
    for it in s.spec.recipe.items:
        cut, cook = s.cut[it.name], s.cook[it.name]
        if cut is not CutState.UNCUT and cut is not it.target_cut:
            return True
        if cook is not CookState.RAW and cook is not it.target_cook:
            return True
        if s.locations[it.name] == VOID and not s.meal_prepared:
            return True
    return False


def step(state: WorldState, action: Action | None) -> tuple[WorldState, Feedback]:
    """Advance one turn. ``None`` stands for unparseable input."""
    if state.status is not Status.RUNNING:
        raise GameOver(f"episode already {state.status.value}")
    s = state.copy()
    s.turn += 1
    text = INVALID if action is None else _apply(s, action)

    delta = 0
    if s.status is Status.RUNNING and _ruined(s):
        s.status = Status.LOST
    for st in _required(s.spec.recipe):
        if st.key not in s.scored and _satisfied(s, st):
            s.scored = s.scored | {st.key}
            delta += st.points
    if delta:
        s.score += delta
        text = f"{text}\n{SCORE_LINE}"
    if s.status is Status.RUNNING and s.turn >= s.spec.max_turns:
        s.status = Status.LOST
    return s, Feedback(text, delta, s.status)


def step_text(state: WorldState, text: str) -> tuple[WorldState, Feedback]:
    try:
        action = parse(text)
    except ParseError:
        action = None
    return step(state, action)


# ---------------------------------------------------------------- episodes


class Policy(Protocol):
    def begin_episode(self, spec: GameSpec) -> None: ...

    def next_action(self, bundle: "PromptBundle") -> str: ...


@dataclass(frozen=True)
class TrajectoryStep:
    turn: int
    action: str | None
    feedback: str
    score_delta: int
    score: int
    status: Status

    def to_dict(self) -> dict:
        return {
            "turn": self.turn,
            "action": self.action,
            "feedback": self.feedback,
            "score_delta": self.score_delta,
            "score": self.score,
            "status": self.status.value,
        }


@dataclass
class Trajectory:
    spec: GameSpec
    steps: list[TrajectoryStep] = field(default_factory=list)
    diagnostic: str | None = None

    @property
    def observation(self) -> str:
        return self.steps[0].feedback

    @property
    def actions(self) -> list[str]:
        return [s.action for s in self.steps[1:]]

    def transcript(self) -> list[str]:
        """Alternating observation/feedback and action texts."""
        out = [self.steps[0].feedback]
        for s in self.steps[1:]:
            out += [s.action, s.feedback]
        return out

    def to_jsonl(self) -> str:
        header = {
            "format": TRAJECTORY_FORMAT,
            "templates": TEMPLATE_VERSION,
            "game_id": self.spec.game_id,
            "spec": self.spec.to_dict(),
            "diagnostic": self.diagnostic,
        }
        lines = [json.dumps(header, sort_keys=True, ensure_ascii=False)]
        lines += [json.dumps(s.to_dict(), sort_keys=True, ensure_ascii=False) for s in self.steps]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def from_jsonl(cls, text: str) -> "Trajectory":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("format") != TRAJECTORY_FORMAT:
            raise ValueError("not a trajectory file")
        head = rows[0]
        steps = [
            TrajectoryStep(r["turn"], r["action"], r["feedback"], r["score_delta"], r["score"], Status(r["status"]))
            for r in rows[1:]
        ]
        return cls(GameSpec.from_dict(head["spec"]), steps, head.get("diagnostic"))

    @classmethod
    def load(cls, path: str | Path) -> "Trajectory":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class EpisodeResult:
    points: int
    max_score: int
    success: bool
    turns: int
    status: Status
    diagnostic: str | None = None

    @property
    def normalized(self) -> float:
        return self.points / self.max_score

    @property
    def aborted(self) -> bool:
        return self.diagnostic is not None

    def to_dict(self) -> dict:
        return {
            "points": self.points,
            "max_score": self.max_score,
            "normalized": self.normalized,
            "success": self.success,
            "turns": self.turns,
            "status": self.status.value,
            "diagnostic": self.diagnostic,
        }


def run_episode(
    spec: GameSpec, policy: Policy, context: "PromptBundle | None" = None
) -> tuple[Trajectory, EpisodeResult]:
    """Play one episode. ``context`` carries the preamble/tips the policy sees."""
    from .policy import PolicyError, PromptBundle

    context = context or PromptBundle()
    state, obs = new_episode(spec)
    traj = Trajectory(spec, [TrajectoryStep(0, None, obs, 0, 0, state.status)])
    transcript = [obs]
    try:
        policy.begin_episode(spec)
        while state.status is Status.RUNNING:
            reply = policy.next_action(context.with_transcript(transcript))
            line = first_line(reply)
            state, fb = step_text(state, line)
            traj.steps.append(TrajectoryStep(state.turn, line, fb.text, fb.score_delta, state.score, state.status))
            transcript += [line, fb.text]
    except PolicyError as exc:
        log.warning("episode %s aborted: %s", spec.game_id, exc)
        traj.diagnostic = f"policy failure: {exc}"
        return traj, EpisodeResult(state.score, spec.max_score, False, state.turn, Status.LOST, traj.diagnostic)
    result = EpisodeResult(state.score, spec.max_score, state.status is Status.WON, state.turn, state.status)
    return traj, result


class ReplayMismatch(AssertionError):
    def __init__(self, turn: int, expected: str, actual: str):
        super().__init__(f"turn {turn}: expected {expected!r}, got {actual!r}")
        self.turn = turn


def replay(trajectory: Trajectory) -> tuple[Trajectory, EpisodeResult]:
    """Re-execute the recorded actions and verify every feedback text bitwise."""
    spec = trajectory.spec
    state, obs = new_episode(spec)
    if obs != trajectory.observation:
        raise ReplayMismatch(0, trajectory.observation, obs)
    out = Trajectory(spec, [TrajectoryStep(0, None, obs, 0, 0, state.status)])
    for rec in trajectory.steps[1:]:
        state, fb = step_text(state, rec.action)
        got = TrajectoryStep(state.turn, rec.action, fb.text, fb.score_delta, state.score, state.status)
        if got != rec:
            raise ReplayMismatch(rec.turn, rec.feedback, fb.text)
        out.steps.append(got)
    result = EpisodeResult(state.score, spec.max_score, state.status is Status.WON, state.turn, state.status)
    return out, result
