"""Domain vocabulary for the cooking games: rooms, entities, recipes and scoring."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .parser import Action, parse, render

SPEC_FORMAT = "cooktips-game/1"

DIRECTIONS = ("north", "east", "south", "west")
OPPOSITE = {"north": "south", "south": "north", "east": "west", "west": "east"}


class CutState(str, Enum):
    UNCUT = "uncut"
    SLICED = "sliced"
    DICED = "diced"
    CHOPPED = "chopped"

    def can_become(self, other: "CutState") -> bool:
        return self is CutState.UNCUT and other is not CutState.UNCUT


class CookState(str, Enum):
    RAW = "raw"
    FRIED = "fried"
    ROASTED = "roasted"
    BURNED = "burned"

    def can_become(self, other: "CookState") -> bool:
        if self is CookState.RAW:
            return other in (CookState.FRIED, CookState.ROASTED)
        if self in (CookState.FRIED, CookState.ROASTED):
            return other is CookState.BURNED
        return False


CUT_VERBS = {"slice": CutState.SLICED, "dice": CutState.DICED, "chop": CutState.CHOPPED}
CUT_VERB_OF = {v: k for k, v in CUT_VERBS.items()}
HEAT_SOURCES = {"stove": CookState.FRIED, "oven": CookState.ROASTED}
HEAT_SOURCE_OF = {v: k for k, v in HEAT_SOURCES.items()}
COOK_VERB_OF = {CookState.FRIED: "fry", CookState.ROASTED: "roast"}


class Kind(str, Enum):
    INGREDIENT = "ingredient"
    SHARP = "sharp"
    BOOK = "book"
    CONTAINER = "container"
    SUPPORTER = "supporter"
    HEAT_SOURCE = "heat_source"

    @property
    def portable(self) -> bool:
        return self in (Kind.INGREDIENT, Kind.SHARP, Kind.BOOK)


@dataclass(frozen=True)
class LevelStats:
    ingredients: int
    locations: int
    points: int
    cook: bool
    cut: bool
    open: bool


LEVELS = {
    0: LevelStats(1, 1, 3, cook=False, cut=False, open=True),
    1: LevelStats(1, 1, 4, cook=False, cut=True, open=True),
    2: LevelStats(1, 1, 5, cook=True, cut=True, open=True),
    3: LevelStats(1, 9, 3, cook=False, cut=False, open=True),
    4: LevelStats(3, 6, 11, cook=True, cut=True, open=True),
}


@dataclass(frozen=True)
class RecipeItem:
    name: str
    cut: CutState | None = None
    cook: CookState | None = None

    def __post_init__(self):
        if self.cook is CookState.BURNED or self.cook is CookState.RAW:
            raise ValueError("a recipe may only ask for fried or roasted")
        if self.cut is CutState.UNCUT:
            raise ValueError("use None for ingredients that stay uncut")

    @property
    def target_cut(self) -> CutState:
        return self.cut or CutState.UNCUT

    @property
    def target_cook(self) -> CookState:
        return self.cook or CookState.RAW


@dataclass(frozen=True)
class Recipe:
    items: tuple[RecipeItem, ...]

    def item(self, name: str) -> RecipeItem | None:
        for it in self.items:
            if it.name == name:
                return it
        return None

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(it.name for it in self.items)

    def directions(self) -> list[str]:
        out = []
        for it in self.items:
            if it.cut:
                out.append(f"{CUT_VERB_OF[it.cut]} the {it.name}")
            if it.cook:
                out.append(f"{COOK_VERB_OF[it.cook]} the {it.name}")
        out.append("prepare meal")
        return out


@dataclass(frozen=True)
class ScoredStep:
    kind: str  # take | cut | cook | prepare_meal | eat_meal
    ingredient: str | None = None
    points: int = 1

    @property
    def key(self) -> str:
        return f"{self.kind}:{self.ingredient}" if self.ingredient else self.kind


def required_steps(recipe: Recipe) -> list[ScoredStep]:
    steps = []
    for it in recipe.items:
        steps.append(ScoredStep("take", it.name))
        if it.cut is not None:
            steps.append(ScoredStep("cut", it.name))
        if it.cook is not None:
            steps.append(ScoredStep("cook", it.name))
    steps.append(ScoredStep("prepare_meal"))
    steps.append(ScoredStep("eat_meal"))
    return steps


@dataclass(frozen=True)
class Exit:
    room: str
    door: str | None = None


@dataclass(frozen=True)
class Room:
    name: str
    exits: tuple[tuple[str, Exit], ...] = ()

    def exit(self, direction: str) -> Exit | None:
        for d, ex in self.exits:
            if d == direction:
                return ex
        return None


@dataclass(frozen=True)
class RoomMap:
    rooms: tuple[Room, ...]
    kitchen: str

    def room(self, name: str) -> Room:
        for r in self.rooms:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.rooms)

    @property
    def doors(self) -> tuple[str, ...]:
        seen: list[str] = []
        for r in self.rooms:
            for _, ex in r.exits:
                if ex.door and ex.door not in seen:
                    seen.append(ex.door)
        return tuple(seen)

    def route(self, start: str, goal: str) -> list[tuple[str, str]]:
        """Breadth-first route as ``(direction, room_entered)`` pairs."""
        parent: dict[str, tuple[str, str] | None] = {start: None}
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            if cur == goal:
                break
            for d, ex in self.room(cur).exits:
                if ex.room not in parent:
                    parent[ex.room] = (cur, d)
                    queue.append(ex.room)
        if goal not in parent:
            raise ValueError(f"{goal!r} unreachable from {start!r}")
        path = []
        node = goal
        while parent[node] is not None:
            prev, d = parent[node]
            path.append((d, node))
            node = prev
        return path[::-1]


@dataclass(frozen=True)
class Entity:
    name: str
    kind: Kind
    location: str  # "room:<name>" | "in:<container>" | "on:<supporter>"


@dataclass(frozen=True)
class GameSpec:
    level: int
    seed: int
    rng_algorithm: str
    map: RoomMap
    recipe: Recipe
    entities: tuple[Entity, ...]
    start_room: str
    max_score: int
    max_turns: int
    walkthrough: tuple[Action, ...] = field(default=())

    @property
    def game_id(self) -> str:
        return f"level{self.level}-seed{self.seed}"

    def entity(self, name: str) -> Entity:
        for e in self.entities:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "format": SPEC_FORMAT,
            "level": self.level,
            "seed": self.seed,
            "rng_algorithm": self.rng_algorithm,
            "kitchen": self.map.kitchen,
            "start_room": self.start_room,
            "rooms": [
                {
                    "name": r.name,
                    "exits": [
                        {"direction": d, "room": ex.room, "door": ex.door} for d, ex in r.exits
                    ],
                }
                for r in self.map.rooms
            ],
            "recipe": [
                {
                    "name": it.name,
                    "cut": it.cut.value if it.cut else None,
                    "cook": it.cook.value if it.cook else None,
                }
                for it in self.recipe.items
            ],
            "entities": [
                {"name": e.name, "kind": e.kind.value, "location": e.location}
                for e in self.entities
            ],
            "max_score": self.max_score,
            "max_turns": self.max_turns,
            "walkthrough": [render(a) for a in self.walkthrough],
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "GameSpec":
        if d.get("format") != SPEC_FORMAT:
            raise ValueError(f"not a game spec (format={d.get('format')!r})")
        rooms = tuple(
            Room(
                r["name"],
                tuple((x["direction"], Exit(x["room"], x["door"])) for x in r["exits"]),
            )
            for r in d["rooms"]
        )
        recipe = Recipe(
            tuple(
                RecipeItem(
                    it["name"],
                    CutState(it["cut"]) if it["cut"] else None,
                    CookState(it["cook"]) if it["cook"] else None,
                )
                for it in d["recipe"]
            )
        )
        return cls(
            level=d["level"],
            seed=d["seed"],
            rng_algorithm=d["rng_algorithm"],
            map=RoomMap(rooms, d["kitchen"]),
            recipe=recipe,
            entities=tuple(Entity(e["name"], Kind(e["kind"]), e["location"]) for e in d["entities"]),
            start_room=d["start_room"],
            max_score=d["max_score"],
            max_turns=d["max_turns"],
            walkthrough=tuple(parse(a) for a in d["walkthrough"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "GameSpec":
        return cls.from_dict(json.loads(text))


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
