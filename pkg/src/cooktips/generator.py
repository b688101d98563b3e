"""Seeded procedural generation of cooking games and their expert walkthroughs."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .model import (
    CUT_VERB_OF,
    DIRECTIONS,
    HEAT_SOURCE_OF,
    LEVELS,
    OPPOSITE,
    CookState,
    CutState,
    Entity,
    Exit,
    GameSpec,
    Kind,
    Recipe,
    RecipeItem,
    Room,
    RoomMap,
    required_steps,
)
from .parser import Action
from .rng import RNG_ALGORITHM_ID, SplitMix64

KITCHEN = "kitchen"
KITCHEN_FIXTURES = (
    Entity("counter", Kind.SUPPORTER, f"room:{KITCHEN}"),
    Entity("fridge", Kind.CONTAINER, f"room:{KITCHEN}"),
    Entity("stove", Kind.HEAT_SOURCE, f"room:{KITCHEN}"),
    Entity("oven", Kind.HEAT_SOURCE, f"room:{KITCHEN}"),
)
COOKBOOK = Entity("cookbook", Kind.BOOK, "on:counter")
KNIFE = Entity("knife", Kind.SHARP, "on:counter")

_CUTS = (CutState.SLICED, CutState.DICED, CutState.CHOPPED)
_COOKS = (CookState.FRIED, CookState.ROASTED)
_GRIDS = {6: (2, 3), 9: (3, 3)}


@lru_cache(maxsize=1)
def vocabulary() -> dict:
    text = resources.files("cooktips.data").joinpath("vocab.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class GeneratorConfig:
    level: int
    seed: int
    rng_algorithm_id: str = RNG_ALGORITHM_ID


def generate(config: GeneratorConfig) -> GameSpec:
    if config.level not in LEVELS:
        raise ValueError(f"level must be in 0..4, got {config.level}")
    if config.seed < 0:
        raise ValueError("seed must be non-negative")
    if config.rng_algorithm_id != RNG_ALGORITHM_ID:
        raise ValueError(f"unsupported rng algorithm {config.rng_algorithm_id!r}")
    stats = LEVELS[config.level]
    vocab = vocabulary()
    rng = SplitMix64.for_game(config.level, config.seed)

    room_map = _build_map(rng, stats.locations, vocab)
    others = [n for n in room_map.names if n != KITCHEN]
    start = KITCHEN if config.level <= 2 else rng.choice(others)

    furniture = rng.sample(vocab["furniture"], len(others))
    entities = list(KITCHEN_FIXTURES)
    holder_of_room: dict[str, Entity] = {}
    for room, f in zip(others, furniture):
        ent = Entity(f["name"], Kind(f["kind"]), f"room:{room}")
        entities.append(ent)
        holder_of_room[room] = ent
    entities += [COOKBOOK, KNIFE]

    names = rng.sample(vocab["ingredients"], stats.ingredients)
    items = tuple(
        RecipeItem(
            name,
            rng.choice(_CUTS) if stats.cut else None,
            rng.choice(_COOKS) if stats.cook else None,
        )
        for name in names
    )
    recipe = Recipe(items)

    for i, name in enumerate(names):
        # the first ingredient always starts in the closed fridge
        if i == 0:
            loc = "in:fridge"
        else:
            room = rng.choice(room_map.names)
            if room == KITCHEN:
                loc = rng.choice(("in:fridge", "on:counter", f"room:{KITCHEN}"))
            else:
                holder = holder_of_room[room]
                prep = "in" if holder.kind is Kind.CONTAINER else "on"
                loc = rng.choice((f"room:{room}", f"{prep}:{holder.name}"))
        entities.append(Entity(name, Kind.INGREDIENT, loc))

    spec = GameSpec(
        level=config.level,
        seed=config.seed,
        rng_algorithm=RNG_ALGORITHM_ID,
        map=room_map,
        recipe=recipe,
        entities=tuple(entities),
        start_room=start,
        max_score=len(required_steps(recipe)),
        max_turns=0,
    )
    return _finish(spec)


def custom_kitchen_game(items: list[RecipeItem], seed: int = 0) -> GameSpec:
    """A single-room game with a hand-picked recipe, all ingredients in the fridge."""
    level = 2 if any(it.cook for it in items) else 1 if any(it.cut for it in items) else 0
    recipe = Recipe(tuple(items))
    entities = list(KITCHEN_FIXTURES) + [COOKBOOK, KNIFE]
    entities += [Entity(it.name, Kind.INGREDIENT, "in:fridge") for it in items]
    spec = GameSpec(
        level=level,
        seed=seed,
        rng_algorithm=RNG_ALGORITHM_ID,
        map=RoomMap((Room(KITCHEN),), KITCHEN),
        recipe=recipe,
        entities=tuple(entities),
        start_room=KITCHEN,
        max_score=len(required_steps(recipe)),
        max_turns=0,
    )
    return _finish(spec)


def _finish(spec: GameSpec) -> GameSpec:
    steps = walkthrough(spec)
    return replace(spec, walkthrough=tuple(steps), max_turns=max(30, 5 * len(steps)))


def _build_map(rng: SplitMix64, n: int, vocab: dict) -> RoomMap:
    if n == 1:
        return RoomMap((Room(KITCHEN),), KITCHEN)
    rows, cols = _GRIDS[n]
    cells = [(r, c) for r in range(rows) for c in range(cols)]

    def neighbours(cell):
        r, c = cell
        out = []
        for d, (dr, dc) in zip(DIRECTIONS, ((-1, 0), (0, 1), (1, 0), (0, -1))):
            nb = (r + dr, c + dc)
            if 0 <= nb[0] < rows and 0 <= nb[1] < cols:
                out.append((d, nb))
        return out

    # Wilson's algorithm: loop-erased random walks give a uniform spanning tree
    in_tree = {rng.choice(cells)}
    edges: list[tuple[tuple[int, int], str, tuple[int, int]]] = []
    for cell in cells:
        if cell in in_tree:
            continue
        nxt: dict[tuple[int, int], tuple[str, tuple[int, int]]] = {}
        cur = cell
        while cur not in in_tree:
            nxt[cur] = rng.choice(neighbours(cur))
            cur = nxt[cur][1]
        cur = cell
        while cur not in in_tree:
            d, nb = nxt[cur]
            edges.append((cur, d, nb))
            in_tree.add(cur)
            cur = nb

    kitchen_cell = rng.choice(cells)
    names = iter(rng.sample(vocab["rooms"], n - 1))
    label = {cell: KITCHEN if cell == kitchen_cell else next(names) for cell in cells}

    doors = rng.sample(vocab["doors"], len(vocab["doors"]))
    exits: dict[tuple[int, int], dict[str, Exit]] = {cell: {} for cell in cells}
    for a, d, b in sorted(edges):
        door = doors.pop() if rng.chance(1, 3) else None
        exits[a][d] = Exit(label[b], door)
        exits[b][OPPOSITE[d]] = Exit(label[a], door)

    rooms = tuple(
        Room(label[cell], tuple((d, exits[cell][d]) for d in DIRECTIONS if d in exits[cell]))
        for cell in cells
    )
    return RoomMap(rooms, KITCHEN)


def room_of(spec: GameSpec, location: str) -> str:
    prep, _, ref = location.partition(":")
    if prep == "room":
        return ref
    return room_of(spec, spec.entity(ref).location)


def _pickup(spec: GameSpec, name: str, opened: set[str]) -> list[Action]:
    prep, _, ref = spec.entity(name).location.partition(":")
    if prep == "room":
        return [Action("take", (name,))]
    acts = []
    if prep == "in" and ref not in opened:
        opened.add(ref)
        acts.append(Action("open", (ref,)))
    acts.append(Action("take_from", (name, ref)))
    return acts


def _travel(spec: GameSpec, start: str, stops: list[str], opened: set[str]) -> tuple[list[list[Action]], str]:
    legs = []
    here = start
    for stop in stops:
        leg = []
        for d, room in spec.map.route(here, stop):
            door = spec.map.room(here).exit(d).door
            if door and door not in opened:
                opened.add(door)
                leg.append(Action("open", (door,)))
            leg.append(Action("go", (d,)))
            here = room
        legs.append(leg)
    return legs, here


def walkthrough(spec: GameSpec) -> list[Action]:
    """Expert action sequence winning ``spec``; route order minimises travel cost."""
    kitchen = spec.map.kitchen
    by_room: dict[str, list[str]] = {}
    for name in spec.recipe.names:
        by_room.setdefault(room_of(spec, spec.entity(name).location), []).append(name)
    away = [r for r in spec.map.names if r in by_room and r != kitchen]

    best: tuple[int, tuple[str, ...]] | None = None
    for order in itertools.permutations(away):
        legs, _ = _travel(spec, spec.start_room, [*order, kitchen], set())
        cost = sum(len(leg) for leg in legs)
        if best is None or cost < best[0]:
            best = (cost, order)
    order = best[1] if best else ()

    opened: set[str] = set()
    legs, _ = _travel(spec, spec.start_room, [*order, kitchen], opened)
    acts: list[Action] = []
    for leg, room in zip(legs, [*order, kitchen]):
        acts += leg
        if room == kitchen:
            acts.append(Action("examine", ("cookbook",)))
        for name in by_room.get(room, []):
            acts += _pickup(spec, name, opened)

    needs_knife = any(it.cut for it in spec.recipe.items)
    if needs_knife:
        acts += _pickup(spec, KNIFE.name, opened)
    for it in spec.recipe.items:
        if it.cut:
            acts.append(Action(CUT_VERB_OF[it.cut], (it.name, KNIFE.name)))
        if it.cook:
            acts.append(Action("cook", (it.name, HEAT_SOURCE_OF[it.cook])))
    acts.append(Action("prepare_meal"))
    acts.append(Action("eat", ("meal",)))
    return acts


def generate_suite(level: int, count: int = 20, seed_base: int = 0) -> list[GameSpec]:
    return [generate(GeneratorConfig(level, seed_base + i)) for i in range(count)]


def write_suite(specs: list[GameSpec], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, spec in enumerate(specs):
        path = directory / f"game_{i:03d}_{spec.game_id}.json"
        path.write_text(spec.to_json(), encoding="utf-8")
        paths.append(path)
    return paths


def load_spec(path: str | Path) -> GameSpec:
    return GameSpec.from_json(Path(path).read_text(encoding="utf-8"))


def load_suite(directory: str | Path) -> list[GameSpec]:
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise FileNotFoundError(f"no game files in {directory}")
    return [load_spec(p) for p in paths]
