"""Text command grammar: ``name(arg1, arg2)`` calls over a fixed action list."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

log = logging.getLogger(__name__)

# form -> (arity, argument labels, help text); order is the order shown to agents
FORMS: dict[str, tuple[int, tuple[str, ...], str]] = {
    "look": (0, (), "describe the current room"),
    "goal": (0, (), "print the goal of this game"),
    "inventory": (0, (), "print player's inventory"),
    "go": (1, ("direction",), "move the player north, east, south, or west"),
    "examine": (1, ("item",), "examine something more closely"),
    "eat": (1, ("food",), "eat edible food"),
    "open": (1, ("item",), "open a door or a container"),
    "close": (1, ("item",), "close a door or a container"),
    "drop": (1, ("item",), "drop an item on the floor"),
    "take": (1, ("item",), "take an item that is on the floor"),
    "put": (2, ("item", "supporter"), "place an item on a supporter"),
    "take_from": (2, ("item", "container"), "take an item from a container or a supporter"),
    "insert": (2, ("item", "container"), "place an item into a container"),
    "lock": (2, ("item", "key"), "lock a door or a container with a key"),
    "unlock": (2, ("item", "key"), "unlock a door or a container with a key"),
    "cook": (2, ("food", "heat_source"), "cook cookable food with something providing heat"),
    "slice": (2, ("food", "sharp_object"), "slice cuttable food with something sharp"),
    "chop": (2, ("food", "sharp_object"), "chop cuttable food with something sharp"),
    "dice": (2, ("food", "sharp_object"), "dice cuttable food with something sharp"),
    "prepare_meal": (0, (), "combine ingredients from inventory into a meal"),
}

# zero-arg commands also accepted without parentheses
_LOOSE = {
    "look": "look",
    "goal": "goal",
    "inventory": "inventory",
    "prepare meal": "prepare_meal",
    "prepare_meal": "prepare_meal",
}

_CALL = re.compile(r"^\s*([A-Za-z_]+)\s*\((.*)\)\s*$", re.DOTALL)
_FORBIDDEN_IN_ARG = re.compile(r"[(),\n\r]")


class ParseError(ValueError):
    """Text that is not a well-formed command. The game answers "Invalid action."."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class Action:
    form: str
    args: tuple[str, ...] = ()

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown action form {self.form!r}")
        arity = FORMS[self.form][0]
        if len(self.args) != arity:
            raise ValueError(f"{self.form} takes {arity} argument(s), got {len(self.args)}")
        for arg in self.args:
            if not arg or arg != arg.strip() or _FORBIDDEN_IN_ARG.search(arg):
                raise ValueError(f"invalid argument {arg!r}")

    def __str__(self) -> str:
        return render(self)


def render(action: Action) -> str:
    return f"{action.form}({', '.join(action.args)})"


def parse(text: str) -> Action:
    """Parse one command. Entity names are returned verbatim (only trimmed)."""
    loose = " ".join(text.split()).lower()
    if loose in _LOOSE:
        return Action(_LOOSE[loose])

    m = _CALL.match(text)
    if not m:
        raise ParseError("malformed command")
    form = m.group(1).lower()
    if form not in FORMS:
        raise ParseError(f"unknown action {form!r}")
    arity = FORMS[form][0]
    body = m.group(2)
    if "(" in body or ")" in body or "\n" in body or "\r" in body:
        raise ParseError("malformed arguments")
    args = tuple(a.strip() for a in body.split(",")) if body.strip() else ()
    if len(args) != arity:
        raise ParseError(f"{form} takes {arity} argument(s), got {len(args)}")
    if any(not a for a in args):
        raise ParseError("empty argument")
    return Action(form, args)


def first_line(reply: str) -> str:
    """The first non-empty line of a model reply; the rest is discarded."""
    lines = reply.splitlines()
    for i, line in enumerate(lines):
        if line.strip():
            rest = [x for x in lines[i + 1:] if x.strip()]
            if rest:
                log.info("discarding %d extra reply line(s): %r", len(rest), rest)
            return line.strip()
    return ""


def action_list_text() -> str:
    lines = []
    for form, (_, labels, help_text) in FORMS.items():
        lines.append(f"{form}({', '.join(labels)}) # {help_text}")
    return "\n".join(lines)
