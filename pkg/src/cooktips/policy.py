"""Policies that turn the running prompt into one action text per turn.

Backends: a remote chat-completion endpoint, the expert walkthrough, replay of
stored actions, a random grammar-valid sampler, a scripted response queue
(offline tests and CI) and an interactive human REPL.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .model import DIRECTIONS, GameSpec
from .parser import FORMS, Action, action_list_text, render
from .rng import SplitMix64

log = logging.getLogger(__name__)

BACKEND_KINDS = ("remote_chat", "expert", "replay", "random_valid", "human_repl", "scripted")
DEFAULT_API_KEY_ENV = "COOKTIPS_API_KEY"

SYSTEM_PREAMBLE = (
    "You are an agent playing a text-based cooking game. These are all the actions "
    "you may use (the ActionList):\n"
    f"{action_list_text()}\n"
    "Use the game description I send you to choose exactly one action from the "
    "ActionList per turn, written exactly in that call syntax, then wait for my reply. "
    "The description of the starting state follows."
)


class PolicyError(RuntimeError):
    """A backend could not produce a reply (transport, exhaustion, misuse)."""


@dataclass(frozen=True)
class PromptBundle:
    system_preamble: str = SYSTEM_PREAMBLE
    tips: tuple[str, ...] = ()
    failed_actions: tuple[tuple[str, ...], ...] = ()
    expert_walkthrough: tuple[str, ...] = ()
    past_trajectories: tuple[tuple[str, ...], ...] = ()
    transcript: tuple[str, ...] = ()
    instruction: str | None = None
    char_budget: int | None = None

    def with_transcript(self, transcript: Sequence[str]) -> "PromptBundle":
        return replace(self, transcript=tuple(transcript))

    def _fixed_messages(self) -> list[dict]:
        msgs = [{"role": "system", "content": self.system_preamble}]
        if self.tips:
            body = "\n".join(f"{i}. {t}" for i, t in enumerate(self.tips, 1))
            msgs.append({"role": "system", "content": f"Tips from previous experience:\n{body}"})
        if self.failed_actions:
            parts = ["Actions from your previous attempts that led to failure:"]
            for i, acts in enumerate(self.failed_actions, 1):
                parts.append(f"Attempt {i}:")
                parts += [f"  {a}" for a in acts]
            msgs.append({"role": "system", "content": "\n".join(parts)})
        if self.expert_walkthrough:
            body = "\n".join(f"  {a}" for a in self.expert_walkthrough)
            msgs.append({"role": "system", "content": f"Actions of an expert who won this game:\n{body}"})
        for i, traj in enumerate(self.past_trajectories, 1):
            msgs.append({"role": "system", "content": f"Past trajectory {i}:\n" + "\n".join(traj)})
        return msgs

    def messages(self) -> list[dict]:
        """Ordered role-tagged messages; oldest transcript turns go first when over budget."""
        fixed = self._fixed_messages()
        tail = [{"role": "user", "content": self.instruction}] if self.instruction else []
        transcript = list(self.transcript)

        def size(trans):
            return sum(len(m["content"]) for m in fixed + tail) + sum(len(t) for t in trans)

        if self.char_budget is not None:
            while len(transcript) > 1 and size(transcript) > self.char_budget:
                transcript = transcript[2:]
        turns = [
            {"role": "user" if i % 2 == 0 else "assistant", "content": text}
            for i, text in enumerate(transcript)
        ]
        return fixed + turns + tail

    def serialize(self) -> str:
        return json.dumps(self.messages(), ensure_ascii=False, sort_keys=True)


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    endpoint: str | None = None
    model_name: str | None = None
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    api_key_env_var: str = DEFAULT_API_KEY_ENV
    backoff: float = 0.5
    max_in_flight: int = 4
    char_budget: int | None = 24000
    log_path: str | None = None
    script: tuple[str, ...] = ()
    replay_actions: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend {self.kind!r}; choose from {', '.join(BACKEND_KINDS)}")
        if self.kind == "remote_chat" and not (self.endpoint and self.model_name):
            raise ValueError("remote_chat backend needs both an endpoint and a model name")
        if self.max_retries < 0 or self.timeout <= 0:
            raise ValueError("timeout must be positive and retries non-negative")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["script"] = list(self.script)
        d["replay_actions"] = list(self.replay_actions)
        return d


# ---------------------------------------------------------------- transport

_slots: dict[tuple[str, int], threading.BoundedSemaphore] = {}
_slots_lock = threading.Lock()
_log_lock = threading.Lock()


def _slot(config: BackendConfig) -> threading.BoundedSemaphore:
    key = (config.endpoint or "", config.max_in_flight)
    with _slots_lock:
        if key not in _slots:
            _slots[key] = threading.BoundedSemaphore(config.max_in_flight)
        return _slots[key]


def _redact(text: str, secret: str | None) -> str:
    return text.replace(secret, "[REDACTED]") if secret else text


def _log_exchange(config: BackendConfig, secret: str, record: dict) -> None:
    if not config.log_path:
        return
    line = _redact(json.dumps(record, ensure_ascii=False, sort_keys=True), secret)
    with _log_lock:
        path = Path(config.log_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")


def _is_transient(status: int) -> bool:
    return status in (408, 409, 425, 429) or status >= 500


def complete(messages: list[dict], config: BackendConfig, *, sleep: Callable[[float], None] = time.sleep) -> str:
    """POST one chat-completion request, retrying transient failures with backoff."""
    if config.kind != "remote_chat":
        raise PolicyError(f"complete() needs a remote_chat backend, not {config.kind}")
    secret = os.environ.get(config.api_key_env_var)
    if not secret:
        raise PolicyError(f"environment variable {config.api_key_env_var} is not set")
    payload = {"model": config.model_name, "messages": messages, "temperature": config.temperature}
    headers = {"Authorization": f"Bearer {secret}"}

    last_error = "no attempt made"
    for attempt in range(config.max_retries + 1):
        if attempt:
            sleep(config.backoff * 2 ** (attempt - 1))
        try:
            with _slot(config):
                resp = httpx.post(config.endpoint, json=payload, headers=headers, timeout=config.timeout)
        except httpx.HTTPError as exc:
            last_error = f"{type(exc).__name__}: {exc}"
            _log_exchange(config, secret, {"attempt": attempt + 1, "request": payload, "error": last_error})
            continue
        _log_exchange(
            config, secret,
            {"attempt": attempt + 1, "request": payload, "status": resp.status_code, "response": resp.text},
        )
        if _is_transient(resp.status_code):
            last_error = f"HTTP {resp.status_code}"
            continue
        if resp.status_code >= 400:
            raise PolicyError(f"endpoint rejected request: HTTP {resp.status_code}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise PolicyError(f"malformed response body: {exc!r}") from exc
        if not isinstance(content, str):
            raise PolicyError("malformed response body: content is not text")
        return content
    raise PolicyError(f"gave up after {config.max_retries + 1} attempts ({last_error})")


# ---------------------------------------------------------------- backends


class BasePolicy:
    kind = "base"

    def begin_episode(self, spec: GameSpec) -> None:
        pass

    def next_action(self, bundle: PromptBundle) -> str:
        raise NotImplementedError

    def generate(self, bundle: PromptBundle) -> str:
        """Free-form reply (tip writing, aggregation)."""
        raise PolicyError(f"the {self.kind} backend cannot write tips")


class ExpertPolicy(BasePolicy):
    kind = "expert"

    def __init__(self):
        self._actions: tuple[Action, ...] = ()
        self._k = 0

    def begin_episode(self, spec):
        self._actions = spec.walkthrough
        self._k = 0

    def next_action(self, bundle):
        if self._k >= len(self._actions):
            raise PolicyError("expert walkthrough exhausted")
        action = self._actions[self._k]
        self._k += 1
        return render(action)


class ReplayPolicy(BasePolicy):
    kind = "replay"

    def __init__(self, actions: Sequence[str]):
        self.actions = list(actions)
        self._k = 0

    def begin_episode(self, spec):
        self._k = 0

    def next_action(self, bundle):
        if self._k >= len(self.actions):
            raise PolicyError("replay exhausted")
        self._k += 1
        return self.actions[self._k - 1]


class RandomValidPolicy(BasePolicy):
    """Samples grammar-valid commands over the game's entity names."""

    kind = "random_valid"

    def __init__(self, seed: int = 0):
        self.rng = SplitMix64(seed)
        self.words: list[str] = ["meal"]

    def begin_episode(self, spec):
        self.words = [e.name for e in spec.entities] + list(spec.map.doors) + ["meal"]

    def next_action(self, bundle):
        form = self.rng.choice(list(FORMS))
        arity = FORMS[form][0]
        if form == "go":
            args = (self.rng.choice(DIRECTIONS),)
        else:
            args = tuple(self.rng.choice(self.words) for _ in range(arity))
        return render(Action(form, args))


class ScriptedPolicy(BasePolicy):
    """Replies from a fixed queue shared by action and tip requests."""

    kind = "scripted"

    def __init__(self, responses: Sequence[str]):
        self.responses = list(responses)
        self.calls: list[PromptBundle] = []

    def _pop(self, bundle):
        self.calls.append(bundle)
        if not self.responses:
            raise PolicyError("script exhausted")
        return self.responses.pop(0)

    def next_action(self, bundle):
        return self._pop(bundle)

    def generate(self, bundle):
        return self._pop(bundle)


class HumanReplPolicy(BasePolicy):
    kind = "human_repl"

    def __init__(self, input_fn: Callable[[str], str] = input, output_fn: Callable[[str], None] = print):
        self.input_fn = input_fn
        self.output_fn = output_fn

    def _read(self, prompt: str) -> str:
        try:
            return self.input_fn(prompt)
        except EOFError as exc:
            raise PolicyError("input closed") from exc

    def next_action(self, bundle):
        if bundle.transcript:
            self.output_fn(bundle.transcript[-1])
        return self._read("> ")

    def generate(self, bundle):
        if bundle.instruction:
            self.output_fn(bundle.instruction)
        lines = []
        while True:
            line = self._read("tips> ")
            if not line.strip():
                return "\n".join(lines)
            lines.append(line)


class RemoteChatPolicy(BasePolicy):
    kind = "remote_chat"

    def __init__(self, config: BackendConfig, sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.sleep = sleep

    def next_action(self, bundle):
        return complete(bundle.messages(), self.config, sleep=self.sleep)

    def generate(self, bundle):
        return complete(bundle.messages(), self.config, sleep=self.sleep)


def make_policy(config: BackendConfig, **kwargs) -> BasePolicy:
    if config.kind == "expert":
        return ExpertPolicy()
    if config.kind == "replay":
        return ReplayPolicy(config.replay_actions)
    if config.kind == "random_valid":
        return RandomValidPolicy(config.seed)
    if config.kind == "scripted":
        return ScriptedPolicy(config.script)
    if config.kind == "human_repl":
        return HumanReplPolicy(**kwargs)
    return RemoteChatPolicy(config, **kwargs)


def base_bundle(config: BackendConfig, **fields) -> PromptBundle:
    return PromptBundle(char_budget=config.char_budget, **fields)
