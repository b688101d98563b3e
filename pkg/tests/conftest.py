from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cooktips.generator import custom_kitchen_game  # noqa: E402
from cooktips.model import CookState, CutState, RecipeItem  # noqa: E402

# the four trials of the purple-potato log, reduced to the grammar
SETUP = ["examine(cookbook)", "open(fridge)", "take_from(purple potato, fridge)", "take_from(knife, counter)",
         "dice(purple potato, knife)"]
TRIAL_TIPS = [
    "Tips to win the game next time:\n"
    "1. You should try roast the potato next time instead of cook purple potato with stove "
    "after dicing the purple potato;",
    "Tips to win the game next time:\n"
    "1. You should try  cook purple potato with stove  next time after you have dicing the purple "
    "potato, but make sure to use a different heat setting or method to avoid frying the purple potato;",
    "Tips to win the game next time:\n"
    "1. You should try cook purple potato with oven next time instead of cook purple potato with "
    "stove, as the recipe suggests roasting the purple potato rather than frying it;",
]


def four_trial_script() -> list[str]:
    return (
        SETUP + ["cook(purple potato, stove)", TRIAL_TIPS[0]]
        + SETUP + ["roast the potato", "cook(purple potato, stove)", TRIAL_TIPS[1]]
        + SETUP + ["cook(purple potato, stove)", TRIAL_TIPS[2]]
        + SETUP + ["cook(purple potato, oven)", "prepare_meal()", "eat(meal)"]
    )


@pytest.fixture
def potato_spec():
    return custom_kitchen_game([RecipeItem("purple potato", CutState.DICED, CookState.ROASTED)])


class StubServer:
    """Chat-completion endpoint answering from a queue of (status, body) pairs."""

    def __init__(self):
        self.replies: list[tuple[int, str]] = []
        self.requests: list[dict] = []
        self.default: tuple[int, str] | None = None
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length).decode()
                stub.requests.append({"headers": dict(self.headers), "body": json.loads(body)})
                status, text = stub.replies.pop(0) if stub.replies else stub.default
                data = text.encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1/chat/completions"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    @staticmethod
    def completion(text: str) -> tuple[int, str]:
        return 200, json.dumps({"choices": [{"message": {"role": "assistant", "content": text}}]})

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_server():
    server = StubServer()
    yield server
    server.close()


@pytest.fixture
def api_key(monkeypatch):
    key = "sk-test-0123456789abcdef"
    monkeypatch.setenv("COOKTIPS_API_KEY", key)
    return key


# ---------------------------------------------------------------- acceptance summary

_criteria: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if report.failed:
        _criteria[name] = "FAIL"
    elif report.when == "call" and report.passed:
        _criteria.setdefault(name, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _criteria.items():
        terminalreporter.write_line(f"{verdict}  {name}")
