import io
import json

import pytest

from conftest import SETUP, TRIAL_TIPS
from cooktips import __version__
from cooktips.cli import main
from cooktips.generator import GeneratorConfig, custom_kitchen_game, generate
from cooktips.model import CookState, CutState, RecipeItem
from cooktips.tips import Provenance, TipSet, builtin_tips, extract_tips, render_tips


def run(tmp_path, *argv, name="run"):
    return main([*argv, "--run-dir", str(tmp_path / name)])


def test_gen_then_replay_level4(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert run(tmp_path, "gen", "--level", "4", "--seed", "7", "--out", str(out)) == 0
    assert out.read_text() == generate(GeneratorConfig(4, 7)).to_json()
    assert run(tmp_path, "replay", "--spec", str(out), name="r") == 0
    assert "status Won score 11/11" in capsys.readouterr().out
    traj = tmp_path / "r" / "level4-seed7_walkthrough.jsonl"
    assert run(tmp_path, "replay", "--trajectory", str(traj), name="r2") == 0
    assert "bitwise identical" in capsys.readouterr().out


def test_tampered_trajectory_is_a_runtime_error(tmp_path, capsys):
    out = tmp_path / "g.json"
    run(tmp_path, "gen", "--level", "1", "--seed", "2", "--out", str(out))
    run(tmp_path, "replay", "--spec", str(out), name="r")
    traj = tmp_path / "r" / "level1-seed2_walkthrough.jsonl"
    traj.write_text(traj.read_text().replace("You take", "You grab"))
    assert run(tmp_path, "replay", "--trajectory", str(traj), name="r2") == 2


def test_gen_suite_and_eval_with_human_tips(tmp_path, capsys):
    suite = tmp_path / "suite"
    assert run(tmp_path, "gen", "--level", "2", "--suite", "--count", "5", "--out", str(suite)) == 0
    assert len(list(suite.glob("*.json"))) == 5
    code = run(tmp_path, "eval", "--tips", "builtin:human", "--backend", "expert", "--level", "2",
               "--suite", str(suite), name="ev")
    assert code == 0
    report = json.loads((tmp_path / "ev" / "report.json").read_text())
    assert report["per_level"]["2"]["success_rate"] == 1.0
    assert report["run_metadata"]["tips"] == list(builtin_tips("human").texts)
    for name in ("report.csv", "report.png", "manifest.json"):
        assert (tmp_path / "ev" / name).exists()
    assert len(list((tmp_path / "ev" / "trajectories").glob("*.jsonl"))) == 5
    assert "level 2: normalized_points=1.000 success_rate=1.000" in capsys.readouterr().out


def test_manifest_records_resolved_config(tmp_path):
    run(tmp_path, "eval", "--level", "0", "--count", "2", "--no-plot", name="ev")
    manifest = json.loads((tmp_path / "ev" / "manifest.json").read_text())
    assert manifest["version"] == __version__
    assert manifest["command"] == "eval"
    assert manifest["config"]["count"] == 2 and manifest["config"]["backend"] == "expert"


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"level": 1, "count": 3, "no_plot": True}))
    assert run(tmp_path, "eval", "--config", str(cfg), name="a") == 0
    assert json.loads((tmp_path / "a" / "report.json").read_text())["per_level"]["1"]["episodes"] == 3
    assert not (tmp_path / "a" / "report.png").exists()
    assert run(tmp_path, "eval", "--config", str(cfg), "--count", "4", name="b") == 0
    assert json.loads((tmp_path / "b" / "report.json").read_text())["per_level"]["1"]["episodes"] == 4


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"levle": 1}))
    assert run(tmp_path, "eval", "--config", str(cfg)) == 1
    assert "unknown config keys: levle" in capsys.readouterr().err
    assert run(tmp_path, "eval", "--config", str(tmp_path / "missing.json")) == 1


@pytest.mark.parametrize("argv", [
    [],
    ["dance"],
    ["gen", "--level", "9", "--out", "x.json"],
    ["eval", "--bogus"],
    ["eval", "--backend", "scripted", "--level", "0"],
    ["eval", "--backend", "remote_chat", "--level", "0"],
    ["replay"],
])
def test_usage_errors(tmp_path, argv):
    assert main(argv + ["--run-dir", str(tmp_path / "u")] if argv else argv) == 1


def test_unreadable_suite_is_runtime_error(tmp_path, capsys):
    assert run(tmp_path, "eval", "--suite", str(tmp_path / "nope")) == 2
    assert "error" in capsys.readouterr().err


def test_play_human_repl_from_stdin(tmp_path, monkeypatch, capsys):
    spec = generate(GeneratorConfig(0, 1))
    script = "\n".join(str(a) for a in spec.walkthrough) + "\n"
    monkeypatch.setattr("sys.stdin", io.StringIO(script))
    assert run(tmp_path, "play", "--level", "0", "--seed", "1", name="p") == 0
    out = capsys.readouterr().out
    assert "*** You won! *** score 3/3" in out
    assert (tmp_path / "p" / "level0-seed1.jsonl").exists()


def test_play_lost_banner_and_eof(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr("sys.stdin", io.StringIO("eat(cookbook)\n" * 40))
    assert run(tmp_path, "play", "--level", "0", "--seed", "1", name="p") == 0
    assert "*** You lost! ***" in capsys.readouterr().out
    monkeypatch.setattr("sys.stdin", io.StringIO(""))
    assert run(tmp_path, "play", "--level", "0", "--seed", "1", name="q") == 3


def test_play_scripted_backend(tmp_path, capsys):
    script = tmp_path / "script.json"
    script.write_text(json.dumps(SETUP + ["cook(purple potato, stove)"]))
    spec = tmp_path / "potato.json"
    spec.write_text(custom_kitchen_game([RecipeItem("purple potato", CutState.DICED, CookState.ROASTED)]).to_json())
    assert run(tmp_path, "play", "--spec", str(spec), "--backend", "scripted", "--script", str(script)) == 0
    out = capsys.readouterr().out
    assert "You fried the purple potato." in out and "You lost!" in out


def test_fewshot_then_aggregate(tmp_path, capsys):
    assert run(tmp_path, "fewshot", "--level", "3", "--count", "2", "--scenario", "expert_contrast",
               "--max-trials", "2", name="fs") == 0
    fs = tmp_path / "fs"
    assert len((fs / "trials.jsonl").read_text().splitlines()) == 2
    assert (fs / "report.png").exists()
    report = json.loads((fs / "report.json").read_text())
    assert report["per_trial_curve"]["1"]["success_rate"] == 1.0
    # the expert never needs tips, so there are no final tip sets to merge
    assert run(tmp_path, "aggregate", "--from-run", str(fs), name="agg") == 1

    finals = tmp_path / "finals"
    finals.mkdir()
    for i, text in enumerate(TRIAL_TIPS):
        extract_tips(text, Provenance("self_history", f"g{i}", 3)).save(finals / f"g{i}.json")
    script = tmp_path / "b1.json"
    script.write_text(json.dumps([render_tips(builtin_tips("general"))]))
    out = tmp_path / "general.json"
    code = run(tmp_path, "aggregate", "--tips-files", *map(str, sorted(finals.glob("*.json"))),
               "--backend", "scripted", "--script", str(script), "--out", str(out), name="agg2")
    assert code == 0
    assert len(TipSet.load(out)) == 8
    assert run(tmp_path, "eval", "--level", "4", "--count", "2", "--tips", str(out), "--no-plot", name="z") == 0


def test_fewshot_backend_failure_exit_code(tmp_path):
    script = tmp_path / "s.json"
    script.write_text(json.dumps(["look()"]))
    code = run(tmp_path, "fewshot", "--level", "0", "--count", "1", "--backend", "scripted",
               "--script", str(script), "--no-plot", name="fs")
    assert code == 3


def test_help_lists_subcommands(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for cmd in ("gen", "play", "fewshot", "aggregate", "eval", "replay"):
        assert cmd in out
