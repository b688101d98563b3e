import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import SETUP, TRIAL_TIPS, four_trial_script
from cooktips.engine import Status
from cooktips.generator import GeneratorConfig, generate
from cooktips.policy import BackendConfig, PolicyError, ScriptedPolicy
from cooktips.tips import (
    MAX_TIPS,
    TIPS_MARKER,
    NoTipsFound,
    Provenance,
    TipSet,
    TrialsAborted,
    aggregate_tips,
    aggregation_prompt,
    build_reflection_prompt,
    builtin_tips,
    extract_tips,
    final_tipset,
    load_tips,
    render_tips,
    run_trials,
)

PROV = Provenance("self_history", "g", 1)
SCRIPTED = BackendConfig("scripted")


def test_extract_single_tip():
    ts = extract_tips(TRIAL_TIPS[0], PROV)
    assert ts.texts == (
        "You should try roast the potato next time instead of cook purple potato with stove "
        "after dicing the purple potato;",
    )
    assert ts.tips[0].index == 1 and ts.provenance == PROV


def test_extract_with_chatter_and_styles():
    text = (
        "Let me think about what went wrong.\n\n"
        f"{TIPS_MARKER}\n"
        "1) Read the cookbook first.\n"
        "2. Use the oven when the recipe says roast,\n"
        "   and the stove when it says fry.\n"
        "3; Keep the knife.\n"
        "\n"
        "Good luck!"
    )
    assert extract_tips(text, PROV).texts == (
        "Read the cookbook first.",
        "Use the oven when the recipe says roast, and the stove when it says fry.",
        "Keep the knife.",
    )


def test_extract_without_marker_uses_first_list():
    assert extract_tips("Here:\n1. a\n2. b", PROV).texts == ("a", "b")


@pytest.mark.parametrize("text", ["", "no list here", f"{TIPS_MARKER}\nnothing numbered"])
def test_no_tips(text):
    with pytest.raises(NoTipsFound):
        extract_tips(text, PROV)


tip_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc", "Zl", "Zp")), min_size=1, max_size=80
).map(str.strip).filter(lambda s: s and not s[0].isdigit() and s[0] not in "-*•")


@given(st.lists(tip_text, min_size=1, max_size=MAX_TIPS))
def test_render_extract_round_trip(texts):
    ts = TipSet.from_texts(texts, PROV)
    assert extract_tips(render_tips(ts), PROV) == ts


def test_tipset_store_round_trip(tmp_path):
    ts = extract_tips(TRIAL_TIPS[2], PROV)
    ts.save(tmp_path / "t.json")
    assert TipSet.load(tmp_path / "t.json") == ts
    assert load_tips(str(tmp_path / "t.json")) == ts


def test_tipset_validation():
    with pytest.raises(ValueError):
        TipSet.from_texts(["two\nlines"], PROV)
    with pytest.raises(ValueError):
        Provenance("made_up")


def test_builtin_sets():
    human = load_tips("builtin:human")
    general = load_tips("builtin:general")
    assert len(human) == 8 and human.provenance.scenario == "human"
    assert len(general) == 8 and general.provenance.scenario == "aggregated"
    assert general.texts[0].startswith("Always double-check the recipe")
    assert load_tips(None) is None and load_tips("none") is None
    with pytest.raises(ValueError):
        builtin_tips("robot")


def _failed_record(potato_spec, tips=None):
    policy = ScriptedPolicy(SETUP + ["cook(purple potato, stove)", TRIAL_TIPS[0]])
    return run_trials(potato_spec, SCRIPTED, max_trials=1, policy=policy)[0]


def test_reflection_prompts(potato_spec):
    rec = _failed_record(potato_spec)
    self_b = build_reflection_prompt("self_history", rec.trajectory.observation, [rec])
    text = self_b.serialize()
    assert "cook(purple potato, stove)" in text
    assert "expert" not in text.lower()
    expert = [str(a) for a in potato_spec.walkthrough]
    contrast = build_reflection_prompt("expert_contrast", rec.trajectory.observation, [rec], expert)
    assert "cook(purple potato, oven)" in contrast.serialize()
    assert TIPS_MARKER in contrast.instruction
    with pytest.raises(ValueError):
        build_reflection_prompt("self_history", "obs", [rec], expert)
    with pytest.raises(ValueError):
        build_reflection_prompt("expert_contrast", "obs", [rec])
    with pytest.raises(ValueError):
        build_reflection_prompt("self_history", "obs", [])


def test_reflection_holds_actions_not_feedback(potato_spec):
    rec = _failed_record(potato_spec)
    bundle = build_reflection_prompt("self_history", rec.trajectory.observation, [rec])
    assert bundle.failed_actions == (tuple(rec.trajectory.actions),)
    assert "You fried the purple potato." not in bundle.serialize()


def test_four_trial_loop(potato_spec):
    policy = ScriptedPolicy(four_trial_script())
    records = run_trials(potato_spec, SCRIPTED, "self_history", max_trials=6, policy=policy)
    assert len(records) == 4
    assert [r.result.success for r in records] == [False, False, False, True]
    assert [r.final for r in records] == [False, False, False, True]
    assert records[1].trajectory.steps[6].feedback == "Invalid action."
    expected = [extract_tips(t, PROV).texts for t in TRIAL_TIPS]
    assert [r.tips_in.texts if r.tips_in else None for r in records] == [None] + expected
    assert final_tipset(records).texts == expected[2]
    for r in records[1:]:
        for tip in r.tips_in.texts:
            assert tip in r.prompt


def test_reflection_prompts_in_loop(potato_spec):
    policy = ScriptedPolicy(four_trial_script())
    run_trials(potato_spec, SCRIPTED, max_trials=6, policy=policy)
    reflections = [b for b in policy.calls if b.instruction]
    assert len(reflections) == 3
    assert reflections[0].tips == ()
    assert "more effective" not in reflections[0].instruction
    assert reflections[1].tips == extract_tips(TRIAL_TIPS[0], PROV).texts
    assert "more effective" in reflections[1].instruction
    assert [len(b.failed_actions) for b in reflections] == [1, 2, 3]


def test_expert_wins_first_trial():
    spec = generate(GeneratorConfig(4, 3))
    records = run_trials(spec, BackendConfig("expert"), "expert_contrast")
    assert len(records) == 1 and records[0].final and records[0].tips_in is None
    assert final_tipset(records) is None


def test_trial_cap(potato_spec):
    losing = (SETUP + ["cook(purple potato, stove)", TRIAL_TIPS[0]]) * 3
    records = run_trials(potato_spec, SCRIPTED, max_trials=3, policy=ScriptedPolicy(losing))
    assert len(records) == 3 and not any(r.result.success for r in records)
    assert records[-1].tips_out is not None
    assert final_tipset(records) is None


def test_missing_tips_keep_previous(potato_spec):
    script = (SETUP + ["cook(purple potato, stove)", TRIAL_TIPS[0]]
              + SETUP + ["cook(purple potato, stove)", "I have no idea."]
              + SETUP + ["cook(purple potato, oven)", "prepare_meal()", "eat(meal)"])
    records = run_trials(potato_spec, SCRIPTED, max_trials=3, policy=ScriptedPolicy(script))
    assert records[1].tips_out is None
    assert records[2].tips_in == records[1].tips_in


def test_replay_memory_keeps_last_three(potato_spec):
    script = (SETUP + ["cook(purple potato, stove)"]) * 4 + SETUP + ["cook(purple potato, oven)",
                                                                     "prepare_meal()", "eat(meal)"]
    policy = ScriptedPolicy(script)
    records = run_trials(potato_spec, SCRIPTED, "replay_memory", max_trials=5, policy=policy)
    assert len(records) == 5 and records[-1].final
    assert all(r.tips_out is None for r in records)
    assert len(policy.calls[-1].past_trajectories) == 3


def test_backend_failure_aborts_loop(potato_spec):
    policy = ScriptedPolicy(SETUP + ["cook(purple potato, stove)"])
    with pytest.raises(TrialsAborted) as info:
        run_trials(potato_spec, SCRIPTED, policy=policy)
    assert len(info.value.records) == 1
    assert info.value.records[0].result.status is Status.LOST


def test_success_distillation(potato_spec):
    script = SETUP + ["cook(purple potato, oven)", "prepare_meal()", "eat(meal)", TRIAL_TIPS[2]]
    records = run_trials(potato_spec, SCRIPTED, policy=ScriptedPolicy(script), distill_successes=True)
    assert records[0].tips_out.texts == extract_tips(TRIAL_TIPS[2], PROV).texts


def test_aggregation(tmp_path):
    finals = [extract_tips(t, Provenance("self_history", f"g{i}", 3)) for i, t in enumerate(TRIAL_TIPS)]
    prompt = aggregation_prompt(finals).serialize()
    for ts in finals:
        assert ts.texts[0] in prompt
    b1 = render_tips(builtin_tips("general"))
    out = tmp_path / "aggregated.json"
    agg = aggregate_tips(finals, SCRIPTED, policy=ScriptedPolicy([b1]), out_path=out)
    assert len(agg) == 8 and agg.provenance.scenario == "aggregated"
    assert agg.texts == builtin_tips("general").texts
    assert load_tips(str(out)) == agg
    with pytest.raises(ValueError):
        aggregate_tips([None], SCRIPTED, policy=ScriptedPolicy([b1]))
    with pytest.raises(PolicyError):
        aggregate_tips(finals, SCRIPTED, policy=ScriptedPolicy([]))
