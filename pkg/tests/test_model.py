import pytest

from cooktips.generator import GeneratorConfig, generate
from cooktips.model import (
    LEVELS,
    CookState,
    CutState,
    GameSpec,
    Recipe,
    RecipeItem,
    required_steps,
)


def kinds(steps):
    return [s.key for s in steps]


def test_level4_shape_has_eleven_steps():
    recipe = Recipe(tuple(
        RecipeItem(n, CutState.SLICED, CookState.FRIED) for n in ("carrot", "red apple", "tomato")
    ))
    steps = required_steps(recipe)
    assert len(steps) == 11 == LEVELS[4].points
    assert all(s.points == 1 for s in steps)


def test_level0_shape():
    steps = required_steps(Recipe((RecipeItem("carrot"),)))
    assert kinds(steps) == ["take:carrot", "prepare_meal", "eat_meal"]
    assert len(steps) == LEVELS[0].points


def test_cut_only_recipe():
    steps = required_steps(Recipe((RecipeItem("carrot", CutState.DICED),)))
    assert kinds(steps) == ["take:carrot", "cut:carrot", "prepare_meal", "eat_meal"]
    assert len(steps) == LEVELS[1].points


def test_canonical_order_per_ingredient():
    recipe = Recipe((RecipeItem("a", CutState.DICED, CookState.ROASTED), RecipeItem("b", None, CookState.FRIED)))
    assert kinds(required_steps(recipe)) == [
        "take:a", "cut:a", "cook:a", "take:b", "cook:b", "prepare_meal", "eat_meal",
    ]


def test_state_machines():
    assert CutState.UNCUT.can_become(CutState.DICED)
    assert not CutState.DICED.can_become(CutState.SLICED)
    assert CookState.RAW.can_become(CookState.FRIED)
    assert not CookState.RAW.can_become(CookState.BURNED)
    assert CookState.ROASTED.can_become(CookState.BURNED)
    assert not CookState.BURNED.can_become(CookState.FRIED)


def test_recipe_never_asks_for_burned():
    with pytest.raises(ValueError):
        RecipeItem("x", None, CookState.BURNED)
    with pytest.raises(ValueError):
        RecipeItem("x", CutState.UNCUT)


@pytest.mark.parametrize("level", range(5))
def test_spec_json_round_trip(level):
    spec = generate(GeneratorConfig(level, 11))
    again = GameSpec.from_json(spec.to_json())
    assert again == spec
    assert again.to_json() == spec.to_json()


def test_from_json_rejects_other_documents():
    with pytest.raises(ValueError):
        GameSpec.from_dict({"format": "something-else"})
