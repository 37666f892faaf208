import pytest

from boutflow.model import (
    Action,
    ActionKind,
    Column,
    KIND_ORDER,
    MIRROR_KIND,
    TacticNodeKind,
    column_of,
    is_legal_transition,
    layer_of,
    legal_transitions,
    swap_fencers,
    terminal_for_scorer,
)
from tests.conftest import act, make_phrase

K = TacticNodeKind


def test_layers():
    assert layer_of(K.START) == 1
    assert layer_of(K.BOTH_BACKWARD) == 1
    assert layer_of(K.FORWARD_BACK) == 2
    assert layer_of(K.BOTH_FORWARD) == 2
    assert layer_of(K.BACK_FORWARD) == 2
    assert layer_of(K.LEFT_SCORE) == 3
    assert layer_of(K.NO_SCORE) == 3
    assert layer_of(K.RIGHT_SCORE) == 3


def test_layer_populations():
    by_layer = {1: 0, 2: 0, 3: 0}
    for kind in KIND_ORDER:
        by_layer[layer_of(kind)] += 1
    assert by_layer == {1: 2, 2: 3, 3: 3}


def test_columns():
    # left column = right fencer dominating, right column = left fencer
    assert column_of(K.RIGHT_SCORE) is Column.LEFT
    assert column_of(K.BACK_FORWARD) is Column.LEFT
    assert column_of(K.BOTH_FORWARD) is Column.CENTER
    assert column_of(K.START) is Column.CENTER
    assert column_of(K.BOTH_BACKWARD) is Column.CENTER
    assert column_of(K.NO_SCORE) is Column.CENTER
    assert column_of(K.FORWARD_BACK) is Column.RIGHT
    assert column_of(K.LEFT_SCORE) is Column.RIGHT


def test_mirror_symmetry():
    flips = {Column.LEFT: Column.RIGHT, Column.RIGHT: Column.LEFT, Column.CENTER: Column.CENTER}
    for kind in KIND_ORDER:
        mirrored = MIRROR_KIND[kind]
        assert MIRROR_KIND[mirrored] is kind
        assert layer_of(mirrored) == layer_of(kind)
        assert column_of(mirrored) is flips[column_of(kind)]
    assert MIRROR_KIND[K.BACK_FORWARD] is K.FORWARD_BACK
    assert MIRROR_KIND[K.LEFT_SCORE] is K.RIGHT_SCORE
    for fixed in (K.START, K.BOTH_BACKWARD, K.BOTH_FORWARD, K.NO_SCORE):
        assert MIRROR_KIND[fixed] is fixed


def test_terminal_for_scorer():
    assert terminal_for_scorer(1) is K.LEFT_SCORE
    assert terminal_for_scorer(2) is K.RIGHT_SCORE
    assert terminal_for_scorer(0) is K.NO_SCORE
    with pytest.raises(ValueError):
        terminal_for_scorer(3)


def test_legal_transitions():
    assert is_legal_transition(K.START, K.BOTH_BACKWARD)
    assert is_legal_transition(K.START, K.LEFT_SCORE)
    assert is_legal_transition(K.BOTH_FORWARD, K.FORWARD_BACK)
    assert not is_legal_transition(K.BOTH_FORWARD, K.BOTH_FORWARD)
    assert not is_legal_transition(K.BOTH_FORWARD, K.START)
    assert not is_legal_transition(K.LEFT_SCORE, K.NO_SCORE)
    assert not is_legal_transition(K.BOTH_FORWARD, K.BOTH_BACKWARD)
    assert not is_legal_transition(K.BOTH_BACKWARD, K.START)
    # 7 from S, 6 from BB, 5 from each mid node
    assert len(legal_transitions()) == 7 + 6 + 3 * 5


def test_action_validation():
    with pytest.raises(ValueError):
        Action(fencer=3, kind=ActionKind.FORWARD, start_frame=0, end_frame=1)
    with pytest.raises(ValueError):
        Action(fencer=1, kind=ActionKind.FORWARD, start_frame=5, end_frame=1)
    with pytest.raises(ValueError):
        Action(fencer=1, kind=ActionKind.FORWARD, start_frame=0, end_frame=1, position="head")
    zero = Action(fencer=1, kind=ActionKind.ATTACK, start_frame=4, end_frame=4, position="head")
    assert zero.overlaps(4, 10)
    assert not zero.overlaps(5, 10)


def test_swap_fencers_is_involution():
    phrase = make_phrase(
        actions=[act(1, "forward", 0, 10), act(2, "attack", 5, 9, "head")],
        scorer=1,
        result="A",
        track=[(0, -0.5), (10, 0.25)],
        score_after=(3, 2),
    )
    swapped = swap_fencers(phrase)
    assert swapped.scorer == 2
    assert swapped.score_after == (2, 3)
    assert swapped.confrontation_track == ((0, 0.5), (10, -0.25))
    assert {a.fencer for a in swapped.actions} == {1, 2}
    assert swap_fencers(swapped) == phrase
