import pytest

from boutflow.abstraction import (
    AbstractionConfig,
    Direction,
    EmptyPhrase,
    IllegalSequence,
    TacticSequence,
    abstract_phrase,
    compute_priority,
    direction_timeline,
    mirror_sequence,
    validate_sequence,
)
from boutflow.model import TacticNodeKind, swap_fencers, terminal_for_scorer
from tests.conftest import act, make_phrase

K = TacticNodeKind
F, B, H = Direction.FORWARD, Direction.BACKWARD, Direction.HOLD


def kinds(sequence):
    return [n.kind.value for n in sequence.nodes]


# --- direction timeline ------------------------------------------------------

def test_timeline_forward_then_backward():
    actions = [act(1, "forward", 0, 20), act(1, "backward", 20, 40)]
    assert direction_timeline(actions, 40) == [(0, 20, F), (20, 40, B)]


def test_timeline_long_gap_becomes_hold():
    actions = [act(1, "forward", 0, 10), act(1, "forward", 30, 40)]
    assert direction_timeline(actions, 40, pause_threshold=10) == [
        (0, 10, F),
        (10, 30, H),
        (30, 40, F),
    ]


def test_timeline_short_gap_absorbed():
    actions = [act(1, "forward", 0, 10), act(1, "forward", 18, 40)]
    assert direction_timeline(actions, 40, pause_threshold=10) == [(0, 40, F)]


def test_timeline_empty_is_hold():
    assert direction_timeline([], 55) == [(0, 55, H)]


def test_timeline_lunge_counts_as_forward():
    actions = [act(1, "forward", 0, 10), act(1, "lunge", 10, 30)]
    assert direction_timeline(actions, 30) == [(0, 30, F)]


def test_timeline_partitions_span(synth_corpus):
    for bout, _ in synth_corpus:
        for phrase in bout.phrases:
            for fencer in (1, 2):
                timeline = direction_timeline(phrase.actions_of(fencer), phrase.duration)
                assert timeline[0][0] == 0
                assert timeline[-1][1] == phrase.duration
                for (s0, e0, d0), (s1, e1, d1) in zip(timeline, timeline[1:]):
                    assert e0 == s1
                    assert d0 is not d1


# --- spec walkthroughs -------------------------------------------------------

def test_abstract_both_advance_then_one_retreats():
    phrase = make_phrase(
        actions=[
            act(1, "forward", 0, 10),
            act(1, "forward", 10, 20),
            act(1, "lunge", 20, 32),
            act(1, "attack", 22, 28, "head"),
            act(2, "forward", 0, 18),
            act(2, "backward", 18, 40),
        ],
        scorer=1,
        result="A",
    )
    sequence = abstract_phrase(phrase)
    assert kinds(sequence) == ["S", "FF", "FB", "1"]
    assert sequence.nodes[0].steps == (2, 1)
    assert sequence.nodes[2].enter_frame == 18


def test_abstract_mutual_attack_draw():
    phrase = make_phrase(
        actions=[
            act(1, "forward", 0, 8),
            act(1, "forward", 8, 16),
            act(1, "attack", 18, 26, "head"),
            act(2, "forward", 0, 9),
            act(2, "forward", 9, 17),
            act(2, "attack", 18, 26, "flank"),
        ],
        scorer=0,
        result="S",
        duration=30,
    )
    sequence = abstract_phrase(phrase)
    assert kinds(sequence) == ["S", "FF", "="]
    assert sequence.nodes[0].steps == (2, 2)
    assert sequence.nodes[1].attack_pairs == (("head", "flank"),)
    assert sequence.nodes[1].priority_at_entry is None  # simultaneous begins


def test_abstract_planned_retreat():
    phrase = make_phrase(
        actions=[
            act(1, "forward", 0, 8),
            act(1, "backward", 10, 60),
            act(2, "forward", 0, 9),
            act(2, "backward", 12, 35),
            act(2, "lunge", 35, 60),
        ],
        scorer=2,
        result="A",
    )
    sequence = abstract_phrase(phrase)
    assert kinds(sequence) == ["S", "BB", "BF", "2"]
    assert sequence.nodes[0].steps == (1, 1)
    assert sequence.nodes[1].enter_frame == 10  # earlier of the two switches


def test_bb_window_boundary():
    def phrase_with_gap(gap):
        return make_phrase(
            actions=[
                act(1, "forward", 0, 8),
                act(1, "backward", 10, 60),
                act(2, "forward", 0, 8),
                act(2, "backward", 10 + gap, 60),
            ],
            scorer=0,
            result="N",
        )

    window = AbstractionConfig().bb_joint_window_frames
    inside = abstract_phrase(phrase_with_gap(window))
    assert kinds(inside) == ["S", "BB", "="]
    outside = abstract_phrase(phrase_with_gap(window + 1))
    assert "BB" not in kinds(outside)
    # beyond the window the staggered retreats read as one fencer bailing
    assert kinds(outside) == ["S", "FF", "BF", "="]


def test_bb_fast_changing_forward():
    # both pause inside the advance, then keep going: a feinted retreat
    phrase = make_phrase(
        actions=[
            act(1, "forward", 0, 8),
            act(1, "forward", 30, 38),
            act(2, "forward", 0, 9),
            act(2, "forward", 32, 40),
        ],
        scorer=0,
        result="N",
        duration=45,
    )
    sequence = abstract_phrase(phrase)
    assert kinds(sequence) == ["S", "BB", "FF", "="]
    assert sequence.nodes[1].enter_frame == 8


def test_bb_requires_few_steps():
    # three steps before retreating: too committed for a planned retreat
    phrase = make_phrase(
        actions=[
            act(1, "forward", 0, 8),
            act(1, "forward", 8, 16),
            act(1, "forward", 16, 24),
            act(1, "backward", 24, 60),
            act(2, "forward", 0, 8),
            act(2, "forward", 8, 16),
            act(2, "forward", 16, 25),
            act(2, "backward", 25, 60),
        ],
        scorer=0,
        result="N",
    )
    assert "BB" not in kinds(abstract_phrase(phrase))


def test_steps_clamped_to_two():
    phrase = make_phrase(
        actions=[
            act(1, "forward", 0, 8),
            act(1, "forward", 8, 16),
            act(1, "forward", 16, 24),
            act(1, "forward", 24, 32),
            act(2, "forward", 0, 30),
        ],
        scorer=1,
        result="A",
        duration=40,
    )
    assert abstract_phrase(phrase).nodes[0].steps == (2, 1)


def test_no_actions_with_result_goes_straight_to_terminal():
    phrase = make_phrase(scorer=0, result="N", duration=0)
    sequence = abstract_phrase(phrase)
    assert kinds(sequence) == ["S", "="]
    assert sequence.nodes[0].steps == (0, 0)


def test_empty_phrase_rejected():
    phrase = make_phrase(scorer=0, result="", duration=0)
    with pytest.raises(EmptyPhrase):
        abstract_phrase(phrase)


def test_mutual_backward_after_layer_two_emits_nothing():
    phrase = make_phrase(
        actions=[
            act(1, "forward", 0, 30), act(1, "backward", 30, 50), act(1, "forward", 50, 70),
            act(2, "forward", 0, 8), act(2, "backward", 8, 50), act(2, "forward", 50, 70),
        ],
        scorer=1,
        result="A",
    )
    # f2 bails immediately (FB), then both retreat (nothing), then both press (FF)
    sequence = abstract_phrase(phrase)
    assert kinds(sequence) == ["S", "FF", "FB", "FF", "1"]


# --- priority ----------------------------------------------------------------

def test_priority_no_attacks():
    phrase = make_phrase(actions=[act(1, "forward", 0, 30)], scorer=0, result="N", duration=40)
    assert compute_priority(phrase).segments == ((0, 40, None),)


def test_priority_first_attack():
    phrase = make_phrase(
        actions=[act(1, "attack", 22, 30, "head")], scorer=1, result="A", duration=36
    )
    assert compute_priority(phrase).segments == ((0, 22, None), (22, 36, 1))


def test_priority_parry_transfer():
    phrase = make_phrase(
        actions=[
            act(1, "attack", 22, 30, "head"),
            act(2, "parry", 26, 30, "head"),
            act(2, "riposte", 30, 36),
        ],
        scorer=2,
        result="R",
        duration=36,
    )
    assert compute_priority(phrase).segments == (
        (0, 22, None),
        (22, 26, 1),
        (26, 36, 2),
    )


def test_priority_counter_after_attack_ends():
    phrase = make_phrase(
        actions=[
            act(1, "attack", 10, 18, "head"),
            act(2, "counter", 25, 33),
        ],
        scorer=2,
        result="A",
        duration=40,
    )
    assert compute_priority(phrase).segments == (
        (0, 10, None),
        (10, 25, 1),
        (25, 40, 2),
    )


def test_priority_counter_into_attack_does_not_transfer():
    phrase = make_phrase(
        actions=[
            act(1, "attack", 10, 20, "head"),
            act(2, "counter", 14, 22),
        ],
        scorer=1,
        result="A",
        duration=30,
    )
    assert compute_priority(phrase).segments == ((0, 10, None), (10, 30, 1))


def test_priority_partitions_and_alternates(synth_corpus):
    for bout, _ in synth_corpus:
        for phrase in bout.phrases:
            timeline = compute_priority(phrase)
            segments = timeline.segments
            assert segments[0][0] == 0
            assert segments[-1][1] == phrase.duration
            for (s0, e0, o0), (s1, e1, o1) in zip(segments, segments[1:]):
                assert e0 == s1
                assert o0 != o1
            interior = segments[:-1]
            assert all(e > s for s, e, _o in interior)


# --- sequence invariants -----------------------------------------------------

def test_sequences_valid_for_all_synth_phrases(synth_corpus):
    for bout, _ in synth_corpus:
        for phrase in bout.phrases:
            sequence = abstract_phrase(phrase)
            validate_sequence(sequence, scorer=phrase.scorer)
            assert sequence.nodes[-1].kind is terminal_for_scorer(phrase.scorer)


def test_abstraction_deterministic(synth_bout):
    bout, _ = synth_bout
    for phrase in bout.phrases:
        assert abstract_phrase(phrase) == abstract_phrase(phrase)


def test_mirror_property(synth_corpus):
    for bout, _ in synth_corpus:
        for phrase in bout.phrases:
            direct = mirror_sequence(abstract_phrase(phrase))
            via_swap = abstract_phrase(swap_fencers(phrase))
            assert direct == via_swap


def test_validate_sequence_rejects_bad_shapes():
    from boutflow.abstraction import TacticNode

    def node(kind, frame=0, steps=None):
        return TacticNode(kind=kind, enter_frame=frame, steps=steps)

    with pytest.raises(IllegalSequence):
        validate_sequence(TacticSequence("P", (node(K.BOTH_FORWARD),)))
    with pytest.raises(IllegalSequence):  # no terminal
        validate_sequence(
            TacticSequence("P", (node(K.START, steps=(1, 1)), node(K.BOTH_FORWARD, 5)))
        )
    with pytest.raises(IllegalSequence):  # BB not right after S
        validate_sequence(
            TacticSequence(
                "P",
                (
                    node(K.START, steps=(1, 1)),
                    node(K.BOTH_FORWARD, 5),
                    node(K.BOTH_BACKWARD, 9),
                    node(K.LEFT_SCORE, 12),
                ),
            )
        )
    with pytest.raises(IllegalSequence):  # repeated kind
        validate_sequence(
            TacticSequence(
                "P",
                (
                    node(K.START, steps=(1, 1)),
                    node(K.BOTH_FORWARD, 5),
                    node(K.BOTH_FORWARD, 9),
                    node(K.LEFT_SCORE, 12),
                ),
            )
        )
