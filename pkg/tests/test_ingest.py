import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from boutflow.ingest import (
    CSV_HEADER,
    EndWithoutBegin,
    MalformedRecord,
    NonMonotonicFrame,
    ScoreOverflow,
    UnknownCode,
    build_actions,
    build_bout,
    build_bouts,
    events_to_csv,
    events_to_json,
    parse_frame_events,
    validate_events,
)
from boutflow.model import ActionKind, FrameEvent


def rows_to_csv(*rows):
    return CSV_HEADER + "\n" + "\n".join(rows) + "\n"


def ev(phrase="P1", frame=0, **kw):
    return FrameEvent(bout_id="B1", phrase_id=phrase, frame=frame, **kw)


# --- parsing -----------------------------------------------------------------

def test_parse_single_row():
    events = parse_frame_events(rows_to_csv("B1,P1,22,,,ATT_B,,head,,,,0.4,,"))
    assert events == [
        FrameEvent(
            bout_id="B1", phrase_id="P1", frame=22,
            bladework1="ATT_B", attack1="head", confrontation=0.4,
        )
    ]


def test_parse_empty_inputs():
    assert parse_frame_events(b"") == []
    assert parse_frame_events("   \n") == []
    assert parse_frame_events(CSV_HEADER + "\n") == []
    assert parse_frame_events("[]", "json") == []


def test_parse_rejects_unknown_codes():
    with pytest.raises(UnknownCode):
        parse_frame_events(rows_to_csv("B1,P1,0,XYZ,,,,,,,,,,"))
    with pytest.raises(UnknownCode):
        parse_frame_events(rows_to_csv("B1,P1,0,,,,,,,,,,Q,"))
    with pytest.raises(UnknownCode):
        parse_frame_events(rows_to_csv("B1,P1,0,,,,,,,,,,,7"))
    with pytest.raises(UnknownCode):
        parse_frame_events(rows_to_csv("B1,P1,0,,,ATT_B,,HEAD!,,,,,,"))


def test_parse_rejects_malformed_rows():
    with pytest.raises(MalformedRecord):
        parse_frame_events(rows_to_csv("B1,P1,notanumber,,,,,,,,,,,"))
    with pytest.raises(MalformedRecord):
        parse_frame_events(rows_to_csv("B1,P1,3,too,few"))
    with pytest.raises(MalformedRecord):
        parse_frame_events("bad,header\n")
    with pytest.raises(MalformedRecord):
        parse_frame_events("{\"not\": \"a list\"}", "json")
    with pytest.raises(MalformedRecord):
        parse_frame_events("[{\"bout_id\": \"B1\"}]", "json")  # missing ids/frame


def test_parse_rejects_frame_regression():
    text = rows_to_csv("B1,P1,10,FWD_B,,,,,,,,,,", "B1,P1,5,FWD_E,,,,,,,,,,")
    with pytest.raises(NonMonotonicFrame):
        parse_frame_events(text)
    # regression across different phrases is fine
    ok = rows_to_csv(
        "B1,P1,10,,,,,,,,,,A,1",
        "B1,P2,0,,,,,,,,,,R,2",
    )
    assert len(parse_frame_events(ok)) == 2


# --- round trips -------------------------------------------------------------

footwork_codes = st.sampled_from(["FWD_B", "FWD_E", "BWD_B", "BWD_E", "LUN_B", "LUN_E"])
bladework_codes = st.sampled_from(
    ["ATT_B", "ATT_E", "PAR_B", "PAR_E", "RIP_B", "RIP_E", "CTR_B", "CTR_E"]
)
positions = st.sampled_from(["head", "chest", "flank", "arm"])
opt = lambda s: st.none() | s  # noqa: E731


@st.composite
def frame_event_lists(draw):
    n = draw(st.integers(min_value=0, max_value=12))
    frames = sorted(draw(st.lists(st.integers(0, 500), min_size=n, max_size=n)))
    events = []
    for frame in frames:
        events.append(
            FrameEvent(
                bout_id="B1",
                phrase_id="P1",
                frame=frame,
                footwork1=draw(opt(footwork_codes)),
                footwork2=draw(opt(footwork_codes)),
                bladework1=draw(opt(bladework_codes)),
                bladework2=draw(opt(bladework_codes)),
                attack1=draw(opt(positions)),
                attack2=draw(opt(positions)),
                parry1=draw(opt(positions)),
                parry2=draw(opt(positions)),
                confrontation=draw(
                    opt(
                        st.floats(
                            min_value=-7.0,
                            max_value=7.0,
                            allow_nan=False,
                            allow_infinity=False,
                        )
                    )
                ),
                result=draw(opt(st.sampled_from(["A", "R", "S", "N"]))),
                score=draw(opt(st.sampled_from([0, 1, 2]))),
            )
        )
    return events


@given(frame_event_lists())
@settings(max_examples=60)
def test_round_trip_csv_and_json(events):
    assert parse_frame_events(events_to_csv(events)) == events
    assert parse_frame_events(events_to_json(events), "json") == events


@given(frame_event_lists())
@settings(max_examples=30)
def test_serialization_is_byte_stable(events):
    once = events_to_csv(events)
    assert events_to_csv(parse_frame_events(once)) == once
    once_json = events_to_json(events)
    assert events_to_json(parse_frame_events(once_json, "json")) == once_json


def test_csv_json_cross_format():
    events, _ = __import__("boutflow.synth", fromlist=["generate_bout"]).generate_bout(
        __import__("boutflow.synth", fromlist=["default_profile"]).default_profile(seed=2),
        target_score=3,
    )
    via_json = parse_frame_events(events_to_json(events), "json")
    assert via_json == events
    assert parse_frame_events(events_to_csv(via_json)) == events


# --- validation --------------------------------------------------------------

def terminal(phrase="P1", frame=50, result="A", score=1):
    return ev(phrase, frame, result=result, score=score)


def test_validate_clean_phrase():
    events = [
        ev(frame=0, footwork1="FWD_B"),
        ev(frame=10, footwork1="FWD_E"),
        terminal(frame=20),
    ]
    report = validate_events(events)
    assert report.ok
    assert (report.rows, report.phrases, report.bouts) == (3, 1, 1)


def test_validate_unclosed_bladework_warns():
    events = [
        ev(frame=0, bladework1="ATT_B", attack1="head"),
        terminal(frame=30),
    ]
    report = validate_events(events)
    assert report.ok
    assert any(code == "UnclosedBladework" for _r, code, _m in report.warnings)


def test_validate_inconsistent_outcome():
    report = validate_events([terminal(result="N", score=1)])
    assert any(code == "InconsistentOutcome" for _r, code, _m in report.errors)
    report = validate_events([terminal(result="A", score=0)])
    assert any(code == "InconsistentOutcome" for _r, code, _m in report.errors)
    assert validate_events([terminal(result="S", score=0)]).ok


def test_validate_result_on_non_final_row():
    events = [terminal(frame=10), ev(frame=12, footwork1="FWD_B"), terminal(frame=20)]
    report = validate_events(events)
    assert any(code == "ResultBeforeEnd" for _r, code, _m in report.errors)


def test_validate_missing_terminal():
    report = validate_events([ev(frame=0, footwork1="FWD_B")])
    codes = {code for _r, code, _m in report.errors}
    assert "MissingResult" in codes and "MissingScore" in codes


def test_validate_confrontation_range():
    report = validate_events([ev(frame=0, confrontation=7.5), terminal(frame=10)])
    assert any(code == "ConfrontationOutOfRange" for _r, code, _m in report.errors)


def test_validate_end_without_begin():
    report = validate_events([ev(frame=5, footwork2="BWD_E"), terminal(frame=10)])
    assert any(code == "EndWithoutBegin" for _r, code, _m in report.errors)


# --- action building ---------------------------------------------------------

def test_split_on_repeated_begin():
    events = [
        ev(frame=0, footwork1="FWD_B"),
        ev(frame=10, footwork1="FWD_B"),
        ev(frame=20, footwork1="FWD_E"),
    ]
    actions = build_actions(events)[1]
    assert [(a.start_frame, a.end_frame) for a in actions] == [(0, 10), (10, 20)]
    assert all(a.kind is ActionKind.FORWARD for a in actions)


def test_split_on_explicit_end_begin_same_frame():
    events = [
        ev(frame=0, footwork1="FWD_B"),
        ev(frame=10, footwork1="FWD_E"),
        ev(frame=10, footwork1="FWD_B"),
        ev(frame=20, footwork1="FWD_E"),
    ]
    actions = build_actions(events)[1]
    assert [(a.start_frame, a.end_frame) for a in actions] == [(0, 10), (10, 20)]


def test_attack_carries_position():
    events = [
        ev(frame=22, bladework1="ATT_B", attack1="head"),
        ev(frame=28, bladework1="ATT_E"),
    ]
    (attack,) = build_actions(events)[1]
    assert attack.kind is ActionKind.ATTACK
    assert (attack.start_frame, attack.end_frame, attack.position) == (22, 28, "head")


def test_end_without_begin_raises():
    with pytest.raises(EndWithoutBegin):
        build_actions([ev(frame=15, footwork2="BWD_E")])


def test_zero_length_action_kept():
    events = [
        ev(frame=5, bladework1="ATT_B", attack1="flank"),
        ev(frame=5, bladework1="ATT_E"),
    ]
    (attack,) = build_actions(events)[1]
    assert attack.start_frame == attack.end_frame == 5
    assert attack.position == "flank"


def test_unclosed_action_closes_at_phrase_end():
    events = [ev(frame=0, footwork1="FWD_B"), ev(frame=33, confrontation=0.1)]
    (forward,) = build_actions(events)[1]
    assert (forward.start_frame, forward.end_frame) == (0, 33)


def test_cross_kind_footwork_autocloses():
    # a new footwork kind begins while another is open: prior one is cut
    events = [
        ev(frame=0, footwork1="FWD_B"),
        ev(frame=12, footwork1="BWD_B"),
        ev(frame=30, footwork1="BWD_E"),
    ]
    actions = build_actions(events)[1]
    assert [(a.kind.value, a.start_frame, a.end_frame) for a in actions] == [
        ("forward", 0, 12),
        ("backward", 12, 30),
    ]


def test_footwork_never_overlaps(synth_corpus):
    for bout, _truths in synth_corpus:
        for phrase in bout.phrases:
            for fencer in (1, 2):
                footwork = sorted(
                    (a for a in phrase.actions_of(fencer) if a.kind.is_footwork),
                    key=lambda a: a.start_frame,
                )
                for first, second in zip(footwork, footwork[1:]):
                    assert first.end_frame <= second.start_frame


def test_forward_action_count_matches_begin_events(synth_bout):
    # segmentation splits but never merges or drops
    bout, _ = synth_bout
    events, _ = __import__("boutflow.synth", fromlist=["generate_bout"]).generate_bout(
        __import__("boutflow.synth", fromlist=["default_profile"]).default_profile(seed=11),
        target_score=15,
    )
    begins = sum(1 for e in events if e.footwork1 == "FWD_B")
    built = sum(
        1
        for p in bout.phrases
        for a in p.actions_of(1)
        if a.kind is ActionKind.FORWARD
    )
    assert begins == built


# --- bout assembly -----------------------------------------------------------

def phrase_rows(phrase, frame0, score, result):
    return [
        ev(phrase, frame0, footwork1="FWD_B"),
        ev(phrase, frame0 + 10, footwork1="FWD_E"),
        ev(phrase, frame0 + 12, result=result, score=score),
    ]


def test_score_accumulation():
    events = (
        phrase_rows("P1", 0, 1, "A") + phrase_rows("P2", 0, 0, "N") + phrase_rows("P3", 0, 2, "A")
    )
    bout = build_bout(events)
    assert [p.score_after for p in bout.phrases] == [(1, 0), (1, 0), (1, 1)]
    assert bout.final_score == (1, 1)
    assert bout.break_index is None


def test_break_index_at_first_eight():
    events = []
    for i in range(1, 14):
        events += phrase_rows(f"P{i}", 0, 1 if i % 2 else 2, "A")
    # fencer 1 scores on odd phrases: reaches 8 points at phrase 15... build 20
    events = []
    scores = [1, 1, 1, 2, 1, 1, 2, 1, 1, 2, 1, 0, 2]  # fencer1 hits 8 at phrase 11
    for i, s in enumerate(scores, start=1):
        events += phrase_rows(f"P{i}", 0, s, "A" if s else "N")
    bout = build_bout(events)
    assert bout.break_index == 11
    assert bout.final_score == (8, 4)


def test_score_overflow_rejected():
    events = []
    for i in range(1, 17):
        events += phrase_rows(f"P{i}", 0, 1, "A")
    with pytest.raises(ScoreOverflow):
        build_bout(events)


def test_duration_is_max_action_end():
    events = [
        ev(frame=0, footwork1="FWD_B"),
        ev(frame=25, footwork1="FWD_E"),
        ev(frame=40, result="N", score=0),
    ]
    bout = build_bout(events)
    assert bout.phrases[0].duration == 25


def test_build_bout_deterministic():
    events = phrase_rows("P1", 0, 1, "A") + phrase_rows("P2", 0, 2, "R")
    assert build_bout(events) == build_bout(list(events))


def test_build_bouts_groups_by_bout_id():
    rows = [
        FrameEvent(bout_id="B1", phrase_id="P1", frame=0, result="A", score=1),
        FrameEvent(bout_id="B2", phrase_id="P1", frame=0, result="S", score=0),
    ]
    bouts = build_bouts(rows)
    assert [b.id for b in bouts] == ["B1", "B2"]
    with pytest.raises(ValueError):
        build_bout(rows)
