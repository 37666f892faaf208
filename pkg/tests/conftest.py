from pathlib import Path

import pytest

from boutflow.ingest import build_bout
from boutflow.model import Action, ActionKind, Phrase
from boutflow.synth import default_profile, generate_bout

FIXTURES = Path(__file__).parent / "fixtures"


def make_phrase(
    phrase_id="P1",
    index=1,
    actions=(),
    scorer=0,
    result="N",
    duration=None,
    track=(),
    score_after=(0, 0),
):
    if duration is None:
        duration = max((a.end_frame for a in actions), default=0)
    return Phrase(
        id=phrase_id,
        index=index,
        actions=tuple(actions),
        duration=duration,
        result=result,
        scorer=scorer,
        confrontation_track=tuple(track),
        score_after=score_after,
    )


def act(fencer, kind, start, end, position=None):
    return Action(
        fencer=fencer,
        kind=ActionKind(kind),
        start_frame=start,
        end_frame=end,
        position=position,
    )


@pytest.fixture(scope="session")
def synth_bout():
    """One deterministic generated bout with its ground truth."""
    events, truths = generate_bout(default_profile(seed=11), target_score=15)
    return build_bout(events), truths


@pytest.fixture(scope="session")
def synth_corpus():
    """A handful of bouts across seeds, assembled and ready."""
    corpus = []
    for seed in range(6):
        events, truths = generate_bout(default_profile(seed=seed), target_score=10)
        corpus.append((build_bout(events), truths))
    return corpus
