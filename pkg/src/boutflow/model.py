"""Domain types shared by the whole pipeline.

Everything here is immutable after construction and safe to share across
threads. The tactic-node vocabulary and its fixed grid geometry (layers,
columns) live here because every downstream stage depends on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

FPS = 30
PISTE_HALF_LENGTH_M = 7.0
ON_GUARD_LINE_M = 2.0

# Sabre target areas used by default; the position vocabulary itself is an
# open set of lowercase tokens.
DEFAULT_TARGET_POSITIONS = ("head", "chest", "flank", "arm")

REFEREE_CALLS = ("A", "R", "S", "N")


class ActionKind(Enum):
    """One fencer's footwork or bladework interval."""

    FORWARD = "forward"
    BACKWARD = "backward"
    LUNGE = "lunge"
    ATTACK = "attack"
    PARRY = "parry"
    RIPOSTE = "riposte"
    COUNTER = "counter"

    @property
    def is_footwork(self) -> bool:
        return self in (ActionKind.FORWARD, ActionKind.BACKWARD, ActionKind.LUNGE)

    @property
    def is_bladework(self) -> bool:
        return not self.is_footwork

    @property
    def is_offensive(self) -> bool:
        return self in (ActionKind.ATTACK, ActionKind.RIPOSTE, ActionKind.COUNTER)


class TacticNodeKind(Enum):
    """The eight abstract states a phrase moves through.

    Values are the display tokens used in exports and the UI.
    """

    START = "S"
    BOTH_BACKWARD = "BB"
    BOTH_FORWARD = "FF"
    FORWARD_BACK = "FB"  # left fencer forward, right fencer backward
    BACK_FORWARD = "BF"  # left fencer backward, right fencer forward
    LEFT_SCORE = "1"
    RIGHT_SCORE = "2"
    NO_SCORE = "="


# Canonical collation used for sorting, tie-breaking and export order.
KIND_ORDER = (
    TacticNodeKind.START,
    TacticNodeKind.BOTH_BACKWARD,
    TacticNodeKind.BOTH_FORWARD,
    TacticNodeKind.FORWARD_BACK,
    TacticNodeKind.BACK_FORWARD,
    TacticNodeKind.LEFT_SCORE,
    TacticNodeKind.RIGHT_SCORE,
    TacticNodeKind.NO_SCORE,
)

KIND_RANK = {kind: i for i, kind in enumerate(KIND_ORDER)}

TERMINAL_KINDS = (
    TacticNodeKind.LEFT_SCORE,
    TacticNodeKind.RIGHT_SCORE,
    TacticNodeKind.NO_SCORE,
)

_LAYER = {
    TacticNodeKind.START: 1,
    TacticNodeKind.BOTH_BACKWARD: 1,
    TacticNodeKind.FORWARD_BACK: 2,
    TacticNodeKind.BOTH_FORWARD: 2,
    TacticNodeKind.BACK_FORWARD: 2,
    TacticNodeKind.LEFT_SCORE: 3,
    TacticNodeKind.NO_SCORE: 3,
    TacticNodeKind.RIGHT_SCORE: 3,
}


class Column(Enum):
    """Horizontal position in the flow-graph grid.

    Left means the right fencer dominates, right means the left fencer
    dominates, center is balance of power.
    """

    LEFT = "left"
    CENTER = "center"
    RIGHT = "right"


_COLUMN = {
    TacticNodeKind.BACK_FORWARD: Column.LEFT,
    TacticNodeKind.RIGHT_SCORE: Column.LEFT,
    TacticNodeKind.START: Column.CENTER,
    TacticNodeKind.BOTH_BACKWARD: Column.CENTER,
    TacticNodeKind.BOTH_FORWARD: Column.CENTER,
    TacticNodeKind.NO_SCORE: Column.CENTER,
    TacticNodeKind.FORWARD_BACK: Column.RIGHT,
    TacticNodeKind.LEFT_SCORE: Column.RIGHT,
}

# Fencer swap symmetry: exchanging the two fencers mirrors the graph.
MIRROR_KIND = {
    TacticNodeKind.START: TacticNodeKind.START,
    TacticNodeKind.BOTH_BACKWARD: TacticNodeKind.BOTH_BACKWARD,
    TacticNodeKind.BOTH_FORWARD: TacticNodeKind.BOTH_FORWARD,
    TacticNodeKind.FORWARD_BACK: TacticNodeKind.BACK_FORWARD,
    TacticNodeKind.BACK_FORWARD: TacticNodeKind.FORWARD_BACK,
    TacticNodeKind.LEFT_SCORE: TacticNodeKind.RIGHT_SCORE,
    TacticNodeKind.RIGHT_SCORE: TacticNodeKind.LEFT_SCORE,
    TacticNodeKind.NO_SCORE: TacticNodeKind.NO_SCORE,
}


def layer_of(kind: TacticNodeKind) -> int:
    """Vertical layer of a tactic node: 1 start, 2 mid-phrase, 3 terminal."""
    return _LAYER[kind]


def column_of(kind: TacticNodeKind) -> Column:
    return _COLUMN[kind]


def terminal_for_scorer(scorer: int) -> TacticNodeKind:
    if scorer == 1:
        return TacticNodeKind.LEFT_SCORE
    if scorer == 2:
        return TacticNodeKind.RIGHT_SCORE
    if scorer == 0:
        return TacticNodeKind.NO_SCORE
    raise ValueError(f"scorer must be 0, 1 or 2, got {scorer!r}")


def is_legal_transition(src: TacticNodeKind, dst: TacticNodeKind) -> bool:
    """Whether a flow edge src -> dst may appear in a tactic sequence.

    Flows never re-enter the start node, never leave a terminal, never
    self-loop, only move to the same or a deeper layer, and the only
    in-layer-1 edge is start -> both-backward.
    """
    if src == dst:
        return False
    if dst is TacticNodeKind.START:
        return False
    if src in TERMINAL_KINDS:
        return False
    if layer_of(src) > layer_of(dst):
        return False
    if layer_of(src) == 1 and layer_of(dst) == 1:
        return src is TacticNodeKind.START and dst is TacticNodeKind.BOTH_BACKWARD
    return True


def legal_transitions() -> list[tuple[TacticNodeKind, TacticNodeKind]]:
    """All edges allowed by the flow-graph constraints, in canonical order."""
    return [
        (a, b)
        for a in KIND_ORDER
        for b in KIND_ORDER
        if is_legal_transition(a, b)
    ]


@dataclass(frozen=True)
class FrameEvent:
    """One annotated video frame row.

    Frames are 1/30 s ticks counted from the phrase's start signal. A row
    carries whatever was observed on that frame; absent fields are None.
    """

    bout_id: str
    phrase_id: str
    frame: int
    footwork1: Optional[str] = None
    footwork2: Optional[str] = None
    bladework1: Optional[str] = None
    bladework2: Optional[str] = None
    attack1: Optional[str] = None
    attack2: Optional[str] = None
    parry1: Optional[str] = None
    parry2: Optional[str] = None
    confrontation: Optional[float] = None
    result: Optional[str] = None
    score: Optional[int] = None


@dataclass(frozen=True)
class Action:
    """A begin/end-delimited footwork or bladework interval for one fencer."""

    fencer: int
    kind: ActionKind
    start_frame: int
    end_frame: int
    position: Optional[str] = None

    def __post_init__(self) -> None:
        if self.fencer not in (1, 2):
            raise ValueError(f"fencer must be 1 or 2, got {self.fencer!r}")
        if self.start_frame > self.end_frame:
            raise ValueError(
                f"action ends before it starts: [{self.start_frame}, {self.end_frame}]"
            )
        has_position = self.position is not None
        takes_position = self.kind in (ActionKind.ATTACK, ActionKind.PARRY)
        if has_position and not takes_position:
            raise ValueError(f"{self.kind.value} actions carry no position")

    def overlaps(self, start: int, end: int) -> bool:
        return self.start_frame <= end and self.end_frame >= start


@dataclass(frozen=True)
class Phrase:
    """One exchange, from the start signal to the referee's halt."""

    id: str
    index: int  # 1-based chronological position in the bout
    actions: tuple[Action, ...]
    duration: int
    result: str
    scorer: int
    confrontation_track: tuple[tuple[int, float], ...] = ()
    score_after: tuple[int, int] = (0, 0)

    def actions_of(self, fencer: int) -> list[Action]:
        return [a for a in self.actions if a.fencer == fencer]


@dataclass(frozen=True)
class Bout:
    """A complete match; sabre rules, first to 15 points."""

    id: str
    fencer1_name: str
    fencer2_name: str
    phrases: tuple[Phrase, ...]
    break_index: Optional[int] = None
    discipline: str = "sabre"

    @property
    def final_score(self) -> tuple[int, int]:
        return self.phrases[-1].score_after if self.phrases else (0, 0)

    def phrase_by_id(self, phrase_id: str) -> Phrase:
        for phrase in self.phrases:
            if phrase.id == phrase_id:
                return phrase
        raise KeyError(phrase_id)


def swap_fencers(phrase: Phrase) -> Phrase:
    """Mirror a phrase as if the two fencers had exchanged sides.

    Fencer numbers flip, the piste coordinate is negated (fencer 1 is on
    the negative side), and the scorer/score bookkeeping follows.
    """
    swapped_actions = tuple(
        Action(
            fencer=3 - a.fencer,
            kind=a.kind,
            start_frame=a.start_frame,
            end_frame=a.end_frame,
            position=a.position,
        )
        for a in phrase.actions
    )
    scorer = {0: 0, 1: 2, 2: 1}[phrase.scorer]
    return Phrase(
        id=phrase.id,
        index=phrase.index,
        actions=swapped_actions,
        duration=phrase.duration,
        result=phrase.result,
        scorer=scorer,
        confrontation_track=tuple((f, -c) for f, c in phrase.confrontation_track),
        score_after=(phrase.score_after[1], phrase.score_after[0]),
    )
