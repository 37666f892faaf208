"""Query layer behind the views: filters, sort orders, the compressed
bout timeline, and per-phrase animation tracks."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .abstraction import AbstractionConfig, DEFAULT_CONFIG, abstract_phrase
from .model import (
    ActionKind,
    Bout,
    FPS,
    KIND_RANK,
    ON_GUARD_LINE_M,
    Phrase,
)

PHRASE_GAP_SECONDS = 1.0
ENGAGEMENT_DISTANCE_M = 1.0  # nominal blade-to-blade spacing around the midpoint

SORT_MODES = ("chronological", "duration", "tactic-sequence", "outcome")


@dataclass(frozen=True)
class PhraseFilter:
    """Conjunctive phrase selection: outcome set and a duration ceiling.

    `results` holds scorer values (1, 2) and 0 for no-score phrases; an
    empty set selects nothing.
    """

    results: frozenset[int] = frozenset({0, 1, 2})
    max_duration: Optional[int] = None  # frames

    def matches(self, phrase: Phrase) -> bool:
        if phrase.scorer not in self.results:
            return False
        if self.max_duration is not None and phrase.duration > self.max_duration:
            return False
        return True


def filter_phrases(bout: Bout, phrase_filter: PhraseFilter) -> list[str]:
    """Ids of matching phrases, in chronological order."""
    return [p.id for p in bout.phrases if phrase_filter.matches(p)]


def sort_phrases(
    bout: Bout,
    mode: str = "chronological",
    config: AbstractionConfig = DEFAULT_CONFIG,
) -> list[str]:
    """Phrase ids permuted by the requested order; always stable."""
    if mode not in SORT_MODES:
        raise ValueError(f"unknown sort mode {mode!r}")
    phrases = list(bout.phrases)
    if mode == "chronological":
        key = lambda p: p.index  # noqa: E731
    elif mode == "duration":
        key = lambda p: (-p.duration, p.index)  # noqa: E731
    elif mode == "tactic-sequence":
        ranks = {
            p.id: tuple(KIND_RANK[k] for k in abstract_phrase(p, config).kinds)
            for p in phrases
        }
        key = lambda p: (ranks[p.id], p.index)  # noqa: E731
    else:  # outcome: fencer 1 scores, fencer 2 scores, then no-score
        group = {1: 0, 2: 1, 0: 2}
        key = lambda p: (group[p.scorer], p.index)  # noqa: E731
    return [p.id for p in sorted(phrases, key=key)]


@dataclass(frozen=True)
class TimelineEntry:
    phrase_id: str
    index: int
    x_start: float
    x_end: float
    scorer: int
    score_after: tuple[int, int]


@dataclass(frozen=True)
class BoutTimeline:
    """Compressed game time: phrases laid out back to back with a fixed
    one-second gap between neighbours."""

    entries: tuple[TimelineEntry, ...]
    break_x: Optional[float]
    total_span: float


def bout_timeline(bout: Bout) -> BoutTimeline:
    entries = []
    x = 0.0
    break_x = None
    for i, phrase in enumerate(bout.phrases):
        if i > 0:
            x += PHRASE_GAP_SECONDS
        width = phrase.duration / FPS
        entries.append(
            TimelineEntry(
                phrase_id=phrase.id,
                index=phrase.index,
                x_start=x,
                x_end=x + width,
                scorer=phrase.scorer,
                score_after=phrase.score_after,
            )
        )
        if bout.break_index is not None and phrase.index == bout.break_index:
            break_x = x + width + PHRASE_GAP_SECONDS / 2
        x += width
    return BoutTimeline(
        entries=tuple(entries),
        break_x=break_x,
        total_span=x,
    )


class Pose(Enum):
    EN_GARDE = "en-garde"
    LUNGE = "lunge"
    PARRY = "parry"
    RIPOSTE = "riposte"


# Higher wins when actions overlap.
_POSE_PRECEDENCE = {
    Pose.EN_GARDE: 0,
    Pose.LUNGE: 1,
    Pose.PARRY: 2,
    Pose.RIPOSTE: 3,
}

_KIND_POSE = {
    ActionKind.LUNGE: Pose.LUNGE,
    ActionKind.PARRY: Pose.PARRY,
    ActionKind.RIPOSTE: Pose.RIPOSTE,
    ActionKind.COUNTER: Pose.RIPOSTE,  # one glyph covers both counter-offenses
}


@dataclass(frozen=True)
class Keyframe:
    frame: int
    position: float  # piste meters, fencer 1 side negative
    pose: Pose


@dataclass(frozen=True)
class AnimationTrack:
    duration: int
    keyframes: dict[int, tuple[Keyframe, ...]] = field(default_factory=dict)
    missing_track: bool = False  # no positional data; poses rendered in place


def _pose_at(phrase: Phrase, fencer: int, frame: int) -> Pose:
    pose = Pose.EN_GARDE
    for action in phrase.actions_of(fencer):
        candidate = _KIND_POSE.get(action.kind)
        if candidate is None:
            continue
        if action.start_frame <= frame <= action.end_frame:
            if _POSE_PRECEDENCE[candidate] > _POSE_PRECEDENCE[pose]:
                pose = candidate
    return pose


def _position_at(
    track: tuple[tuple[int, float], ...], frame: int
) -> float:
    """Linear interpolation over the recorded confrontation samples."""
    if frame <= track[0][0]:
        return track[0][1]
    if frame >= track[-1][0]:
        return track[-1][1]
    for (f0, c0), (f1, c1) in zip(track, track[1:]):
        if f0 <= frame <= f1:
            if f1 == f0:
                return c1
            t = (frame - f0) / (f1 - f0)
            return c0 + t * (c1 - c0)
    return track[-1][1]


def animation_track(phrase: Phrase) -> AnimationTrack:
    """Replay data for one phrase: per-fencer keyframes of position and pose.

    Positions ride the recorded confrontation midpoint, the two fencers
    offset half an engagement distance to their own side. Without any
    positional samples the track is flagged and fencers hold their
    on-guard lines.
    """
    track = phrase.confrontation_track
    missing = len(track) == 0

    keyframes: dict[int, list[Keyframe]] = {1: [], 2: []}
    for fencer in (1, 2):
        frames = {0, phrase.duration}
        frames.update(f for f, _c in track)
        for action in phrase.actions_of(fencer):
            if action.kind in _KIND_POSE:
                frames.add(action.start_frame)
                if action.end_frame + 1 <= phrase.duration:
                    frames.add(action.end_frame + 1)
        side = -1.0 if fencer == 1 else 1.0
        for frame in sorted(frames):
            if missing:
                position = side * ON_GUARD_LINE_M
            else:
                midpoint = _position_at(track, frame)
                position = midpoint + side * (ENGAGEMENT_DISTANCE_M / 2)
            keyframes[fencer].append(
                Keyframe(frame=frame, position=position, pose=_pose_at(phrase, fencer, frame))
            )

    return AnimationTrack(
        duration=phrase.duration,
        keyframes={1: tuple(keyframes[1]), 2: tuple(keyframes[2])},
        missing_track=missing,
    )
