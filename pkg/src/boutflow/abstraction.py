"""Phrase-to-tactic-sequence abstraction.

Each phrase's per-fencer action timelines are reduced to a short sequence
of tactic nodes: a start node annotated with the opening step counts, an
optional planned-mutual-retreat node, mid-phrase nodes describing who is
advancing, and a terminal node for the outcome. A parallel timeline tracks
which fencer holds priority (right of way) at every frame.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from itertools import zip_longest
from typing import Optional

from .model import (
    Action,
    ActionKind,
    Phrase,
    TacticNodeKind,
    TERMINAL_KINDS,
    layer_of,
    terminal_for_scorer,
)


@dataclass(frozen=True)
class AbstractionConfig:
    """Tunable thresholds, in frames (30 per second).

    bb_joint_window_frames: maximum spread between the two fencers'
        retreat switches for the mutual retreat to count as planned.
    pause_threshold_frames: gaps between footwork longer than this become
        explicit hold segments (and mark a pause-then-go as a retreat cue).
    """

    bb_joint_window_frames: int = 15
    pause_threshold_frames: int = 10


DEFAULT_CONFIG = AbstractionConfig()


class Direction(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    HOLD = "hold"


class EmptyPhrase(Exception):
    pass


class IllegalSequence(Exception):
    """An abstraction produced a sequence violating its own contract."""


@dataclass(frozen=True)
class TacticNode:
    kind: TacticNodeKind
    enter_frame: int
    priority_at_entry: Optional[int] = None  # 1, 2 or None
    steps: Optional[tuple[int, int]] = None  # start node only
    attack_pairs: Optional[tuple[tuple[Optional[str], Optional[str]], ...]] = None


@dataclass(frozen=True)
class TacticSequence:
    phrase_id: str
    nodes: tuple[TacticNode, ...]

    @property
    def kinds(self) -> tuple[TacticNodeKind, ...]:
        return tuple(n.kind for n in self.nodes)


@dataclass(frozen=True)
class PriorityTimeline:
    """Who holds priority over [0, duration]; owner None before any attack."""

    segments: tuple[tuple[int, int, Optional[int]], ...]

    def owner_at(self, frame: int) -> Optional[int]:
        owner = self.segments[0][2] if self.segments else None
        for start, _end, seg_owner in self.segments:
            if start <= frame:
                owner = seg_owner
            else:
                break
        return owner


def direction_timeline(
    actions: list[Action],
    span: Optional[int] = None,
    pause_threshold: int = DEFAULT_CONFIG.pause_threshold_frames,
) -> list[tuple[int, int, Direction]]:
    """Collapse one fencer's footwork into a forward/backward/hold partition.

    Forward and lunge intervals move forward, backward moves backward.
    Gaps no longer than the pause threshold are absorbed into the
    neighbouring movement; longer gaps become explicit holds.
    """
    footwork = sorted(
        (a for a in actions if a.kind.is_footwork and a.end_frame > a.start_frame),
        key=lambda a: (a.start_frame, a.end_frame),
    )
    if span is None:
        span = max((a.end_frame for a in actions), default=0)

    segments: list[list] = []  # [start, end, Direction]

    def push(start: int, end: int, direction: Direction) -> None:
        if segments and segments[-1][2] is direction and segments[-1][1] >= start:
            segments[-1][1] = max(segments[-1][1], end)
        else:
            segments.append([start, end, direction])

    cursor = 0
    for action in footwork:
        direction = (
            Direction.BACKWARD
            if action.kind is ActionKind.BACKWARD
            else Direction.FORWARD
        )
        start = min(action.start_frame, span)
        end = min(action.end_frame, span)
        if end <= cursor and segments:
            continue
        start = max(start, cursor if segments else 0)
        gap = start - cursor
        if gap > 0:
            if gap > pause_threshold:
                push(cursor, start, Direction.HOLD)
            elif segments:
                segments[-1][1] = start
            else:
                start = 0  # short leading gap: the first move starts the phrase
        push(start, end, direction)
        cursor = max(cursor, end)

    if cursor < span or not segments:
        gap = span - cursor
        if not segments:
            segments.append([0, span, Direction.HOLD])
        elif gap > pause_threshold:
            push(cursor, span, Direction.HOLD)
        else:
            segments[-1][1] = span

    return [(s, e, d) for s, e, d in segments]


def _direction_at(timeline: list[tuple[int, int, Direction]], frame: int) -> Direction:
    current = timeline[0][2] if timeline else Direction.HOLD
    for start, _end, direction in timeline:
        if start <= frame:
            current = direction
        else:
            break
    return current


def _forward_starts(actions: list[Action]) -> list[int]:
    return sorted(
        a.start_frame for a in actions if a.kind is ActionKind.FORWARD
    )


def _retreat_signal(
    timeline: list[tuple[int, int, Direction]],
    forward_starts: list[int],
) -> Optional[int]:
    """Frame at which this fencer commits to the planned-retreat reading.

    Either the first switch to backward, or the first pause inside forward
    motion that resumes forward (a feinted advance). Only counts if it
    happens within the fencer's first two forward steps.
    """
    candidates: list[int] = []
    for start, _end, direction in timeline:
        if direction is Direction.BACKWARD:
            candidates.append(start)
            break
    for i, (start, _end, direction) in enumerate(timeline):
        if (
            direction is Direction.HOLD
            and 0 < i < len(timeline) - 1
            and timeline[i - 1][2] is Direction.FORWARD
            and timeline[i + 1][2] is Direction.FORWARD
        ):
            candidates.append(start)
            break
    if not candidates:
        return None
    signal = min(candidates)
    steps_before = sum(1 for s in forward_starts if s < signal)
    if steps_before > 2:
        return None
    return signal


_PAIR_KIND = {
    (Direction.FORWARD, Direction.FORWARD): TacticNodeKind.BOTH_FORWARD,
    (Direction.FORWARD, Direction.BACKWARD): TacticNodeKind.FORWARD_BACK,
    (Direction.BACKWARD, Direction.FORWARD): TacticNodeKind.BACK_FORWARD,
}


def compute_priority(phrase: Phrase) -> PriorityTimeline:
    """Track right of way through the phrase's bladework.

    Nobody owns priority until the first offensive begin; simultaneous
    first begins leave it unowned. The defender takes it over by a parry
    that overlaps the owner's offensive action, or by opening their own
    offense strictly after the owner's action has ended.
    """
    duration = phrase.duration
    relevant = sorted(
        (
            a
            for a in phrase.actions
            if a.kind.is_offensive or a.kind is ActionKind.PARRY
        ),
        key=lambda a: (a.start_frame, a.fencer, a.kind.value),
    )
    by_frame: dict[int, list[Action]] = {}
    for action in relevant:
        by_frame.setdefault(action.start_frame, []).append(action)

    owner: Optional[int] = None
    ref: Optional[Action] = None  # offensive action the owner's priority rides on
    changes: list[tuple[int, Optional[int]]] = []

    def record(frame: int, new_owner: Optional[int]) -> None:
        if changes and changes[-1][0] == frame:
            changes[-1] = (frame, new_owner)
        else:
            changes.append((frame, new_owner))

    for frame in sorted(by_frame):
        group = by_frame[frame]
        if owner is None:
            claimants = {a.fencer for a in group if a.kind.is_offensive}
            if len(claimants) == 1:
                owner = claimants.pop()
                ref = next(a for a in group if a.kind.is_offensive and a.fencer == owner)
                record(frame, owner)
            # two simultaneous first offenses: nobody gains priority
            continue
        for action in group:
            if action.fencer == owner:
                if action.kind.is_offensive:
                    ref = action
                continue
            if action.kind is ActionKind.PARRY:
                if ref is not None and action.overlaps(ref.start_frame, ref.end_frame):
                    owner = action.fencer
                    ref = None  # their riposte will carry it
                    record(frame, owner)
            elif action.kind.is_offensive:
                if ref is not None and ref.end_frame < frame:
                    owner = action.fencer
                    ref = action
                    record(frame, owner)

    segments: list[tuple[int, int, Optional[int]]] = []
    current_owner: Optional[int] = None
    current_start = 0
    for frame, new_owner in changes:
        if frame > current_start:
            segments.append((current_start, frame, current_owner))
            current_start = frame
        current_owner = new_owner
    segments.append((current_start, duration, current_owner))
    return PriorityTimeline(segments=tuple(segments))


def abstract_phrase(
    phrase: Phrase, config: AbstractionConfig = DEFAULT_CONFIG
) -> TacticSequence:
    """Reduce one phrase to its tactic-node sequence.

    The start node counts each fencer's forward steps up to the first
    change of the joint direction pair. A planned mutual retreat (both
    fencers bailing out of the opening advance within a short window of
    each other) becomes a both-backward node right after the start;
    afterwards every change of the joint pair maps to a mid-phrase node.
    The terminal node follows the recorded scorer.
    """
    if not phrase.actions and not phrase.result:
        raise EmptyPhrase(f"phrase {phrase.id} has no actions and no result")

    duration = phrase.duration
    pause = config.pause_threshold_frames
    timelines = {
        fencer: direction_timeline(phrase.actions_of(fencer), duration, pause)
        for fencer in (1, 2)
    }
    priority = compute_priority(phrase)

    # Planned mutual retreat: both fencers switch out of the opening
    # advance within the joint window.
    signals = {
        fencer: _retreat_signal(
            timelines[fencer], _forward_starts(phrase.actions_of(fencer))
        )
        for fencer in (1, 2)
    }
    bb_enter: Optional[int] = None
    bb_established: Optional[int] = None
    if signals[1] is not None and signals[2] is not None:
        if abs(signals[1] - signals[2]) <= config.bb_joint_window_frames:
            bb_enter = min(signals[1], signals[2])
            bb_established = max(signals[1], signals[2])

    boundaries = sorted(
        {0}
        | {start for start, _e, _d in timelines[1]}
        | {start for start, _e, _d in timelines[2]}
    )
    first_change = next((t for t in boundaries if t > 0), None)

    def steps_of(fencer: int) -> int:
        cutoff = first_change if first_change is not None else duration + 1
        count = sum(1 for s in _forward_starts(phrase.actions_of(fencer)) if s < cutoff)
        return min(count, 2)

    nodes: list[TacticNode] = [
        TacticNode(
            kind=TacticNodeKind.START,
            enter_frame=0,
            priority_at_entry=priority.owner_at(0),
            steps=(steps_of(1), steps_of(2)),
        )
    ]
    if bb_enter is not None:
        nodes.append(
            TacticNode(
                kind=TacticNodeKind.BOTH_BACKWARD,
                enter_frame=bb_enter,
                priority_at_entry=priority.owner_at(bb_enter),
            )
        )

    for t in boundaries:
        if bb_established is not None and t <= bb_established:
            continue
        pair = (_direction_at(timelines[1], t), _direction_at(timelines[2], t))
        kind = _PAIR_KIND.get(pair)
        if kind is None:
            continue
        if nodes[-1].kind is kind:
            continue
        nodes.append(
            TacticNode(
                kind=kind,
                enter_frame=t,
                priority_at_entry=priority.owner_at(t),
            )
        )

    nodes.append(
        TacticNode(
            kind=terminal_for_scorer(phrase.scorer),
            enter_frame=duration,
            priority_at_entry=priority.owner_at(duration),
        )
    )

    nodes = _annotate_attacks(nodes, phrase)
    sequence = TacticSequence(phrase_id=phrase.id, nodes=tuple(nodes))
    validate_sequence(sequence, scorer=phrase.scorer)
    return sequence


def _annotate_attacks(nodes: list[TacticNode], phrase: Phrase) -> list[TacticNode]:
    """Attach per-visit attack position pairs to both-forward nodes."""
    out: list[TacticNode] = []
    for i, node in enumerate(nodes):
        if node.kind is not TacticNodeKind.BOTH_FORWARD:
            out.append(node)
            continue
        span_start = node.enter_frame
        span_end = nodes[i + 1].enter_frame if i + 1 < len(nodes) else phrase.duration
        pairs = _attack_pairs(phrase, span_start, span_end)
        out.append(replace(node, attack_pairs=pairs))
    return out


def _attack_pairs(
    phrase: Phrase, span_start: int, span_end: int
) -> tuple[tuple[Optional[str], Optional[str]], ...]:
    def overlapping(fencer: int) -> list[Action]:
        return [
            a
            for a in sorted(phrase.actions_of(fencer), key=lambda a: a.start_frame)
            if a.kind is ActionKind.ATTACK
            and a.start_frame < max(span_end, span_start + 1)
            and a.end_frame >= span_start
        ]

    pairs = []
    for a1, a2 in zip_longest(overlapping(1), overlapping(2)):
        pairs.append(
            (a1.position if a1 else None, a2.position if a2 else None)
        )
    return tuple(pairs)


def mirror_sequence(sequence: TacticSequence) -> TacticSequence:
    """The same sequence as seen with the fencers' sides exchanged."""
    from .model import MIRROR_KIND

    mirrored = []
    for node in sequence.nodes:
        priority = node.priority_at_entry
        if priority in (1, 2):
            priority = 3 - priority
        mirrored.append(
            TacticNode(
                kind=MIRROR_KIND[node.kind],
                enter_frame=node.enter_frame,
                priority_at_entry=priority,
                steps=(node.steps[1], node.steps[0]) if node.steps else None,
                attack_pairs=tuple((b, a) for a, b in node.attack_pairs)
                if node.attack_pairs is not None
                else None,
            )
        )
    return TacticSequence(phrase_id=sequence.phrase_id, nodes=tuple(mirrored))


def validate_sequence(sequence: TacticSequence, scorer: Optional[int] = None) -> None:
    """Assert every structural invariant; raises IllegalSequence on failure."""
    nodes = sequence.nodes
    if not nodes:
        raise IllegalSequence("empty sequence")
    if nodes[0].kind is not TacticNodeKind.START:
        raise IllegalSequence(f"first node is {nodes[0].kind.value}, not the start node")
    if nodes[-1].kind not in TERMINAL_KINDS:
        raise IllegalSequence(f"last node {nodes[-1].kind.value} is not terminal")
    if scorer is not None and nodes[-1].kind is not terminal_for_scorer(scorer):
        raise IllegalSequence(
            f"terminal {nodes[-1].kind.value} does not match scorer {scorer}"
        )
    for i, node in enumerate(nodes):
        if i > 0 and node.kind is TacticNodeKind.START:
            raise IllegalSequence("start node appears mid-sequence")
        if i < len(nodes) - 1 and node.kind in TERMINAL_KINDS:
            raise IllegalSequence("terminal node appears mid-sequence")
        if node.kind is TacticNodeKind.BOTH_BACKWARD and (
            i != 1 or nodes[0].kind is not TacticNodeKind.START
        ):
            raise IllegalSequence("mutual retreat is only legal right after the start")
        if node.steps is not None and node.kind is not TacticNodeKind.START:
            raise IllegalSequence("step counts only annotate the start node")
        if node.attack_pairs is not None and node.kind is not TacticNodeKind.BOTH_FORWARD:
            raise IllegalSequence("attack pairs only annotate both-forward nodes")
        if i > 0:
            prev = nodes[i - 1]
            if prev.kind is node.kind:
                raise IllegalSequence(f"consecutive {node.kind.value} nodes")
            if layer_of(prev.kind) > layer_of(node.kind):
                raise IllegalSequence(
                    f"layer decreases: {prev.kind.value} -> {node.kind.value}"
                )
            if node.enter_frame < prev.enter_frame:
                raise IllegalSequence("enter frames decrease along the sequence")
    if nodes[0].steps is None:
        raise IllegalSequence("start node is missing step counts")
    if any(s not in (0, 1, 2) for s in nodes[0].steps):
        raise IllegalSequence(f"step counts out of range: {nodes[0].steps}")
