"""Deterministic synthetic bout generator.

Walks the tactic graph under a profile's transition probabilities and
realizes each walk as a frame-event stream that the ingest + abstraction
pipeline recovers exactly. Timings are sampled away from the abstraction
thresholds (retreat pairs land well inside the joint window, distinct
transitions well outside it, footwork stays contiguous) so the ground
truth is unambiguous.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from typing import Optional

from .abstraction import (
    AbstractionConfig,
    DEFAULT_CONFIG,
    TacticNode,
    TacticSequence,
)
from .model import (
    FrameEvent,
    TacticNodeKind,
    TERMINAL_KINDS,
    is_legal_transition,
)

KIND_BY_TOKEN = {k.value: k for k in TacticNodeKind}

_PROB_TOLERANCE = 1e-9


class InvalidProfile(Exception):
    pass


@dataclass(frozen=True)
class DurationModel:
    """Nominal action lengths in frames, with uniform jitter."""

    step_mean: int = 8
    step_jitter: int = 2
    dwell_min: int = 20
    dwell_max: int = 30
    attack_mean: int = 8
    attack_jitter: int = 2


@dataclass(frozen=True)
class TacticProfile:
    """Generative model of one bout's tactics.

    transitions: outgoing probabilities per node over legal graph edges.
    steps: distribution of opening forward steps over {1, 2}.
    positions: attack target distribution (open lowercase tokens).
    """

    transitions: dict[TacticNodeKind, dict[TacticNodeKind, float]]
    steps: dict[int, float] = field(
        default_factory=lambda: {1: 0.5, 2: 0.5}
    )
    positions: dict[str, float] = field(
        default_factory=lambda: {"head": 0.4, "chest": 0.2, "flank": 0.3, "arm": 0.1}
    )
    durations: DurationModel = DurationModel()
    seed: int = 0

    def validate(self) -> None:
        if not self.transitions:
            raise InvalidProfile("no transitions")
        for src, targets in self.transitions.items():
            total = sum(targets.values())
            if abs(total - 1.0) > 1e-6:
                raise InvalidProfile(
                    f"outgoing probabilities from {src.value} sum to {total}"
                )
            for dst, probability in targets.items():
                if probability < 0:
                    raise InvalidProfile("negative probability")
                if probability > 0 and not is_legal_transition(src, dst):
                    raise InvalidProfile(
                        f"probability mass on illegal edge {src.value} -> {dst.value}"
                    )
        if set(self.steps) - {1, 2} or abs(sum(self.steps.values()) - 1.0) > 1e-6:
            raise InvalidProfile("step distribution must cover {1, 2} and sum to 1")
        if not self.positions or abs(sum(self.positions.values()) - 1.0) > 1e-6:
            raise InvalidProfile("position distribution must sum to 1")
        # A bout must be able to finish: some scoring terminal reachable,
        # and every reachable non-terminal must have somewhere to go.
        reachable = {TacticNodeKind.START}
        frontier = [TacticNodeKind.START]
        while frontier:
            node = frontier.pop()
            if node not in TERMINAL_KINDS and node not in self.transitions:
                raise InvalidProfile(f"reachable node {node.value} has no outgoing edges")
            for dst, probability in self.transitions.get(node, {}).items():
                if probability > 0 and dst not in reachable:
                    reachable.add(dst)
                    frontier.append(dst)
        if not reachable & {TacticNodeKind.LEFT_SCORE, TacticNodeKind.RIGHT_SCORE}:
            raise InvalidProfile("no scoring terminal is reachable")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "transitions": {
                src.value: {dst.value: p for dst, p in sorted(targets.items(), key=lambda kv: kv[0].value)}
                for src, targets in sorted(self.transitions.items(), key=lambda kv: kv[0].value)
            },
            "steps": {str(k): v for k, v in sorted(self.steps.items())},
            "positions": dict(sorted(self.positions.items())),
            "durations": asdict(self.durations),
        }

    @staticmethod
    def from_dict(data: dict) -> "TacticProfile":
        try:
            transitions = {
                KIND_BY_TOKEN[src]: {KIND_BY_TOKEN[dst]: float(p) for dst, p in targets.items()}
                for src, targets in data["transitions"].items()
            }
        except KeyError as exc:
            raise InvalidProfile(f"unknown tactic node {exc}")
        profile = TacticProfile(
            transitions=transitions,
            steps={int(k): float(v) for k, v in data.get("steps", {"1": 0.5, "2": 0.5}).items()},
            positions={str(k): float(v) for k, v in data.get("positions", {}).items()}
            or {"head": 0.4, "chest": 0.2, "flank": 0.3, "arm": 0.1},
            durations=DurationModel(**data.get("durations", {})),
            seed=int(data.get("seed", 0)),
        )
        profile.validate()
        return profile

    @staticmethod
    def from_json(text: str) -> "TacticProfile":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidProfile(f"profile is not valid JSON: {exc}")
        return TacticProfile.from_dict(data)


def default_profile(seed: int = 0) -> TacticProfile:
    """A broad profile exercising every legal mid-game edge."""
    t = {
        "S": {"FF": 0.42, "BB": 0.18, "FB": 0.14, "BF": 0.14, "1": 0.04, "2": 0.04, "=": 0.04},
        "BB": {"FF": 0.30, "FB": 0.22, "BF": 0.22, "1": 0.10, "2": 0.10, "=": 0.06},
        "FF": {"FB": 0.10, "BF": 0.10, "1": 0.34, "2": 0.34, "=": 0.12},
        "FB": {"FF": 0.12, "BF": 0.10, "1": 0.40, "2": 0.30, "=": 0.08},
        "BF": {"FF": 0.12, "FB": 0.10, "1": 0.30, "2": 0.40, "=": 0.08},
    }
    return TacticProfile(
        transitions={
            KIND_BY_TOKEN[src]: {KIND_BY_TOKEN[dst]: p for dst, p in targets.items()}
            for src, targets in t.items()
        },
        seed=seed,
    )


def single_path_profile(
    walk: tuple[str, ...] = ("S", "FF", "1"), seed: int = 0
) -> TacticProfile:
    """Degenerate profile that always produces the given walk."""
    transitions: dict[TacticNodeKind, dict[TacticNodeKind, float]] = {}
    for src, dst in zip(walk, walk[1:]):
        transitions[KIND_BY_TOKEN[src]] = {KIND_BY_TOKEN[dst]: 1.0}
    profile = TacticProfile(transitions=transitions, seed=seed)
    profile.validate()
    return profile


def _weighted_choice(rng: random.Random, weights: dict, key=str) -> object:
    items = sorted(weights.items(), key=lambda kv: key(kv[0]))
    roll = rng.random() * sum(w for _v, w in items)
    acc = 0.0
    for value, weight in items:
        acc += weight
        if roll < acc + _PROB_TOLERANCE:
            return value
    return items[-1][0]


@dataclass
class _Row:
    frame: int
    order: int  # 0 ends, 1 begins, 2 confrontation, 9 result
    fencer: int
    footwork: Optional[str] = None
    bladework: Optional[str] = None
    attack: Optional[str] = None
    parry: Optional[str] = None
    confrontation: Optional[float] = None
    result: Optional[str] = None
    score: Optional[int] = None


@dataclass
class _Blade:
    fencer: int
    kind: str  # ATT / PAR / RIP / CTR
    start: int
    end: int
    position: Optional[str] = None


class _PhraseRealizer:
    """Turns one sampled walk into rows plus its ground-truth sequence."""

    def __init__(self, rng: random.Random, profile: TacticProfile, config: AbstractionConfig):
        self.rng = rng
        self.profile = profile
        self.config = config
        self.rows: list[_Row] = []
        self.blades: list[_Blade] = []

    def _step_len(self) -> int:
        d = self.profile.durations
        return max(3, self.rng.randint(d.step_mean - d.step_jitter, d.step_mean + d.step_jitter))

    def _attack_len(self) -> int:
        d = self.profile.durations
        return max(5, self.rng.randint(d.attack_mean - d.attack_jitter, d.attack_mean + d.attack_jitter))

    def _dwell(self) -> int:
        d = self.profile.durations
        floor = self.config.bb_joint_window_frames + 5
        low = max(d.dwell_min, floor)
        high = max(d.dwell_max, low + 1)
        return self.rng.randint(low, high)

    def _position(self) -> str:
        return _weighted_choice(self.rng, self.profile.positions)

    def _chain(self, fencer: int, code: str, start: int, end: int) -> None:
        """Contiguous footwork split as bare repeated begins plus one end."""
        self.rows.append(_Row(start, 1, fencer, footwork=f"{code}_B"))
        cut = start + self._step_len()
        while cut < end - 2:
            self.rows.append(_Row(cut, 1, fencer, footwork=f"{code}_B"))
            cut += self._step_len()
        self.rows.append(_Row(end, 0, fencer, footwork=f"{code}_E"))

    def _lunge(self, fencer: int, start: int, end: int) -> None:
        self.rows.append(_Row(start, 1, fencer, footwork="LUN_B"))
        self.rows.append(_Row(end, 0, fencer, footwork="LUN_E"))

    def _attack(self, fencer: int, start: int, length: Optional[int] = None) -> _Blade:
        position = self._position()
        blade = _Blade(fencer, "ATT", start, start + (length or self._attack_len()), position)
        self.blades.append(blade)
        return blade

    def realize(
        self, walk: list[TacticNodeKind], phrase_steps: tuple[int, int]
    ) -> tuple[list[_Row], TacticSequence, str, int, int]:
        rng = self.rng
        mids = walk[1:-1]
        terminal = walk[-1]
        scorer = {
            TacticNodeKind.LEFT_SCORE: 1,
            TacticNodeKind.RIGHT_SCORE: 2,
            TacticNodeKind.NO_SCORE: 0,
        }[terminal]

        if not mids:
            return self._realize_standstill(terminal, scorer)

        _DIRS = {
            TacticNodeKind.BOTH_FORWARD: ("F", "F"),
            TacticNodeKind.FORWARD_BACK: ("F", "B"),
            TacticNodeKind.BACK_FORWARD: ("B", "F"),
            TacticNodeKind.BOTH_BACKWARD: ("B", "B"),
        }

        # An opening joint advance always reads as both-forward, so a walk
        # whose first mid node sends one fencer backward means that fencer
        # retreated from the start line: no opening steps for them.
        init_dirs = _DIRS[mids[0]]
        if mids[0] in (TacticNodeKind.FORWARD_BACK, TacticNodeKind.BACK_FORWARD):
            phrase_steps = tuple(
                0 if init_dirs[f - 1] == "B" else phrase_steps[f - 1] for f in (1, 2)
            )

        step_lens = {
            f: [self._step_len() for _ in range(phrase_steps[f - 1])] for f in (1, 2)
        }
        steps_end = {f: sum(step_lens[f]) for f in (1, 2)}
        last_step_start = {
            f: steps_end[f] - step_lens[f][-1] if step_lens[f] else 0 for f in (1, 2)
        }
        anchor = max(
            max(steps_end.values()), max(last_step_start.values()) + 1
        ) + rng.randint(1, 4)

        entries: list[int] = []  # ground-truth enter frame per mid node
        switch_at: dict[int, list[tuple[int, str]]] = {1: [], 2: []}  # (frame, new dir)
        current_dir = {1: "F", 2: "F"}

        cursor = anchor
        for i, node in enumerate(mids):
            want = _DIRS[node]
            if i == 0:
                if node is TacticNodeKind.BOTH_BACKWARD:
                    t = {f: anchor + rng.randint(0, min(3, self.config.bb_joint_window_frames - 1))
                         for f in (1, 2)}
                    for f in (1, 2):
                        switch_at[f].append((t[f], "B"))
                        current_dir[f] = "B"
                    entries.append(min(t.values()))
                    cursor = max(t.values())
                else:
                    # either both advance (both-forward) or one fencer has
                    # been retreating since the start signal
                    current_dir = {1: init_dirs[0], 2: init_dirs[1]}
                    entries.append(0)
            else:
                change = cursor + self._dwell()
                for f in (1, 2):
                    if want[f - 1] != current_dir[f]:
                        switch_at[f].append((change, want[f - 1]))
                        current_dir[f] = want[f - 1]
                entries.append(change)
                cursor = change

        total_end = cursor + self._dwell()

        # Emit footwork per fencer: opening steps (the last one stretched to
        # the fencer's first switch) or a retreat from the line, then
        # alternating backward chains and lunges.
        for f in (1, 2):
            switches = switch_at[f]
            if init_dirs[f - 1] == "B" and mids[0] is not TacticNodeKind.BOTH_BACKWARD:
                block_end = switches[0][0] if switches else total_end
                self._chain(f, "BWD", 0, block_end)
            else:
                starts = [0]
                for length in step_lens[f][:-1]:
                    starts.append(starts[-1] + length)
                for s in starts:
                    self.rows.append(_Row(s, 1, f, footwork="FWD_B"))
                if switches:
                    self.rows.append(_Row(switches[0][0], 0, f, footwork="FWD_E"))
                else:
                    # advancing until the halt: carry the advance as a lunge
                    self.rows.append(_Row(steps_end[f], 0, f, footwork="FWD_E"))
                    self._lunge(f, steps_end[f], total_end)
            for j, (frame, direction) in enumerate(switches):
                block_end = switches[j + 1][0] if j + 1 < len(switches) else total_end
                if direction == "B":
                    self._chain(f, "BWD", frame, block_end)
                else:
                    self._lunge(f, frame, block_end)

        # Bladework per the outcome story.
        last_mid = mids[-1]
        final_start = entries[-1] if entries[-1] > 0 else anchor
        result = "N"
        for i, node in enumerate(mids):
            if node is not TacticNodeKind.BOTH_FORWARD:
                continue
            region_start = max(entries[i], anchor)
            region_end = entries[i + 1] if i + 1 < len(mids) else total_end
            is_final = i == len(mids) - 1
            first = 1
            if is_final and scorer == 2:
                first = 2
            elif is_final and scorer == 0:
                first = 0
            self._ff_attacks(region_start, region_end, first)
            if is_final:
                result = "S" if scorer == 0 else "A"
        if last_mid is not TacticNodeKind.BOTH_FORWARD and scorer != 0:
            advancing = {"F": [], "B": []}
            dirs = _DIRS[last_mid]
            for f in (1, 2):
                advancing[dirs[f - 1]].append(f)
            window = (final_start, total_end)
            if last_mid is TacticNodeKind.BOTH_BACKWARD or scorer in advancing["F"]:
                blade = self._attack(scorer, window[0] + rng.randint(2, 5))
                result = "A"
            else:
                # retreating scorer: parry the advance and riposte
                attacker = 3 - scorer
                att = self._attack(attacker, window[0] + rng.randint(2, 5))
                parry_start = att.start + rng.randint(2, max(2, att.end - att.start - 2))
                parry_end = parry_start + rng.randint(3, 5)
                self.blades.append(
                    _Blade(scorer, "PAR", parry_start, parry_end, self._position())
                )
                self.blades.append(
                    _Blade(scorer, "RIP", parry_end, parry_end + self._attack_len())
                )
                result = "R"

        duration = total_end
        for blade in self.blades:
            duration = max(duration, blade.end)
        for blade in self.blades:
            self.rows.append(
                _Row(
                    blade.start,
                    1,
                    blade.fencer,
                    bladework=f"{blade.kind}_B",
                    attack=blade.position if blade.kind == "ATT" else None,
                    parry=blade.position if blade.kind == "PAR" else None,
                )
            )
            self.rows.append(_Row(blade.end, 0, blade.fencer, bladework=f"{blade.kind}_E"))

        self._confrontation(mids, entries, duration)

        owner_at = _plan_priority(self.blades)
        truth_nodes = [
            TacticNode(
                kind=TacticNodeKind.START,
                enter_frame=0,
                priority_at_entry=owner_at(0),
                steps=phrase_steps,
            )
        ]
        for i, node in enumerate(mids):
            pairs = None
            if node is TacticNodeKind.BOTH_FORWARD:
                region_start = entries[i]
                region_end = entries[i + 1] if i + 1 < len(mids) else duration
                pairs = self._truth_pairs(region_start, region_end)
            truth_nodes.append(
                TacticNode(
                    kind=node,
                    enter_frame=entries[i],
                    priority_at_entry=owner_at(entries[i]),
                    attack_pairs=pairs,
                )
            )
        truth_nodes.append(
            TacticNode(
                kind=terminal,
                enter_frame=duration,
                priority_at_entry=owner_at(duration),
            )
        )
        return self.rows, truth_nodes, result, scorer, duration

    def _realize_standstill(self, terminal: TacticNodeKind, scorer: int):
        """Walks straight from start to terminal: nobody commits footwork."""
        rng = self.rng
        start = rng.randint(4, 8)
        if scorer == 0:
            # simultaneous touches from the line, priority undecidable
            blades = [self._attack(1, start, 8), self._attack(2, start, 8)]
            duration = blades[0].end
            result = "S"
        else:
            blades = [self._attack(scorer, start)]
            duration = blades[0].end
            result = "A"
        for blade in blades:
            self.rows.append(
                _Row(blade.start, 1, blade.fencer, bladework="ATT_B", attack=blade.position)
            )
            self.rows.append(_Row(blade.end, 0, blade.fencer, bladework="ATT_E"))
        owner_at = _plan_priority(self.blades)
        truth_nodes = [
            TacticNode(
                kind=TacticNodeKind.START, enter_frame=0,
                priority_at_entry=owner_at(0), steps=(0, 0),
            ),
            TacticNode(
                kind=terminal, enter_frame=duration,
                priority_at_entry=owner_at(duration),
            ),
        ]
        return self.rows, truth_nodes, result, scorer, duration

    def _ff_attacks(self, region_start: int, region_end: int, first: int) -> None:
        """Both fencers attack inside a both-forward region.

        `first` names the fencer whose attack begins first (0 for a dead
        tie). The second begin always lands inside the first attack so
        priority stays with the opener.
        """
        rng = self.rng
        length = min(self._attack_len(), max(6, region_end - region_start - 6))
        begin = region_start + rng.randint(2, 4)
        stagger = rng.randint(2, max(2, length - 3))
        if begin + stagger + length >= region_end:
            stagger = 2
        if first == 0:
            self._attack(1, begin, length)
            self._attack(2, begin, length)
        else:
            second = 3 - first
            self._attack(first, begin, length)
            self._attack(second, begin + min(stagger, length - 2), length)

    def _truth_pairs(self, region_start: int, region_end: int):
        mine = sorted(
            (b for b in self.blades if b.kind == "ATT" and region_start <= b.start < region_end),
            key=lambda b: (b.start, b.fencer),
        )
        lefts = [b.position for b in mine if b.fencer == 1]
        rights = [b.position for b in mine if b.fencer == 2]
        if not lefts and not rights:
            return ()
        pairs = []
        for i in range(max(len(lefts), len(rights))):
            pairs.append(
                (lefts[i] if i < len(lefts) else None, rights[i] if i < len(rights) else None)
            )
        return tuple(pairs)

    def _confrontation(
        self, mids: list[TacticNodeKind], entries: list[int], duration: int
    ) -> None:
        drift_of = {
            TacticNodeKind.BOTH_FORWARD: 0.0,
            TacticNodeKind.BOTH_BACKWARD: 0.0,
            TacticNodeKind.FORWARD_BACK: 0.03,
            TacticNodeKind.BACK_FORWARD: -0.03,
        }
        value = 0.0
        frame = 0
        while frame < duration:
            node = TacticNodeKind.BOTH_FORWARD
            for i, entry in enumerate(entries):
                if frame >= entry:
                    node = mids[i]
            value += drift_of[node] * 10 + (self.rng.random() - 0.5) * 0.05
            value = max(-6.0, min(6.0, value))
            self.rows.append(_Row(frame, 2, 0, confrontation=round(value, 2)))
            frame += 10


def _plan_priority(blades: list[_Blade]):
    """Owner-at-frame predictor over the generator's own bladework plan."""
    offensive = {"ATT", "RIP", "CTR"}
    changes: list[tuple[int, Optional[int]]] = []
    owner: Optional[int] = None
    ref: Optional[_Blade] = None
    by_start: dict[int, list[_Blade]] = {}
    for blade in sorted(blades, key=lambda b: (b.start, b.fencer, b.kind)):
        by_start.setdefault(blade.start, []).append(blade)
    for frame in sorted(by_start):
        group = by_start[frame]
        if owner is None:
            claimants = {b.fencer for b in group if b.kind in offensive}
            if len(claimants) == 1:
                owner = claimants.pop()
                ref = next(b for b in group if b.kind in offensive and b.fencer == owner)
                changes.append((frame, owner))
            continue
        for blade in group:
            if blade.fencer == owner:
                if blade.kind in offensive:
                    ref = blade
            elif blade.kind == "PAR":
                if ref is not None and blade.start <= ref.end and blade.end >= ref.start:
                    owner = blade.fencer
                    ref = None
                    changes.append((frame, owner))
            elif blade.kind in offensive:
                if ref is not None and ref.end < frame:
                    owner = blade.fencer
                    ref = blade
                    changes.append((frame, owner))

    def owner_at(frame: int) -> Optional[int]:
        current = None
        for at, who in changes:
            if at <= frame:
                current = who
            else:
                break
        return current

    return owner_at


def generate_bout(
    profile: TacticProfile,
    target_score: int = 15,
    bout_id: Optional[str] = None,
    config: AbstractionConfig = DEFAULT_CONFIG,
) -> tuple[list[FrameEvent], list[TacticSequence]]:
    """Generate one bout's frame events plus the ground-truth sequences.

    Identical inputs produce identical output, byte for byte once
    serialized. The abstraction pipeline run with the same thresholds
    recovers every generated walk.
    """
    profile.validate()
    if not 1 <= target_score <= 15:
        raise ValueError("target score must be between 1 and 15")
    rng = random.Random(profile.seed)
    bout = bout_id or f"SYN{profile.seed}"

    events: list[FrameEvent] = []
    truths: list[TacticSequence] = []
    score = [0, 0]
    phrase_no = 0
    while max(score) < target_score:
        phrase_no += 1
        if phrase_no > 400:
            raise RuntimeError("target score not reached in 400 phrases")
        phrase_id = f"P{phrase_no}"

        walk = [TacticNodeKind.START]
        while walk[-1] not in TERMINAL_KINDS:
            walk.append(
                _weighted_choice(rng, profile.transitions[walk[-1]], key=lambda k: k.value)
            )
        steps = (
            _weighted_choice(rng, profile.steps),
            _weighted_choice(rng, profile.steps),
        )

        realizer = _PhraseRealizer(rng, profile, config)
        rows, truth_nodes, result, scorer, duration = realizer.realize(walk, steps)

        rows = [r for r in rows if r.frame <= duration or r.order == 0]
        rows.sort(key=lambda r: (r.frame, r.order, r.fencer, r.footwork or "", r.bladework or ""))
        for row in rows:
            events.append(_row_event(bout, phrase_id, row))
        events.append(
            FrameEvent(
                bout_id=bout,
                phrase_id=phrase_id,
                frame=duration,
                result=result,
                score=scorer,
            )
        )
        truths.append(TacticSequence(phrase_id=phrase_id, nodes=tuple(truth_nodes)))
        if scorer:
            score[scorer - 1] += 1
    return events, truths


def _row_event(bout_id: str, phrase_id: str, row: _Row) -> FrameEvent:
    kwargs: dict = {"bout_id": bout_id, "phrase_id": phrase_id, "frame": row.frame}
    if row.footwork:
        kwargs[f"footwork{row.fencer}"] = row.footwork
    if row.bladework:
        kwargs[f"bladework{row.fencer}"] = row.bladework
        if row.attack:
            kwargs[f"attack{row.fencer}"] = row.attack
        if row.parry:
            kwargs[f"parry{row.fencer}"] = row.parry
    if row.confrontation is not None:
        kwargs["confrontation"] = row.confrontation
    if row.result is not None:
        kwargs["result"] = row.result
        kwargs["score"] = row.score
    return FrameEvent(**kwargs)
