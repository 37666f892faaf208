"""Frame-event file parsing, validation and bout assembly.

The on-disk formats are a 14-column CSV and an equivalent JSON array of
objects (see CSV_HEADER). Empty string / missing key means "absent".
Parsing is strict about syntax and vocabulary; semantic problems are
collected by validate_events rather than raised.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .model import (
    Action,
    ActionKind,
    Bout,
    FrameEvent,
    Phrase,
    REFEREE_CALLS,
    PISTE_HALF_LENGTH_M,
)

CSV_HEADER = (
    "bout_id,phrase_id,frame,footwork1,footwork2,bladework1,bladework2,"
    "attack1,attack2,parry1,parry2,confrontation,result,score"
)
CSV_FIELDS = CSV_HEADER.split(",")

WINNING_SCORE = 15
BREAK_SCORE = 8

# Wire codes: <kind>_B opens an action, <kind>_E closes it.
FOOTWORK_CODES = {
    "FWD_B": (ActionKind.FORWARD, True),
    "FWD_E": (ActionKind.FORWARD, False),
    "BWD_B": (ActionKind.BACKWARD, True),
    "BWD_E": (ActionKind.BACKWARD, False),
    "LUN_B": (ActionKind.LUNGE, True),
    "LUN_E": (ActionKind.LUNGE, False),
}
BLADEWORK_CODES = {
    "ATT_B": (ActionKind.ATTACK, True),
    "ATT_E": (ActionKind.ATTACK, False),
    "PAR_B": (ActionKind.PARRY, True),
    "PAR_E": (ActionKind.PARRY, False),
    "RIP_B": (ActionKind.RIPOSTE, True),
    "RIP_E": (ActionKind.RIPOSTE, False),
    "CTR_B": (ActionKind.COUNTER, True),
    "CTR_E": (ActionKind.COUNTER, False),
}
CODE_FOR_EVENT = {v: k for k, v in {**FOOTWORK_CODES, **BLADEWORK_CODES}.items()}

_POSITION_TOKEN = re.compile(r"^[a-z][a-z0-9_-]*$")


class IngestError(Exception):
    """Base for hard parse/assembly failures; carries the offending row."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


class MalformedRecord(IngestError):
    pass


class UnknownCode(IngestError):
    def __init__(self, message: str, row: Optional[int] = None, field_name: str = ""):
        self.field_name = field_name
        super().__init__(message, row)


class NonMonotonicFrame(IngestError):
    pass


class EndWithoutBegin(IngestError):
    def __init__(self, frame: int, kind: ActionKind, fencer: int):
        self.frame = frame
        self.kind = kind
        self.fencer = fencer
        super().__init__(
            f"{kind.value} end at frame {frame} for fencer {fencer} matches no open action"
        )


class ScoreOverflow(IngestError):
    pass


@dataclass
class ValidationReport:
    """Outcome of semantic validation; errors block assembly, warnings do not."""

    errors: list[tuple[int, str, str]] = field(default_factory=list)
    warnings: list[tuple[int, str, str]] = field(default_factory=list)
    rows: int = 0
    phrases: int = 0
    bouts: int = 0

    @property
    def ok(self) -> bool:
        return not self.errors

    def summary(self) -> str:
        return (
            f"{self.rows} rows, {self.phrases} phrases, {self.bouts} bouts: "
            f"{len(self.errors)} errors, {len(self.warnings)} warnings"
        )


def _decode_code(token: str, table: dict, row: int, field_name: str) -> str:
    if token not in table:
        raise UnknownCode(f"unknown {field_name} code {token!r}", row, field_name)
    return token


def _decode_position(token: str, row: int, field_name: str) -> str:
    if not _POSITION_TOKEN.match(token):
        raise UnknownCode(f"bad position token {token!r}", row, field_name)
    return token


def _decode_row(values: dict[str, str], row: int) -> FrameEvent:
    def get(name: str) -> Optional[str]:
        v = values.get(name)
        if v is None:
            return None
        v = v.strip()
        return v or None

    raw_frame = get("frame")
    if raw_frame is None:
        raise MalformedRecord("missing frame", row)
    try:
        frame = int(raw_frame)
    except ValueError:
        raise MalformedRecord(f"frame is not an integer: {raw_frame!r}", row)
    if frame < 0:
        raise MalformedRecord(f"negative frame {frame}", row)

    bout_id = get("bout_id")
    phrase_id = get("phrase_id")
    if not bout_id or not phrase_id:
        raise MalformedRecord("bout_id and phrase_id are required", row)

    footwork1 = get("footwork1")
    footwork2 = get("footwork2")
    bladework1 = get("bladework1")
    bladework2 = get("bladework2")
    for name, token in (("footwork1", footwork1), ("footwork2", footwork2)):
        if token is not None:
            _decode_code(token, FOOTWORK_CODES, row, name)
    for name, token in (("bladework1", bladework1), ("bladework2", bladework2)):
        if token is not None:
            _decode_code(token, BLADEWORK_CODES, row, name)

    positions = {}
    for name in ("attack1", "attack2", "parry1", "parry2"):
        token = get(name)
        positions[name] = _decode_position(token, row, name) if token else None

    confrontation = None
    raw_conf = get("confrontation")
    if raw_conf is not None:
        try:
            confrontation = float(raw_conf)
        except ValueError:
            raise MalformedRecord(f"confrontation is not a number: {raw_conf!r}", row)

    result = get("result")
    if result is not None and result not in REFEREE_CALLS:
        raise UnknownCode(f"unknown result {result!r}", row, "result")

    score = None
    raw_score = get("score")
    if raw_score is not None:
        if raw_score not in ("0", "1", "2"):
            raise UnknownCode(f"score must be 0, 1 or 2, got {raw_score!r}", row, "score")
        score = int(raw_score)

    return FrameEvent(
        bout_id=bout_id,
        phrase_id=phrase_id,
        frame=frame,
        footwork1=footwork1,
        footwork2=footwork2,
        bladework1=bladework1,
        bladework2=bladework2,
        attack1=positions["attack1"],
        attack2=positions["attack2"],
        parry1=positions["parry1"],
        parry2=positions["parry2"],
        confrontation=confrontation,
        result=result,
        score=score,
    )


def _check_monotonic(events: list[FrameEvent], rows: list[int]) -> None:
    last_frame: dict[tuple[str, str], int] = {}
    for event, row in zip(events, rows):
        key = (event.bout_id, event.phrase_id)
        prev = last_frame.get(key)
        if prev is not None and event.frame < prev:
            raise NonMonotonicFrame(
                f"frame {event.frame} of phrase {event.phrase_id} "
                f"precedes earlier frame {prev}",
                row,
            )
        last_frame[key] = event.frame


def parse_frame_events(data: bytes | str, fmt: str = "csv") -> list[FrameEvent]:
    """Parse a CSV or JSON byte stream into frame events.

    Raises MalformedRecord, UnknownCode or NonMonotonicFrame on bad input.
    A completely empty stream parses to an empty list in either format.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    else:
        text = data
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    if not text.strip():
        return []

    events: list[FrameEvent] = []
    rows: list[int] = []
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            return []
        if [h.strip() for h in header] != CSV_FIELDS:
            raise MalformedRecord(f"bad header: expected {CSV_HEADER!r}", 1)
        for row_no, record in enumerate(reader, start=2):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(CSV_FIELDS):
                raise MalformedRecord(
                    f"expected {len(CSV_FIELDS)} fields, got {len(record)}", row_no
                )
            events.append(_decode_row(dict(zip(CSV_FIELDS, record)), row_no))
            rows.append(row_no)
    else:
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"invalid JSON: {exc}", exc.lineno)
        if not isinstance(payload, list):
            raise MalformedRecord("top-level JSON value must be an array", 1)
        for idx, obj in enumerate(payload, start=1):
            if not isinstance(obj, dict):
                raise MalformedRecord("array elements must be objects", idx)
            unknown = set(obj) - set(CSV_FIELDS)
            if unknown:
                raise MalformedRecord(f"unknown fields {sorted(unknown)}", idx)
            values = {k: "" if v is None else str(v) for k, v in obj.items()}
            events.append(_decode_row(values, idx))
            rows.append(idx)

    _check_monotonic(events, rows)
    return events


def _event_to_strings(event: FrameEvent) -> dict[str, str]:
    out = {}
    for name in CSV_FIELDS:
        value = getattr(event, name)
        if value is None:
            out[name] = ""
        elif name == "confrontation":
            out[name] = repr(value)  # shortest exact round-trip form
        else:
            out[name] = str(value)
    return out


def events_to_csv(events: Iterable[FrameEvent]) -> str:
    lines = [CSV_HEADER]
    for event in events:
        strings = _event_to_strings(event)
        lines.append(",".join(strings[name] for name in CSV_FIELDS))
    return "\n".join(lines) + "\n"


def events_to_json(events: Iterable[FrameEvent]) -> str:
    records = []
    for event in events:
        record = {}
        for name in CSV_FIELDS:
            value = getattr(event, name)
            if value is not None:
                record[name] = value
        records.append(record)
    return json.dumps(records, indent=2) + "\n"


def group_phrases(events: list[FrameEvent]) -> list[tuple[str, list[FrameEvent]]]:
    """Group events by phrase id, in order of first appearance."""
    order: list[str] = []
    groups: dict[str, list[FrameEvent]] = {}
    for event in events:
        if event.phrase_id not in groups:
            order.append(event.phrase_id)
            groups[event.phrase_id] = []
        groups[event.phrase_id].append(event)
    return [(pid, groups[pid]) for pid in order]


@dataclass
class _OpenAction:
    kind: ActionKind
    start: int
    position: Optional[str] = None


def build_actions(
    events: list[FrameEvent],
    collect: Optional[ValidationReport] = None,
    phrase_row: int = 0,
) -> dict[int, list[Action]]:
    """Pair begin/end events of a single phrase into per-fencer actions.

    Segmentation: a new begin closes whatever same-category action (footwork
    vs bladework) the fencer still has open, at the new begin's frame, so
    continuous motion annotated as bare repeated begins splits into
    back-to-back intervals. Actions still open at the phrase's last frame
    are closed there (reported as a warning when `collect` is given).
    """
    if not events:
        return {1: [], 2: []}
    last_frame = max(e.frame for e in events)
    done: dict[int, list[Action]] = {1: [], 2: []}
    open_foot: dict[int, Optional[_OpenAction]] = {1: None, 2: None}
    open_blade: dict[int, Optional[_OpenAction]] = {1: None, 2: None}
    # Closing frame of the most recently closed action per (fencer, kind),
    # so a redundant explicit end right after an auto-close is tolerated.
    just_closed: dict[tuple[int, ActionKind], int] = {}

    def close(fencer: int, slot: dict, frame: int) -> None:
        open_action = slot[fencer]
        if open_action is None:
            return
        done[fencer].append(
            Action(
                fencer=fencer,
                kind=open_action.kind,
                start_frame=open_action.start,
                end_frame=frame,
                position=open_action.position,
            )
        )
        just_closed[(fencer, open_action.kind)] = frame
        slot[fencer] = None

    def handle(fencer: int, code: str, event: FrameEvent) -> None:
        table = FOOTWORK_CODES if code in FOOTWORK_CODES else BLADEWORK_CODES
        kind, is_begin = table[code]
        slot = open_foot if kind.is_footwork else open_blade
        if is_begin:
            close(fencer, slot, event.frame)
            position = None
            if kind is ActionKind.ATTACK:
                position = event.attack1 if fencer == 1 else event.attack2
            elif kind is ActionKind.PARRY:
                position = event.parry1 if fencer == 1 else event.parry2
            slot[fencer] = _OpenAction(kind, event.frame, position)
        else:
            open_action = slot[fencer]
            if open_action is not None and open_action.kind is kind:
                close(fencer, slot, event.frame)
            elif just_closed.get((fencer, kind)) == event.frame:
                pass  # explicit end for an action already split at this frame
            else:
                raise EndWithoutBegin(event.frame, kind, fencer)

    for event in events:
        for fencer, code in ((1, event.footwork1), (2, event.footwork2)):
            if code:
                handle(fencer, code, event)
        for fencer, code in ((1, event.bladework1), (2, event.bladework2)):
            if code:
                handle(fencer, code, event)

    for fencer in (1, 2):
        for slot, label in ((open_foot, "UnclosedFootwork"), (open_blade, "UnclosedBladework")):
            if slot[fencer] is not None:
                kind = slot[fencer].kind
                if collect is not None:
                    collect.warnings.append(
                        (
                            phrase_row,
                            label,
                            f"{kind.value} of fencer {fencer} still open at phrase end; "
                            f"closed at frame {last_frame}",
                        )
                    )
                close(fencer, slot, last_frame)

    for fencer in (1, 2):
        done[fencer].sort(key=lambda a: (a.start_frame, a.end_frame))
    return done


def validate_events(events: list[FrameEvent]) -> ValidationReport:
    """Semantic validation; a report with no errors is safe to assemble.

    Report entries are (row, code, message) with 1-based data row numbers.
    """
    report = ValidationReport(rows=len(events))
    report.bouts = len({e.bout_id for e in events})
    by_bout: dict[str, list[tuple[int, FrameEvent]]] = {}
    for row, event in enumerate(events, start=1):
        by_bout.setdefault(event.bout_id, []).append((row, event))

    for bout_events in by_bout.values():
        phrase_order: list[str] = []
        phrase_groups: dict[str, list[tuple[int, FrameEvent]]] = {}
        for row, event in bout_events:
            if event.phrase_id not in phrase_groups:
                phrase_order.append(event.phrase_id)
                phrase_groups[event.phrase_id] = []
            phrase_groups[event.phrase_id].append((row, event))

        report.phrases += len(phrase_order)
        totals = [0, 0]
        for phrase_id in phrase_order:
            rows_events = phrase_groups[phrase_id]
            last_row, last = rows_events[-1]
            for row, event in rows_events:
                if event is not last and (event.result is not None or event.score is not None):
                    report.errors.append(
                        (
                            row,
                            "ResultBeforeEnd",
                            f"result/score on a non-final row of phrase {phrase_id}",
                        )
                    )
                if event.confrontation is not None and not (
                    -PISTE_HALF_LENGTH_M <= event.confrontation <= PISTE_HALF_LENGTH_M
                ):
                    report.errors.append(
                        (
                            row,
                            "ConfrontationOutOfRange",
                            f"confrontation {event.confrontation} outside the piste",
                        )
                    )
                for fencer, position, blade, foot in (
                    (1, event.attack1, event.bladework1, event.footwork1),
                    (2, event.attack2, event.bladework2, event.footwork2),
                ):
                    if position is not None and blade != "ATT_B" and foot != "LUN_B":
                        report.warnings.append(
                            (
                                row,
                                "OrphanPosition",
                                f"attack{fencer} position with no attack or lunge begin",
                            )
                        )
                for fencer, position, blade in (
                    (1, event.parry1, event.bladework1),
                    (2, event.parry2, event.bladework2),
                ):
                    if position is not None and blade != "PAR_B":
                        report.warnings.append(
                            (
                                row,
                                "OrphanPosition",
                                f"parry{fencer} position with no parry begin",
                            )
                        )

            if last.result is None:
                report.errors.append(
                    (last_row, "MissingResult", f"phrase {phrase_id} has no referee call")
                )
            if last.score is None:
                report.errors.append(
                    (last_row, "MissingScore", f"phrase {phrase_id} has no score record")
                )
            if last.result is not None and last.score is not None:
                scoring = last.score in (1, 2)
                call_awards_touch = last.result in ("A", "R")
                if scoring != call_awards_touch:
                    report.errors.append(
                        (
                            last_row,
                            "InconsistentOutcome",
                            f"score={last.score} contradicts result={last.result}",
                        )
                    )
            if last.score:
                totals[last.score - 1] += 1
                if totals[last.score - 1] > WINNING_SCORE:
                    report.errors.append(
                        (
                            last_row,
                            "ScoreOverflow",
                            f"fencer {last.score} exceeds {WINNING_SCORE} points",
                        )
                    )

            try:
                build_actions([e for _, e in rows_events], collect=report, phrase_row=last_row)
            except EndWithoutBegin as exc:
                report.errors.append((last_row, "EndWithoutBegin", str(exc)))

    return report


def _assemble_phrase(
    phrase_id: str, index: int, events: list[FrameEvent], score_after: tuple[int, int]
) -> Phrase:
    actions = build_actions(events)
    flat = tuple(actions[1] + actions[2])
    duration = max((a.end_frame for a in flat), default=0)
    last = events[-1]
    track = tuple(
        (e.frame, e.confrontation) for e in events if e.confrontation is not None
    )
    return Phrase(
        id=phrase_id,
        index=index,
        actions=flat,
        duration=duration,
        result=last.result if last.result is not None else "N",
        scorer=last.score if last.score is not None else 0,
        confrontation_track=track,
        score_after=score_after,
    )


def build_bout(
    events: list[FrameEvent],
    fencer1_name: str = "fencer1",
    fencer2_name: str = "fencer2",
) -> Bout:
    """Assemble a single bout from validated events.

    Phrases keep file order; the running score and the mid-bout break
    index (first phrase after which either score reaches 8) are derived.
    """
    if not events:
        raise ValueError("no events to assemble")
    bout_ids = {e.bout_id for e in events}
    if len(bout_ids) != 1:
        raise ValueError(f"expected a single bout, found {sorted(bout_ids)}")
    bout_id = events[0].bout_id

    phrases: list[Phrase] = []
    score = [0, 0]
    break_index: Optional[int] = None
    for index, (phrase_id, phrase_events) in enumerate(group_phrases(events), start=1):
        last = phrase_events[-1]
        if last.score:
            score[last.score - 1] += 1
            if score[last.score - 1] > WINNING_SCORE:
                raise ScoreOverflow(
                    f"fencer {last.score} exceeds {WINNING_SCORE} points in phrase {phrase_id}"
                )
        phrases.append(
            _assemble_phrase(phrase_id, index, phrase_events, (score[0], score[1]))
        )
        if break_index is None and max(score) >= BREAK_SCORE:
            break_index = index

    return Bout(
        id=bout_id,
        fencer1_name=fencer1_name,
        fencer2_name=fencer2_name,
        phrases=tuple(phrases),
        break_index=break_index,
    )


def build_bouts(events: list[FrameEvent]) -> list[Bout]:
    """Assemble every bout present in an event list, in file order."""
    order: list[str] = []
    groups: dict[str, list[FrameEvent]] = {}
    for event in events:
        if event.bout_id not in groups:
            order.append(event.bout_id)
            groups[event.bout_id] = []
        groups[event.bout_id].append(event)
    return [build_bout(groups[bid]) for bid in order]
