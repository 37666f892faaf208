"""Read-only HTTP JSON API over a corpus of bout files.

One endpoint per view keeps client coordination simple: bout summaries,
phrase records, flow graphs with layouts, timelines, animation tracks and
the hover matrices. The corpus loads from a directory of CSV/JSON event
files at startup; POST /reload swaps in a fresh read atomically.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import export
from .abstraction import TacticSequence, abstract_phrase
from .analytics import (
    PhraseFilter,
    SORT_MODES,
    animation_track,
    bout_timeline,
    filter_phrases,
    sort_phrases,
)
from .flowgraph import (
    BY_BOUT,
    FIRST_HALF,
    HALVES,
    SECOND_HALF,
    WHOLE,
    aggregate,
    aggregate_groups,
    attack_position_matrix,
    forward_steps_matrix,
    halves_assigner,
    layered_layout,
    orthogonal_layout,
    split_halves,
    swap_sides,
)
from .ingest import build_bouts, parse_frame_events, validate_events
from .model import Bout


class ServiceError(Exception):
    def __init__(self, code: str, message: str, detail: Optional[dict] = None, status: int = 400):
        self.code = code
        self.message = message
        self.detail = detail or {}
        self.status = status
        super().__init__(message)


def unknown_bout(bout_id: str) -> ServiceError:
    return ServiceError("UnknownBout", f"no bout {bout_id!r} loaded", status=404)


class CorpusStore:
    """Bouts and derived caches; reload swaps the whole state atomically."""

    class _State:
        def __init__(self) -> None:
            self.bouts: dict[str, Bout] = {}
            self.order: list[str] = []
            self.sequences: dict[str, list[TacticSequence]] = {}

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self._lock = threading.Lock()
        self._state = self._load()

    def _load(self) -> "CorpusStore._State":
        state = CorpusStore._State()
        files = sorted(
            p for p in self.data_dir.iterdir()
            if p.suffix in (".csv", ".json") and not p.name.endswith(".truth.json")
        ) if self.data_dir.is_dir() else []
        for path in files:
            fmt = "csv" if path.suffix == ".csv" else "json"
            events = parse_frame_events(path.read_bytes(), fmt)
            if not events:
                continue
            report = validate_events(events)
            if not report.ok:
                raise ServiceError(
                    "InvalidCorpusFile",
                    f"{path.name}: {len(report.errors)} validation errors",
                    detail={"errors": [list(e) for e in report.errors[:10]]},
                )
            for bout in build_bouts(events):
                if bout.id in state.bouts:
                    raise ServiceError(
                        "DuplicateBout", f"bout {bout.id!r} appears in multiple files"
                    )
                state.bouts[bout.id] = bout
                state.order.append(bout.id)
                state.sequences[bout.id] = [
                    abstract_phrase(p) for p in bout.phrases
                ]
        return state

    def reload(self) -> int:
        with self._lock:
            self._state = self._load()
            return len(self._state.order)

    @property
    def state(self) -> "CorpusStore._State":
        return self._state

    def bout(self, bout_id: str) -> Bout:
        bout = self._state.bouts.get(bout_id)
        if bout is None:
            raise unknown_bout(bout_id)
        return bout

    def sequences(self, bout_id: str) -> list[TacticSequence]:
        if bout_id not in self._state.sequences:
            raise unknown_bout(bout_id)
        return self._state.sequences[bout_id]


def _parse_results(raw: Optional[str]) -> frozenset[int]:
    if raw is None or raw == "":
        return frozenset({0, 1, 2})
    values = set()
    for token in raw.split(","):
        token = token.strip()
        if token == "none":
            values.add(0)
        elif token in ("1", "2"):
            values.add(int(token))
        elif token == "":
            continue
        else:
            raise ServiceError("BadFilter", f"results token {token!r} not in 1, 2, none")
    return frozenset(values)


def _flowgraph_payload(
    store: CorpusStore,
    bout_ids: list[str],
    mode: str,
    swap_ids: set[str],
    layout: str,
) -> dict:
    if mode not in (WHOLE, HALVES, BY_BOUT):
        raise ServiceError("BadMode", f"mode must be whole, halves or by-bout, got {mode!r}")
    if layout not in ("layered", "orthogonal"):
        raise ServiceError("BadLayout", f"layout must be layered or orthogonal, got {layout!r}")
    for bout_id in bout_ids:
        store.bout(bout_id)
    unknown_swaps = swap_ids - set(bout_ids)
    if unknown_swaps:
        raise ServiceError(
            "IncompatibleOptions", f"swap ids {sorted(unknown_swaps)} not in the bout list"
        )

    def bout_sequences(bout_id: str) -> list[TacticSequence]:
        seqs = store.sequences(bout_id)
        if bout_id in swap_ids:
            return [swap_sides(s) for s in seqs]
        return seqs

    if mode == HALVES:
        if len(bout_ids) != 1:
            raise ServiceError(
                "IncompatibleOptions", "halves comparison works on exactly one bout"
            )
        bout = store.bout(bout_ids[0])
        sequences = bout_sequences(bout.id)
        if layout == "layered":
            graph = aggregate(sequences, HALVES, halves_assigner(bout), label=bout.id)
            graphs = [graph]
            positioned = layered_layout(graph)
        else:
            first_ids = set(split_halves(bout)[0])
            graphs = [
                aggregate(
                    [s for s in sequences if s.phrase_id in first_ids],
                    WHOLE,
                    label=FIRST_HALF,
                ),
                aggregate(
                    [s for s in sequences if s.phrase_id not in first_ids],
                    WHOLE,
                    label=SECOND_HALF,
                ),
            ]
            positioned = orthogonal_layout(graphs)
    elif mode == BY_BOUT:
        if layout == "layered" and len(bout_ids) >= 3:
            raise ServiceError(
                "IncompatibleOptions",
                "layered overlay is unreadable beyond two bouts; use the orthogonal layout",
            )
        if layout == "orthogonal":
            if len(bout_ids) < 2:
                raise ServiceError(
                    "IncompatibleOptions", "orthogonal comparison needs at least two bouts"
                )
            graphs = [
                aggregate(bout_sequences(b), WHOLE, label=b) for b in bout_ids
            ]
            positioned = orthogonal_layout(graphs)
        else:
            graph = aggregate_groups(
                [(b, bout_sequences(b)) for b in bout_ids], BY_BOUT
            )
            graphs = [graph]
            positioned = layered_layout(graph)
    else:  # whole
        if layout == "orthogonal":
            raise ServiceError(
                "IncompatibleOptions",
                "orthogonal layout is a comparison view; use halves or by-bout",
            )
        sequences = [s for b in bout_ids for s in bout_sequences(b)]
        graph = aggregate(sequences, WHOLE, label="all")
        graphs = [graph]
        positioned = layered_layout(graph)

    return {
        "mode": mode,
        "layout": layout,
        "bouts": bout_ids,
        "swapped": sorted(swap_ids),
        "graphs": [export.graph_to_dict(g) for g in graphs],
        "positioned": export.positioned_to_dict(positioned),
    }


def create_app(data_dir: str | Path) -> FastAPI:
    app = FastAPI(title="boutflow", version="0.1.0")
    store = CorpusStore(data_dir)
    app.state.store = store

    @app.exception_handler(ServiceError)
    async def service_error_handler(_request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    @app.get("/bouts")
    def list_bouts():
        state = store.state
        return {
            "bouts": [export.bout_summary(state.bouts[b]) for b in state.order]
        }

    @app.get("/bouts/{bout_id}")
    def get_bout(bout_id: str):
        bout = store.bout(bout_id)
        return {
            **export.bout_summary(bout),
            "phrases": [
                {
                    "phrase_id": p.id,
                    "index": p.index,
                    "duration": p.duration,
                    "scorer": p.scorer,
                    "result": p.result,
                    "score_after": list(p.score_after),
                }
                for p in bout.phrases
            ],
        }

    @app.get("/bouts/{bout_id}/phrases")
    def get_phrases(
        bout_id: str,
        results: Optional[str] = None,
        max_duration: Optional[int] = None,
        sort: str = "chronological",
    ):
        bout = store.bout(bout_id)
        if sort not in SORT_MODES:
            raise ServiceError("BadSort", f"sort must be one of {', '.join(SORT_MODES)}")
        phrase_filter = PhraseFilter(
            results=_parse_results(results), max_duration=max_duration
        )
        selected = set(filter_phrases(bout, phrase_filter))
        order = [pid for pid in sort_phrases(bout, sort) if pid in selected]
        sequences = {s.phrase_id: s for s in store.sequences(bout_id)}
        records = [
            export.phrase_record(bout.phrase_by_id(pid), sequences[pid]) for pid in order
        ]
        return {
            "bout_id": bout_id,
            "total": len(bout.phrases),
            "count": len(records),
            "sort": sort,
            "phrases": records,
        }

    @app.get("/bouts/{bout_id}/phrases/{phrase_id}/track")
    def get_track(bout_id: str, phrase_id: str):
        bout = store.bout(bout_id)
        try:
            phrase = bout.phrase_by_id(phrase_id)
        except KeyError:
            raise ServiceError(
                "UnknownPhrase", f"no phrase {phrase_id!r} in bout {bout_id!r}", status=404
            )
        return {
            "bout_id": bout_id,
            "phrase_id": phrase_id,
            **export.track_to_dict(animation_track(phrase)),
        }

    @app.get("/bouts/{bout_id}/timeline")
    def get_timeline(bout_id: str):
        bout = store.bout(bout_id)
        return {"bout_id": bout_id, **export.timeline_to_dict(bout_timeline(bout))}

    @app.get("/bouts/{bout_id}/matrices")
    def get_matrices(bout_id: str):
        store.bout(bout_id)
        sequences = store.sequences(bout_id)
        graph = aggregate(sequences, WHOLE)
        return {
            "bout_id": bout_id,
            "attack_positions": attack_position_matrix(sequences).to_dict(),
            "forward_steps": forward_steps_matrix(sequences).to_dict(),
            "priority_ratios": {
                kind.value: [round(r, 6) for r in stats.priority_ratio]
                for kind, stats in sorted(
                    graph.nodes.items(), key=lambda kv: kv[0].value
                )
            },
        }

    @app.get("/flowgraph")
    def get_flowgraph(
        bouts: str,
        mode: str = WHOLE,
        swap: str = "",
        layout: str = "layered",
    ):
        bout_ids = [b for b in bouts.split(",") if b]
        if not bout_ids:
            raise ServiceError("BadRequest", "no bout ids given")
        swap_ids = {b for b in swap.split(",") if b}
        return _flowgraph_payload(store, bout_ids, mode, swap_ids, layout)

    @app.post("/reload")
    def reload():
        count = store.reload()
        return {"reloaded": True, "bouts": count}

    return app
