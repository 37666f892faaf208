"""JSON- and DOT-serializable views of the core types.

Shared by the CLI exporters and the HTTP service so both speak the same
payload dialect. Key order is fixed by construction for stable goldens.
"""

from __future__ import annotations

from typing import Optional

from .abstraction import TacticNode, TacticSequence
from .analytics import AnimationTrack, BoutTimeline
from .flowgraph import FlowGraph, PositionedGraph
from .model import Bout, Phrase


def node_to_dict(node: TacticNode) -> dict:
    out: dict = {"kind": node.kind.value, "enter_frame": node.enter_frame}
    out["priority"] = node.priority_at_entry
    if node.steps is not None:
        out["steps"] = list(node.steps)
    if node.attack_pairs is not None:
        out["attack_pairs"] = [list(pair) for pair in node.attack_pairs]
    return out


def sequence_to_dict(
    sequence: TacticSequence, phrase: Optional[Phrase] = None
) -> dict:
    out: dict = {"phrase_id": sequence.phrase_id}
    if phrase is not None:
        out["phrase_index"] = phrase.index
        out["duration"] = phrase.duration
        out["scorer"] = phrase.scorer
        out["result"] = phrase.result
    out["nodes"] = [node_to_dict(n) for n in sequence.nodes]
    return out


def sequence_from_dict(data: dict) -> TacticSequence:
    from .model import TacticNodeKind

    kinds = {k.value: k for k in TacticNodeKind}
    nodes = []
    for raw in data["nodes"]:
        nodes.append(
            TacticNode(
                kind=kinds[raw["kind"]],
                enter_frame=int(raw["enter_frame"]),
                priority_at_entry=raw.get("priority"),
                steps=tuple(raw["steps"]) if "steps" in raw else None,
                attack_pairs=tuple(tuple(p) for p in raw["attack_pairs"])
                if "attack_pairs" in raw
                else None,
            )
        )
    return TacticSequence(phrase_id=data["phrase_id"], nodes=tuple(nodes))


def graph_to_dict(graph: FlowGraph) -> dict:
    from .model import KIND_ORDER

    nodes = []
    for kind in KIND_ORDER:
        stats = graph.nodes.get(kind)
        if stats is None:
            continue
        nodes.append(
            {
                "kind": kind.value,
                "visits": {k: stats.visits[k] for k in sorted(stats.visits)},
                "total_visits": stats.total_visits,
                "priority_counts": list(stats.priority_counts),
                "priority_ratio": [round(r, 6) for r in stats.priority_ratio],
            }
        )
    edges = [
        {"from": src.value, "to": dst.value, "partition": partition, "count": count}
        for src, dst, partition, count in graph.sorted_edges()
    ]
    return {
        "scheme": graph.scheme,
        "label": graph.label,
        "partitions": graph.partitions(),
        "nodes": nodes,
        "edges": edges,
    }


def graph_to_dot(graph: FlowGraph, name: str = "tactics") -> str:
    lines = [f"digraph {name} {{", "  rankdir=TB;"]
    for src, dst, partition, count in graph.sorted_edges():
        if count <= 0:
            continue
        label = f"{partition}:{count}" if len(graph.partitions()) > 1 else str(count)
        lines.append(
            f'  "{src.value}" -> "{dst.value}" [label="{label}", weight={count}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def positioned_to_dict(positioned: PositionedGraph) -> dict:
    return {
        "layout": positioned.layout,
        "placements": {
            name: list(cell) for name, cell in sorted(positioned.placements.items())
        },
        "flows": [
            {
                "src": flow.src,
                "dst": flow.dst,
                "partition": flow.partition,
                "count": flow.count,
                "width": flow.width,
                "offset": flow.offset,
                "path": [list(cell) for cell in flow.path],
            }
            for flow in positioned.flows
        ],
        "redundant_instances": {
            kind.value: n for kind, n in sorted(
                positioned.redundant_instances.items(), key=lambda kv: kv[0].value
            )
        },
    }


def timeline_to_dict(timeline: BoutTimeline) -> dict:
    return {
        "phrases": [
            {
                "phrase_id": e.phrase_id,
                "index": e.index,
                "x_start": round(e.x_start, 9),
                "x_end": round(e.x_end, 9),
                "scorer": e.scorer,
                "score_after": list(e.score_after),
            }
            for e in timeline.entries
        ],
        "break_x": timeline.break_x,
        "total_span": round(timeline.total_span, 9),
    }


def track_to_dict(track: AnimationTrack) -> dict:
    return {
        "duration": track.duration,
        "missing_track": track.missing_track,
        "fencers": {
            str(fencer): [
                {
                    "frame": kf.frame,
                    "position": round(kf.position, 4),
                    "pose": kf.pose.value,
                }
                for kf in track.keyframes[fencer]
            ]
            for fencer in (1, 2)
        },
    }


def phrase_record(phrase: Phrase, sequence: TacticSequence) -> dict:
    """One phrase-list row: both the tactic and the motion representation."""
    return {
        "phrase_id": phrase.id,
        "index": phrase.index,
        "duration": phrase.duration,
        "scorer": phrase.scorer,
        "result": phrase.result,
        "score_after": list(phrase.score_after),
        "sequence": [node_to_dict(n) for n in sequence.nodes],
        "actions": [
            {
                "fencer": a.fencer,
                "kind": a.kind.value,
                "start_frame": a.start_frame,
                "end_frame": a.end_frame,
                "position": a.position,
            }
            for a in sorted(
                phrase.actions, key=lambda a: (a.fencer, a.start_frame, a.kind.value)
            )
        ],
    }


def bout_summary(bout: Bout) -> dict:
    return {
        "id": bout.id,
        "fencers": [bout.fencer1_name, bout.fencer2_name],
        "discipline": bout.discipline,
        "final_score": list(bout.final_score),
        "phrase_count": len(bout.phrases),
        "break_index": bout.break_index,
    }
