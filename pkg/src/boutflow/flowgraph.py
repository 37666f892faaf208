"""Aggregation of tactic sequences into weighted flow graphs and layouts.

A flow graph counts node visits and node-to-node transitions, optionally
split into partitions (whole game, the two halves, or one partition per
bout) so the same picture can be compared across slices. Two layouts are
provided: the fixed 3x3 layered grid, and an orthogonal grid for
comparing many graphs at once, with the start node at the origin and all
flows routed outward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .abstraction import TacticSequence, mirror_sequence
from .model import (
    Bout,
    Column,
    KIND_ORDER,
    KIND_RANK,
    TERMINAL_KINDS,
    TacticNodeKind,
    column_of,
    is_legal_transition,
    layer_of,
)

WHOLE = "whole"
HALVES = "halves"
BY_BOUT = "by-bout"
SCHEMES = (WHOLE, HALVES, BY_BOUT)

FIRST_HALF = "H1"
SECOND_HALF = "H2"

ABSENT_POSITION = "-"  # reserved bin for one-sided attacks


class IllegalTransition(Exception):
    pass


class LayoutInfeasible(Exception):
    pass


@dataclass
class NodeStats:
    kind: TacticNodeKind
    visits: dict[str, int] = field(default_factory=dict)  # partition -> count
    priority_counts: tuple[int, int, int] = (0, 0, 0)  # fencer1, fencer2, none

    @property
    def total_visits(self) -> int:
        return sum(self.visits.values())

    @property
    def priority_ratio(self) -> tuple[float, float, float]:
        total = sum(self.priority_counts)
        if total == 0:
            return (0.0, 0.0, 0.0)
        return tuple(c / total for c in self.priority_counts)  # type: ignore[return-value]


@dataclass
class FlowGraph:
    scheme: str = WHOLE
    label: str = "all"
    nodes: dict[TacticNodeKind, NodeStats] = field(default_factory=dict)
    edges: dict[tuple[TacticNodeKind, TacticNodeKind, str], int] = field(
        default_factory=dict
    )

    def partitions(self) -> list[str]:
        labels = {label for _f, _t, label in self.edges}
        for stats in self.nodes.values():
            labels.update(stats.visits)
        return sorted(labels)

    def edge_count(
        self,
        src: TacticNodeKind,
        dst: TacticNodeKind,
        partition: Optional[str] = None,
    ) -> int:
        if partition is not None:
            return self.edges.get((src, dst, partition), 0)
        return sum(
            count for (f, t, _p), count in self.edges.items() if f is src and t is dst
        )

    def sorted_edges(self) -> list[tuple[TacticNodeKind, TacticNodeKind, str, int]]:
        return [
            (f, t, p, self.edges[(f, t, p)])
            for f, t, p in sorted(
                self.edges, key=lambda k: (KIND_RANK[k[0]], KIND_RANK[k[1]], k[2])
            )
        ]


def _accumulate(graph: FlowGraph, sequence: TacticSequence, partition: str) -> None:
    for node in sequence.nodes:
        stats = graph.nodes.setdefault(node.kind, NodeStats(kind=node.kind))
        stats.visits[partition] = stats.visits.get(partition, 0) + 1
        counts = list(stats.priority_counts)
        slot = {1: 0, 2: 1, None: 2}[node.priority_at_entry]
        counts[slot] += 1
        stats.priority_counts = (counts[0], counts[1], counts[2])
    for prev, nxt in zip(sequence.nodes, sequence.nodes[1:]):
        if not is_legal_transition(prev.kind, nxt.kind):
            raise IllegalTransition(
                f"{prev.kind.value} -> {nxt.kind.value} in phrase {sequence.phrase_id}"
            )
        key = (prev.kind, nxt.kind, partition)
        graph.edges[key] = graph.edges.get(key, 0) + 1


def aggregate(
    sequences: Iterable[TacticSequence],
    scheme: str = WHOLE,
    assigner: Optional[Callable[[TacticSequence], str]] = None,
    label: str = "all",
) -> FlowGraph:
    """Fold sequences into a flow graph under a partition scheme.

    The assigner maps each sequence to its partition label; by default
    everything lands in a single partition. Raises IllegalTransition if a
    sequence contains an edge the graph forbids (an upstream bug).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    graph = FlowGraph(scheme=scheme, label=label)
    if assigner is None:
        assigner = lambda _seq: "all"  # noqa: E731
    for sequence in sequences:
        _accumulate(graph, sequence, assigner(sequence))
    return graph


def aggregate_groups(
    groups: Iterable[tuple[str, Iterable[TacticSequence]]],
    scheme: str = BY_BOUT,
    label: str = "union",
) -> FlowGraph:
    """Fold pre-partitioned sequence groups (one label per group)."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    graph = FlowGraph(scheme=scheme, label=label)
    for partition, sequences in groups:
        for sequence in sequences:
            _accumulate(graph, sequence, partition)
    return graph


def mirror_graph(graph: FlowGraph) -> FlowGraph:
    """The graph as seen with the fencers' sides exchanged."""
    from .model import MIRROR_KIND

    mirrored = FlowGraph(scheme=graph.scheme, label=graph.label)
    for kind, stats in graph.nodes.items():
        p1, p2, none = stats.priority_counts
        mirrored.nodes[MIRROR_KIND[kind]] = NodeStats(
            kind=MIRROR_KIND[kind],
            visits=dict(stats.visits),
            priority_counts=(p2, p1, none),
        )
    for (src, dst, partition), count in graph.edges.items():
        mirrored.edges[(MIRROR_KIND[src], MIRROR_KIND[dst], partition)] = count
    return mirrored


def split_halves(bout: Bout) -> tuple[list[str], list[str]]:
    """Phrase ids before and after the mid-bout break."""
    if bout.break_index is None:
        return [p.id for p in bout.phrases], []
    first = [p.id for p in bout.phrases if p.index <= bout.break_index]
    second = [p.id for p in bout.phrases if p.index > bout.break_index]
    return first, second


def halves_assigner(bout: Bout) -> Callable[[TacticSequence], str]:
    first, _second = split_halves(bout)
    first_ids = set(first)
    return lambda seq: FIRST_HALF if seq.phrase_id in first_ids else SECOND_HALF


def swap_sides(sequence: TacticSequence) -> TacticSequence:
    """Mirror a sequence so the two fencers exchange sides."""
    return mirror_sequence(sequence)


@dataclass(frozen=True)
class RoutedFlow:
    src: str  # node instance id, e.g. "FF" or "FF#1"
    dst: str
    partition: str
    count: int
    width: float
    path: tuple[tuple[int, int], ...]  # grid cells, source to target
    offset: int = 0  # lane index when several partitions share the route


@dataclass
class PositionedGraph:
    layout: str  # "layered" or "orthogonal"
    placements: dict[str, tuple[int, int] | tuple[int, str]]
    flows: list[RoutedFlow]
    redundant_instances: dict[TacticNodeKind, int] = field(default_factory=dict)


_LAYERED_COLUMN = {
    TacticNodeKind.START: "center-left",
    TacticNodeKind.BOTH_BACKWARD: "center-right",
    TacticNodeKind.BACK_FORWARD: Column.LEFT.value,
    TacticNodeKind.BOTH_FORWARD: Column.CENTER.value,
    TacticNodeKind.FORWARD_BACK: Column.RIGHT.value,
    TacticNodeKind.RIGHT_SCORE: Column.LEFT.value,
    TacticNodeKind.NO_SCORE: Column.CENTER.value,
    TacticNodeKind.LEFT_SCORE: Column.RIGHT.value,
}

_COLUMN_X = {"left": 0, "center-left": 1, "center": 1, "center-right": 2, "right": 2}


def ribbon_width(count: int) -> float:
    """Linear in count, with a floor of one unit for anything visible."""
    return float(max(count, 1)) if count > 0 else 0.0


def layered_layout(graph: FlowGraph) -> PositionedGraph:
    """Place the eight kinds on the fixed 3x3 grid.

    The start and both-backward nodes share the top-center region side by
    side; mid-phrase nodes occupy row 2 and terminals row 3, in the
    dominance columns. Partition flows on the same edge become adjacent
    ribbons (increasing lane offsets).
    """
    placements: dict[str, tuple[int, str]] = {}
    for kind in KIND_ORDER:
        placements[kind.value] = (layer_of(kind), _LAYERED_COLUMN[kind])

    flows: list[RoutedFlow] = []
    lanes: dict[tuple[TacticNodeKind, TacticNodeKind], int] = {}
    for src, dst, partition, count in graph.sorted_edges():
        if count <= 0:
            continue
        lane = lanes.get((src, dst), 0)
        lanes[(src, dst)] = lane + 1
        src_cell = (layer_of(src), _COLUMN_X[_LAYERED_COLUMN[src]])
        dst_cell = (layer_of(dst), _COLUMN_X[_LAYERED_COLUMN[dst]])
        flows.append(
            RoutedFlow(
                src=src.value,
                dst=dst.value,
                partition=partition,
                count=count,
                width=ribbon_width(count),
                path=(src_cell, dst_cell),
                offset=lane,
            )
        )
    return PositionedGraph(
        layout="layered",
        placements=placements,
        flows=flows,
        redundant_instances={kind: 1 for kind in KIND_ORDER},
    )


def _ring_cells(radius: int) -> list[tuple[int, int]]:
    """Cells at Chebyshev distance `radius`, walked deterministically."""
    if radius == 0:
        return [(0, 0)]
    cells = []
    x, y = radius, 0
    for _ in range(radius):  # right edge up
        cells.append((x, y))
        y += 1
    while x > -radius:  # top edge leftward
        cells.append((x, y))
        x -= 1
    while y > -radius:  # left edge down
        cells.append((x, y))
        y -= 1
    while x < radius:  # bottom edge rightward
        cells.append((x, y))
        x += 1
    while y < 0:  # right edge back up to just below start
        cells.append((x, y))
        y += 1
    return cells


def _cheb(cell: tuple[int, int]) -> int:
    return max(abs(cell[0]), abs(cell[1]))


def _route_outward(src: tuple[int, int], dst: tuple[int, int]) -> tuple[tuple[int, int], ...]:
    """Axis-aligned path whose Chebyshev distance from origin never drops."""
    if _cheb(src) > _cheb(dst):
        raise LayoutInfeasible(f"cannot route inward: {src} -> {dst}")
    path = [src]
    cur = src
    # Step outward ring by ring (toward the target), then walk its ring.
    while _cheb(cur) < _cheb(dst):
        x, y = cur
        outward = [
            n
            for n in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))
            if _cheb(n) == _cheb(cur) + 1
        ]
        cur = min(outward, key=lambda n: (abs(n[0] - dst[0]) + abs(n[1] - dst[1]), n))
        path.append(cur)
    ring = _ring_cells(_cheb(dst)) if _cheb(dst) > 0 else [(0, 0)]
    if cur != dst:
        i, j = ring.index(cur), ring.index(dst)
        n = len(ring)
        forward_steps = (j - i) % n
        backward_steps = (i - j) % n
        if forward_steps <= backward_steps:
            for k in range(1, forward_steps + 1):
                path.append(ring[(i + k) % n])
        else:
            for k in range(1, backward_steps + 1):
                path.append(ring[(i - k) % n])
    return tuple(path)


_KIND_RING = {
    TacticNodeKind.START: 0,
    TacticNodeKind.BOTH_BACKWARD: 1,
    TacticNodeKind.BOTH_FORWARD: 2,
    TacticNodeKind.FORWARD_BACK: 2,
    TacticNodeKind.BACK_FORWARD: 2,
    TacticNodeKind.LEFT_SCORE: 3,
    TacticNodeKind.RIGHT_SCORE: 3,
    TacticNodeKind.NO_SCORE: 3,
}

MAX_NEIGHBORS = 4  # a grid cell has four sides


def orthogonal_layout(graphs: Sequence[FlowGraph]) -> PositionedGraph:
    """Comparison layout for two or more graphs on a shared orthogonal grid.

    The start node sits at the origin and every distinct edge of the union
    graph is routed exactly once, outward only. Kinds whose degree exceeds
    four adjacencies get extra instances; per-graph counts become
    side-by-side ribbons (lane offsets) on the shared route.
    """
    if len(graphs) < 2:
        raise ValueError("orthogonal comparison needs at least two graphs")

    union: dict[tuple[TacticNodeKind, TacticNodeKind], list[tuple[str, int]]] = {}
    for graph in graphs:
        for src, dst, _partition, count in graph.sorted_edges():
            if count > 0:
                union.setdefault((src, dst), []).append((graph.label, count))

    degree: dict[TacticNodeKind, int] = {kind: 0 for kind in KIND_ORDER}
    for src, dst in union:
        degree[src] += 1
        degree[dst] += 1

    instances: dict[TacticNodeKind, int] = {}
    for kind in KIND_ORDER:
        needed = -(-degree[kind] // MAX_NEIGHBORS)  # ceil division
        instances[kind] = max(needed, 1) if (degree[kind] > 0 or kind is TacticNodeKind.START) else 0

    # Place instances ring by ring, deterministically.
    taken: set[tuple[int, int]] = set()
    placements: dict[str, tuple[int, int]] = {}
    instance_cells: dict[TacticNodeKind, list[tuple[int, int]]] = {}

    def next_free(ring: int) -> tuple[int, int]:
        radius = ring
        while True:
            for cell in _ring_cells(radius):
                if cell not in taken:
                    return cell
            radius += 1

    for kind in KIND_ORDER:
        cells = []
        for i in range(instances[kind]):
            ring = _KIND_RING[kind]
            if kind is TacticNodeKind.START and i > 0:
                ring = 1
            cell = next_free(ring)
            taken.add(cell)
            name = kind.value if i == 0 else f"{kind.value}#{i}"
            placements[name] = cell
            cells.append(cell)
        instance_cells[kind] = cells

    # Assign each union edge to an instance pair with free ports, then route.
    ports: dict[tuple[int, int], int] = {cell: 0 for cell in taken}
    flows: list[RoutedFlow] = []
    edge_order = sorted(union, key=lambda e: (KIND_RANK[e[0]], KIND_RANK[e[1]]))
    for src_kind, dst_kind in edge_order:
        chosen = None
        for src_cell in instance_cells[src_kind]:
            if ports[src_cell] >= MAX_NEIGHBORS:
                continue
            for dst_cell in instance_cells[dst_kind]:
                if ports[dst_cell] >= MAX_NEIGHBORS:
                    continue
                if _cheb(src_cell) <= _cheb(dst_cell):
                    chosen = (src_cell, dst_cell)
                    break
            if chosen:
                break
        if chosen is None:
            raise LayoutInfeasible(
                f"no instance pair with free ports for {src_kind.value} -> {dst_kind.value}"
            )
        src_cell, dst_cell = chosen
        ports[src_cell] += 1
        ports[dst_cell] += 1
        path = _route_outward(src_cell, dst_cell)
        src_name = _instance_name(src_kind, instance_cells[src_kind].index(src_cell))
        dst_name = _instance_name(dst_kind, instance_cells[dst_kind].index(dst_cell))
        for lane, (graph_label, count) in enumerate(union[(src_kind, dst_kind)]):
            flows.append(
                RoutedFlow(
                    src=src_name,
                    dst=dst_name,
                    partition=graph_label,
                    count=count,
                    width=ribbon_width(count),
                    path=path,
                    offset=lane,
                )
            )
    return PositionedGraph(
        layout="orthogonal",
        placements=placements,
        flows=flows,
        redundant_instances={k: n for k, n in instances.items() if n > 0},
    )


def _instance_name(kind: TacticNodeKind, index: int) -> str:
    return kind.value if index == 0 else f"{kind.value}#{index}"


def attack_position_matrix(sequences: Iterable[TacticSequence]) -> "Matrix":
    """Joint counts of (fencer 1 target, fencer 2 target) in both-forward visits."""
    counts: dict[tuple[str, str], int] = {}
    for sequence in sequences:
        for node in sequence.nodes:
            if node.attack_pairs:
                for p1, p2 in node.attack_pairs:
                    key = (p1 or ABSENT_POSITION, p2 or ABSENT_POSITION)
                    counts[key] = counts.get(key, 0) + 1
    return Matrix.from_counts(counts)


def forward_steps_matrix(sequences: Iterable[TacticSequence]) -> "Matrix":
    """Joint counts of the opening forward-step pair, labels 0..2."""
    counts: dict[tuple[str, str], int] = {}
    for sequence in sequences:
        steps = sequence.nodes[0].steps if sequence.nodes else None
        if steps is not None:
            key = (str(steps[0]), str(steps[1]))
            counts[key] = counts.get(key, 0) + 1
    return Matrix.from_counts(counts)


@dataclass(frozen=True)
class Matrix:
    """Small labeled count matrix; rows are fencer 1, columns fencer 2."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    @staticmethod
    def from_counts(counts: dict[tuple[str, str], int]) -> "Matrix":
        def order(labels: set[str]) -> tuple[str, ...]:
            return tuple(
                sorted(labels, key=lambda t: (t == ABSENT_POSITION, t))
            )

        rows = order({r for r, _c in counts})
        cols = order({c for _r, c in counts})
        grid = tuple(
            tuple(counts.get((r, c), 0) for c in cols) for r in rows
        )
        return Matrix(row_labels=rows, col_labels=cols, counts=grid)

    def to_dict(self) -> dict:
        return {
            "rows": list(self.row_labels),
            "cols": list(self.col_labels),
            "counts": [list(row) for row in self.counts],
            "total": self.total,
        }
