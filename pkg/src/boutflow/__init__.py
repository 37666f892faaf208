"""Fencing bout analysis: ingest annotated frame events, abstract phrases
into tactic sequences, aggregate tactical flow graphs, and serve it all to
interactive clients."""

from .model import (
    Action,
    ActionKind,
    Bout,
    Column,
    FrameEvent,
    KIND_ORDER,
    Phrase,
    TacticNodeKind,
    column_of,
    layer_of,
    swap_fencers,
)
from .ingest import (
    ValidationReport,
    build_actions,
    build_bout,
    build_bouts,
    events_to_csv,
    events_to_json,
    parse_frame_events,
    validate_events,
)
from .abstraction import (
    AbstractionConfig,
    PriorityTimeline,
    TacticNode,
    TacticSequence,
    abstract_phrase,
    compute_priority,
    direction_timeline,
)
from .flowgraph import (
    FlowGraph,
    Matrix,
    PositionedGraph,
    aggregate,
    attack_position_matrix,
    forward_steps_matrix,
    layered_layout,
    orthogonal_layout,
    split_halves,
    swap_sides,
)
from .analytics import (
    AnimationTrack,
    BoutTimeline,
    PhraseFilter,
    animation_track,
    bout_timeline,
    filter_phrases,
    sort_phrases,
)
from .synth import TacticProfile, default_profile, generate_bout, single_path_profile

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
