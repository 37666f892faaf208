"""Command-line frontend: validate, abstract, graph, stats, synth, serve.

Exit codes: 0 success, 1 usage error, 2 validation errors, 3 I/O errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import export
from .abstraction import AbstractionConfig, abstract_phrase
from .flowgraph import (
    HALVES,
    WHOLE,
    aggregate,
    attack_position_matrix,
    forward_steps_matrix,
    halves_assigner,
    layered_layout,
    orthogonal_layout,
    split_halves,
    swap_sides,
)
from .ingest import IngestError, build_bout, events_to_csv, events_to_json, parse_frame_events, validate_events
from .model import Bout
from .synth import InvalidProfile, TacticProfile, default_profile, generate_bout


class ValidationFailure(Exception):
    """Signals exit code 2."""


def _guess_format(path: Path, override: Optional[str]) -> str:
    if override:
        return override
    return "json" if path.suffix == ".json" else "csv"


def _read_events(path: Path, fmt: Optional[str] = None):
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise click.FileError(str(path), hint=str(exc))
    return parse_frame_events(data, _guess_format(path, fmt))


def _load_bout(path: Path, fmt: Optional[str] = None) -> Bout:
    events = _read_events(path, fmt)
    report = validate_events(events)
    if not report.ok:
        for row, code, message in report.errors:
            click.echo(f"error: row {row}: {code}: {message}", err=True)
        raise ValidationFailure(f"{len(report.errors)} validation errors")
    return build_bout(events)


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def _dump(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


@click.group()
def cli() -> None:
    """Fencing bout analysis toolkit."""


@cli.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
def validate(file: Path, fmt: Optional[str]) -> None:
    """Check a frame-event file; exit 0 only when it is assembly-ready."""
    events = _read_events(file, fmt)
    report = validate_events(events)
    click.echo(report.summary())
    for row, code, message in report.errors:
        click.echo(f"error: row {row}: {code}: {message}")
    for row, code, message in report.warnings:
        click.echo(f"warning: row {row}: {code}: {message}")
    if not report.ok:
        raise ValidationFailure(f"{len(report.errors)} errors")


@cli.command("abstract")
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--bb-joint-window", type=int, default=None, help="frames")
@click.option("--pause-threshold", type=int, default=None, help="frames")
def abstract_cmd(
    file: Path,
    out: Optional[Path],
    fmt: Optional[str],
    bb_joint_window: Optional[int],
    pause_threshold: Optional[int],
) -> None:
    """Emit the tactic sequences of every phrase as JSON."""
    config = AbstractionConfig(
        bb_joint_window_frames=bb_joint_window
        if bb_joint_window is not None
        else AbstractionConfig().bb_joint_window_frames,
        pause_threshold_frames=pause_threshold
        if pause_threshold is not None
        else AbstractionConfig().pause_threshold_frames,
    )
    bout = _load_bout(file, fmt)
    payload = {
        "bout_id": bout.id,
        "break_index": bout.break_index,
        "final_score": list(bout.final_score),
        "sequences": [
            export.sequence_to_dict(abstract_phrase(p, config), p)
            for p in bout.phrases
        ],
    }
    _emit(_dump(payload), out)


def _sequences_from_file(path: Path, fmt: Optional[str]):
    """Events file or `abstract` output both work as graph input."""
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(data, dict) and "sequences" in data:
            sequences = [export.sequence_from_dict(s) for s in data["sequences"]]
            break_index = data.get("break_index")
            first_half = {
                s["phrase_id"]
                for s in data["sequences"]
                if break_index is not None and s.get("phrase_index", 0) <= break_index
            }
            return sequences, break_index, first_half
    bout = _load_bout(path, fmt)
    sequences = [abstract_phrase(p) for p in bout.phrases]
    first_half = set(split_halves(bout)[0]) if bout.break_index is not None else set()
    return sequences, bout.break_index, first_half


@cli.command("graph")
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--mode", type=click.Choice([WHOLE, HALVES]), default=WHOLE)
@click.option("--swap", is_flag=True, help="exchange the fencers' sides")
@click.option("--layout", type=click.Choice(["layered", "orthogonal"]), default="layered")
@click.option("--format", "out_fmt", type=click.Choice(["json", "dot"]), default="json")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
def graph_cmd(
    file: Path, mode: str, swap: bool, layout: str, out_fmt: str, out: Optional[Path]
) -> None:
    """Aggregate a bout's flow graph and export it as JSON or DOT."""
    sequences, break_index, first_half = _sequences_from_file(file, None)
    if swap:
        sequences = [swap_sides(s) for s in sequences]
    if mode == HALVES:
        assigner = (
            lambda seq: "H1" if seq.phrase_id in first_half else "H2"
        )  # noqa: E731
        graph = aggregate(sequences, HALVES, assigner)
    else:
        graph = aggregate(sequences, WHOLE)

    if layout == "orthogonal":
        if mode != HALVES:
            raise click.UsageError("orthogonal layout needs a comparison; use --mode halves")
        halves_graphs = [
            aggregate([s for s in sequences if s.phrase_id in first_half], WHOLE, label="H1"),
            aggregate([s for s in sequences if s.phrase_id not in first_half], WHOLE, label="H2"),
        ]
        positioned = orthogonal_layout(halves_graphs)
        graphs = halves_graphs
    else:
        positioned = layered_layout(graph)
        graphs = [graph]

    if out_fmt == "dot":
        _emit(export.graph_to_dot(graph), out)
    else:
        payload = {
            "mode": mode,
            "layout": layout,
            "swapped": swap,
            "graphs": [export.graph_to_dict(g) for g in graphs],
            "positioned": export.positioned_to_dict(positioned),
        }
        _emit(_dump(payload), out)


@cli.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
def stats(file: Path, out: Optional[Path]) -> None:
    """Print the hover matrices and per-node priority ratios."""
    sequences, _break, _half = _sequences_from_file(file, None)
    graph = aggregate(sequences, WHOLE)
    lines = []

    def render_matrix(title: str, matrix) -> None:
        lines.append(title)
        if not matrix.row_labels:
            lines.append("  (empty)")
            return
        header = "  " + " ".join(f"{c:>8}" for c in ("",) + matrix.col_labels)
        lines.append(header)
        for label, row in zip(matrix.row_labels, matrix.counts):
            lines.append("  " + " ".join(f"{v:>8}" for v in (label,) + row))
        lines.append(f"  total: {matrix.total}")

    render_matrix("attack positions (rows: fencer 1, cols: fencer 2)",
                  attack_position_matrix(sequences))
    lines.append("")
    render_matrix("forward steps (rows: fencer 1, cols: fencer 2)",
                  forward_steps_matrix(sequences))
    lines.append("")
    lines.append("priority at entry (fencer1 / fencer2 / none)")
    for kind, node_stats in sorted(graph.nodes.items(), key=lambda kv: kv[0].value):
        r1, r2, rn = node_stats.priority_ratio
        lines.append(
            f"  {kind.value:>2}: {r1:.3f} / {r2:.3f} / {rn:.3f}"
            f"  ({node_stats.total_visits} visits)"
        )
    _emit("\n".join(lines) + "\n", out)


@cli.command()
@click.option("--profile", "profile_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--seed", type=int, default=None, help="overrides the profile seed")
@click.option("--target-score", type=int, default=15)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--name", default=None, help="bout id and file stem")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
def synth(
    profile_path: Optional[Path],
    seed: Optional[int],
    target_score: int,
    out: Path,
    name: Optional[str],
    fmt: str,
) -> None:
    """Generate a synthetic bout corpus plus its ground-truth sequences."""
    if profile_path is not None:
        profile = TacticProfile.from_json(profile_path.read_text(encoding="utf-8"))
    else:
        profile = default_profile()
    if seed is not None:
        profile = TacticProfile(
            transitions=profile.transitions,
            steps=profile.steps,
            positions=profile.positions,
            durations=profile.durations,
            seed=seed,
        )
    bout_id = name or f"SYN{profile.seed}"
    events, truths = generate_bout(profile, target_score, bout_id=bout_id)

    out.mkdir(parents=True, exist_ok=True)
    data_path = out / f"{bout_id}.{fmt}"
    serializer = events_to_csv if fmt == "csv" else events_to_json
    data_path.write_text(serializer(events), encoding="utf-8")
    truth_path = out / f"{bout_id}.truth.json"
    truth_payload = {
        "bout_id": bout_id,
        "seed": profile.seed,
        "target_score": target_score,
        "sequences": [export.sequence_to_dict(t) for t in truths],
    }
    truth_path.write_text(_dump(truth_payload), encoding="utf-8")
    click.echo(f"wrote {data_path}")
    click.echo(f"wrote {truth_path}")


@cli.command()
@click.option("--data", type=click.Path(exists=True, file_okay=False, path_type=Path),
              envvar="BOUTFLOW_DATA", required=True)
@click.option("--host", default="127.0.0.1", envvar="BOUTFLOW_HOST")
@click.option("--port", type=int, default=8080, envvar="BOUTFLOW_PORT")
def serve(data: Path, host: str, port: int) -> None:
    """Serve the corpus over HTTP for the companion UI."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data), host=host, port=port)


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except ValidationFailure as exc:
        click.echo(f"validation failed: {exc}", err=True)
        return 2
    except (IngestError, InvalidProfile) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.FileError as exc:
        click.echo(f"i/o error: {exc.format_message()}", err=True)
        return 3
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return 3
    except click.Abort:
        return 1


if __name__ == "__main__":
    sys.exit(main())
