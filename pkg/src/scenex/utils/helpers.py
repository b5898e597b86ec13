"""Display, event-log and output-path utilities."""

import json
import os
from datetime import datetime
from pathlib import Path
from typing import Union

import pandas as pd

from scenex.core.render import occupancy
from scenex.core.scene import SceneState, inventory_summary
from scenex.layout.placer import PlacementSolution

EVENT_COLUMNS = ["ordinal", "kind", "payload"]


def events_to_frame(scene: SceneState) -> pd.DataFrame:
    """
    One row per pass event.

    Returns:
        DataFrame with ordinal, kind and payload (as a dict) columns

    Examples:
        >>> events_to_frame(scene)["kind"].value_counts()
    """
    rows = [
        {"ordinal": ev.ordinal, "kind": ev.kind.value, "payload": dict(ev.payload)}
        for ev in scene.pass_log
    ]
    return pd.DataFrame(rows, columns=EVENT_COLUMNS)


def get_event_counts(scene: SceneState) -> pd.DataFrame:
    """Count of events per kind, with percentages."""
    frame = events_to_frame(scene)
    if frame.empty:
        return pd.DataFrame(columns=["kind", "count", "percentage"])

    counts = frame["kind"].value_counts().sort_index()
    total = len(frame)
    return pd.DataFrame(
        {
            "kind": counts.index,
            "count": counts.values,
            "percentage": (counts.values / total * 100).round(1),
        }
    )


def save_events_jsonl(scene: SceneState, path: Union[str, Path]) -> Path:
    """Write the event log as JSON lines, one event per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(
            {"ordinal": ev.ordinal, "kind": ev.kind.value, "payload": ev.payload},
            ensure_ascii=False,
            allow_nan=False,
        )
        for ev in scene.pass_log
    ]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def display_scene_summary(scene: SceneState) -> None:
    """
    Print room size, floor occupancy and the object inventory.

    Examples:
        >>> display_scene_summary(scene)
    """
    x0, y0, x1, y1 = scene.room.bounds
    print("\nSCENE SUMMARY")
    print(f"\nRoom: {x1 - x0:.2f} x {y1 - y0:.2f} m, walls {scene.room.wall_height:.2f} m")
    print(f"Instances: {len(scene.instances)}")
    print(f"Floor occupancy: {occupancy(scene) * 100:.1f}%")

    inventory = inventory_summary(scene)
    if inventory:
        print()
        print("Inventory:")
        for name, count in inventory:
            print(f"  {name}: {count}")


def display_event_summary(scene: SceneState) -> None:
    """Print event counts by kind and the skipped objects with their reasons."""
    counts = get_event_counts(scene)
    if counts.empty:
        print("No pipeline events recorded")
        return

    print("\nPIPELINE EVENT SUMMARY")
    print()
    for _, row in counts.iterrows():
        print(f"  {row['kind']}: {int(row['count'])} ({row['percentage']:.1f}%)")

    skipped = [ev for ev in scene.pass_log if ev.kind.value == "object-skipped"]
    if skipped:
        print()
        print(f"Skipped objects ({len(skipped)}):")
        for ev in skipped[:10]:
            name = ev.payload.get("id", ev.payload.get("name", "?"))
            print(f"  {name}: {ev.payload.get('reason', 'unknown')}")
        if len(skipped) > 10:
            print(f"... and {len(skipped) - 10} more")


def display_placement_summary(solution: PlacementSolution) -> None:
    """Print chosen poses and search statistics of a placement run."""
    print("\nPLACEMENT SUMMARY")
    print(f"\nPlaced: {len(solution.instances)}, skipped: {len(solution.skipped)}")
    print(f"Total score: {solution.total_score:.3f}")
    print(f"Nodes expanded: {solution.nodes_expanded}, pruned: {solution.pruned}")
    if solution.instances:
        print()
        for inst in solution.instances:
            x, y, z = inst.position
            score = solution.scores.get(inst.id, float("nan"))
            print(f"  {inst.id}: ({x:.2f}, {y:.2f}, {z:.2f}) yaw {inst.yaw:.3f} score {score:.3f}")
    for sid in solution.skipped:
        print(f"  {sid}: no feasible placement")


def generate_output_path(
    artifact: str,
    scene_name: str,
    output_dir: str = "results",
    extension: str = "json",
    dated: bool = False,
) -> str:
    """Generate a standardized output path for saved artifacts.

    Args:
        artifact: Artifact name prefix (e.g., "layout", "depth")
        scene_name: Friendly scene label (e.g., "Living Room")
        output_dir: Directory where file should be saved (default: "results")
        extension: File extension (default: "json")
        dated: Append today's date as ``YYYYMMDD``

    Returns:
        Path to the output file within ``output_dir``.
    """
    slug = scene_name.lower().replace(" ", "_")
    suffix = f"-{datetime.now().strftime('%Y%m%d')}" if dated else ""
    os.makedirs(output_dir, exist_ok=True)
    return os.path.join(output_dir, f"{artifact}-{slug}{suffix}.{extension}")
