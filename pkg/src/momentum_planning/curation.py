"""Scene-level selection of turning-heavy evaluation data.

Benchmarks dominated by straight driving hide consistency regressions, so
evaluation pools are filtered to scenes that contain at least one turning
sample.  The turning test is deliberately crude and fast: how far the
x coordinate drifts across the first six future waypoints.  Filtering is
by scene, not by sample, to keep each kept scene's frame sequence intact
for cross-frame metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConfigError, HorizonError, LogCorruptionError
from .trajectory import Trajectory, trajectory_from_dict, trajectory_to_dict

DEFAULT_TURN_EPSILON_M = 25.0
_TURN_WINDOW = 6


@dataclass(frozen=True)
class SampleRecord:
    """One evaluation sample: an id, its parent scene and the future path."""

    sample_id: str
    scene_id: str
    gt_future: Trajectory

    def __post_init__(self):
        if not self.sample_id:
            raise ConfigError("sample_id must be non-empty")
        if not self.scene_id:
            raise ConfigError("scene_id must be non-empty")


def is_turning(sample: SampleRecord, epsilon_m: float = DEFAULT_TURN_EPSILON_M) -> bool:
    """True when the x coordinate drifts by at least ``epsilon_m`` between
    the first and sixth future waypoints (the threshold is inclusive)."""
    if not (epsilon_m > 0.0 and math.isfinite(epsilon_m)):
        raise ConfigError(f"turn threshold must be positive, got {epsilon_m}")
    pts = sample.gt_future.points
    if len(pts) < _TURN_WINDOW:
        raise HorizonError(
            f"sample {sample.sample_id!r} has {len(pts)} future waypoints, "
            f"needs {_TURN_WINDOW}"
        )
    return bool(abs(pts[_TURN_WINDOW - 1, 0] - pts[0, 0]) >= epsilon_m)


def turning_scene_ids(
    samples: Iterable[SampleRecord], epsilon_m: float = DEFAULT_TURN_EPSILON_M
) -> set[str]:
    return {s.scene_id for s in samples if is_turning(s, epsilon_m)}


def curate(
    samples: Sequence[SampleRecord], epsilon_m: float = DEFAULT_TURN_EPSILON_M
) -> list[SampleRecord]:
    """Keep every sample of every scene that has at least one turning
    sample, in the original order."""
    keep = turning_scene_ids(samples, epsilon_m)
    return [s for s in samples if s.scene_id in keep]


def scene_manifest(samples: Sequence[SampleRecord]) -> dict:
    """Scene ids in first-appearance order with their sample counts."""
    order: list[str] = []
    counts: dict[str, int] = {}
    for s in samples:
        if s.scene_id not in counts:
            order.append(s.scene_id)
            counts[s.scene_id] = 0
        counts[s.scene_id] += 1
    return {"scenes": order, "sample_counts": counts}


# ---------------------------------------------------------------------------
# persistence


def _sample_to_dict(sample: SampleRecord) -> dict:
    return {
        "sample_id": sample.sample_id,
        "scene_id": sample.scene_id,
        "future": trajectory_to_dict(sample.gt_future),
    }


def save_samples_jsonl(path, samples: Iterable[SampleRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(_sample_to_dict(sample)) + "\n")


def load_samples_jsonl(path) -> list[SampleRecord]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogCorruptionError(
                    f"invalid JSON ({exc.msg})", line_number=line_no
                ) from exc
            try:
                samples.append(
                    SampleRecord(
                        sample_id=obj["sample_id"],
                        scene_id=obj["scene_id"],
                        gt_future=trajectory_from_dict(obj["future"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise LogCorruptionError(
                    f"bad sample record: {exc}", line_number=line_no
                ) from exc
    return samples


def save_manifest_json(path, samples: Sequence[SampleRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_manifest(samples), fh, indent=2)
        fh.write("\n")
