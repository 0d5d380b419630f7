"""Planar trajectory containers and rigid-frame operations.

Trajectories are short horizons of future waypoints sampled on a fixed time
step (0.5 s by default).  Points are stored as an (N, 2) float64 array; a
row is one waypoint.  Poses are proper rigid transforms in the plane, used
both as world poses of the ego and as frame deltas between two ego frames.

Conventions:
  * ``transform_to_frame(traj, pose)`` treats ``pose`` as the pose of the
    target frame expressed in the frame the points currently live in, and
    applies ``p -> R^-1 (p - t)``.
  * ``relative_pose(prev, cur)`` returns exactly the pose that moves points
    expressed in the current ego frame into the previous ego frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    EmptyInputError,
    GeometryError,
    InvalidPoseError,
)

DEFAULT_DT = 0.5
ORTHONORMAL_TOL = 1e-9


class Waypoint(NamedTuple):
    x: float
    y: float


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1 and pts.size == 2:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"expected an (N, 2) point array, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Trajectory:
    """A fixed-rate sequence of future waypoints.

    Waypoint i sits at time (i + 1) * dt relative to the frame the
    trajectory is expressed in.
    """

    points: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self):
        pts = _as_points(self.points)
        if len(pts) < 1:
            raise EmptyInputError("a trajectory needs at least one waypoint")
        if not np.isfinite(pts).all():
            raise GeometryError("trajectory contains non-finite coordinates")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise GeometryError(f"dt must be positive and finite, got {self.dt}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def waypoint(self, i: int) -> Waypoint:
        return Waypoint(float(self.points[i, 0]), float(self.points[i, 1]))

    def horizon_s(self) -> float:
        return len(self.points) * self.dt


@dataclass(frozen=True)
class Pose2:
    """A proper rigid transform (rotation + translation) in the plane."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(2)
        if rot.shape != (2, 2):
            raise InvalidPoseError(f"rotation must be 2x2, got {rot.shape}")
        if not (np.isfinite(rot).all() and np.isfinite(trans).all()):
            raise InvalidPoseError("pose contains non-finite entries")
        if np.abs(rot.T @ rot - np.eye(2)).max() > ORTHONORMAL_TOL:
            raise InvalidPoseError("rotation block is not orthonormal")
        if abs(float(np.linalg.det(rot)) - 1.0) > ORTHONORMAL_TOL:
            raise InvalidPoseError("rotation block must have determinant +1")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @staticmethod
    def identity() -> "Pose2":
        return Pose2(np.eye(2), np.zeros(2))

    @staticmethod
    def from_heading(heading: float, translation=(0.0, 0.0)) -> "Pose2":
        return Pose2(rotation_matrix(heading), np.asarray(translation, dtype=np.float64))

    def heading(self) -> float:
        return float(math.atan2(self.rotation[1, 0], self.rotation[0, 0]))


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class OverlapMask:
    """Per-waypoint flags over the *current* trajectory.

    flags[i] is True when waypoint i of the current trajectory has a
    same-absolute-time twin in the previous trajectory.
    """

    flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool).reshape(-1)
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)

    def __len__(self) -> int:
        return len(self.flags)

    @property
    def true_count(self) -> int:
        return int(self.flags.sum())


def transform_to_frame(traj: Trajectory, pose: Pose2) -> Trajectory:
    """Re-express ``traj`` in the frame whose pose (in the trajectory's
    current frame) is ``pose``: every point p becomes R^-1 (p - t)."""
    moved = (traj.points - pose.translation) @ pose.rotation
    return Trajectory(moved, dt=traj.dt)


def transform_from_frame(traj: Trajectory, pose: Pose2) -> Trajectory:
    """Inverse of :func:`transform_to_frame`: p becomes R p + t."""
    moved = traj.points @ pose.rotation.T + pose.translation
    return Trajectory(moved, dt=traj.dt)


def relative_pose(world_pose_prev: Pose2, world_pose_cur: Pose2) -> Pose2:
    """Frame delta between two ego poses given in a common world frame.

    The returned pose is the previous frame as seen from the current frame,
    so feeding it to :func:`transform_to_frame` moves points expressed in
    the current ego frame into the previous ego frame.
    """
    r_prev, r_cur = world_pose_prev.rotation, world_pose_cur.rotation
    t_prev, t_cur = world_pose_prev.translation, world_pose_cur.translation
    rot = r_cur.T @ r_prev
    trans = r_cur.T @ (t_prev - t_cur)
    return Pose2(rot, trans)


def resample(traj: Trajectory, n: int) -> Trajectory:
    """Resample to ``n`` waypoints, uniform in arc length, endpoints exact.

    ``n == len(traj)`` is an exact no-op, which keeps repeated resampling
    stable; anything else linearly interpolates along the polyline.
    """
    if n < 2:
        raise GeometryError(f"cannot resample to {n} points; need n >= 2")
    if len(traj) < 2:
        raise GeometryError("cannot resample a single-waypoint trajectory")
    if n == len(traj):
        return traj
    pts = traj.points
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total <= 0.0:
        # all points coincide; any parameterization collapses to the point
        out = np.repeat(pts[:1], n, axis=0)
        return Trajectory(out, dt=traj.dt)
    targets = np.linspace(0.0, total, n)
    out = np.column_stack(
        [np.interp(targets, s, pts[:, 0]), np.interp(targets, s, pts[:, 1])]
    )
    out[0] = pts[0]
    out[-1] = pts[-1]
    return Trajectory(out, dt=traj.dt)


def overlap_mask(cur: Trajectory, prev: Trajectory, frame_gap_steps: int = 1) -> OverlapMask:
    """Flags over ``cur`` marking waypoints whose absolute time also exists
    in ``prev`` (waypoint i of cur aligns with waypoint i + gap of prev)."""
    if frame_gap_steps < 0:
        raise GeometryError(f"frame gap must be >= 0, got {frame_gap_steps}")
    if cur.dt != prev.dt:
        raise AlignmentError(f"dt mismatch: {cur.dt} vs {prev.dt}")
    idx = np.arange(len(cur))
    return OverlapMask(idx + frame_gap_steps < len(prev))


# ---------------------------------------------------------------------------
# serialization


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {"dt": float(traj.dt), "points": [[float(x), float(y)] for x, y in traj.points]}


def trajectory_from_dict(obj: dict) -> Trajectory:
    if not isinstance(obj, dict) or "dt" not in obj or "points" not in obj:
        raise GeometryError("trajectory record must carry 'dt' and 'points'")
    return Trajectory(np.asarray(obj["points"], dtype=np.float64), dt=float(obj["dt"]))


def save_trajectories_jsonl(path, trajectories: Iterable[Trajectory]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(json.dumps(trajectory_to_dict(traj)) + "\n")


def load_trajectories_jsonl(path) -> list[Trajectory]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(trajectory_from_dict(json.loads(line)))
    return out
