"""Motion command windows sliced from clips.

A command is the goal signal consumed by the tracking policy.  Three
kinds exist, mirroring the three input embodiments:

* robot: 10 future frames of joint positions, joint velocities, and
  root-relative link targets at 0.1 s spacing,
* human: 10 future frames of 3D human joint positions at 0.02 s spacing,
* hybrid: current-frame upper-body keypoints (head and both wrists as
  SE(3) poses) plus 10 future lower-body robot frames at 0.1 s spacing.

Every quantity is canonicalized to the local heading frame of the
anchor frame (the clip frame at the slice time), which makes commands
invariant to world yaw and planar translation.  Windows reaching past
the clip end hold the final frame with zero velocities.

Flattened feature layouts are documented in docs/features.md.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .clips import MotionClip, PoseFrame
from .rotations import HeadingFrame, mat_to_6d, quat_to_mat
from .skeletons import SkeletonSpec

ROBOT_FRAMES = 10
HUMAN_FRAMES = 10
HYBRID_FRAMES = 10
ROBOT_DT = 0.1
HUMAN_DT = 0.02
HYBRID_DT = 0.1

KEYPOINT_NAMES = ("head", "left_wrist", "right_wrist")


class CommandKind(enum.Enum):
    ROBOT = "robot"
    HUMAN = "human"
    HYBRID = "hybrid"


class CommandError(ValueError):
    pass


@dataclass(frozen=True)
class RobotCommand:
    kind = CommandKind.ROBOT
    times: np.ndarray  # (10,) offsets from the anchor, seconds
    joint_pos: np.ndarray  # (10, J)
    joint_vel: np.ndarray  # (10, J)
    link_pos: np.ndarray  # (10, L, 3) link minus own-frame root, heading frame

    def flatten(self) -> np.ndarray:
        return np.concatenate([
            self.joint_pos.reshape(-1), self.joint_vel.reshape(-1), self.link_pos.reshape(-1),
        ])

    @staticmethod
    def flat_dim(skeleton: SkeletonSpec) -> int:
        j = skeleton.joint_count
        l = len(skeleton.body_links)
        return ROBOT_FRAMES * (2 * j + 3 * l)

    @classmethod
    def from_flat(cls, flat: np.ndarray, skeleton: SkeletonSpec) -> "RobotCommand":
        j = skeleton.joint_count
        l = len(skeleton.body_links)
        f = ROBOT_FRAMES
        flat = np.asarray(flat, dtype=float).reshape(-1)
        if flat.shape[0] != cls.flat_dim(skeleton):
            raise CommandError(f"flat robot command: expected {cls.flat_dim(skeleton)} values, got {flat.shape[0]}")
        jp, jv, lp = np.split(flat, [f * j, 2 * f * j])
        return cls(
            times=np.arange(f) * ROBOT_DT,
            joint_pos=jp.reshape(f, j),
            joint_vel=jv.reshape(f, j),
            link_pos=lp.reshape(f, l, 3),
        )


@dataclass(frozen=True)
class HumanCommand:
    kind = CommandKind.HUMAN
    times: np.ndarray  # (10,)
    joint_pos: np.ndarray  # (10, H, 3) relative to anchor root, heading frame

    def flatten(self) -> np.ndarray:
        return self.joint_pos.reshape(-1)

    @staticmethod
    def flat_dim(skeleton: SkeletonSpec) -> int:
        return HUMAN_FRAMES * len(skeleton.human_joints) * 3


@dataclass(frozen=True)
class HybridCommand:
    kind = CommandKind.HYBRID
    keypoint_pos: np.ndarray  # (3, 3) head, left wrist, right wrist
    keypoint_rot6d: np.ndarray  # (3, 6)
    times: np.ndarray  # (10,)
    lower_joint_pos: np.ndarray  # (10, Jl)
    lower_joint_vel: np.ndarray  # (10, Jl)
    lower_link_pos: np.ndarray  # (10, Ll, 3)

    def flatten(self) -> np.ndarray:
        return np.concatenate([
            self.keypoint_pos.reshape(-1), self.keypoint_rot6d.reshape(-1),
            self.lower_joint_pos.reshape(-1), self.lower_joint_vel.reshape(-1),
            self.lower_link_pos.reshape(-1),
        ])

    @staticmethod
    def flat_dim(skeleton: SkeletonSpec) -> int:
        jl = len(lower_joint_indices(skeleton))
        ll = len(lower_link_indices(skeleton))
        return 3 * 3 + 3 * 6 + HYBRID_FRAMES * (2 * jl + 3 * ll)


MotionCommand = RobotCommand | HumanCommand | HybridCommand


def command_flat_dim(kind: CommandKind, skeleton: SkeletonSpec) -> int:
    return {
        CommandKind.ROBOT: RobotCommand.flat_dim,
        CommandKind.HUMAN: HumanCommand.flat_dim,
        CommandKind.HYBRID: HybridCommand.flat_dim,
    }[kind](skeleton)


def lower_joint_indices(skeleton: SkeletonSpec) -> np.ndarray:
    return skeleton.joint_indices(skeleton.lower_joints)


def _chain_joints(skeleton: SkeletonSpec, link_name: str):
    names = skeleton.link_names
    idx = names.index(link_name)
    if idx >= skeleton.joint_count:  # end effector: start from its parent joint
        idx = skeleton.end_effectors[idx - skeleton.joint_count].parent
    chain = []
    while idx >= 0:
        chain.append(skeleton.joints[idx].name)
        idx = skeleton.joints[idx].parent
    return chain


def lower_link_indices(skeleton: SkeletonSpec) -> np.ndarray:
    """Body links whose whole joint chain lies in the lower-body partition."""
    lower = set(skeleton.lower_joints)
    out = []
    for bi, name in enumerate(skeleton.body_links):
        chain = _chain_joints(skeleton, name)
        if chain and all(c in lower for c in chain):
            out.append(bi)
    return np.array(out, dtype=int)


def _window_frames(clip: MotionClip, t: float, count: int, dt: float) -> list[PoseFrame]:
    return [clip.frame_at(t + k * dt) for k in range(count)]


def slice_command(clip: MotionClip, t: float, kind: CommandKind) -> MotionCommand:
    """Cut the future-frame goal window at time t, heading-canonicalized."""
    anchor = clip.frame_at(t)
    frame_of = HeadingFrame(anchor.root_pos, anchor.root_rot)

    if kind is CommandKind.ROBOT:
        frames = _window_frames(clip, t, ROBOT_FRAMES, ROBOT_DT)
        return RobotCommand(
            times=np.arange(ROBOT_FRAMES) * ROBOT_DT,
            joint_pos=np.stack([f.joint_pos for f in frames]),
            joint_vel=np.stack([f.joint_vel for f in frames]),
            link_pos=np.stack([frame_of.to_local_vec(f.link_pos - f.root_pos) for f in frames]),
        )

    if kind is CommandKind.HUMAN:
        if not clip.skeleton.human_joints:
            raise CommandError("skeleton declares no human joint layout")
        frames = _window_frames(clip, t, HUMAN_FRAMES, HUMAN_DT)
        body_order = {n: i for i, n in enumerate(clip.skeleton.body_links)}
        missing = [n for n in clip.skeleton.human_joints if n not in body_order]
        if missing:
            raise CommandError(f"human joints are not tracked body links: {missing}")
        cols = np.array([body_order[n] for n in clip.skeleton.human_joints], dtype=int)
        rows = [frame_of.to_local_pos(f.link_pos[cols]) for f in frames]
        return HumanCommand(times=np.arange(HUMAN_FRAMES) * HUMAN_DT, joint_pos=np.stack(rows))

    if kind is CommandKind.HYBRID:
        body_order = {n: i for i, n in enumerate(clip.skeleton.body_links)}
        kp_pos, kp_rot = [], []
        for key in KEYPOINT_NAMES:
            link = clip.skeleton.keypoints.get(key)
            if link is None or link not in body_order:
                raise CommandError(f"skeleton lacks tracked keypoint {key!r}")
            li = body_order[link]
            kp_pos.append(frame_of.to_local_pos(anchor.link_pos[li]))
            kp_rot.append(mat_to_6d(quat_to_mat(frame_of.to_local_quat(anchor.link_rot[li]))))
        jl = lower_joint_indices(clip.skeleton)
        ll = lower_link_indices(clip.skeleton)
        frames = _window_frames(clip, t, HYBRID_FRAMES, HYBRID_DT)
        return HybridCommand(
            keypoint_pos=np.stack(kp_pos),
            keypoint_rot6d=np.stack(kp_rot),
            times=np.arange(HYBRID_FRAMES) * HYBRID_DT,
            lower_joint_pos=np.stack([f.joint_pos[jl] for f in frames]),
            lower_joint_vel=np.stack([f.joint_vel[jl] for f in frames]),
            lower_link_pos=np.stack([frame_of.to_local_vec(f.link_pos[ll] - f.root_pos) for f in frames]),
        )

    raise CommandError(f"unknown command kind {kind!r}")


@dataclass(frozen=True)
class Proprioception:
    """Sensor bundle consumed by the control decoder."""

    joint_pos: np.ndarray  # (J,)
    joint_vel: np.ndarray  # (J,)
    root_ang_vel: np.ndarray  # (3,) root frame
    gravity_in_root: np.ndarray  # (3,)
    prev_action: np.ndarray  # (J,)
    gravity: float = 9.81

    def __post_init__(self):
        g = np.linalg.norm(self.gravity_in_root)
        if abs(g - self.gravity) > 1e-6:
            raise ValueError(f"|gravity_in_root| = {g}, expected {self.gravity}")

    def flatten(self) -> np.ndarray:
        return np.concatenate([
            self.joint_pos, self.joint_vel, self.root_ang_vel, self.gravity_in_root, self.prev_action,
        ])

    @staticmethod
    def flat_dim(skeleton: SkeletonSpec) -> int:
        return 3 * skeleton.joint_count + 6
