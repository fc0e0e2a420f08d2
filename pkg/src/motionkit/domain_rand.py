"""Domain randomization samplers: physics, pushes, target perturbation.

Every quantity is drawn from a uniform range.  Samplers take an explicit
``numpy.random.Generator`` so parallel environments get deterministic,
independent streams.

The friction and restitution draws are sampled and logged for auditing
even though the surrogate plant does not simulate contact friction;
only joint/COM offsets and pushes feed back into the plant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .commands import HumanCommand, HybridCommand, MotionCommand, RobotCommand
from .rotations import (
    mat_to_6d,
    quat_from_axis_angle,
    quat_from_yaw,
    quat_mul,
    quat_rotate,
    quat_to_mat,
    rot6d_to_quat,
)


@dataclass(frozen=True)
class Range:
    low: float
    high: float

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError(f"range low {self.low} > high {self.high}")

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.low, self.high, size=size)


@dataclass(frozen=True)
class DrConfig:
    static_friction: Range = Range(0.3, 1.6)
    dynamic_friction: Range = Range(0.3, 1.2)
    restitution: Range = Range(0.0, 0.5)
    default_joint_jitter: Range = Range(-0.01, 0.01)
    com_offset_x: Range = Range(-0.075, 0.075)
    com_offset_y: Range = Range(-0.1, 0.1)
    com_offset_z: Range = Range(-0.1, 0.1)
    push_lin_x: Range = Range(-0.5, 0.5)
    push_lin_y: Range = Range(-0.5, 0.5)
    push_lin_z: Range = Range(-0.2, 0.2)
    push_ang_roll: Range = Range(-0.52, 0.52)
    push_ang_pitch: Range = Range(-0.52, 0.52)
    push_ang_yaw: Range = Range(-0.78, 0.78)
    push_duration: Range = Range(1.0, 3.0)
    push_gap: Range = Range(2.0, 6.0)  # idle time between push events (mechanism choice)
    target_pos_jitter_xy: Range = Range(-0.05, 0.05)
    target_pos_jitter_z: Range = Range(-0.01, 0.01)
    target_ori_jitter_rp: Range = Range(-0.1, 0.1)
    target_ori_jitter_yaw: Range = Range(-0.2, 0.2)
    target_lin_vel_jitter_xy: Range = Range(-0.5, 0.5)
    target_lin_vel_jitter_z: Range = Range(-0.2, 0.2)
    target_ang_vel_jitter_rp: Range = Range(-0.52, 0.52)
    target_ang_vel_jitter_yaw: Range = Range(-0.78, 0.78)
    target_joint_jitter: Range = Range(-0.1, 0.1)


@dataclass(frozen=True)
class DrSample:
    static_friction: float
    dynamic_friction: float
    restitution: float
    joint_offset: np.ndarray  # (J,)
    com_offset: np.ndarray  # (3,)

    def as_dict(self) -> dict:
        return {
            "static_friction": self.static_friction,
            "dynamic_friction": self.dynamic_friction,
            "restitution": self.restitution,
            "joint_offset_mean": float(np.mean(self.joint_offset)),
            "com_offset_x": float(self.com_offset[0]),
            "com_offset_y": float(self.com_offset[1]),
            "com_offset_z": float(self.com_offset[2]),
        }


@dataclass(frozen=True)
class PushEvent:
    start: float
    duration: float
    lin_vel: np.ndarray  # (3,)
    ang_vel: np.ndarray  # (3,)


def sample_dr(cfg: DrConfig, rng: np.random.Generator, joint_count: int) -> DrSample:
    return DrSample(
        static_friction=float(cfg.static_friction.sample(rng)),
        dynamic_friction=float(cfg.dynamic_friction.sample(rng)),
        restitution=float(cfg.restitution.sample(rng)),
        joint_offset=cfg.default_joint_jitter.sample(rng, size=joint_count),
        com_offset=np.array([
            cfg.com_offset_x.sample(rng), cfg.com_offset_y.sample(rng), cfg.com_offset_z.sample(rng),
        ]),
    )


def push_schedule(cfg: DrConfig, episode_length: float, rng: np.random.Generator) -> list[PushEvent]:
    """Non-overlapping push events covering the episode."""
    if episode_length <= 0:
        raise ValueError("episode_length must be positive")
    events = []
    cursor = float(cfg.push_gap.sample(rng))
    while True:
        duration = float(cfg.push_duration.sample(rng))
        if cursor + duration > episode_length:
            break
        events.append(PushEvent(
            start=cursor,
            duration=duration,
            lin_vel=np.array([
                cfg.push_lin_x.sample(rng), cfg.push_lin_y.sample(rng), cfg.push_lin_z.sample(rng),
            ]),
            ang_vel=np.array([
                cfg.push_ang_roll.sample(rng), cfg.push_ang_pitch.sample(rng), cfg.push_ang_yaw.sample(rng),
            ]),
        ))
        cursor += duration + float(cfg.push_gap.sample(rng))
    return events


def perturb_target(command: MotionCommand, cfg: DrConfig, rng: np.random.Generator) -> MotionCommand:
    """Jitter a goal window: one draw per call, applied across the window.

    Position jitter shifts link targets, orientation jitter rotates the
    planar components by the yaw draw, joint jitter shifts joint targets.
    Roll/pitch orientation jitter applies only to the hybrid keypoint
    orientations (the only explicit orientations a command carries).
    """
    d_pos = np.array([
        float(cfg.target_pos_jitter_xy.sample(rng)),
        float(cfg.target_pos_jitter_xy.sample(rng)),
        float(cfg.target_pos_jitter_z.sample(rng)),
    ])
    d_yaw = float(cfg.target_ori_jitter_yaw.sample(rng))
    q_yaw = quat_from_yaw(d_yaw)

    if isinstance(command, RobotCommand):
        d_joint = cfg.target_joint_jitter.sample(rng, size=command.joint_pos.shape[1])
        return RobotCommand(
            times=command.times,
            joint_pos=command.joint_pos + d_joint,
            joint_vel=command.joint_vel,
            link_pos=quat_rotate(q_yaw, command.link_pos) + d_pos,
        )
    if isinstance(command, HumanCommand):
        return HumanCommand(
            times=command.times,
            joint_pos=quat_rotate(q_yaw, command.joint_pos) + d_pos,
        )
    if isinstance(command, HybridCommand):
        d_joint = cfg.target_joint_jitter.sample(rng, size=command.lower_joint_pos.shape[1])
        d_rp = np.array([
            float(cfg.target_ori_jitter_rp.sample(rng)),
            float(cfg.target_ori_jitter_rp.sample(rng)),
        ])
        kp_rot = _jitter_rot6d(command.keypoint_rot6d, d_rp[0], d_rp[1], d_yaw)
        return HybridCommand(
            keypoint_pos=quat_rotate(q_yaw, command.keypoint_pos) + d_pos,
            keypoint_rot6d=kp_rot,
            times=command.times,
            lower_joint_pos=command.lower_joint_pos + d_joint,
            lower_joint_vel=command.lower_joint_vel,
            lower_link_pos=quat_rotate(q_yaw, command.lower_link_pos) + d_pos,
        )
    raise TypeError(f"not a motion command: {command!r}")


def _jitter_rot6d(rot6d: np.ndarray, droll: float, dpitch: float, dyaw: float) -> np.ndarray:
    dq = quat_mul(
        quat_from_yaw(dyaw),
        quat_mul(quat_from_axis_angle((0.0, 1.0, 0.0), dpitch), quat_from_axis_angle((1.0, 0.0, 0.0), droll)),
    )
    out = []
    for row in rot6d:
        q = rot6d_to_quat(row)
        out.append(mat_to_6d(quat_to_mat(quat_mul(dq, q))))
    return np.stack(out)
