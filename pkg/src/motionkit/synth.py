"""Synthetic clip generators and rigid-transform helpers.

These produce kinematically consistent clips: link poses and velocities
come from forward kinematics of analytic joint and root trajectories,
so differentiation identities hold to machine precision.
"""

from __future__ import annotations

import numpy as np

from .clips import MotionClip, NOMINAL_FPS, PoseFrame
from .rotations import quat_from_yaw, quat_mul, quat_rotate
from .skeletons import SkeletonSpec


def trajectory_clip(
    skeleton: SkeletonSpec,
    duration: float,
    joint_fn,
    root_fn,
    fps: float = NOMINAL_FPS,
    name: str = "synthetic",
) -> MotionClip:
    """Build a clip from analytic trajectories.

    ``joint_fn(t) -> (q, qd)`` in radians; ``root_fn(t) -> (pos, yaw,
    lin_vel, yaw_rate)``.  Roll and pitch of the root stay zero, which
    is what the heading-frame machinery expects of reference motion.
    """
    n = int(round(duration * fps)) + 1
    body = skeleton.body_link_indices
    frames = []
    for i in range(n):
        t = i / fps
        q, qd = joint_fn(t)
        pos, yaw, lin_vel, yaw_rate = root_fn(t)
        root_rot = quat_from_yaw(yaw)
        ang_vel = np.array([0.0, 0.0, yaw_rate])
        lp, lr, lv, lw = skeleton.fk_velocity(pos, root_rot, q, lin_vel, ang_vel, qd)
        frames.append(PoseFrame(
            time=t,
            root_pos=np.asarray(pos, dtype=float),
            root_rot=root_rot,
            joint_pos=np.asarray(q, dtype=float),
            joint_vel=np.asarray(qd, dtype=float),
            root_lin_vel=np.asarray(lin_vel, dtype=float),
            root_ang_vel=ang_vel,
            link_pos=lp[body],
            link_rot=lr[body],
            link_lin_vel=lv[body],
            link_ang_vel=lw[body],
        ))
    return MotionClip.from_frames(skeleton, fps, frames, name=name)


def constant_pose_clip(
    skeleton: SkeletonSpec,
    duration: float = 2.0,
    joint_pos=None,
    root_height: float = 0.8,
    fps: float = NOMINAL_FPS,
    name: str = "hold",
) -> MotionClip:
    q0 = np.zeros(skeleton.joint_count) if joint_pos is None else np.asarray(joint_pos, dtype=float)

    def joint_fn(t):
        return q0, np.zeros_like(q0)

    def root_fn(t):
        return np.array([0.0, 0.0, root_height]), 0.0, np.zeros(3), 0.0

    return trajectory_clip(skeleton, duration, joint_fn, root_fn, fps=fps, name=name)


def sine_walk_clip(
    skeleton: SkeletonSpec,
    duration: float = 4.0,
    speed: float = 0.3,
    amplitude: float = 0.25,
    frequency: float = 0.5,
    root_height: float = 0.8,
    heading: float = 0.0,
    fps: float = NOMINAL_FPS,
    name: str = "sine_walk",
) -> MotionClip:
    """Gentle straight-line walk: sinusoidal joints, constant root velocity."""
    j = skeleton.joint_count
    phases = np.linspace(0.0, np.pi, j, endpoint=False)
    direction = np.array([np.cos(heading), np.sin(heading), 0.0])
    omega = 2.0 * np.pi * frequency

    def joint_fn(t):
        q = amplitude * np.sin(omega * t + phases)
        qd = amplitude * omega * np.cos(omega * t + phases)
        return q, qd

    def root_fn(t):
        pos = direction * speed * t + np.array([0.0, 0.0, root_height])
        return pos, heading, direction * speed, 0.0

    return trajectory_clip(skeleton, duration, joint_fn, root_fn, fps=fps, name=name)


def turning_clip(
    skeleton: SkeletonSpec,
    duration: float = 4.0,
    speed: float = 0.3,
    turn_rate: float = 0.4,
    root_height: float = 0.8,
    fps: float = NOMINAL_FPS,
    name: str = "turning",
) -> MotionClip:
    """Constant-rate turn: root follows an arc, heading tangent to it."""
    j = skeleton.joint_count
    radius = speed / turn_rate if turn_rate else np.inf

    def joint_fn(t):
        q = 0.15 * np.sin(2.0 * np.pi * 0.5 * t + np.arange(j))
        qd = 0.15 * 2.0 * np.pi * 0.5 * np.cos(2.0 * np.pi * 0.5 * t + np.arange(j))
        return q, qd

    def root_fn(t):
        yaw = turn_rate * t
        pos = np.array([radius * np.sin(yaw), radius * (1 - np.cos(yaw)), root_height])
        vel = np.array([speed * np.cos(yaw), speed * np.sin(yaw), 0.0])
        return pos, yaw, vel, turn_rate

    return trajectory_clip(skeleton, duration, joint_fn, root_fn, fps=fps, name=name)


def squat_clip(
    skeleton: SkeletonSpec,
    duration: float = 4.0,
    high: float = 0.8,
    low: float = 0.3,
    fps: float = NOMINAL_FPS,
    name: str = "squat",
) -> MotionClip:
    """Pelvis height sweeps high -> low -> high; knees flex to match."""
    j = skeleton.joint_count
    omega = 2.0 * np.pi / duration

    def height(t):
        return low + (high - low) * (0.5 + 0.5 * np.cos(omega * t))

    def joint_fn(t):
        flex = (high - height(t)) / max(high - low, 1e-9)
        q = np.zeros(j)
        qd = np.zeros(j)
        dflex = (high - low) * 0.5 * omega * np.sin(omega * t) / max(high - low, 1e-9)
        for idx, jt in enumerate(skeleton.joints):
            if "knee" in jt.name:
                q[idx] = 1.2 * flex
                qd[idx] = 1.2 * dflex
            elif "hip_pitch" in jt.name:
                q[idx] = -0.6 * flex
                qd[idx] = -0.6 * dflex
        return q, qd

    def root_fn(t):
        dh = -(high - low) * 0.5 * omega * np.sin(omega * t)
        return np.array([0.0, 0.0, height(t)]), 0.0, np.array([0.0, 0.0, dh]), 0.0

    return trajectory_clip(skeleton, duration, joint_fn, root_fn, fps=fps, name=name)


def yaw_translate_clip(clip: MotionClip, yaw: float, translation) -> MotionClip:
    """Apply one rigid yaw-plus-translation to a whole clip (world frame)."""
    qy = quat_from_yaw(yaw)
    d = np.asarray(translation, dtype=float)
    return MotionClip(
        skeleton=clip.skeleton, fps=clip.fps, name=clip.name, times=clip.times,
        root_pos=quat_rotate(qy, clip.root_pos) + d,
        root_rot=quat_mul(qy, clip.root_rot),
        joint_pos=clip.joint_pos, joint_vel=clip.joint_vel,
        root_lin_vel=quat_rotate(qy, clip.root_lin_vel),
        root_ang_vel=quat_rotate(qy, clip.root_ang_vel),
        link_pos=quat_rotate(qy, clip.link_pos) + d,
        link_rot=quat_mul(qy, clip.link_rot),
        link_lin_vel=quat_rotate(qy, clip.link_lin_vel),
        link_ang_vel=quat_rotate(qy, clip.link_ang_vel),
    )
