"""Tracking reward and penalty terms.

Five exponential tracking kernels (root orientation, relative body link
positions and orientations, link linear and angular velocities) plus
three penalties (action rate, joint limit violations, undesired
contacts).  Orientation differences use the 6D rotation representation;
"relative" link quantities are expressed in the root frame.

With the default weights the total tracking reward lies in (0, 4.5].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clips import PoseFrame
from .rotations import mat_to_6d, quat_conj, quat_mul, quat_rotate, quat_to_6d, quat_to_mat
from .skeletons import SkeletonSpec

CONTACT_FORCE_THRESHOLD_N = 1.0


class RewardError(ValueError):
    pass


@dataclass(frozen=True)
class RewardWeights:
    root_ori: float = 0.5
    body_pos: float = 1.0
    body_ori: float = 1.0
    body_lin: float = 1.0
    body_ang: float = 1.0
    action_rate: float = -0.1
    joint_limit: float = -10.0
    undesired_contact: float = -0.1
    scale_ori: float = 0.4
    scale_pos: float = 0.3
    scale_lin: float = 1.0
    scale_ang: float = 3.14

    def __post_init__(self):
        for name in ("root_ori", "body_pos", "body_ori", "body_lin", "body_ang"):
            if getattr(self, name) <= 0:
                raise ValueError(f"tracking weight {name} must be positive")
        for name in ("action_rate", "joint_limit", "undesired_contact"):
            if getattr(self, name) >= 0:
                raise ValueError(f"penalty weight {name} must be negative")


@dataclass(frozen=True)
class BodyState:
    """Link-level state bundle for one instant, ready for the kernels."""

    root_ori6d: np.ndarray  # (6,)
    link_pos_rel: np.ndarray  # (L, 3) root-frame link positions
    link_ori6d_rel: np.ndarray  # (L, 6) root-frame link orientations
    link_lin_vel: np.ndarray  # (L, 3)
    link_ang_vel: np.ndarray  # (L, 3)

    @classmethod
    def from_frame(cls, frame: PoseFrame) -> "BodyState":
        q_inv = quat_conj(frame.root_rot)
        rel_pos = quat_rotate(q_inv, frame.link_pos - frame.root_pos)
        rel_rot = mat_to_6d(quat_to_mat(quat_mul(q_inv, frame.link_rot)))
        return cls(
            root_ori6d=quat_to_6d(frame.root_rot),
            link_pos_rel=rel_pos,
            link_ori6d_rel=rel_rot,
            link_lin_vel=frame.link_lin_vel.copy(),
            link_ang_vel=frame.link_ang_vel.copy(),
        )


def tracking_reward(p: BodyState, g: BodyState, w: RewardWeights = RewardWeights()):
    """Sum of the five tracking kernels plus a per-term breakdown."""
    if p.link_pos_rel.shape != g.link_pos_rel.shape:
        raise RewardError("mismatched body link sets")

    def kernel(err_sq_mean, scale):
        return np.exp(-err_sq_mean / scale**2)

    root = w.root_ori * kernel(np.sum((p.root_ori6d - g.root_ori6d) ** 2), w.scale_ori)
    pos = w.body_pos * kernel(np.mean(np.sum((p.link_pos_rel - g.link_pos_rel) ** 2, axis=-1)), w.scale_pos)
    ori = w.body_ori * kernel(np.mean(np.sum((p.link_ori6d_rel - g.link_ori6d_rel) ** 2, axis=-1)), w.scale_ori)
    lin = w.body_lin * kernel(np.mean(np.sum((p.link_lin_vel - g.link_lin_vel) ** 2, axis=-1)), w.scale_lin)
    ang = w.body_ang * kernel(np.mean(np.sum((p.link_ang_vel - g.link_ang_vel) ** 2, axis=-1)), w.scale_ang)
    breakdown = {
        "root_ori": float(root),
        "body_pos": float(pos),
        "body_ori": float(ori),
        "body_lin": float(lin),
        "body_ang": float(ang),
    }
    return float(root + pos + ori + lin + ang), breakdown


@dataclass(frozen=True)
class ContactReport:
    """Per-body-link contact flags and force magnitudes (newtons)."""

    flags: np.ndarray  # (L,) bool
    forces: np.ndarray  # (L,) N

    def __post_init__(self):
        if np.any(self.forces < 0):
            raise ValueError("contact forces must be nonnegative")

    @classmethod
    def empty(cls, n_links: int) -> "ContactReport":
        return cls(flags=np.zeros(n_links, dtype=bool), forces=np.zeros(n_links))


def penalty(
    action: np.ndarray,
    prev_action: np.ndarray,
    joint_pos: np.ndarray,
    skeleton: SkeletonSpec,
    contacts: ContactReport | None = None,
    w: RewardWeights = RewardWeights(),
):
    """Action-rate, joint-limit, and undesired-contact penalties (all <= 0)."""
    action = np.asarray(action, dtype=float)
    prev_action = np.asarray(prev_action, dtype=float)
    limits = skeleton.joint_limits
    out_of_range = int(np.sum((joint_pos < limits[:, 0]) | (joint_pos > limits[:, 1])))

    n_contacts = 0
    if contacts is not None:
        exempt = set(skeleton.contact_exempt_links)
        for i, name in enumerate(skeleton.body_links):
            if name in exempt:
                continue
            if contacts.forces[i] > CONTACT_FORCE_THRESHOLD_N:
                n_contacts += 1

    rate = w.action_rate * float(np.sum((action - prev_action) ** 2))
    limit = w.joint_limit * out_of_range
    contact = w.undesired_contact * n_contacts
    breakdown = {"action_rate": rate, "joint_limit": limit, "undesired_contact": contact}
    return rate + limit + contact, breakdown


def step_reward(p: BodyState, g: BodyState, action, prev_action, joint_pos, skeleton,
                contacts=None, w: RewardWeights = RewardWeights()):
    """Full per-tick reward: tracking kernels plus penalties."""
    r, rb = tracking_reward(p, g, w)
    pen, pb = penalty(action, prev_action, joint_pos, skeleton, contacts, w)
    rb.update(pb)
    return r + pen, rb
