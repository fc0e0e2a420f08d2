"""Desk-scale surrogate plant: PD-driven joint double integrators.

Joints integrate ``I q'' = clamp(kp (q* - q) - kd q', tau_max)`` with
semi-implicit Euler.  The floating base is not simulated: the root
follows a commanded reference pose with a first-order lag, plus decaying
velocity offsets from external pushes.  This keeps the control loop
closed and testable without a physics engine; it is the main fidelity
gap versus a full simulator and is documented as such.

Domain randomization couples in through the joint offset (an actuation
miscalibration added to PD targets) and the COM offset (a steady root
tracking bias).  Friction and restitution draws are logged upstream but
have no effect here.  Push events add their linear velocity and yaw
rate at event start; the root model is yaw-only, so roll/pitch push
components are ignored.

With no targets published yet the plant holds with pure damping, so
joint kinetic energy is non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clips import PoseFrame
from .domain_rand import DrSample
from .rotations import quat_from_yaw, wrap_angle, yaw_of_quat
from .skeletons import SkeletonSpec


@dataclass(frozen=True)
class RootRef:
    """Root pose command for the surrogate base follower."""

    pos: np.ndarray  # (3,)
    yaw: float
    lin_vel: np.ndarray | None = None  # feedforward, optional
    yaw_rate: float = 0.0


@dataclass
class PlantConfig:
    torque_limit: float = 200.0
    inertia: float = 1.0
    root_lag: float = 0.15  # s, first-order root follower time constant
    push_decay: float = 0.4  # s, push velocity decay time constant
    com_gain: float = 0.1  # m of root bias per m of COM offset
    contact_height: float = 0.03  # m, links below this are in contact
    contact_stiffness: float = 2000.0  # N/m of penetration


class Plant:
    """Mutable plant state. Owned by exactly one task when run in a loop."""

    def __init__(self, skeleton: SkeletonSpec, dt: float, config: PlantConfig | None = None,
                 dr: DrSample | None = None):
        self.skeleton = skeleton
        self.dt = float(dt)
        self.config = config or PlantConfig()
        self.dr = dr
        self.kp = skeleton.pd_gains[:, 0].copy()
        self.kd = skeleton.pd_gains[:, 1].copy()
        j = skeleton.joint_count
        self.q = np.zeros(j)
        self.qd = np.zeros(j)
        self.root_pos = np.zeros(3)
        self.root_yaw = 0.0
        self.root_vel = np.zeros(3)
        self.yaw_rate = 0.0
        self.push_vel = np.zeros(3)
        self.push_yaw_rate = 0.0
        self.time = 0.0
        self._joint_bias = dr.joint_offset if dr is not None else np.zeros(j)
        self._root_bias = (dr.com_offset * self.config.com_gain) if dr is not None else np.zeros(3)

    def reset_to_frame(self, frame: PoseFrame) -> None:
        self.q = frame.joint_pos.copy()
        self.qd = frame.joint_vel.copy()
        self.root_pos = frame.root_pos.copy()
        self.root_yaw = float(yaw_of_quat(frame.root_rot))
        self.root_vel = frame.root_lin_vel.copy()
        self.yaw_rate = float(frame.root_ang_vel[2])
        self.push_vel = np.zeros(3)
        self.push_yaw_rate = 0.0
        self.time = float(frame.time)

    def apply_push(self, lin_vel, ang_vel) -> None:
        """Additive velocity impulse; only the yaw component of ang_vel acts."""
        self.push_vel = self.push_vel + np.asarray(lin_vel, dtype=float)
        self.push_yaw_rate += float(np.asarray(ang_vel, dtype=float)[2])

    def step(self, targets: np.ndarray | None, root_ref: RootRef | None = None) -> None:
        cfg = self.config
        if targets is None:
            tau = -self.kd * self.qd
        else:
            q_star = np.asarray(targets, dtype=float) + self._joint_bias
            tau = self.kp * (q_star - self.q) - self.kd * self.qd
        tau = np.clip(tau, -cfg.torque_limit, cfg.torque_limit)
        self.qd = self.qd + self.dt * tau / cfg.inertia
        self.q = self.q + self.dt * self.qd

        if root_ref is not None:
            target = np.asarray(root_ref.pos, dtype=float) + self._root_bias
            v_cmd = (target - self.root_pos) / cfg.root_lag
            if root_ref.lin_vel is not None:
                v_cmd = v_cmd + np.asarray(root_ref.lin_vel, dtype=float)
            w_cmd = wrap_angle(root_ref.yaw - self.root_yaw) / cfg.root_lag + root_ref.yaw_rate
        else:
            v_cmd = np.zeros(3)
            w_cmd = 0.0
        self.root_vel = v_cmd + self.push_vel
        self.yaw_rate = w_cmd + self.push_yaw_rate
        self.root_pos = self.root_pos + self.dt * self.root_vel
        self.root_yaw = float(wrap_angle(self.root_yaw + self.dt * self.yaw_rate))

        decay = np.exp(-self.dt / cfg.push_decay)
        self.push_vel = self.push_vel * decay
        self.push_yaw_rate *= decay
        self.time += self.dt

    # -- observation helpers -------------------------------------------

    @property
    def root_rot(self) -> np.ndarray:
        return quat_from_yaw(self.root_yaw)

    def kinetic_energy(self) -> float:
        return float(0.5 * self.config.inertia * np.sum(self.qd**2))

    def pose_frame(self) -> PoseFrame:
        """Snapshot as a PoseFrame (body links only, via FK)."""
        body = self.skeleton.body_link_indices
        root_ang_vel = np.array([0.0, 0.0, self.yaw_rate])
        lp, lr, lv, lw = self.skeleton.fk_velocity(
            self.root_pos, self.root_rot, self.q, self.root_vel, root_ang_vel, self.qd,
        )
        return PoseFrame(
            time=self.time,
            root_pos=self.root_pos.copy(),
            root_rot=self.root_rot,
            joint_pos=self.q.copy(),
            joint_vel=self.qd.copy(),
            root_lin_vel=self.root_vel.copy(),
            root_ang_vel=root_ang_vel,
            link_pos=lp[body], link_rot=lr[body], link_lin_vel=lv[body], link_ang_vel=lw[body],
        )

    def contact_report(self, frame: PoseFrame | None = None):
        from .rewards import ContactReport

        if frame is None:
            frame = self.pose_frame()
        z = frame.link_pos[:, 2]
        pen = np.maximum(self.config.contact_height - z, 0.0)
        forces = self.config.contact_stiffness * pen
        return ContactReport(flags=forces > 0, forces=forces)

    def proprioception(self, prev_action: np.ndarray, gravity: float = 9.81):
        from .commands import Proprioception
        from .rotations import quat_conj, quat_rotate

        g_world = np.array([0.0, 0.0, -gravity])
        return Proprioception(
            joint_pos=self.q.copy(),
            joint_vel=self.qd.copy(),
            root_ang_vel=quat_rotate(quat_conj(self.root_rot), np.array([0.0, 0.0, self.yaw_rate])),
            gravity_in_root=quat_rotate(quat_conj(self.root_rot), g_world),
            prev_action=np.asarray(prev_action, dtype=float).copy(),
            gravity=gravity,
        )
