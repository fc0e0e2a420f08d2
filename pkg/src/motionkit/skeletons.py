"""Skeleton description and forward kinematics.

A skeleton is a rooted tree of revolute joints plus a set of fixed
end-effector frames.  Tracked body links (the set used by rewards and
metrics) may be joint frames or end-effector frames.  Skeletons are
data driven: they can be built in code, loaded from JSON, and embedded
in clip files.

Two skeletons ship with the package: ``g1`` (a 29 DoF humanoid layout)
and ``desk`` (a 7 DoF mini humanoid for fast tests).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .rotations import quat_from_axis_angle, quat_mul, quat_rotate


class SkeletonError(ValueError):
    pass


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int  # -1 means the root body
    axis: tuple[float, float, float]
    offset: tuple[float, float, float]  # translation from parent frame origin
    limits: tuple[float, float]  # radians
    kp: float = 60.0
    kd: float = 3.0


@dataclass(frozen=True)
class EndEffector:
    name: str
    parent: int  # joint index, or -1 for the root body
    offset: tuple[float, float, float]


@dataclass(frozen=True)
class SkeletonSpec:
    """Joint tree, tracked link set, and control metadata.

    Link frames are indexed as: joints first (in joint order), then
    end-effectors.  ``body_links`` names the tracked subset.
    """

    name: str
    joints: tuple[Joint, ...]
    end_effectors: tuple[EndEffector, ...] = ()
    body_links: tuple[str, ...] = ()
    contact_exempt_links: tuple[str, ...] = ()  # ankles and wrists
    keypoints: dict = field(default_factory=dict)  # {"head": link, "left_wrist": link, "right_wrist": link}
    upper_joints: tuple[str, ...] = ()
    lower_joints: tuple[str, ...] = ()
    human_joints: tuple[str, ...] = ()  # link names backing the human positional layout

    def __post_init__(self):
        names = [j.name for j in self.joints]
        if len(set(names)) != len(names):
            raise SkeletonError("duplicate joint names")
        for i, j in enumerate(self.joints):
            if not (-1 <= j.parent < i):
                raise SkeletonError(f"joint {j.name}: parent {j.parent} does not precede it (not a tree)")
            if j.limits[0] > j.limits[1]:
                raise SkeletonError(f"joint {j.name}: limits reversed")
        link_names = self.link_names
        for group, members in [
            ("body_links", self.body_links),
            ("contact_exempt_links", self.contact_exempt_links),
            ("human_joints", self.human_joints),
        ]:
            for n in members:
                if n not in link_names:
                    raise SkeletonError(f"{group}: unknown link {n!r}")
        for key, n in self.keypoints.items():
            if n not in link_names:
                raise SkeletonError(f"keypoint {key}: unknown link {n!r}")
        joint_names = set(names)
        for n in self.upper_joints + self.lower_joints:
            if n not in joint_names:
                raise SkeletonError(f"unknown joint {n!r} in upper/lower partition")

    @property
    def joint_count(self) -> int:
        return len(self.joints)

    @property
    def joint_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.joints)

    @property
    def joint_limits(self) -> np.ndarray:
        return np.array([j.limits for j in self.joints])

    @property
    def pd_gains(self) -> np.ndarray:
        """Per-joint (kp, kd), shape (J, 2)."""
        return np.array([(j.kp, j.kd) for j in self.joints])

    @property
    def link_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.joints) + tuple(e.name for e in self.end_effectors)

    @property
    def body_link_indices(self) -> np.ndarray:
        order = {n: i for i, n in enumerate(self.link_names)}
        return np.array([order[n] for n in self.body_links], dtype=int)

    def joint_indices(self, names) -> np.ndarray:
        order = {n: i for i, n in enumerate(self.joint_names)}
        return np.array([order[n] for n in names], dtype=int)

    def link_index(self, name: str) -> int:
        return self.link_names.index(name)

    # -- kinematics ---------------------------------------------------

    def fk(self, root_pos, root_rot, joint_pos):
        """World pose of every link frame.

        Returns (link_pos, link_rot) with shapes (n_links, 3) and
        (n_links, 4).
        """
        root_pos = np.asarray(root_pos, dtype=float)
        root_rot = np.asarray(root_rot, dtype=float)
        joint_pos = np.asarray(joint_pos, dtype=float)
        nj = len(self.joints)
        pos = np.empty((nj + len(self.end_effectors), 3))
        rot = np.empty((nj + len(self.end_effectors), 4))
        for i, j in enumerate(self.joints):
            if j.parent < 0:
                pp, pr = root_pos, root_rot
            else:
                pp, pr = pos[j.parent], rot[j.parent]
            pos[i] = pp + quat_rotate(pr, np.asarray(j.offset))
            rot[i] = quat_mul(pr, quat_from_axis_angle(np.asarray(j.axis), joint_pos[i]))
        for k, e in enumerate(self.end_effectors):
            if e.parent < 0:
                pp, pr = root_pos, root_rot
            else:
                pp, pr = pos[e.parent], rot[e.parent]
            pos[nj + k] = pp + quat_rotate(pr, np.asarray(e.offset))
            rot[nj + k] = pr
        return pos, rot

    def fk_velocity(self, root_pos, root_rot, joint_pos, root_lin_vel, root_ang_vel, joint_vel):
        """World linear and angular velocity of every link frame."""
        link_pos, link_rot = self.fk(root_pos, root_rot, joint_pos)
        nj = len(self.joints)
        lin = np.empty_like(link_pos)
        ang = np.empty((link_pos.shape[0], 3))
        root_pos = np.asarray(root_pos, dtype=float)
        root_lin_vel = np.asarray(root_lin_vel, dtype=float)
        root_ang_vel = np.asarray(root_ang_vel, dtype=float)
        for i, j in enumerate(self.joints):
            if j.parent < 0:
                pp, pv, pw, pr = root_pos, root_lin_vel, root_ang_vel, root_rot
            else:
                pp, pv, pw, pr = link_pos[j.parent], lin[j.parent], ang[j.parent], link_rot[j.parent]
            lin[i] = pv + np.cross(pw, link_pos[i] - pp)
            ang[i] = pw + quat_rotate(pr, np.asarray(j.axis)) * joint_vel[i]
        for k, e in enumerate(self.end_effectors):
            if e.parent < 0:
                pp, pv, pw = root_pos, root_lin_vel, root_ang_vel
            else:
                pp, pv, pw = link_pos[e.parent], lin[e.parent], ang[e.parent]
            lin[nj + k] = pv + np.cross(pw, link_pos[nj + k] - pp)
            ang[nj + k] = pw
        return link_pos, link_rot, lin, ang

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "joints": [
                {
                    "name": j.name,
                    "parent": j.parent,
                    "axis": list(j.axis),
                    "offset": list(j.offset),
                    "limits": list(j.limits),
                    "kp": j.kp,
                    "kd": j.kd,
                }
                for j in self.joints
            ],
            "end_effectors": [
                {"name": e.name, "parent": e.parent, "offset": list(e.offset)} for e in self.end_effectors
            ],
            "body_links": list(self.body_links),
            "contact_exempt_links": list(self.contact_exempt_links),
            "keypoints": dict(self.keypoints),
            "upper_joints": list(self.upper_joints),
            "lower_joints": list(self.lower_joints),
            "human_joints": list(self.human_joints),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonSpec":
        return cls(
            name=d["name"],
            joints=tuple(
                Joint(
                    name=j["name"],
                    parent=int(j["parent"]),
                    axis=tuple(j["axis"]),
                    offset=tuple(j["offset"]),
                    limits=tuple(j["limits"]),
                    kp=float(j.get("kp", 60.0)),
                    kd=float(j.get("kd", 3.0)),
                )
                for j in d["joints"]
            ),
            end_effectors=tuple(
                EndEffector(name=e["name"], parent=int(e["parent"]), offset=tuple(e["offset"]))
                for e in d.get("end_effectors", [])
            ),
            body_links=tuple(d.get("body_links", [])),
            contact_exempt_links=tuple(d.get("contact_exempt_links", [])),
            keypoints=dict(d.get("keypoints", {})),
            upper_joints=tuple(d.get("upper_joints", [])),
            lower_joints=tuple(d.get("lower_joints", [])),
            human_joints=tuple(d.get("human_joints", [])),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path) -> "SkeletonSpec":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


X, Y, Z = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)


def desk_skeleton() -> SkeletonSpec:
    """7 DoF mini humanoid: two 2-DoF legs, a torso joint, two 1-DoF arms."""
    joints = [
        Joint("torso_pitch", -1, Y, (0.0, 0.0, 0.10), (-1.0, 1.0), kp=80.0, kd=4.0),
        Joint("l_hip_pitch", -1, Y, (0.0, 0.10, -0.05), (-2.0, 2.0), kp=100.0, kd=5.0),
        Joint("l_knee", 1, Y, (0.0, 0.0, -0.30), (0.0, 2.4), kp=100.0, kd=5.0),
        Joint("r_hip_pitch", -1, Y, (0.0, -0.10, -0.05), (-2.0, 2.0), kp=100.0, kd=5.0),
        Joint("r_knee", 3, Y, (0.0, 0.0, -0.30), (0.0, 2.4), kp=100.0, kd=5.0),
        Joint("l_shoulder_pitch", 0, Y, (0.0, 0.18, 0.25), (-2.8, 2.8), kp=40.0, kd=2.0),
        Joint("r_shoulder_pitch", 0, Y, (0.0, -0.18, 0.25), (-2.8, 2.8), kp=40.0, kd=2.0),
    ]
    ees = [
        EndEffector("head", 0, (0.0, 0.0, 0.40)),
        EndEffector("l_wrist", 5, (0.0, 0.0, -0.25)),
        EndEffector("r_wrist", 6, (0.0, 0.0, -0.25)),
        EndEffector("l_foot", 2, (0.0, 0.0, -0.30)),
        EndEffector("r_foot", 4, (0.0, 0.0, -0.30)),
    ]
    return SkeletonSpec(
        name="desk",
        joints=tuple(joints),
        end_effectors=tuple(ees),
        body_links=("head", "l_wrist", "r_wrist", "l_foot", "r_foot"),
        contact_exempt_links=("l_foot", "r_foot", "l_wrist", "r_wrist"),
        keypoints={"head": "head", "left_wrist": "l_wrist", "right_wrist": "r_wrist"},
        upper_joints=("torso_pitch", "l_shoulder_pitch", "r_shoulder_pitch"),
        lower_joints=("l_hip_pitch", "l_knee", "r_hip_pitch", "r_knee"),
        human_joints=("head", "l_wrist", "r_wrist", "l_foot", "r_foot", "head", "l_wrist", "r_wrist"),
    )


def g1_skeleton() -> SkeletonSpec:
    """29 DoF humanoid layout: 6 per leg, 3 waist, 7 per arm."""

    def leg(side: str, sign: float, base: int):
        # base is the index the first joint of this leg will get
        return [
            Joint(f"{side}_hip_pitch", -1, Y, (0.0, sign * 0.12, -0.07), (-2.5, 2.9), kp=150.0, kd=5.0),
            Joint(f"{side}_hip_roll", base, X, (0.0, 0.0, 0.0), (-0.5, 2.9), kp=150.0, kd=5.0),
            Joint(f"{side}_hip_yaw", base + 1, Z, (0.0, 0.0, 0.0), (-2.7, 2.7), kp=150.0, kd=5.0),
            Joint(f"{side}_knee", base + 2, Y, (0.0, 0.0, -0.30), (-0.1, 2.9), kp=200.0, kd=5.0),
            Joint(f"{side}_ankle_pitch", base + 3, Y, (0.0, 0.0, -0.30), (-0.9, 0.5), kp=40.0, kd=2.0),
            Joint(f"{side}_ankle_roll", base + 4, X, (0.0, 0.0, -0.02), (-0.3, 0.3), kp=40.0, kd=2.0),
        ]

    def arm(side: str, sign: float, torso: int, base: int):
        return [
            Joint(f"{side}_shoulder_pitch", torso, Y, (0.0, sign * 0.17, 0.25), (-3.1, 2.7), kp=60.0, kd=2.0),
            Joint(f"{side}_shoulder_roll", base, X, (0.0, 0.0, 0.0), (-1.6, 2.3), kp=60.0, kd=2.0),
            Joint(f"{side}_shoulder_yaw", base + 1, Z, (0.0, 0.0, -0.08), (-2.6, 2.6), kp=60.0, kd=2.0),
            Joint(f"{side}_elbow", base + 2, Y, (0.0, 0.0, -0.15), (-1.0, 2.1), kp=60.0, kd=2.0),
            Joint(f"{side}_wrist_roll", base + 3, X, (0.0, 0.0, -0.12), (-1.9, 1.9), kp=20.0, kd=1.0),
            Joint(f"{side}_wrist_pitch", base + 4, Y, (0.0, 0.0, -0.05), (-1.6, 1.6), kp=20.0, kd=1.0),
            Joint(f"{side}_wrist_yaw", base + 5, Z, (0.0, 0.0, -0.02), (-1.6, 1.6), kp=20.0, kd=1.0),
        ]

    joints = []
    joints += leg("left", 1.0, 0)
    joints += leg("right", -1.0, 6)
    joints += [
        Joint("waist_yaw", -1, Z, (0.0, 0.0, 0.10), (-2.6, 2.6), kp=200.0, kd=5.0),
        Joint("waist_roll", 12, X, (0.0, 0.0, 0.05), (-0.5, 0.5), kp=200.0, kd=5.0),
        Joint("waist_pitch", 13, Y, (0.0, 0.0, 0.05), (-0.5, 0.5), kp=200.0, kd=5.0),
    ]
    joints += arm("left", 1.0, 14, 15)
    joints += arm("right", -1.0, 14, 22)
    assert len(joints) == 29

    ees = [
        EndEffector("head", 14, (0.0, 0.0, 0.35)),
        EndEffector("left_hand", 21, (0.0, 0.0, -0.06)),
        EndEffector("right_hand", 28, (0.0, 0.0, -0.06)),
        EndEffector("left_foot", 5, (0.03, 0.0, -0.04)),
        EndEffector("right_foot", 11, (0.03, 0.0, -0.04)),
    ]
    lower = [j.name for j in joints[:12]]
    upper = [j.name for j in joints[12:]]
    # 24 position-only human joints, mapped onto available link frames
    human = (
        "head", "waist_pitch", "waist_roll", "waist_yaw",
        "left_shoulder_pitch", "left_elbow", "left_wrist_roll", "left_hand",
        "right_shoulder_pitch", "right_elbow", "right_wrist_roll", "right_hand",
        "left_hip_pitch", "left_knee", "left_ankle_pitch", "left_foot",
        "right_hip_pitch", "right_knee", "right_ankle_pitch", "right_foot",
        "left_hip_roll", "right_hip_roll", "left_shoulder_roll", "right_shoulder_roll",
    )
    return SkeletonSpec(
        name="g1",
        joints=tuple(joints),
        end_effectors=tuple(ees),
        body_links=(
            "head", "left_hand", "right_hand", "left_foot", "right_foot",
            "left_elbow", "right_elbow", "left_knee", "right_knee",
            "waist_pitch", "left_shoulder_pitch", "right_shoulder_pitch",
        ),
        contact_exempt_links=(
            "left_ankle_pitch", "left_ankle_roll", "right_ankle_pitch", "right_ankle_roll",
            "left_wrist_roll", "left_wrist_pitch", "left_wrist_yaw",
            "right_wrist_roll", "right_wrist_pitch", "right_wrist_yaw",
            "left_foot", "right_foot", "left_hand", "right_hand",
        ),
        keypoints={"head": "head", "left_wrist": "left_hand", "right_wrist": "right_hand"},
        upper_joints=tuple(upper),
        lower_joints=tuple(lower),
        human_joints=human,
    )


_BUILTIN = {"desk": desk_skeleton, "g1": g1_skeleton}


def get_skeleton(name_or_path: str) -> SkeletonSpec:
    """Resolve a built-in skeleton name or a JSON file path."""
    if name_or_path in _BUILTIN:
        return _BUILTIN[name_or_path]()
    return SkeletonSpec.load(name_or_path)
