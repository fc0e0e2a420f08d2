"""Latent motion codec for the kinematic planner.

Frames are mapped to feature rows of [root position, root rotation 6D,
joint angles, pelvis-relative link positions] and encoded at a fixed
downsampling rate of 4: one token per 4-frame block, the block mean.
Decoding is the pseudo-inverse of block averaging (repeat), optionally
followed by linear interpolation between block centers for smooth
output.  The round trip is exact on inputs that are constant within
each block.

Tokens live in continuous feature space; a finite vocabulary for masked
prediction is obtained by hashing tokens through a fixed random
projection and FSQ rounding (see :meth:`MotionCodec.token_key`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clips import MotionClip, PoseFrame
from .fsq import FsqSpec, fsq_codes
from .rotations import geodesic_angle, quat_conj, quat_mul, quat_to_6d, rot6d_to_quat
from .skeletons import SkeletonSpec

DOWNSAMPLE_RATE = 4


class CodecError(ValueError):
    pass


def feature_dim(skeleton: SkeletonSpec) -> int:
    return 9 + skeleton.joint_count + 3 * len(skeleton.body_links)


def frame_features(frame: PoseFrame) -> np.ndarray:
    """One feature row: root pos, root 6D rotation, joints, pelvis-relative links."""
    rel = (frame.link_pos - frame.root_pos).reshape(-1)
    return np.concatenate([frame.root_pos, frame.root_rot6d, frame.joint_pos, rel])


def clip_features(clip: MotionClip, start: int = 0, count: int | None = None) -> np.ndarray:
    count = len(clip) - start if count is None else count
    rel = (clip.link_pos - clip.root_pos[:, None, :]).reshape(len(clip), -1)
    d6 = np.stack([quat_to_6d(q) for q in clip.root_rot])
    feats = np.concatenate([clip.root_pos, d6, clip.joint_pos, rel], axis=1)
    return feats[start:start + count]


def frames_from_features(features: np.ndarray, skeleton: SkeletonSpec, fps: float,
                         t0: float = 0.0) -> list[PoseFrame]:
    """Rebuild frames: root pose and joints from the features, link data by
    forward kinematics, velocities by finite differences."""
    features = np.asarray(features, dtype=float)
    n = features.shape[0]
    j = skeleton.joint_count
    body = skeleton.body_link_indices
    root_pos = features[:, 0:3]
    root_rot = np.stack([rot6d_to_quat(r) for r in features[:, 3:9]])
    joint_pos = features[:, 9:9 + j]

    dt = 1.0 / fps
    joint_vel = np.gradient(joint_pos, dt, axis=0) if n > 1 else np.zeros_like(joint_pos)
    root_lin_vel = np.gradient(root_pos, dt, axis=0) if n > 1 else np.zeros_like(root_pos)

    frames = []
    for i in range(n):
        if n > 1:
            i2 = min(i + 1, n - 1)
            i1 = max(i - 1, 0)
            rel_q = quat_mul(quat_conj(root_rot[i1]), root_rot[i2])
            angle = float(geodesic_angle(root_rot[i1], root_rot[i2]))
            axis = rel_q[1:]
            norm = np.linalg.norm(axis)
            w = (axis / norm * angle / ((i2 - i1) * dt)) if norm > 1e-12 else np.zeros(3)
        else:
            w = np.zeros(3)
        lp, lr, lv, lw = skeleton.fk_velocity(
            root_pos[i], root_rot[i], joint_pos[i], root_lin_vel[i], w, joint_vel[i],
        )
        frames.append(PoseFrame(
            time=t0 + i * dt,
            root_pos=root_pos[i], root_rot=root_rot[i],
            joint_pos=joint_pos[i], joint_vel=joint_vel[i],
            root_lin_vel=root_lin_vel[i], root_ang_vel=w,
            link_pos=lp[body], link_rot=lr[body], link_lin_vel=lv[body], link_ang_vel=lw[body],
        ))
    return frames


@dataclass(frozen=True)
class MotionCodec:
    """Strided-average encoder with pseudo-inverse decoding and FSQ keys."""

    skeleton: SkeletonSpec
    key_spec: FsqSpec = FsqSpec(dims=6, levels=9)
    key_seed: int = 0
    smooth_decode: bool = False

    @property
    def rate(self) -> int:
        return DOWNSAMPLE_RATE

    def encode(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        t = features.shape[0]
        if t % self.rate != 0:
            raise CodecError(f"frame count {t} is not a multiple of {self.rate}")
        return features.reshape(t // self.rate, self.rate, -1).mean(axis=1)

    def decode(self, tokens: np.ndarray) -> np.ndarray:
        tokens = np.asarray(tokens, dtype=float)
        out = np.repeat(tokens, self.rate, axis=0)
        if self.smooth_decode and tokens.shape[0] > 1:
            # linear interpolation between block centers, ends held
            t_out = np.arange(out.shape[0], dtype=float)
            centers = np.arange(tokens.shape[0]) * self.rate + (self.rate - 1) / 2.0
            for col in range(tokens.shape[1]):
                out[:, col] = np.interp(t_out, centers, tokens[:, col])
        return out

    def _projection(self, dim: int) -> np.ndarray:
        rng = np.random.default_rng(self.key_seed)
        p = rng.normal(size=(dim, self.key_spec.dims))
        return p / np.linalg.norm(p, axis=0, keepdims=True)

    def token_key(self, token: np.ndarray) -> tuple[int, ...]:
        """Discrete vocabulary key: FSQ codes of a fixed random projection."""
        token = np.asarray(token, dtype=float)
        proj = self._projection(token.shape[-1])
        bounded = self.key_spec.half * np.tanh(token @ proj)
        return tuple(int(c) for c in fsq_codes(bounded))

    def round_trip_error(self, features: np.ndarray) -> float:
        return float(np.max(np.abs(self.decode(self.encode(features)) - features)))
