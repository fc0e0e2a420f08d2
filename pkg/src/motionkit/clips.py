"""Motion clips: timed pose frames over a skeleton, plus clip file I/O.

A clip stores stacked per-frame arrays (fast numpy paths) and exposes
:class:`PoseFrame` views for per-frame work.  Link arrays cover the
skeleton's tracked body link set, in ``body_links`` order.

Two on-disk formats are supported (see docs/formats.md):

* ``MCLP`` v1: binary, little-endian f64 frame records,
* ``MCLPT`` v1: line-delimited JSON for human inspection.

Save then load round-trips bit exactly in both.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .rotations import quat_normalize, quat_to_6d
from .skeletons import SkeletonSpec

NOMINAL_FPS = 50.0

_MAGIC = b"MCLP"
_TEXT_MAGIC = "MCLPT"
_VERSION = 1


class ClipFormatError(ValueError):
    """Base class for clip file problems."""


class CorruptHeaderError(ClipFormatError):
    pass


class VersionMismatchError(ClipFormatError):
    pass


class TruncatedFileError(ClipFormatError):
    pass


class SkeletonMismatchError(ClipFormatError):
    pass


class FpsMismatchError(ClipFormatError):
    pass


@dataclass(frozen=True)
class PoseFrame:
    """One kinematic frame. All quantities world frame, SI units."""

    time: float
    root_pos: np.ndarray  # (3,)
    root_rot: np.ndarray  # (4,) unit quaternion, scalar first
    joint_pos: np.ndarray  # (J,)
    joint_vel: np.ndarray  # (J,)
    root_lin_vel: np.ndarray  # (3,)
    root_ang_vel: np.ndarray  # (3,)
    link_pos: np.ndarray  # (L, 3)
    link_rot: np.ndarray  # (L, 4)
    link_lin_vel: np.ndarray  # (L, 3)
    link_ang_vel: np.ndarray  # (L, 3)

    def __post_init__(self):
        norm = np.linalg.norm(self.root_rot)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"root_rot not unit norm: |q|={norm!r}")
        n_links = self.link_pos.shape[0]
        for name in ("link_rot", "link_lin_vel", "link_ang_vel"):
            if getattr(self, name).shape[0] != n_links:
                raise ValueError(f"{name} length != link count")

    @property
    def root_rot6d(self) -> np.ndarray:
        return quat_to_6d(self.root_rot)

    def held_at(self, time: float) -> "PoseFrame":
        """Copy at a new timestamp with all velocities zeroed (clamp-and-hold)."""
        return PoseFrame(
            time=time,
            root_pos=self.root_pos,
            root_rot=self.root_rot,
            joint_pos=self.joint_pos,
            joint_vel=np.zeros_like(self.joint_vel),
            root_lin_vel=np.zeros(3),
            root_ang_vel=np.zeros(3),
            link_pos=self.link_pos,
            link_rot=self.link_rot,
            link_lin_vel=np.zeros_like(self.link_lin_vel),
            link_ang_vel=np.zeros_like(self.link_ang_vel),
        )


_FRAME_FIELDS = (
    "root_pos", "root_rot", "joint_pos", "joint_vel", "root_lin_vel",
    "root_ang_vel", "link_pos", "link_rot", "link_lin_vel", "link_ang_vel",
)


@dataclass(frozen=True)
class MotionClip:
    """A 50 Hz kinematic trajectory (other rates only via explicit resample)."""

    skeleton: SkeletonSpec
    fps: float
    name: str
    times: np.ndarray  # (T,)
    root_pos: np.ndarray  # (T, 3)
    root_rot: np.ndarray  # (T, 4)
    joint_pos: np.ndarray  # (T, J)
    joint_vel: np.ndarray  # (T, J)
    root_lin_vel: np.ndarray  # (T, 3)
    root_ang_vel: np.ndarray  # (T, 3)
    link_pos: np.ndarray  # (T, L, 3)
    link_rot: np.ndarray  # (T, L, 4)
    link_lin_vel: np.ndarray  # (T, L, 3)
    link_ang_vel: np.ndarray  # (T, L, 3)

    def __post_init__(self):
        t = self.times
        if t.ndim != 1 or len(t) == 0:
            raise ValueError("clip has no frames")
        dt = np.diff(t)
        if len(dt) and (np.any(dt <= 0) or np.max(np.abs(dt - 1.0 / self.fps)) > 1e-9):
            raise ValueError("frame times not strictly ordered at 1/fps spacing")
        norms = np.linalg.norm(self.root_rot, axis=-1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("non-unit root quaternion in clip")
        j = self.skeleton.joint_count
        l = len(self.skeleton.body_links)
        expect = {
            "root_pos": (len(t), 3), "root_rot": (len(t), 4),
            "joint_pos": (len(t), j), "joint_vel": (len(t), j),
            "root_lin_vel": (len(t), 3), "root_ang_vel": (len(t), 3),
            "link_pos": (len(t), l, 3), "link_rot": (len(t), l, 4),
            "link_lin_vel": (len(t), l, 3), "link_ang_vel": (len(t), l, 3),
        }
        for name, shape in expect.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
        for name in _FRAME_FIELDS + ("times",):
            getattr(self, name).flags.writeable = False

    def __len__(self) -> int:
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def frame(self, i: int) -> PoseFrame:
        i = int(i)
        return PoseFrame(
            time=float(self.times[i]),
            **{name: getattr(self, name)[i] for name in _FRAME_FIELDS},
        )

    def frame_at(self, t: float) -> PoseFrame:
        """Nearest frame at time t; past the end, the final frame held with zero velocities."""
        idx = int(round((t - self.times[0]) * self.fps))
        if idx < 0:
            idx = 0
        if idx >= len(self):
            return self.frame(len(self) - 1).held_at(t)
        return self.frame(idx)

    def frames(self):
        for i in range(len(self)):
            yield self.frame(i)

    @classmethod
    def from_frames(cls, skeleton: SkeletonSpec, fps: float, frames, name: str = "clip") -> "MotionClip":
        frames = list(frames)
        if not frames:
            raise ValueError("no frames")
        stack = {name_: np.array([getattr(f, name_) for f in frames], dtype=float) for name_ in _FRAME_FIELDS}
        return cls(
            skeleton=skeleton,
            fps=fps,
            name=name,
            times=np.array([f.time for f in frames], dtype=float),
            **stack,
        )

    def with_name(self, name: str) -> "MotionClip":
        return MotionClip(
            skeleton=self.skeleton, fps=self.fps, name=name, times=self.times,
            **{f: getattr(self, f) for f in _FRAME_FIELDS},
        )


def _frame_record_layout(skeleton: SkeletonSpec):
    j = skeleton.joint_count
    l = len(skeleton.body_links)
    # (field, element count) in declared record order; time leads every record
    return [
        ("time", 1), ("root_pos", 3), ("root_rot", 4), ("joint_pos", j), ("joint_vel", j),
        ("root_lin_vel", 3), ("root_ang_vel", 3), ("link_pos", 3 * l), ("link_rot", 4 * l),
        ("link_lin_vel", 3 * l), ("link_ang_vel", 3 * l),
    ]


def save_clip(clip: MotionClip, path, text: bool = False) -> None:
    if text:
        _save_text(clip, path)
    else:
        _save_binary(clip, path)


def load_clip(path, skeleton: SkeletonSpec | None = None, allow_resample: bool = False) -> MotionClip:
    """Load a clip, verifying format, version, and (optionally) skeleton.

    A file whose fps differs from 50 Hz raises :class:`FpsMismatchError`
    unless ``allow_resample`` is set, in which case it is resampled.
    """
    with open(path, "rb") as f:
        head = f.read(4)
    if head == _MAGIC:
        clip = _load_binary(path)
    else:
        clip = _load_text(path)
    if skeleton is not None and clip.skeleton.to_dict() != skeleton.to_dict():
        raise SkeletonMismatchError(f"{path}: embedded skeleton {clip.skeleton.name!r} does not match {skeleton.name!r}")
    if abs(clip.fps - NOMINAL_FPS) > 1e-9:
        if not allow_resample:
            raise FpsMismatchError(f"{path}: fps {clip.fps} != {NOMINAL_FPS}; pass allow_resample=True")
        clip = resample_clip(clip, NOMINAL_FPS)
    return clip


def _save_binary(clip: MotionClip, path) -> None:
    skel_json = json.dumps(clip.skeleton.to_dict(), sort_keys=True).encode("utf-8")
    name_bytes = clip.name.encode("utf-8")
    layout = _frame_record_layout(clip.skeleton)
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        f.write(struct.pack("<d", clip.fps))
        f.write(struct.pack("<I", len(clip)))
        f.write(struct.pack("<I", len(name_bytes)))
        f.write(name_bytes)
        f.write(struct.pack("<I", len(skel_json)))
        f.write(skel_json)
        for i in range(len(clip)):
            rec = [np.array([clip.times[i]])]
            rec += [np.asarray(getattr(clip, field_)[i], dtype=float).reshape(-1) for field_, _ in layout[1:]]
            f.write(np.concatenate(rec).astype("<f8").tobytes())


def _load_binary(path) -> MotionClip:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[:4] != _MAGIC:
        raise CorruptHeaderError(f"{path}: bad magic")
    off = 4

    def take(n):
        nonlocal off
        if off + n > len(data):
            raise TruncatedFileError(f"{path}: truncated at byte {off}")
        chunk = data[off:off + n]
        off += n
        return chunk

    try:
        version = struct.unpack("<I", take(4))[0]
        if version != _VERSION:
            raise VersionMismatchError(f"{path}: version {version}, expected {_VERSION}")
        fps = struct.unpack("<d", take(8))[0]
        n_frames = struct.unpack("<I", take(4))[0]
        name = take(struct.unpack("<I", take(4))[0]).decode("utf-8")
        skel_raw = take(struct.unpack("<I", take(4))[0])
    except (struct.error, TruncatedFileError) as e:
        # running out of bytes inside the header block is a corrupt header,
        # not a truncated frame section
        raise CorruptHeaderError(f"{path}: {e}") from e
    try:
        skeleton = SkeletonSpec.from_dict(json.loads(skel_raw))
    except (json.JSONDecodeError, KeyError) as e:
        raise CorruptHeaderError(f"{path}: bad skeleton block: {e}") from e

    layout = _frame_record_layout(skeleton)
    rec_len = sum(n for _, n in layout)
    raw = take(n_frames * rec_len * 8)
    if off != len(data):
        raise TruncatedFileError(f"{path}: {len(data) - off} trailing bytes")
    flat = np.frombuffer(raw, dtype="<f8").reshape(n_frames, rec_len) if n_frames else np.zeros((0, rec_len))
    if n_frames == 0:
        raise CorruptHeaderError(f"{path}: zero frames")
    cols = {}
    at = 0
    for field_, n in layout:
        cols[field_] = flat[:, at:at + n].copy()
        at += n
    j = skeleton.joint_count
    l = len(skeleton.body_links)
    return MotionClip(
        skeleton=skeleton, fps=fps, name=name,
        times=cols["time"][:, 0],
        root_pos=cols["root_pos"], root_rot=cols["root_rot"],
        joint_pos=cols["joint_pos"].reshape(n_frames, j), joint_vel=cols["joint_vel"].reshape(n_frames, j),
        root_lin_vel=cols["root_lin_vel"], root_ang_vel=cols["root_ang_vel"],
        link_pos=cols["link_pos"].reshape(n_frames, l, 3), link_rot=cols["link_rot"].reshape(n_frames, l, 4),
        link_lin_vel=cols["link_lin_vel"].reshape(n_frames, l, 3),
        link_ang_vel=cols["link_ang_vel"].reshape(n_frames, l, 3),
    )


def _save_text(clip: MotionClip, path) -> None:
    header = {
        "magic": _TEXT_MAGIC,
        "version": _VERSION,
        "fps": clip.fps,
        "name": clip.name,
        "frame_count": len(clip),
        "skeleton": clip.skeleton.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for i in range(len(clip)):
            row = {"time": float(clip.times[i])}
            for field_ in _FRAME_FIELDS:
                row[field_] = np.asarray(getattr(clip, field_)[i]).reshape(-1).tolist()
            f.write(json.dumps(row) + "\n")


def _load_text(path) -> MotionClip:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise CorruptHeaderError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise CorruptHeaderError(f"{path}: unreadable header: {e}") from e
    if header.get("magic") != _TEXT_MAGIC:
        raise CorruptHeaderError(f"{path}: bad magic {header.get('magic')!r}")
    if header.get("version") != _VERSION:
        raise VersionMismatchError(f"{path}: version {header.get('version')}, expected {_VERSION}")
    skeleton = SkeletonSpec.from_dict(header["skeleton"])
    n_frames = int(header["frame_count"])
    if len(lines) - 1 != n_frames:
        raise TruncatedFileError(f"{path}: header says {n_frames} frames, file has {len(lines) - 1}")
    j = skeleton.joint_count
    l = len(skeleton.body_links)
    shapes = {
        "root_pos": (3,), "root_rot": (4,), "joint_pos": (j,), "joint_vel": (j,),
        "root_lin_vel": (3,), "root_ang_vel": (3,), "link_pos": (l, 3), "link_rot": (l, 4),
        "link_lin_vel": (l, 3), "link_ang_vel": (l, 3),
    }
    frames = []
    for ln in lines[1:]:
        row = json.loads(ln)
        frames.append(PoseFrame(
            time=float(row["time"]),
            **{f: np.array(row[f], dtype=float).reshape(shapes[f]) for f in _FRAME_FIELDS},
        ))
    return MotionClip.from_frames(skeleton, float(header["fps"]), frames, name=header["name"])


def _slerp(q0, q1, w):
    dot = float(np.dot(q0, q1))
    if dot < 0:
        q1 = -q1
        dot = -dot
    if dot > 1.0 - 1e-12:
        out = (1 - w) * q0 + w * q1
    else:
        theta = np.arccos(np.clip(dot, -1.0, 1.0))
        out = (np.sin((1 - w) * theta) * q0 + np.sin(w * theta) * q1) / np.sin(theta)
    return quat_normalize(out)


def resample_clip(clip: MotionClip, fps: float) -> MotionClip:
    """Linear resample (slerp for quaternions) onto a new frame rate."""
    n_out = max(2, int(round(clip.duration * fps)) + 1)
    new_times = clip.times[0] + np.arange(n_out) / fps
    new_times = new_times[new_times <= clip.end_time + 1e-9]
    src = (new_times - clip.times[0]) * clip.fps
    idx0 = np.clip(np.floor(src).astype(int), 0, len(clip) - 1)
    idx1 = np.clip(idx0 + 1, 0, len(clip) - 1)
    w = np.clip(src - idx0, 0.0, 1.0)

    def lin(arr):
        shape = (len(new_times),) + arr.shape[1:]
        wb = w.reshape((-1,) + (1,) * (arr.ndim - 1))
        return (arr[idx0] * (1 - wb) + arr[idx1] * wb).reshape(shape)

    root_rot = np.stack([_slerp(clip.root_rot[a], clip.root_rot[b], wi) for a, b, wi in zip(idx0, idx1, w)])
    link_rot = np.stack([
        np.stack([_slerp(clip.link_rot[a, k], clip.link_rot[b, k], wi) for k in range(clip.link_rot.shape[1])])
        for a, b, wi in zip(idx0, idx1, w)
    ])
    return MotionClip(
        skeleton=clip.skeleton, fps=fps, name=clip.name, times=new_times,
        root_pos=lin(clip.root_pos), root_rot=root_rot,
        joint_pos=lin(clip.joint_pos), joint_vel=lin(clip.joint_vel),
        root_lin_vel=lin(clip.root_lin_vel), root_ang_vel=lin(clip.root_ang_vel),
        link_pos=lin(clip.link_pos), link_rot=link_rot,
        link_lin_vel=lin(clip.link_lin_vel), link_ang_vel=lin(clip.link_ang_vel),
    )
