"""Style/skill clip library: ingestion, validation, manifest, retrieval.

A library directory holds clip files plus an optional ``tags.json``
mapping clip names to ``{"style": ..., "skill": ...}``; untagged clips
use their clip name as the style.  Ingestion validates every file
(readable, matching skeleton, 50 Hz, monotone time), computes
pelvis-height metadata, rejects bad files with per-file reasons, and
writes ``manifest.json``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clips import ClipFormatError, MotionClip, load_clip
from .skeletons import SkeletonSpec


class LibraryError(ValueError):
    pass


@dataclass(frozen=True)
class ClipEntry:
    clip: MotionClip
    style: str
    skill: str | None
    pelvis_height_mean: float
    pelvis_height_min: float
    pelvis_height_max: float

    @classmethod
    def tagged(cls, clip: MotionClip, style: str, skill: str | None = None) -> "ClipEntry":
        z = clip.root_pos[:, 2]
        return cls(
            clip=clip, style=style, skill=skill,
            pelvis_height_mean=float(np.mean(z)),
            pelvis_height_min=float(np.min(z)),
            pelvis_height_max=float(np.max(z)),
        )


@dataclass
class ClipLibrary:
    skeleton: SkeletonSpec
    entries: dict[str, ClipEntry] = field(default_factory=dict)

    def add(self, clip: MotionClip, style: str | None = None, skill: str | None = None) -> None:
        if clip.name in self.entries:
            raise LibraryError(f"duplicate clip name {clip.name!r}")
        if clip.skeleton.to_dict() != self.skeleton.to_dict():
            raise LibraryError(f"clip {clip.name!r} uses a different skeleton")
        self.entries[clip.name] = ClipEntry.tagged(clip, style or clip.name, skill)

    def __len__(self) -> int:
        return len(self.entries)

    def styles(self) -> set[str]:
        return {e.style for e in self.entries.values()}

    def clips_of_style(self, style: str) -> list[MotionClip]:
        out = [e.clip for e in self.entries.values() if e.style == style]
        if not out:
            raise LibraryError(f"unknown style {style!r} (have {sorted(self.styles())})")
        return out

    def clips_of_skill(self, skill: str) -> list[MotionClip]:
        out = [e.clip for e in self.entries.values() if e.skill == skill]
        if not out:
            raise LibraryError(f"unknown skill {skill!r}")
        return out

    def all_clips(self) -> list[MotionClip]:
        return [e.clip for e in self.entries.values()]

    def random_window(self, style: str, n_frames: int, rng: np.random.Generator):
        """A random n-frame window from a random clip of the style."""
        clips = self.clips_of_style(style)
        clip = clips[int(rng.integers(0, len(clips)))]
        if len(clip) < n_frames:
            raise LibraryError(f"clip {clip.name!r} shorter than {n_frames} frames")
        start = int(rng.integers(0, len(clip) - n_frames + 1))
        return [clip.frame(start + i) for i in range(n_frames)]

    def nearest_height_window(self, skill: str, height: float, n_frames: int):
        """The n-frame window whose mean pelvis height is closest to the request."""
        best, best_d = None, np.inf
        for clip in self.clips_of_skill(skill):
            z = clip.root_pos[:, 2]
            if len(clip) < n_frames:
                continue
            means = np.convolve(z, np.ones(n_frames) / n_frames, mode="valid")
            idx = int(np.argmin(np.abs(means - height)))
            d = abs(float(means[idx]) - height)
            if d < best_d:
                best_d = d
                best = [clip.frame(idx + i) for i in range(n_frames)]
        if best is None:
            raise LibraryError(f"skill {skill!r} has no window of {n_frames} frames")
        return best


@dataclass(frozen=True)
class IngestReport:
    accepted: list[str]
    rejected: dict[str, str]  # file -> reason
    manifest_path: str | None


CLIP_SUFFIXES = (".mclp", ".mclpt")


def ingest_dataset(
    directory,
    skeleton: SkeletonSpec,
    allow_resample: bool = False,
    write_manifest: bool = True,
) -> tuple[ClipLibrary, IngestReport]:
    """Build a library from a directory of clip files.

    Invalid files are rejected with reasons; duplicate clip names are an
    error.  ``tags.json`` (optional) supplies style/skill tags.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise LibraryError(f"not a directory: {directory}")
    tags = {}
    tags_path = directory / "tags.json"
    if tags_path.exists():
        tags = json.loads(tags_path.read_text(encoding="utf-8"))

    library = ClipLibrary(skeleton=skeleton)
    accepted: list[str] = []
    rejected: dict[str, str] = {}
    files = sorted(p for p in directory.iterdir() if p.suffix in CLIP_SUFFIXES)
    for path in files:
        try:
            clip = load_clip(path, skeleton=skeleton, allow_resample=allow_resample)
        except ClipFormatError as e:
            rejected[path.name] = str(e)
            continue
        tag = tags.get(clip.name, {})
        library.add(clip, style=tag.get("style"), skill=tag.get("skill"))
        accepted.append(path.name)

    manifest_path = None
    if write_manifest:
        manifest = {
            "skeleton": skeleton.name,
            "clips": [
                {
                    "name": name,
                    "style": e.style,
                    "skill": e.skill,
                    "frames": len(e.clip),
                    "fps": e.clip.fps,
                    "duration_s": e.clip.duration,
                    "pelvis_height_mean": e.pelvis_height_mean,
                    "pelvis_height_min": e.pelvis_height_min,
                    "pelvis_height_max": e.pelvis_height_max,
                }
                for name, e in sorted(library.entries.items())
            ],
            "rejected": rejected,
        }
        manifest_path = str(directory / "manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2)
    return library, IngestReport(accepted=accepted, rejected=rejected, manifest_path=manifest_path)


def synthetic_library(skeleton: SkeletonSpec, seed: int = 0) -> ClipLibrary:
    """Built-in library of synthesized style and skill clips, used by the
    steering server when no dataset directory is supplied."""
    from .synth import constant_pose_clip, sine_walk_clip, squat_clip, turning_clip

    lib = ClipLibrary(skeleton=skeleton)
    lib.add(sine_walk_clip(skeleton, duration=4.0, speed=0.6, name="walk"), style="walk")
    lib.add(sine_walk_clip(skeleton, duration=4.0, speed=1.6, frequency=0.9, name="run"), style="run")
    lib.add(turning_clip(skeleton, duration=4.0, name="turn"), style="turn")
    lib.add(
        sine_walk_clip(skeleton, duration=4.0, speed=0.25, root_height=0.35, name="crawl"),
        style="crawl", skill="crawl",
    )
    lib.add(squat_clip(skeleton, duration=4.0, name="squat"), style="squat", skill="squat")
    lib.add(squat_clip(skeleton, duration=4.0, low=0.4, name="kneel"), style="kneel", skill="kneel")
    lib.add(constant_pose_clip(skeleton, duration=2.0, name="idle"), style="idle")
    lib.add(punch_clip(skeleton, duration=3.0, name="box"), style="box")
    return lib


def punch_clip(skeleton: SkeletonSpec, duration: float = 3.0, fps: float = 50.0,
               name: str = "box") -> "MotionClip":
    """Stationary fast alternating arm swings for the boxing style."""
    from .synth import trajectory_clip

    j = skeleton.joint_count
    arm = np.zeros(j, dtype=bool)
    for idx, joint in enumerate(skeleton.joints):
        if "shoulder" in joint.name or "elbow" in joint.name:
            arm[idx] = True
    omega = 2.0 * np.pi * 1.5
    phases = np.where(np.arange(j) % 2 == 0, 0.0, np.pi)

    def joint_fn(t):
        q = np.where(arm, 0.8 * np.sin(omega * t + phases), 0.0)
        qd = np.where(arm, 0.8 * omega * np.cos(omega * t + phases), 0.0)
        return q, qd

    def root_fn(t):
        return np.array([0.0, 0.0, 0.75]), 0.0, np.zeros(3), 0.0

    return trajectory_clip(skeleton, duration, joint_fn, root_fn, fps=fps, name=name)
