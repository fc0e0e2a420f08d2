"""Motion imitation metrics and success criteria.

Position accuracy is root-relative MPJPE in millimeters.  Physical
fidelity uses per-frame finite differences of link positions, reported
in mm/frame and mm/frame^2.  Success has two modes:

* strict: fails at the first frame where the root height deviates by
  more than 0.25 m or the root orientation differs by more than 1 rad
  (geodesic angle),
* relaxed: height criterion only.

All metrics are invariant to a rigid yaw-plus-translation applied to
both clips.
"""

from __future__ import annotations

import csv
import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clips import MotionClip
from .rotations import geodesic_angle

HEIGHT_LIMIT_M = 0.25
ORIENTATION_LIMIT_RAD = 1.0
MM = 1000.0


class MetricsError(ValueError):
    pass


class SuccessMode(enum.Enum):
    STRICT = "strict"
    RELAXED = "relaxed"


class FailureReason(enum.Enum):
    NONE = "none"
    HEIGHT_DEVIATION = "height_deviation"
    ORIENTATION_DEVIATION = "orientation_deviation"


@dataclass(frozen=True)
class TrackingReport:
    success: bool
    failure_time: float | None
    failure_reason: FailureReason
    mpjpe_mm: float
    e_vel_mm_per_frame: float
    e_acc_mm_per_frame2: float
    mpjpe_series: np.ndarray = field(repr=False, default=None)
    height_dev_series: np.ndarray = field(repr=False, default=None)
    orientation_err_series: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.mpjpe_mm < 0:
            raise ValueError("mpjpe must be nonnegative")
        if self.success != (self.failure_time is None):
            raise ValueError("failure_time must be set exactly when success is False")


def _check_aligned(ref: MotionClip, actual: MotionClip):
    if len(ref) != len(actual):
        raise MetricsError(f"frame count mismatch: ref {len(ref)} vs actual {len(actual)}")
    if ref.skeleton.body_links != actual.skeleton.body_links:
        raise MetricsError("clips track different body link sets")


def _rel_link_pos(clip: MotionClip) -> np.ndarray:
    return clip.link_pos - clip.root_pos[:, None, :]


def mpjpe(ref: MotionClip, actual: MotionClip) -> float:
    """Root-relative mean per-joint position error, in mm."""
    _check_aligned(ref, actual)
    return float(np.mean(mpjpe_series(ref, actual)))


def mpjpe_series(ref: MotionClip, actual: MotionClip) -> np.ndarray:
    _check_aligned(ref, actual)
    err = np.linalg.norm(_rel_link_pos(ref) - _rel_link_pos(actual), axis=-1)  # (T, L)
    return np.mean(err, axis=-1) * MM


def velocity_errors(ref: MotionClip, actual: MotionClip) -> tuple[float, float]:
    """(e_vel, e_acc): mean norms of per-frame velocity and acceleration
    differences of link positions, in mm/frame and mm/frame^2."""
    _check_aligned(ref, actual)
    if len(ref) < 3:
        raise MetricsError("velocity errors need at least 3 frames")
    v_ref = np.diff(ref.link_pos, axis=0)
    v_act = np.diff(actual.link_pos, axis=0)
    a_ref = np.diff(v_ref, axis=0)
    a_act = np.diff(v_act, axis=0)
    e_vel = float(np.mean(np.linalg.norm(v_ref - v_act, axis=-1))) * MM
    e_acc = float(np.mean(np.linalg.norm(a_ref - a_act, axis=-1))) * MM
    return e_vel, e_acc


def check_success(ref: MotionClip, actual: MotionClip, mode: SuccessMode = SuccessMode.STRICT) -> TrackingReport:
    _check_aligned(ref, actual)
    height_dev = np.abs(ref.root_pos[:, 2] - actual.root_pos[:, 2])
    ori_err = geodesic_angle(ref.root_rot, actual.root_rot)

    bad_height = height_dev > HEIGHT_LIMIT_M
    bad_ori = ori_err > ORIENTATION_LIMIT_RAD
    bad = bad_height | bad_ori if mode is SuccessMode.STRICT else bad_height

    success = not bool(np.any(bad))
    failure_time = None
    reason = FailureReason.NONE
    if not success:
        i = int(np.argmax(bad))
        failure_time = float(ref.times[i])
        reason = FailureReason.HEIGHT_DEVIATION if bad_height[i] else FailureReason.ORIENTATION_DEVIATION

    e_vel, e_acc = velocity_errors(ref, actual) if len(ref) >= 3 else (0.0, 0.0)
    series = mpjpe_series(ref, actual)
    return TrackingReport(
        success=success,
        failure_time=failure_time,
        failure_reason=reason,
        mpjpe_mm=float(np.mean(series)),
        e_vel_mm_per_frame=e_vel,
        e_acc_mm_per_frame2=e_acc,
        mpjpe_series=series,
        height_dev_series=height_dev,
        orientation_err_series=ori_err,
    )


def evaluate_pairs(pairs, mode: SuccessMode = SuccessMode.STRICT, workers: int = 1):
    """Evaluate (name, ref, actual) clip pairs, optionally across threads.

    Results keep the input order regardless of worker count.
    """
    pairs = list(pairs)

    def one(item):
        name, ref, actual = item
        return name, check_success(ref, actual, mode)

    if workers <= 1:
        results = [one(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, pairs))
    return results


def aggregate(results) -> dict:
    reports = [r for _, r in results]
    if not reports:
        return {"pairs": 0, "success_rate": float("nan")}
    return {
        "pairs": len(reports),
        "success_rate": float(np.mean([r.success for r in reports])),
        "mpjpe_mm": float(np.mean([r.mpjpe_mm for r in reports])),
        "e_vel_mm_per_frame": float(np.mean([r.e_vel_mm_per_frame for r in reports])),
        "e_acc_mm_per_frame2": float(np.mean([r.e_acc_mm_per_frame2 for r in reports])),
    }


def write_report_csv(path, results) -> None:
    agg = aggregate(results)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["name", "success", "failure_time", "failure_reason", "mpjpe_mm", "e_vel_mm_per_frame", "e_acc_mm_per_frame2"])
        for name, r in results:
            w.writerow([
                name, int(r.success), "" if r.failure_time is None else f"{r.failure_time:.6f}",
                r.failure_reason.value, f"{r.mpjpe_mm:.6f}", f"{r.e_vel_mm_per_frame:.6f}", f"{r.e_acc_mm_per_frame2:.6f}",
            ])
        w.writerow([
            "AGGREGATE", f"{agg['success_rate']:.4f}", "", "",
            f"{agg['mpjpe_mm']:.6f}", f"{agg['e_vel_mm_per_frame']:.6f}", f"{agg['e_acc_mm_per_frame2']:.6f}",
        ])
