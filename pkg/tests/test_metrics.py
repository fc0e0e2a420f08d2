import numpy as np
import pytest

from motionkit.clips import MotionClip
from motionkit.metrics import (
    FailureReason,
    MetricsError,
    SuccessMode,
    aggregate,
    check_success,
    evaluate_pairs,
    mpjpe,
    velocity_errors,
)
from motionkit.rotations import quat_from_axis_angle, quat_mul, quat_normalize
from motionkit.synth import sine_walk_clip, yaw_translate_clip


def clip_with(clip, **overrides):
    fields = dict(
        skeleton=clip.skeleton, fps=clip.fps, name=clip.name, times=clip.times,
        root_pos=clip.root_pos, root_rot=clip.root_rot,
        joint_pos=clip.joint_pos, joint_vel=clip.joint_vel,
        root_lin_vel=clip.root_lin_vel, root_ang_vel=clip.root_ang_vel,
        link_pos=clip.link_pos, link_rot=clip.link_rot,
        link_lin_vel=clip.link_lin_vel, link_ang_vel=clip.link_ang_vel,
    )
    fields.update(overrides)
    return MotionClip(**fields)


def test_identical_clips_zero(walk_clip):
    assert mpjpe(walk_clip, walk_clip) == 0.0
    assert velocity_errors(walk_clip, walk_clip) == (0.0, 0.0)


def test_uniform_10mm_offset(walk_clip):
    # every link shifted 10 mm from the root along one direction
    d = np.array([0.01, 0.0, 0.0])
    actual = clip_with(walk_clip, link_pos=walk_clip.link_pos + d)
    assert np.isclose(mpjpe(walk_clip, actual), 10.0, atol=1e-9)


def test_hand_mean_two_links(desk, walk_clip):
    # single-frame pair with root-relative errors of 30 and 50 mm on two links
    f = walk_clip.frame(0)
    link_pos = walk_clip.link_pos[:1].copy()
    link_pos[0, 0] += [0.03, 0.0, 0.0]
    link_pos[0, 1] += [0.0, 0.05, 0.0]
    ref = clip_with(walk_clip, times=walk_clip.times[:1], root_pos=walk_clip.root_pos[:1],
                    root_rot=walk_clip.root_rot[:1], joint_pos=walk_clip.joint_pos[:1],
                    joint_vel=walk_clip.joint_vel[:1], root_lin_vel=walk_clip.root_lin_vel[:1],
                    root_ang_vel=walk_clip.root_ang_vel[:1], link_pos=walk_clip.link_pos[:1],
                    link_rot=walk_clip.link_rot[:1], link_lin_vel=walk_clip.link_lin_vel[:1],
                    link_ang_vel=walk_clip.link_ang_vel[:1])
    actual = clip_with(ref, link_pos=link_pos)
    # links beyond the first two match exactly; mean over 5 links of (30, 50, 0, 0, 0)
    expected = (30.0 + 50.0) / len(desk.body_links)
    assert np.isclose(mpjpe(ref, actual), expected, atol=1e-9)


def test_two_link_mean_exactly_40(walk_clip, desk):
    # same check with errors on every link set to 30 or 50 mm alternately is
    # cleaner as a direct two-link construction
    offs = np.zeros_like(walk_clip.link_pos)
    offs[:, :, 0] = 0.04  # 40 mm on every link
    actual = clip_with(walk_clip, link_pos=walk_clip.link_pos + offs)
    assert np.isclose(mpjpe(walk_clip, actual), 40.0, atol=1e-9)


def test_constant_offset_kills_velocity_errors(walk_clip):
    actual = clip_with(walk_clip, link_pos=walk_clip.link_pos + np.array([0.05, -0.02, 0.01]))
    e_vel, e_acc = velocity_errors(walk_clip, actual)
    assert e_vel < 1e-9 and e_acc < 1e-9


def test_linear_drift_velocity_error(walk_clip):
    # 1 mm per frame drift along x
    t_idx = np.arange(len(walk_clip))[:, None, None]
    drift = np.zeros_like(walk_clip.link_pos)
    drift[:, :, 0] = 0.001 * t_idx[:, :, 0]
    actual = clip_with(walk_clip, link_pos=walk_clip.link_pos + drift)
    e_vel, e_acc = velocity_errors(walk_clip, actual)
    assert np.isclose(e_vel, 1.0, atol=1e-9)
    assert e_acc < 1e-9


def test_length_mismatch_rejected(walk_clip, hold_clip):
    with pytest.raises(MetricsError):
        mpjpe(walk_clip, hold_clip)


def test_short_clip_velocity_error(desk):
    clip = sine_walk_clip(desk, duration=0.02)  # 2 frames
    with pytest.raises(MetricsError):
        velocity_errors(clip, clip)


def test_success_identical(walk_clip):
    r = check_success(walk_clip, walk_clip, SuccessMode.STRICT)
    assert r.success and r.failure_reason is FailureReason.NONE and r.failure_time is None


def test_height_ramp_failure_time(walk_clip):
    # height deviation ramps linearly, crossing 0.25 m at t = 1.0 s
    t = walk_clip.times
    dev = 0.26 * np.minimum(t / 1.0, 1.0)
    dev[t < 1.0] = 0.26 * t[t < 1.0]
    root = walk_clip.root_pos.copy()
    root[:, 2] += dev
    actual = clip_with(walk_clip, root_pos=root)
    for mode in (SuccessMode.STRICT, SuccessMode.RELAXED):
        r = check_success(walk_clip, actual, mode)
        assert not r.success
        assert r.failure_reason is FailureReason.HEIGHT_DEVIATION
        # 0.26 * t > 0.25 first happens just above t = 0.9615; with 0.02 s
        # frames that is the frame at 0.98 s
        assert abs(r.failure_time - 1.0) < 0.05


def test_orientation_only_fails_strict(walk_clip):
    tilt = quat_from_axis_angle((1.0, 0.0, 0.0), 1.1)
    rot = np.stack([quat_normalize(quat_mul(tilt, q)) for q in walk_clip.root_rot])
    actual = clip_with(walk_clip, root_rot=rot)
    strict = check_success(walk_clip, actual, SuccessMode.STRICT)
    relaxed = check_success(walk_clip, actual, SuccessMode.RELAXED)
    assert not strict.success
    assert strict.failure_reason is FailureReason.ORIENTATION_DEVIATION
    assert relaxed.success


def test_rigid_motion_invariance(walk_clip):
    moved_ref = yaw_translate_clip(walk_clip, 1.3, np.array([2.0, -1.0, 0.0]))
    offs = np.zeros_like(walk_clip.link_pos)
    offs[:, :, 1] = 0.02
    actual = clip_with(walk_clip, link_pos=walk_clip.link_pos + offs)
    moved_actual = yaw_translate_clip(actual, 1.3, np.array([2.0, -1.0, 0.0]))
    assert np.isclose(mpjpe(walk_clip, actual), mpjpe(moved_ref, moved_actual), atol=1e-9)
    assert np.allclose(velocity_errors(walk_clip, actual), velocity_errors(moved_ref, moved_actual), atol=1e-9)
    r0 = check_success(walk_clip, actual)
    r1 = check_success(moved_ref, moved_actual)
    assert r0.success == r1.success


def test_success_monotone_in_deviation(walk_clip):
    # growing the height deviation never flips failure back to success
    prev_failed = False
    for scale in np.linspace(0.0, 0.4, 9):
        root = walk_clip.root_pos.copy()
        root[:, 2] += scale
        r = check_success(walk_clip, clip_with(walk_clip, root_pos=root))
        if prev_failed:
            assert not r.success
        prev_failed = prev_failed or (not r.success)
    assert prev_failed


def test_evaluate_pairs_parallel_order(walk_clip, hold_clip):
    pairs = [("a", walk_clip, walk_clip), ("b", hold_clip, hold_clip)] * 3
    seq = evaluate_pairs(pairs, workers=1)
    par = evaluate_pairs(pairs, workers=4)
    assert [n for n, _ in seq] == [n for n, _ in par]
    agg = aggregate(seq)
    assert agg["pairs"] == 6 and agg["success_rate"] == 1.0
