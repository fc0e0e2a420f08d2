import numpy as np
import pytest

from motionkit.commands import (
    CommandError,
    CommandKind,
    HumanCommand,
    HybridCommand,
    Proprioception,
    RobotCommand,
    command_flat_dim,
    lower_joint_indices,
    lower_link_indices,
    slice_command,
)
from motionkit.synth import sine_walk_clip, yaw_translate_clip


def test_robot_window_timing(walk_clip):
    c = slice_command(walk_clip, 0.0, CommandKind.ROBOT)
    assert np.allclose(c.times, np.arange(10) * 0.1)
    # samples at 0.0, 0.1, ... 0.9 s of a 50 Hz clip: every 5th frame
    for k in range(10):
        assert np.allclose(c.joint_pos[k], walk_clip.joint_pos[5 * k])


def test_human_window_timing(walk_clip):
    c = slice_command(walk_clip, 0.0, CommandKind.HUMAN)
    assert np.allclose(c.times, np.arange(10) * 0.02)
    assert c.joint_pos.shape == (10, len(walk_clip.skeleton.human_joints), 3)


def test_hold_at_clip_end(walk_clip):
    c = slice_command(walk_clip, walk_clip.end_time, CommandKind.ROBOT)
    for k in range(10):
        assert np.array_equal(c.joint_pos[k], c.joint_pos[0])
        assert np.array_equal(c.link_pos[k], c.link_pos[0])
    # frames past the end hold the final pose with zero velocities
    assert np.all(c.joint_vel[1:] == 0)


def test_yaw_invariance(walk_clip):
    base_r = slice_command(walk_clip, 1.0, CommandKind.ROBOT)
    base_h = slice_command(walk_clip, 1.0, CommandKind.HUMAN)
    base_m = slice_command(walk_clip, 1.0, CommandKind.HYBRID)
    for yaw in (0.7, -2.1, 3.0):
        rotated = yaw_translate_clip(walk_clip, yaw, np.zeros(3))
        for base, kind in ((base_r, CommandKind.ROBOT), (base_h, CommandKind.HUMAN), (base_m, CommandKind.HYBRID)):
            other = slice_command(rotated, 1.0, kind)
            assert np.max(np.abs(other.flatten() - base.flatten())) < 1e-9, kind


def test_translation_invariance(walk_clip):
    base = slice_command(walk_clip, 0.5, CommandKind.ROBOT)
    moved = yaw_translate_clip(walk_clip, 0.0, np.array([5.0, -3.0, 0.0]))
    other = slice_command(moved, 0.5, CommandKind.ROBOT)
    assert np.max(np.abs(other.flatten() - base.flatten())) < 1e-9


def test_flat_dims_match(walk_clip, desk):
    for kind in CommandKind:
        c = slice_command(walk_clip, 0.3, kind)
        assert c.flatten().shape == (command_flat_dim(kind, desk),)


def test_robot_from_flat_round_trip(walk_clip, desk):
    c = slice_command(walk_clip, 0.2, CommandKind.ROBOT)
    back = RobotCommand.from_flat(c.flatten(), desk)
    assert np.allclose(back.joint_pos, c.joint_pos)
    assert np.allclose(back.link_pos, c.link_pos)


def test_lower_body_partition(desk):
    jl = lower_joint_indices(desk)
    assert [desk.joint_names[i] for i in jl] == list(desk.lower_joints)
    ll = lower_link_indices(desk)
    names = [desk.body_links[i] for i in ll]
    assert set(names) == {"l_foot", "r_foot"}


def test_hybrid_keypoints_present(walk_clip):
    c = slice_command(walk_clip, 0.0, CommandKind.HYBRID)
    assert c.keypoint_pos.shape == (3, 3)
    assert c.keypoint_rot6d.shape == (3, 6)


def test_proprio_gravity_check(desk):
    j = desk.joint_count
    with pytest.raises(ValueError):
        Proprioception(
            joint_pos=np.zeros(j), joint_vel=np.zeros(j), root_ang_vel=np.zeros(3),
            gravity_in_root=np.array([0.0, 0.0, -9.0]), prev_action=np.zeros(j),
        )
    p = Proprioception(
        joint_pos=np.zeros(j), joint_vel=np.zeros(j), root_ang_vel=np.zeros(3),
        gravity_in_root=np.array([0.0, 0.0, -9.81]), prev_action=np.zeros(j),
    )
    assert p.flatten().shape == (Proprioception.flat_dim(desk),)
