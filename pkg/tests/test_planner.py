import numpy as np
import pytest

from motionkit.codec import MotionCodec, clip_features
from motionkit.library import synthetic_library
from motionkit.planner import (
    DURATIONS_S,
    KEYFRAME_COUNT,
    LayerCommand,
    MaskedMlpPredictor,
    NavCommand,
    OraclePredictor,
    PlanRequest,
    PlannerError,
    PlanSegment,
    RetrievalPredictor,
    SkillCommand,
    build_segment_library,
    cosine_schedule,
    inbetween,
    plan,
    select_keyframes,
    train_masked_predictor,
)
from motionkit.synth import sine_walk_clip


@pytest.fixture(scope="module")
def codec(desk):
    return MotionCodec(skeleton=desk)


@pytest.fixture(scope="module")
def seg_library(desk, codec):
    clips = [
        sine_walk_clip(desk, duration=4.0, speed=0.4),
        sine_walk_clip(desk, duration=4.0, speed=0.8, frequency=0.8, name="brisk"),
    ]
    return build_segment_library(clips, codec, segments_per_clip=10, rng=np.random.default_rng(0))


@pytest.fixture(scope="module")
def clip_library(desk):
    return synthetic_library(desk)


class TestCosineSchedule:
    def test_final_iteration_exhausts(self):
        assert cosine_schedule(4, 4, 12) == 12
        assert cosine_schedule(1, 1, 7) == 7

    def test_half_way_fraction(self):
        # 1 - cos(pi/4) of the tokens, rounded up
        assert cosine_schedule(2, 4, 100) == int(np.ceil((1 - np.sqrt(2) / 2) * 100))

    def test_hand_counts_k12_l4(self):
        counts = [cosine_schedule(l, 4, 12) for l in (1, 2, 3, 4)]
        assert counts == [1, 4, 8, 12]

    def test_monotone_exhaustive_grid(self):
        for k in range(1, 65):
            for l_max in range(1, 17):
                prev = 0
                for l in range(1, l_max + 1):
                    c = cosine_schedule(l, l_max, k)
                    assert prev <= c <= k
                    prev = c
                assert prev == k

    def test_out_of_range_iteration(self):
        with pytest.raises(PlannerError):
            cosine_schedule(0, 4, 10)
        with pytest.raises(PlannerError):
            cosine_schedule(5, 4, 10)


def context_of(clip, start=0):
    return tuple(clip.frame(start + i) for i in range(KEYFRAME_COUNT))


class TestInbetween:
    def test_oracle_reconstructs_ground_truth(self, desk, codec, seg_library, walk_clip):
        n = 80  # 1.6 s
        feats = clip_features(walk_clip, 20, n)
        true_tokens = codec.encode(feats)
        oracle = OraclePredictor(seg_library, true_tokens)
        request = PlanRequest(
            context_keyframes=tuple(walk_clip.frame(20 + i) for i in range(4)),
            command=NavCommand(speed=0.4, direction=0.0),
        )
        targets = tuple(walk_clip.frame(20 + n - 4 + i) for i in range(4))
        seg = inbetween(request, targets, oracle, codec)
        assert len(seg.frames) == n
        # interior reconstruction error bounded by the codec round trip
        budget = codec.round_trip_error(feats) + 1e-9
        for i in range(4, n - 4):
            got = seg.frames[i]
            ref = walk_clip.frame(20 + i)
            assert np.max(np.abs(got.joint_pos - ref.joint_pos)) <= budget
            assert np.max(np.abs(got.root_pos - ref.root_pos)) <= budget

    def test_boundary_keyframes_exact(self, desk, codec, seg_library, walk_clip):
        request = PlanRequest(
            context_keyframes=context_of(walk_clip, 0),
            command=NavCommand(speed=0.5, direction=0.0),
        )
        targets = tuple(walk_clip.frame(60 + i) for i in range(4))
        seg = inbetween(request, targets, RetrievalPredictor(seg_library), codec)
        for i in range(4):
            assert np.array_equal(seg.frames[i].joint_pos, request.context_keyframes[i].joint_pos)
            assert np.array_equal(seg.frames[i].root_pos, request.context_keyframes[i].root_pos)
            assert np.array_equal(seg.frames[-4 + i].joint_pos, targets[i].joint_pos)

    def test_single_iteration_finalizes_all(self, desk, codec, seg_library, walk_clip):
        request = PlanRequest(
            context_keyframes=context_of(walk_clip),
            command=NavCommand(speed=0.5, direction=0.0),
        )
        targets = tuple(walk_clip.frame(40 + i) for i in range(4))
        seg = inbetween(request, targets, RetrievalPredictor(seg_library), codec, max_iterations=1)
        assert seg.tokens.shape[0] == len(seg.frames) // 4

    def test_finalized_positions_never_repredicted(self, desk, codec, seg_library, walk_clip):
        class FlippingPredictor(RetrievalPredictor):
            def __init__(self, library):
                super().__init__(library)
                self.calls = 0

            def predict(self, context_feats, target_feats, tokens, finalized):
                logits = super().predict(context_feats, target_feats, tokens, finalized)
                # corrupt logits of already-finalized positions; must not matter
                if self.calls > 0:
                    logits[finalized] = -logits[finalized]
                self.calls += 1
                return logits

        request = PlanRequest(
            context_keyframes=context_of(walk_clip),
            command=NavCommand(speed=0.5, direction=0.0),
        )
        targets = tuple(walk_clip.frame(60 + i) for i in range(4))
        a = inbetween(request, targets, RetrievalPredictor(seg_library), codec, max_iterations=4)
        b = inbetween(request, targets, FlippingPredictor(seg_library), codec, max_iterations=4)
        assert np.array_equal(a.tokens, b.tokens)

    def test_non_finite_logits_rejected(self, desk, codec, seg_library, walk_clip):
        class BadPredictor(RetrievalPredictor):
            def predict(self, *args):
                logits = super().predict(*args)
                logits[0, 0] = np.nan
                return logits

        request = PlanRequest(
            context_keyframes=context_of(walk_clip),
            command=NavCommand(speed=0.5, direction=0.0),
        )
        targets = tuple(walk_clip.frame(60 + i) for i in range(4))
        with pytest.raises(PlannerError):
            inbetween(request, targets, BadPredictor(seg_library), codec)

    def test_durations_confined(self, desk, codec, seg_library, walk_clip, rng):
        pred = RetrievalPredictor(seg_library)
        for start in (0, 10, 25, 50):
            request = PlanRequest(
                context_keyframes=context_of(walk_clip, start),
                command=NavCommand(speed=float(rng.uniform(0, 2)), direction=float(rng.uniform(-3, 3))),
            )
            targets = tuple(walk_clip.frame(start + 40 + i) for i in range(4))
            seg = inbetween(request, targets, pred, codec)
            assert 0.8 - 1e-9 <= seg.duration <= 2.4 + 1e-9
            assert seg.duration in DURATIONS_S

    def test_replanning_context_continuity(self, desk, codec, seg_library, walk_clip):
        pred = RetrievalPredictor(seg_library)
        request = PlanRequest(
            context_keyframes=context_of(walk_clip),
            command=NavCommand(speed=0.4, direction=0.0),
        )
        targets = tuple(walk_clip.frame(60 + i) for i in range(4))
        seg1 = inbetween(request, targets, pred, codec)
        request2 = PlanRequest(context_keyframes=seg1.frames[-4:], command=request.command)
        targets2 = tuple(walk_clip.frame(100 + i) for i in range(4))
        seg2 = inbetween(request2, targets2, pred, codec)
        for i in range(4):
            assert np.array_equal(seg2.frames[i].joint_pos, seg1.frames[-4 + i].joint_pos)
            assert np.array_equal(seg2.frames[i].root_pos, seg1.frames[-4 + i].root_pos)

    def test_interior_continuity_budget(self, desk, codec, seg_library, walk_clip):
        request = PlanRequest(
            context_keyframes=context_of(walk_clip),
            command=NavCommand(speed=0.4, direction=0.0),
        )
        targets = tuple(walk_clip.frame(60 + i) for i in range(4))
        seg = inbetween(request, targets, RetrievalPredictor(seg_library), codec)
        joints = np.stack([f.joint_pos for f in seg.frames])
        deltas = np.abs(np.diff(joints[4:-4], axis=0))
        assert np.max(deltas) < 0.6  # rad per frame, generous desk budget


class TestSelectKeyframes:
    def test_nearest_height(self, desk, clip_library):
        rng = np.random.default_rng(0)
        frames, kf = select_keyframes(clip_library, SkillCommand("squat", height=0.55),
                                      clip_library.entries["idle"].clip.frame(0), rng)
        heights = [f.root_pos[2] for f in frames]
        # squat clip spans 0.3..0.8; the selected window should be near 0.55
        assert abs(np.mean(heights) - 0.55) < 0.05

    def test_deterministic_under_seed(self, desk, clip_library, walk_clip):
        cmd = NavCommand(speed=1.0, direction=0.3)
        a, _ = select_keyframes(clip_library, cmd, walk_clip.frame(0), np.random.default_rng(5))
        b, _ = select_keyframes(clip_library, cmd, walk_clip.frame(0), np.random.default_rng(5))
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.joint_pos, fb.joint_pos)
            assert np.array_equal(fa.root_pos, fb.root_pos)

    def test_unknown_style_errors(self, desk, clip_library, walk_clip):
        from motionkit.library import LibraryError

        with pytest.raises(LibraryError):
            select_keyframes(clip_library, NavCommand(speed=1.0, direction=0.0, style="moonwalk"),
                             walk_clip.frame(0), np.random.default_rng(0))

    def test_nav_alignment_matches_spring_target(self, desk, clip_library, walk_clip):
        cmd = NavCommand(speed=2.0, direction=0.7)
        frames, kf = select_keyframes(clip_library, cmd, walk_clip.frame(10), np.random.default_rng(1))
        assert np.isclose(frames[0].root_pos[0], kf.x, atol=1e-9)
        assert np.isclose(frames[0].root_pos[1], kf.y, atol=1e-9)

    def test_envelope_clamping_warns(self, desk, clip_library, walk_clip):
        with pytest.warns(UserWarning):
            select_keyframes(clip_library, NavCommand(speed=9.0, direction=0.0),
                             walk_clip.frame(0), np.random.default_rng(0))

    def test_layering_passes_upper_through(self, desk, clip_library, walk_clip):
        upper = desk.joint_indices(desk.upper_joints)
        target_upper = np.array([0.5, -0.4, 0.3])
        frames, _ = select_keyframes(clip_library, LayerCommand(upper_joint_pos=target_upper),
                                     walk_clip.frame(0), np.random.default_rng(0))
        for f in frames:
            assert np.allclose(f.joint_pos[upper], target_upper)


def test_full_plan_pipeline(desk, codec, seg_library, clip_library, walk_clip):
    request = PlanRequest(context_keyframes=context_of(walk_clip), command=NavCommand(speed=0.8, direction=0.2))
    seg = plan(request, clip_library, RetrievalPredictor(seg_library), codec, np.random.default_rng(3), command_seq=7)
    assert isinstance(seg, PlanSegment)
    assert seg.command_seq == 7
    assert seg.spring_target is not None


def test_masked_mlp_predictor_trains(desk, codec, seg_library):
    pred = MaskedMlpPredictor(seg_library, hidden=(32, 32), rng=np.random.default_rng(2))
    losses = train_masked_predictor(pred, iterations=200, lr=2e-3, seed=3)
    first = np.mean(losses[:20])
    last = np.mean(losses[-20:])
    assert last < first


def test_plan_segment_invariants(desk, codec, seg_library, walk_clip):
    with pytest.raises(PlannerError):
        PlanSegment(
            frames=tuple(walk_clip.frame(i) for i in range(30)),  # 0.6 s, too short
            tokens=np.zeros((7, 3)),
            context_keyframes=context_of(walk_clip),
            target_keyframes=context_of(walk_clip),
        )


def test_nearest_height_three_candidates(desk):
    # keyframes available at pelvis heights {0.3, 0.5, 0.8}: a 0.55 m
    # request selects the 0.5 window
    from motionkit.library import ClipLibrary
    from motionkit.synth import constant_pose_clip

    lib = ClipLibrary(skeleton=desk)
    for h in (0.3, 0.5, 0.8):
        lib.add(constant_pose_clip(desk, duration=0.5, root_height=h, name=f"squat_{h}"),
                style=f"squat_{h}", skill="squat")
    window = lib.nearest_height_window("squat", 0.55, 4)
    assert all(abs(f.root_pos[2] - 0.5) < 1e-12 for f in window)
