"""Kinematic planner: cosine schedule, in-betweening, replanning chains.

Run: python demos/demo_planner.py
"""

import numpy as np

from motionkit.codec import MotionCodec
from motionkit.library import synthetic_library
from motionkit.planner import (
    NavCommand,
    PlanRequest,
    RetrievalPredictor,
    SkillCommand,
    build_segment_library,
    cosine_schedule,
    plan,
)
from motionkit.skeletons import desk_skeleton


def main():
    print("cosine finalization schedule, 12 tokens over 4 iterations:")
    for l in range(1, 5):
        done = cosine_schedule(l, 4, 12)
        bar = "#" * done + "." * (12 - done)
        print(f"  iteration {l}: [{bar}] {done:2d}/12 finalized")

    desk = desk_skeleton()
    library = synthetic_library(desk)
    codec = MotionCodec(skeleton=desk)
    rng = np.random.default_rng(0)
    seg_lib = build_segment_library(library.all_clips(), codec, segments_per_clip=8, rng=rng)
    predictor = RetrievalPredictor(seg_lib)
    print(f"\nsegment library: {len(seg_lib.entries)} segments, vocab {seg_lib.vocab.shape[0]} tokens")

    context_clip = library.entries["idle"].clip
    context = tuple(context_clip.frame(i) for i in range(4))

    print("\nwalking plan at 1.2 m/s heading 30 degrees:")
    request = PlanRequest(context_keyframes=context, command=NavCommand(speed=1.2, direction=np.deg2rad(30)))
    seg = plan(request, library, predictor, codec, rng)
    path = seg.root_path()
    print(f"  duration {seg.duration:.1f} s, {len(seg.frames)} frames, {seg.tokens.shape[0]} tokens")
    print(f"  spring keyframe: x={seg.spring_target.x:.3f} y={seg.spring_target.y:.3f} "
          f"heading={np.rad2deg(seg.spring_target.heading):.1f} deg")
    print(f"  root travels {np.linalg.norm(path[-1, :2] - path[0, :2]):.3f} m")

    print("\nautoregressive replanning, 3 chained segments:")
    for i in range(3):
        request = PlanRequest(context_keyframes=seg.frames[-4:], command=request.command)
        seg = plan(request, library, predictor, codec, rng)
        tail = seg.root_path()[-1]
        print(f"  segment {i + 2}: ends at ({tail[0]:+.2f}, {tail[1]:+.2f}), duration {seg.duration:.1f} s")

    print("\nsquat to 0.45 m pelvis height:")
    request = PlanRequest(context_keyframes=context, command=SkillCommand("squat", height=0.45))
    seg = plan(request, library, predictor, codec, rng)
    heights = seg.root_path()[:, 2]
    print(f"  pelvis height sweeps {heights[0]:.2f} -> {heights.min():.2f} m over {seg.duration:.1f} s")


if __name__ == "__main__":
    main()
