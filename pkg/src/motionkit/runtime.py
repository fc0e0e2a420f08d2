"""Closed-loop tracking runtime on the deterministic scheduler.

Task graph (priorities order same-instant commits):

* streamer, 500 Hz: owns the plant; applies the latest action bundle,
  fires scheduled pushes, publishes the plant state and an actuation
  marker carrying the command sequence the action reflects,
* input, 100 Hz: publishes the goal (command window plus root
  reference) sliced from the reference clip, or injected steering,
* policy, 50 Hz: consumes the newest goal and plant state, emits the
  action bundle, records the realized frame,
* planner, 10 Hz: only present in steering mode (see server module).

Every mailbox is latest-data-wins, so a stalled stage never blocks the
rest; provenance (which input sequence an actuation reflects) threads
through mailbox metadata and is measured by :func:`measure_latency`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .clips import MotionClip, PoseFrame
from .commands import CommandKind, Proprioception, RobotCommand, slice_command
from .domain_rand import DrSample, PushEvent
from .metrics import HEIGHT_LIMIT_M, ORIENTATION_LIMIT_RAD, SuccessMode, TrackingReport, check_success
from .plant import Plant, PlantConfig, RootRef
from .rotations import geodesic_angle, quat_conj, quat_from_yaw, quat_rotate, yaw_of_quat
from .scheduler import TICKS_PER_SECOND, SimLoop, TaskSpec, Trace, hz_to_period_ticks
from .skeletons import SkeletonSpec

STREAMER_HZ = 500
INPUT_HZ = 100
POLICY_HZ = 50
PLANNER_HZ = 10

# same-instant commit order: streamer first, planner last
PRIO_STREAMER, PRIO_INPUT, PRIO_POLICY, PRIO_PLANNER = 0, 1, 2, 3


class RuntimeError_(RuntimeError):
    pass


@dataclass(frozen=True)
class GoalUpdate:
    """Input-task output: goal window plus the root reference to follow."""

    command: RobotCommand
    root_ref: RootRef
    source_seq: int  # steering seq or input tick index


@dataclass(frozen=True)
class ActionBundle:
    targets: np.ndarray  # (J,) PD joint targets
    root_ref: RootRef | None
    reflects: int  # source_seq of the goal this action was computed from


@dataclass(frozen=True)
class PlantSnapshot:
    time: float
    q: np.ndarray
    qd: np.ndarray
    root_pos: np.ndarray
    root_yaw: float
    root_vel: np.ndarray
    yaw_rate: float

    def proprioception(self, prev_action, gravity: float = 9.81) -> Proprioception:
        rot = quat_from_yaw(self.root_yaw)
        g_world = np.array([0.0, 0.0, -gravity])
        return Proprioception(
            joint_pos=self.q, joint_vel=self.qd,
            root_ang_vel=quat_rotate(quat_conj(rot), np.array([0.0, 0.0, self.yaw_rate])),
            gravity_in_root=quat_rotate(quat_conj(rot), g_world),
            prev_action=np.asarray(prev_action, dtype=float),
            gravity=gravity,
        )

    def pose_frame(self, skeleton: SkeletonSpec) -> PoseFrame:
        body = skeleton.body_link_indices
        rot = quat_from_yaw(self.root_yaw)
        w = np.array([0.0, 0.0, self.yaw_rate])
        lp, lr, lv, lw = skeleton.fk_velocity(self.root_pos, rot, self.q, self.root_vel, w, self.qd)
        return PoseFrame(
            time=self.time, root_pos=self.root_pos, root_rot=rot,
            joint_pos=self.q, joint_vel=self.qd,
            root_lin_vel=self.root_vel, root_ang_vel=w,
            link_pos=lp[body], link_rot=lr[body], link_lin_vel=lv[body], link_ang_vel=lw[body],
        )


@dataclass(frozen=True)
class RuntimeSnapshot:
    """One scheduler instant's consistent view: plant state, newest goal
    and plan, and the sequence numbers actually consumed."""

    time_s: float
    plant: PlantSnapshot | None
    goal: object | None
    plan: object | None
    consumed_seqs: dict


def snapshot_of(ctx, goal_mailbox: str = "command", plan_mailbox: str = "plan_box") -> RuntimeSnapshot:
    """Bundle a task context's mailbox reads into one snapshot value."""
    plant, plant_seq = ctx.read("plant_state")
    goal, goal_seq = ctx.read(goal_mailbox)
    plan, plan_seq = ctx.read(plan_mailbox)
    return RuntimeSnapshot(
        time_s=ctx.time_s,
        plant=plant,
        goal=goal,
        plan=plan,
        consumed_seqs={"plant_state": plant_seq, goal_mailbox: goal_seq, plan_mailbox: plan_seq},
    )


class TrackingPolicy:
    """command (GoalUpdate) + proprioception -> ActionBundle."""

    def act(self, goal: GoalUpdate, proprio: Proprioception) -> ActionBundle:
        raise NotImplementedError


class KinematicFollower(TrackingPolicy):
    """PD targets taken directly from the goal window's current frame."""

    def act(self, goal: GoalUpdate, proprio: Proprioception) -> ActionBundle:
        return ActionBundle(
            targets=goal.command.joint_pos[0].copy(),
            root_ref=goal.root_ref,
            reflects=goal.source_seq,
        )


class ConstantPosePolicy(TrackingPolicy):
    """Adversarial baseline: ignores the goal, holds one pose and root."""

    def __init__(self, targets: np.ndarray, root_ref: RootRef):
        self.targets = np.asarray(targets, dtype=float)
        self.root_ref = root_ref

    def act(self, goal: GoalUpdate, proprio: Proprioception) -> ActionBundle:
        return ActionBundle(targets=self.targets, root_ref=self.root_ref, reflects=goal.source_seq)


class TokenPolicy(TrackingPolicy):
    """Goal window through the universal token space to joint targets."""

    def __init__(self, params):
        self.params = params

    def act(self, goal: GoalUpdate, proprio: Proprioception) -> ActionBundle:
        from .tokens import decode_control, encode

        token = encode(goal.command, "E_r", self.params)
        mean = decode_control(token, proprio, self.params)
        if not np.all(np.isfinite(mean)):
            raise RuntimeError_("policy produced non-finite action")
        return ActionBundle(targets=mean, root_ref=goal.root_ref, reflects=goal.source_seq)


def root_ref_of(frame: PoseFrame) -> RootRef:
    return RootRef(
        pos=frame.root_pos.copy(),
        yaw=float(yaw_of_quat(frame.root_rot)),
        lin_vel=frame.root_lin_vel.copy(),
        yaw_rate=float(frame.root_ang_vel[2]),
    )


@dataclass
class TrackingRun:
    realized: MotionClip | None
    reference: MotionClip | None
    report: TrackingReport | None
    trace: Trace
    tick_counts: dict
    aborted: str | None = None


class _StopFlag:
    def __init__(self):
        self.stop = False
        self.reason = None


def build_tracking_loop(
    clip: MotionClip,
    policy: TrackingPolicy,
    dr: DrSample | None = None,
    pushes: list[PushEvent] | None = None,
    threads: int = 1,
    plant_cfg: PlantConfig | None = None,
    early_stop: bool = True,
    record_trace: bool = True,
):
    """Assemble the input/policy/streamer graph over a reference clip."""
    skeleton = clip.skeleton
    loop = SimLoop(threads=threads, record_trace=record_trace)
    plant = Plant(skeleton, 1.0 / STREAMER_HZ, plant_cfg, dr)
    plant.reset_to_frame(clip.frame(0))
    pushes = sorted(pushes or [], key=lambda e: e.start)
    pending_pushes = list(pushes)
    stop = _StopFlag()
    realized: list[PoseFrame] = []
    prev_action = {"value": clip.frame(0).joint_pos.copy()}

    def input_task(ctx):
        t = ctx.time_s
        command = slice_command(clip, t, CommandKind.ROBOT)
        ref = clip.frame_at(t)
        ctx.publish("command", GoalUpdate(
            command=command, root_ref=root_ref_of(ref), source_seq=int(round(t * INPUT_HZ)),
        ), source_seq=int(round(t * INPUT_HZ)))

    def policy_task(ctx):
        goal, goal_seq = ctx.read("command")
        state, _ = ctx.read("plant_state")
        if goal is None or state is None:
            return
        proprio = state.proprioception(prev_action["value"])
        # provenance uses the mailbox sequence actually consumed
        bundle = replace(policy.act(goal, proprio), reflects=goal_seq)
        prev_action["value"] = bundle.targets
        ctx.publish("action", bundle, reflects=bundle.reflects)
        frame = state.pose_frame(skeleton)
        realized.append(frame)
        if early_stop:
            ref = clip.frame_at(frame.time)
            if abs(ref.root_pos[2] - frame.root_pos[2]) > HEIGHT_LIMIT_M or \
                    geodesic_angle(ref.root_rot, frame.root_rot) > ORIENTATION_LIMIT_RAD:
                stop.stop = True
                stop.reason = "strict-failure"

    def streamer_task(ctx):
        t = ctx.time_s
        while pending_pushes and pending_pushes[0].start <= t:
            ev = pending_pushes.pop(0)
            plant.apply_push(ev.lin_vel, ev.ang_vel)
        bundle, seq = ctx.read("action")
        if bundle is None:
            plant.step(None, None)
            reflects = -1
        else:
            plant.step(bundle.targets, bundle.root_ref)
            reflects = bundle.reflects
        ctx.publish("plant_state", PlantSnapshot(
            time=plant.time, q=plant.q.copy(), qd=plant.qd.copy(),
            root_pos=plant.root_pos.copy(), root_yaw=plant.root_yaw,
            root_vel=plant.root_vel.copy(), yaw_rate=plant.yaw_rate,
        ))
        ctx.publish("actuation", reflects, reflects=reflects)

    loop.add_task(TaskSpec("streamer", hz_to_period_ticks(STREAMER_HZ), PRIO_STREAMER), streamer_task)
    loop.add_task(TaskSpec("input", hz_to_period_ticks(INPUT_HZ), PRIO_INPUT), input_task)
    loop.add_task(TaskSpec("policy", hz_to_period_ticks(POLICY_HZ), PRIO_POLICY), policy_task)
    return loop, realized, stop


def track_clip(
    clip: MotionClip,
    policy: TrackingPolicy,
    dr: DrSample | None = None,
    pushes: list[PushEvent] | None = None,
    mode: SuccessMode = SuccessMode.STRICT,
    threads: int = 1,
    plant_cfg: PlantConfig | None = None,
    early_stop: bool = False,
    record_trace: bool = True,
) -> TrackingRun:
    """Run the closed loop over a whole clip and score the result."""
    loop, realized, stop = build_tracking_loop(
        clip, policy, dr, pushes, threads, plant_cfg, early_stop, record_trace,
    )
    loop.stop_flag = stop
    trace = loop.run(clip.duration)
    if not realized:
        return TrackingRun(None, None, None, trace, loop.tick_counts, aborted="no frames realized")
    realized_clip = MotionClip.from_frames(clip.skeleton, clip.fps, realized, name=f"{clip.name}.realized")
    ref_frames = [clip.frame_at(f.time) for f in realized]
    # reference frames held past the end carry zero velocity by contract
    ref_clip = MotionClip.from_frames(clip.skeleton, clip.fps, ref_frames, name=f"{clip.name}.ref")
    report = check_success(ref_clip, realized_clip, mode)
    return TrackingRun(realized_clip, ref_clip, report, trace, loop.tick_counts, aborted=stop.reason)


@dataclass(frozen=True)
class LatencyStats:
    mean_ms: float
    p95_ms: float
    count: int


def measure_latency(trace: Trace, source: str = "command", sink: str = "actuation") -> LatencyStats:
    """Time from a source publish to the first sink publish reflecting it.

    The sink's ``reflects`` metadata must carry the newest source
    sequence incorporated in the published value.  Simultaneous publish
    and consume do not match (publishes commit after the instant), so a
    command landing on a consumer's tick waits one full period.
    """
    sources = sorted((e.seq, e.tick) for e in trace.events if e.kind == "publish" and e.mailbox == source)
    sinks = sorted((e.tick, int(e.meta.get("reflects", -1))) for e in trace.events
                   if e.kind == "publish" and e.mailbox == sink)
    for (_, ra), (_, rb) in zip(sinks, sinks[1:]):
        if rb < ra:
            raise RuntimeError_("sink reflections are not monotone; latency matching needs latest-data-wins provenance")
    latencies = []
    j = 0
    for seq, t_pub in sources:  # seq and tick both ascend, so j never rewinds
        while j < len(sinks) and not (sinks[j][0] > t_pub and sinks[j][1] >= seq):
            j += 1
        if j == len(sinks):
            break
        latencies.append((sinks[j][0] - t_pub) / TICKS_PER_SECOND * 1000.0)
    if not latencies:
        raise RuntimeError_("no matched source/sink pairs in trace")
    arr = np.array(latencies)
    return LatencyStats(mean_ms=float(arr.mean()), p95_ms=float(np.percentile(arr, 95)), count=len(arr))
