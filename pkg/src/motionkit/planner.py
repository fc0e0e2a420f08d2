"""Generative kinematic in-betweening planner.

A plan is a short motion segment (0.8 to 2.4 s at 50 Hz) whose first
four frames are the context keyframes (recent robot history) and whose
last four are target keyframes chosen from a style/skill library and
root-aligned to the spring-model keyframe.  The interior is generated
in token space: all positions start masked, and each iteration the
predictor's most confident positions are finalized, following a cosine
schedule until every token is committed.  Finalized tokens are never
re-predicted.

Two reference predictors ship: a retrieval predictor (nearest library
segment, one-hot logits) and a small trainable masked-prediction MLP.
Both speak the same interface, so a stronger backbone can drop in.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .clips import MotionClip, PoseFrame
from .codec import MotionCodec, clip_features, frame_features, frames_from_features
from .rotations import quat_from_yaw, quat_mul, quat_rotate, yaw_of_quat
from .spring import RootKeyframe, RootState, SpringParams, spring_targets, target_from_velocity

FPS = 50.0
KEYFRAME_COUNT = 4
DURATIONS_S = (0.8, 1.2, 1.6, 2.0, 2.4)
DEFAULT_MAX_ITERATIONS = 8

VELOCITY_RANGE = (0.0, 6.0)
CRAWL_VELOCITY_RANGE = (0.0, 0.5)
HEIGHT_RANGE = (0.3, 0.8)


class PlannerError(ValueError):
    pass


def clamp_with_warning(value: float, lo: float, hi: float, label: str) -> float:
    if value < lo or value > hi:
        warnings.warn(f"{label} {value} outside [{lo}, {hi}], clamped", stacklevel=3)
        return float(np.clip(value, lo, hi))
    return float(value)


@dataclass(frozen=True)
class NavCommand:
    """Velocity/direction/style navigation."""

    speed: float  # m/s, 0..6
    direction: float  # rad, world frame
    style: str = "walk"

    def clamped(self) -> "NavCommand":
        return NavCommand(
            speed=clamp_with_warning(self.speed, *VELOCITY_RANGE, label="velocity"),
            direction=float(self.direction),
            style=self.style,
        )


@dataclass(frozen=True)
class SkillCommand:
    """Postural skill at a desired pelvis height (squat, kneel) or a crawl
    at a desired speed."""

    skill: str
    height: float | None = None  # m, 0.3..0.8
    speed: float | None = None  # m/s, crawl only
    direction: float = 0.0

    def clamped(self) -> "SkillCommand":
        h = None if self.height is None else clamp_with_warning(self.height, *HEIGHT_RANGE, label="height")
        s = None if self.speed is None else clamp_with_warning(self.speed, *CRAWL_VELOCITY_RANGE, label="crawl velocity")
        return SkillCommand(skill=self.skill, height=h, speed=s, direction=self.direction)


@dataclass(frozen=True)
class LayerCommand:
    """Upper-body joint targets passed through; lower body is generated."""

    upper_joint_pos: np.ndarray  # (len(skeleton.upper_joints),)


PlanCommand = NavCommand | SkillCommand | LayerCommand


@dataclass(frozen=True)
class PlanRequest:
    context_keyframes: tuple[PoseFrame, ...]  # last 4 realized frames
    command: PlanCommand

    def __post_init__(self):
        if len(self.context_keyframes) != KEYFRAME_COUNT:
            raise PlannerError(f"need exactly {KEYFRAME_COUNT} context keyframes")


@dataclass(frozen=True)
class PlanSegment:
    frames: tuple[PoseFrame, ...]  # 50 Hz, includes both keyframe bands
    tokens: np.ndarray  # (T/4, F)
    context_keyframes: tuple[PoseFrame, ...]
    target_keyframes: tuple[PoseFrame, ...]
    command_seq: int = -1  # newest steer command reflected, wire bookkeeping
    spring_target: RootKeyframe | None = None

    def __post_init__(self):
        n = len(self.frames)
        if n % 4 != 0:
            raise PlannerError("frame count must be a multiple of 4")
        if not (0.8 - 1e-9 <= self.duration <= 2.4 + 1e-9):
            raise PlannerError(f"duration {self.duration} outside [0.8, 2.4] s")
        if self.tokens.shape[0] != n // 4:
            raise PlannerError("token count must be frame count / 4")

    @property
    def duration(self) -> float:
        return len(self.frames) / FPS

    def frame_at(self, offset_s: float) -> PoseFrame:
        i = int(np.clip(round(offset_s * FPS), 0, len(self.frames) - 1))
        return self.frames[i]

    def root_path(self) -> np.ndarray:
        return np.stack([f.root_pos for f in self.frames])


def cosine_schedule(iteration: int, max_iterations: int, total_tokens: int) -> int:
    """Cumulative number of tokens finalized after the given iteration."""
    if not (1 <= iteration <= max_iterations):
        raise PlannerError("iteration must be in [1, max_iterations]")
    fraction = 1.0 - np.cos(0.5 * np.pi * (iteration / max_iterations))
    return min(total_tokens, int(np.ceil(fraction * total_tokens)))


class TokenPredictor:
    """Interface: duration proposal plus per-position vocabulary logits."""

    vocab: np.ndarray  # (V, F) continuous token vectors

    def propose_duration(self, context_feats: np.ndarray, target_feats: np.ndarray) -> float:
        raise NotImplementedError

    def predict(self, context_feats, target_feats, tokens, finalized) -> np.ndarray:
        """Logits (K, V); positions flagged finalized are ignored by the caller."""
        raise NotImplementedError


def snap_duration(seconds: float) -> float:
    return float(min(DURATIONS_S, key=lambda d: abs(d - seconds)))


def heuristic_duration(context_feats: np.ndarray, target_feats: np.ndarray,
                       reference_speed: float = 1.2) -> float:
    """Keyframe-distance heuristic: travel time at a reference speed."""
    gap = float(np.linalg.norm(target_feats[-1, :2] - context_feats[-1, :2]))
    return snap_duration(gap / max(reference_speed, 1e-6))


@dataclass
class SegmentLibrary:
    """Token-space segment memory backing the retrieval predictor."""

    codec: MotionCodec
    entries: list = field(default_factory=list)  # dicts: duration, tokens, context, target
    vocab_keys: dict = field(default_factory=dict)  # key tuple -> vocab index
    vocab_vectors: list = field(default_factory=list)

    def add_segment(self, features: np.ndarray):
        if features.shape[0] % self.codec.rate != 0:
            raise PlannerError("segment length must be a multiple of the codec rate")
        tokens = self.codec.encode(features)
        ids = [self._intern(tok) for tok in tokens]
        self.entries.append({
            "duration": features.shape[0] / FPS,
            "tokens": tokens,
            "token_ids": np.array(ids, dtype=int),
            "context": features[:KEYFRAME_COUNT],
            "target": features[-KEYFRAME_COUNT:],
        })

    def _intern(self, token: np.ndarray) -> int:
        key = self.codec.token_key(token)
        if key not in self.vocab_keys:
            self.vocab_keys[key] = len(self.vocab_vectors)
            self.vocab_vectors.append(np.asarray(token, dtype=float))
        return self.vocab_keys[key]

    def exact_id(self, token: np.ndarray) -> int:
        """Vocabulary id whose vector equals the token exactly, appending a
        new entry on any difference (oracle paths bypass key collisions)."""
        token = np.asarray(token, dtype=float)
        key = self.codec.token_key(token)
        existing = self.vocab_keys.get(key)
        if existing is not None and np.array_equal(self.vocab_vectors[existing], token):
            return existing
        self.vocab_vectors.append(token.copy())
        return len(self.vocab_vectors) - 1

    @property
    def vocab(self) -> np.ndarray:
        if not self.vocab_vectors:
            raise PlannerError("empty segment library")
        return np.stack(self.vocab_vectors)


def build_segment_library(
    clips: list[MotionClip],
    codec: MotionCodec,
    segments_per_clip: int = 8,
    rng: np.random.Generator | None = None,
    rotation_augment: bool = True,
) -> SegmentLibrary:
    """Sample variable-length segments from clips; random yaw augmentation
    widens initial-orientation coverage."""
    from .synth import yaw_translate_clip

    rng = rng or np.random.default_rng(0)
    lib = SegmentLibrary(codec=codec)
    for clip in clips:
        for _ in range(segments_per_clip):
            dur = float(rng.choice(DURATIONS_S))
            n = int(round(dur * FPS))
            if len(clip) < n:
                continue
            start = int(rng.integers(0, len(clip) - n + 1))
            source = clip
            if rotation_augment:
                source = yaw_translate_clip(clip, float(rng.uniform(-np.pi, np.pi)), np.zeros(3))
            lib.add_segment(clip_features(source, start, n))
    if not lib.entries:
        raise PlannerError("no segments fit the requested durations")
    return lib


class RetrievalPredictor(TokenPredictor):
    """Nearest library segment in keyframe+token space, one-hot logits."""

    def __init__(self, library: SegmentLibrary, sharpness: float = 20.0):
        if not library.entries:
            raise PlannerError("empty segment library")
        self.library = library
        self.sharpness = sharpness

    @property
    def vocab(self) -> np.ndarray:
        return self.library.vocab

    def propose_duration(self, context_feats, target_feats) -> float:
        best = self._nearest(context_feats, target_feats, None, None)
        return float(best["duration"])

    def _nearest(self, context_feats, target_feats, tokens, finalized):
        best, best_d = None, np.inf
        for e in self.library.entries:
            if tokens is not None and e["tokens"].shape[0] != tokens.shape[0]:
                continue
            d = float(np.sum((e["context"] - context_feats) ** 2))
            d += float(np.sum((e["target"] - target_feats) ** 2))
            if tokens is not None and finalized is not None and np.any(finalized):
                d += float(np.sum((e["tokens"][finalized] - tokens[finalized]) ** 2))
            if d < best_d:
                best, best_d = e, d
        if best is None:
            raise PlannerError("library holds no segment of the requested length")
        return best

    def predict(self, context_feats, target_feats, tokens, finalized) -> np.ndarray:
        entry = self._nearest(context_feats, target_feats, tokens, finalized)
        k = tokens.shape[0]
        v = self.vocab.shape[0]
        logits = np.full((k, v), -self.sharpness)
        for pos, vid in enumerate(entry["token_ids"][:k]):
            logits[pos, vid] = self.sharpness
        return logits


class OraclePredictor(TokenPredictor):
    """Knows the true token sequence; used to bound in-betweening error."""

    def __init__(self, library: SegmentLibrary, true_tokens: np.ndarray):
        self.library = library
        self.true_ids = np.array([library.exact_id(t) for t in true_tokens], dtype=int)
        self.duration = true_tokens.shape[0] * library.codec.rate / FPS

    @property
    def vocab(self) -> np.ndarray:
        return self.library.vocab

    def propose_duration(self, context_feats, target_feats) -> float:
        return self.duration

    def predict(self, context_feats, target_feats, tokens, finalized) -> np.ndarray:
        k = tokens.shape[0]
        logits = np.full((k, self.vocab.shape[0]), -30.0)
        for pos in range(k):
            logits[pos, self.true_ids[pos]] = 30.0
        return logits


def inbetween(
    request: PlanRequest,
    target_keyframes,
    predictor: TokenPredictor,
    codec: MotionCodec,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    command_seq: int = -1,
    spring_target: RootKeyframe | None = None,
) -> PlanSegment:
    """Iterative masked-token generation between context and target keyframes."""
    target_keyframes = tuple(target_keyframes)
    if len(target_keyframes) != KEYFRAME_COUNT:
        raise PlannerError(f"need exactly {KEYFRAME_COUNT} target keyframes")
    context_feats = np.stack([frame_features(f) for f in request.context_keyframes])
    target_feats = np.stack([frame_features(f) for f in target_keyframes])

    duration = snap_duration(predictor.propose_duration(context_feats, target_feats))
    n_frames = int(round(duration * FPS))
    k = n_frames // codec.rate

    vocab = predictor.vocab
    tokens = np.zeros((k, vocab.shape[1]))
    finalized = np.zeros(k, dtype=bool)
    for it in range(1, max_iterations + 1):
        if np.all(finalized):
            break
        logits = predictor.predict(context_feats, target_feats, tokens, finalized)
        if not np.all(np.isfinite(logits)):
            raise PlannerError("predictor emitted non-finite logits")
        need = cosine_schedule(it, max_iterations, k) - int(np.sum(finalized))
        if need <= 0:
            continue
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        confidence = probs.max(axis=1)
        confidence[finalized] = -np.inf
        order = np.argsort(-confidence, kind="stable")
        chosen = order[:need]
        best = np.argmax(logits[chosen], axis=1)
        tokens[chosen] = vocab[best]
        finalized[chosen] = True
    if not np.all(finalized):
        raise PlannerError("schedule failed to finalize all tokens")

    features = codec.decode(tokens)
    frames = list(frames_from_features(features, codec.skeleton, FPS))
    for i in range(KEYFRAME_COUNT):
        frames[i] = _retime(request.context_keyframes[i], i / FPS)
        frames[n_frames - KEYFRAME_COUNT + i] = _retime(
            target_keyframes[i], (n_frames - KEYFRAME_COUNT + i) / FPS,
        )
    return PlanSegment(
        frames=tuple(frames),
        tokens=tokens,
        context_keyframes=tuple(request.context_keyframes),
        target_keyframes=target_keyframes,
        command_seq=command_seq,
        spring_target=spring_target,
    )


def _retime(frame: PoseFrame, t: float) -> PoseFrame:
    return PoseFrame(
        time=t, root_pos=frame.root_pos, root_rot=frame.root_rot,
        joint_pos=frame.joint_pos, joint_vel=frame.joint_vel,
        root_lin_vel=frame.root_lin_vel, root_ang_vel=frame.root_ang_vel,
        link_pos=frame.link_pos, link_rot=frame.link_rot,
        link_lin_vel=frame.link_lin_vel, link_ang_vel=frame.link_ang_vel,
    )


def align_frames_to(frames, x: float, y: float, heading: float) -> tuple[PoseFrame, ...]:
    """Rigidly move a frame window so its first frame's planar root pose
    is (x, y, heading). Heights are kept from the source frames."""
    frames = list(frames)
    p0 = frames[0].root_pos.copy()
    yaw0 = float(yaw_of_quat(frames[0].root_rot))
    dq = quat_from_yaw(heading - yaw0)
    anchor = np.array([x, y, p0[2]])
    out = []
    for f in frames:
        out.append(PoseFrame(
            time=f.time,
            root_pos=quat_rotate(dq, f.root_pos - p0) + anchor,
            root_rot=quat_mul(dq, f.root_rot),
            joint_pos=f.joint_pos, joint_vel=f.joint_vel,
            root_lin_vel=quat_rotate(dq, f.root_lin_vel),
            root_ang_vel=quat_rotate(dq, f.root_ang_vel),
            link_pos=quat_rotate(dq, f.link_pos - p0) + anchor,
            link_rot=quat_mul(dq, f.link_rot),
            link_lin_vel=quat_rotate(dq, f.link_lin_vel),
            link_ang_vel=quat_rotate(dq, f.link_ang_vel),
        ))
    return tuple(out)


def root_state_of(frame: PoseFrame) -> RootState:
    return RootState(
        x=float(frame.root_pos[0]), y=float(frame.root_pos[1]),
        heading=float(yaw_of_quat(frame.root_rot)),
        vx=float(frame.root_lin_vel[0]), vy=float(frame.root_lin_vel[1]),
        heading_rate=float(frame.root_ang_vel[2]),
    )


def select_keyframes(
    library,
    command: PlanCommand,
    current: PoseFrame,
    rng: np.random.Generator,
    params: SpringParams = SpringParams(),
):
    """Target keyframes for a command, plus the spring keyframe they sit on.

    Navigation picks a random 4-frame window of the requested style and
    places it at the spring-model root keyframe.  Squat/kneel retrieves
    the window whose pelvis height is nearest the request (no root
    motion).  Crawl behaves like navigation with the crawl clip and the
    crawl speed envelope.  Layering keeps the context pose and swaps the
    commanded upper-body joints in.
    """
    state = root_state_of(current)
    if isinstance(command, NavCommand):
        command = command.clamped()
        target = target_from_velocity(state, command.speed, command.direction)
        spring_kf = spring_targets(state, target, params)
        window = library.random_window(command.style, KEYFRAME_COUNT, rng)
        return align_frames_to(window, spring_kf.x, spring_kf.y, spring_kf.heading), spring_kf

    if isinstance(command, SkillCommand):
        command = command.clamped()
        if command.skill == "crawl":
            speed = command.speed if command.speed is not None else 0.0
            target = target_from_velocity(state, speed, command.direction)
            spring_kf = spring_targets(state, target, params)
            window = library.random_window("crawl", KEYFRAME_COUNT, rng)
            return align_frames_to(window, spring_kf.x, spring_kf.y, spring_kf.heading), spring_kf
        if command.height is None:
            raise PlannerError(f"skill {command.skill!r} needs a height")
        spring_kf = RootKeyframe(x=state.x, y=state.y, heading=state.heading)
        window = library.nearest_height_window(command.skill, command.height, KEYFRAME_COUNT)
        return align_frames_to(window, spring_kf.x, spring_kf.y, spring_kf.heading), spring_kf

    if isinstance(command, LayerCommand):
        skeleton = library.skeleton
        upper = skeleton.joint_indices(skeleton.upper_joints)
        spring_kf = RootKeyframe(x=state.x, y=state.y, heading=state.heading)
        body = skeleton.body_link_indices
        out = []
        for f in (current,) * KEYFRAME_COUNT:
            q = f.joint_pos.copy()
            q[upper] = command.upper_joint_pos
            lp, lr, lv, lw = skeleton.fk_velocity(
                f.root_pos, f.root_rot, q, np.zeros(3), np.zeros(3), np.zeros_like(q),
            )
            out.append(PoseFrame(
                time=f.time, root_pos=f.root_pos, root_rot=f.root_rot,
                joint_pos=q, joint_vel=np.zeros_like(q),
                root_lin_vel=np.zeros(3), root_ang_vel=np.zeros(3),
                link_pos=lp[body], link_rot=lr[body], link_lin_vel=lv[body], link_ang_vel=lw[body],
            ))
        return tuple(out), spring_kf

    raise PlannerError(f"unknown command {command!r}")


def plan(
    request: PlanRequest,
    library,
    predictor: TokenPredictor,
    codec: MotionCodec,
    rng: np.random.Generator,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    command_seq: int = -1,
) -> PlanSegment:
    """Full planning step: keyframe selection plus in-betweening."""
    targets, spring_kf = select_keyframes(library, request.command, request.context_keyframes[-1], rng)
    return inbetween(
        request, targets, predictor, codec, max_iterations,
        command_seq=command_seq, spring_target=spring_kf,
    )


class MaskedMlpPredictor(TokenPredictor):
    """Trainable masked-token predictor over the library vocabulary.

    Input: context and target keyframe features, the current token
    sequence with masked positions zeroed, and the mask flags (a
    learnable scalar embedding marks masked slots).  Output: logits for
    every position up to the longest supported sequence.
    """

    def __init__(self, library: SegmentLibrary, hidden=(64, 64), rng=None):
        from .nets import Mlp

        rng = rng or np.random.default_rng(0)
        self.library = library
        self._vocab = library.vocab.copy()
        self.k_max = int(round(max(DURATIONS_S) * FPS)) // library.codec.rate
        f = self._vocab.shape[1]
        in_dim = 2 * KEYFRAME_COUNT * f + self.k_max * f + self.k_max
        self.net = Mlp(in_dim, tuple(hidden), self.k_max * self._vocab.shape[0], "elu", rng)
        self.mask_embedding = float(rng.normal())

    @property
    def vocab(self) -> np.ndarray:
        return self._vocab

    def propose_duration(self, context_feats, target_feats) -> float:
        return heuristic_duration(context_feats, target_feats)

    def _features(self, context_feats, target_feats, tokens, finalized):
        f = self._vocab.shape[1]
        toks = np.zeros((self.k_max, f))
        mask = np.full(self.k_max, self.mask_embedding)
        k = tokens.shape[0]
        toks[:k][finalized] = tokens[finalized]
        mask[:k][finalized] = 0.0
        return np.concatenate([
            context_feats.reshape(-1), target_feats.reshape(-1), toks.reshape(-1), mask,
        ])

    def predict(self, context_feats, target_feats, tokens, finalized) -> np.ndarray:
        x = self._features(context_feats, target_feats, tokens, finalized)
        out = self.net(x).reshape(self.k_max, self._vocab.shape[0])
        return out[: tokens.shape[0]]


def train_masked_predictor(
    predictor: MaskedMlpPredictor,
    iterations: int = 300,
    lr: float = 1e-3,
    seed: int = 0,
) -> list[float]:
    """Cross-entropy on masked positions with uniformly sampled mask ratios."""
    from .nets import Adam

    rng = np.random.default_rng(seed)
    lib = predictor.library
    v = predictor.vocab.shape[0]
    opt = Adam(predictor.net.param_list(), lr=lr)
    losses = []
    for _ in range(iterations):
        entry = lib.entries[int(rng.integers(0, len(lib.entries)))]
        k = entry["tokens"].shape[0]
        ratio = float(rng.uniform(0.0, 1.0))
        finalized = rng.random(k) >= ratio  # known positions
        x = predictor._features(entry["context"], entry["target"], entry["tokens"], finalized)
        out, cache = predictor.net.forward(x)
        logits = out.reshape(predictor.k_max, v)

        masked = ~finalized
        if not np.any(masked):
            continue
        dlogits = np.zeros_like(logits)
        loss = 0.0
        for pos in np.flatnonzero(masked):
            row = logits[pos]
            row = row - row.max()
            p = np.exp(row)
            p /= p.sum()
            tid = entry["token_ids"][pos]
            loss -= float(np.log(max(p[tid], 1e-300)))
            grad = p.copy()
            grad[tid] -= 1.0
            dlogits[pos] = grad
        n_masked = int(np.sum(masked))
        _, grads = predictor.net.backward(cache, dlogits.reshape(-1) / n_masked)
        opt.step(predictor.net.grad_list(grads))
        losses.append(loss / n_masked)
    return losses
