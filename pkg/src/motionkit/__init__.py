"""Humanoid motion tracking stack.

Motion clips and metrics, tracking rewards with domain randomization,
a quantized universal token space over robot/human/hybrid goal windows,
the RL math core, a generative kinematic in-betweening planner with
spring-model keyframes, a deterministic multi-rate runtime, and an
interactive steering server.
"""

__version__ = "0.1.0"

from .clips import MotionClip, PoseFrame, load_clip, save_clip
from .commands import CommandKind, Proprioception, slice_command
from .config import Config, build_config, load_config
from .fsq import FsqSpec, UniversalToken, fsq_quantize
from .metrics import SuccessMode, TrackingReport, check_success, mpjpe
from .planner import NavCommand, PlanRequest, PlanSegment, SkillCommand, cosine_schedule, inbetween
from .rewards import BodyState, RewardWeights, penalty, tracking_reward
from .rl import AdaptiveSampler, PpoConfig, adapt_lr, gae, ppo_loss
from .runtime import KinematicFollower, TokenPolicy, measure_latency, track_clip
from .skeletons import SkeletonSpec, desk_skeleton, g1_skeleton, get_skeleton
from .spring import SpringParams, spring_gap, spring_targets
from .synth import constant_pose_clip, sine_walk_clip, squat_clip, turning_clip
from .tokens import alignment_losses, decode_control, decode_motion, encode, make_token_params

__all__ = [
    "MotionClip", "PoseFrame", "load_clip", "save_clip",
    "CommandKind", "Proprioception", "slice_command",
    "Config", "build_config", "load_config",
    "FsqSpec", "UniversalToken", "fsq_quantize",
    "SuccessMode", "TrackingReport", "check_success", "mpjpe",
    "NavCommand", "PlanRequest", "PlanSegment", "SkillCommand", "cosine_schedule", "inbetween",
    "BodyState", "RewardWeights", "penalty", "tracking_reward",
    "AdaptiveSampler", "PpoConfig", "adapt_lr", "gae", "ppo_loss",
    "KinematicFollower", "TokenPolicy", "measure_latency", "track_clip",
    "SkeletonSpec", "desk_skeleton", "g1_skeleton", "get_skeleton",
    "SpringParams", "spring_gap", "spring_targets",
    "constant_pose_clip", "sine_walk_clip", "squat_clip", "turning_clip",
    "alignment_losses", "decode_control", "decode_motion", "encode", "make_token_params",
    "__version__",
]
