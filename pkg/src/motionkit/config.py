"""Configuration bundle and the paper/desk profiles.

The ``paper`` profile pins every published hyperparameter (reward
weights and kernel scales, randomization ranges, network widths, PPO
settings, loop rates, command envelopes); :func:`verify_paper_profile`
asserts them as a self-test.  The ``desk`` profile swaps in the small
skeleton, 1/64 network widths, and 16 environments for fast runs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .domain_rand import DrConfig
from .fsq import FsqSpec
from .nets import MlpSpec, desk_mlp_spec
from .rewards import RewardWeights
from .rl import PpoConfig
from .skeletons import SkeletonSpec, get_skeleton
from .spring import SpringParams

RATES_HZ = {"policy": 50, "planner": 10, "streamer": 500, "input": 100}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    max_iterations: int = 8
    library_path: str | None = None  # None: built-in synthetic library
    segments_per_clip: int = 8
    codec_key_dims: int = 6
    codec_key_levels: int = 9
    continuity_budget_rad: float = 0.6


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    ws_port: int | None = None
    broadcast_hz: int = 20
    clock: str = "virtual"  # "virtual" | "wall"
    pace: float | None = 1.0  # virtual seconds per wall second; None = unlimited
    plan_preview_frames: int = 25
    client_queue: int = 64


@dataclass(frozen=True)
class Config:
    profile: str = "desk"
    skeleton_name: str = "desk"
    seed: int = 0
    reward: RewardWeights = field(default_factory=RewardWeights)
    dr: DrConfig = field(default_factory=DrConfig)
    fsq: FsqSpec = field(default_factory=FsqSpec)
    mlp: MlpSpec = field(default_factory=desk_mlp_spec)
    ppo: PpoConfig = field(default_factory=lambda: PpoConfig().desk())
    spring: SpringParams = field(default_factory=SpringParams)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    server: ServerConfig = field(default_factory=ServerConfig)

    def skeleton(self) -> SkeletonSpec:
        return get_skeleton(self.skeleton_name)


def desk_config() -> Config:
    return Config()


def paper_config() -> Config:
    return Config(
        profile="paper",
        skeleton_name="g1",
        mlp=MlpSpec(),
        ppo=PpoConfig(),
    )


_PROFILES = {"desk": desk_config, "paper": paper_config}


def build_config(profile: str = "desk", **overrides) -> Config:
    if profile not in _PROFILES:
        raise ConfigError(f"unknown profile {profile!r} (have {sorted(_PROFILES)})")
    return replace(_PROFILES[profile](), **overrides)


def load_config(path=None, profile: str | None = None, seed: int | None = None) -> Config:
    """Config from an optional JSON file plus CLI-level overrides.

    File schema: {"profile": ..., "skeleton": ..., "seed": ...,
    "server": {...}, "planner": {...}}.  Environment variables
    MOTIONKIT_BIND (host:port) and MOTIONKIT_LOG (level) override the
    server address and log level.
    """
    data = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        data = json.loads(p.read_text(encoding="utf-8"))
    cfg = build_config(profile or data.get("profile", "desk"))
    if "skeleton" in data:
        skel = data["skeleton"]
        if skel not in ("desk", "g1") and not Path(skel).exists():
            raise ConfigError(f"skeleton file not found: {skel}")
        cfg = replace(cfg, skeleton_name=skel)
    if "planner" in data:
        lib = data["planner"].get("library_path")
        if lib is not None and not Path(lib).is_dir():
            raise ConfigError(f"planner library directory not found: {lib}")
        cfg = replace(cfg, planner=replace(cfg.planner, **data["planner"]))
    if "server" in data:
        cfg = replace(cfg, server=replace(cfg.server, **data["server"]))
    if seed is not None or "seed" in data:
        cfg = replace(cfg, seed=seed if seed is not None else int(data["seed"]))
    bind = os.environ.get("MOTIONKIT_BIND")
    if bind:
        host, _, port = bind.rpartition(":")
        cfg = replace(cfg, server=replace(cfg.server, host=host or "127.0.0.1", port=int(port)))
    return cfg


def verify_paper_profile(cfg: Config) -> None:
    """Assert the paper profile carries the published values exactly."""
    checks = [
        (cfg.reward.root_ori, 0.5), (cfg.reward.body_pos, 1.0), (cfg.reward.body_ori, 1.0),
        (cfg.reward.body_lin, 1.0), (cfg.reward.body_ang, 1.0),
        (cfg.reward.action_rate, -0.1), (cfg.reward.joint_limit, -10.0), (cfg.reward.undesired_contact, -0.1),
        (cfg.reward.scale_ori, 0.4), (cfg.reward.scale_pos, 0.3), (cfg.reward.scale_lin, 1.0), (cfg.reward.scale_ang, 3.14),
        (cfg.dr.static_friction.low, 0.3), (cfg.dr.static_friction.high, 1.6),
        (cfg.dr.dynamic_friction.low, 0.3), (cfg.dr.dynamic_friction.high, 1.2),
        (cfg.dr.restitution.low, 0.0), (cfg.dr.restitution.high, 0.5),
        (cfg.dr.default_joint_jitter.low, -0.01), (cfg.dr.default_joint_jitter.high, 0.01),
        (cfg.dr.com_offset_x.high, 0.075), (cfg.dr.com_offset_y.high, 0.1), (cfg.dr.com_offset_z.high, 0.1),
        (cfg.dr.push_lin_x.high, 0.5), (cfg.dr.push_lin_z.high, 0.2),
        (cfg.dr.push_ang_roll.high, 0.52), (cfg.dr.push_ang_yaw.high, 0.78),
        (cfg.dr.push_duration.low, 1.0), (cfg.dr.push_duration.high, 3.0),
        (cfg.dr.target_pos_jitter_xy.high, 0.05), (cfg.dr.target_pos_jitter_z.high, 0.01),
        (cfg.dr.target_ori_jitter_rp.high, 0.1), (cfg.dr.target_ori_jitter_yaw.high, 0.2),
        (cfg.dr.target_joint_jitter.high, 0.1),
        (cfg.ppo.gamma, 0.99), (cfg.ppo.lam, 0.95), (cfg.ppo.clip, 0.2),
        (cfg.ppo.entropy_coef, 0.013), (cfg.ppo.value_coef, 1.0),
        (cfg.ppo.actor_lr, 2e-5), (cfg.ppo.critic_lr, 1e-3),
        (cfg.ppo.max_grad_norm, 0.1), (cfg.ppo.desired_kl, 0.01),
        (cfg.ppo.lr_min, 1e-5), (cfg.ppo.lr_max, 2e-4),
        (cfg.ppo.init_noise_std, 0.05),
        (cfg.ppo.epochs, 5), (cfg.ppo.minibatches, 4), (cfg.ppo.steps_per_env, 24),
        (cfg.ppo.envs_per_worker, 4096),
    ]
    for got, expect in checks:
        if got != expect:
            raise ConfigError(f"paper profile value drift: {got} != {expect}")
    if cfg.mlp.encoder != (2048, 1024, 512, 512):
        raise ConfigError("paper profile encoder widths drifted")
    if cfg.mlp.control_decoder != (2048, 2048, 1024, 1024, 512, 512):
        raise ConfigError("paper profile control decoder widths drifted")
    if cfg.mlp.motion_decoder != (2048, 1024, 512, 512):
        raise ConfigError("paper profile motion decoder widths drifted")
    if cfg.mlp.critic != (2048, 2048, 1024, 1024, 512, 512):
        raise ConfigError("paper profile critic widths drifted")
    if cfg.skeleton().joint_count != 29:
        raise ConfigError("paper profile skeleton is not 29 DoF")
    if RATES_HZ != {"policy": 50, "planner": 10, "streamer": 500, "input": 100}:
        raise ConfigError("loop rates drifted")
