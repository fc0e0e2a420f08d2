"""Desk-scale PPO training loop over the surrogate plant.

Validates the wiring of the whole stack: frozen modality encoder swept
over the reference clip, trainable control decoder and critic, GAE,
clipped PPO updates with adaptive-KL learning rate, gradient clipping,
and bin-based adaptive start-state sampling.  No claim is made about
behavior at full scale; the exit test is simply that tracking reward
improves on an easy clip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clips import MotionClip
from .commands import CommandKind, slice_command
from .metrics import HEIGHT_LIMIT_M, ORIENTATION_LIMIT_RAD
from .nets import Adam, Mlp, clip_grad_norm
from .plant import Plant, PlantConfig, RootRef
from .rewards import BodyState, RewardWeights, step_reward
from .rl import AdaptiveSampler, PpoConfig, adapt_lr, gae
from .rotations import geodesic_angle, yaw_of_quat
from .tokens import ACTOR_STD_MAX, ACTOR_STD_MIN, TokenParams, encode

_LOG_STD_MIN = np.log(ACTOR_STD_MIN)
_LOG_STD_MAX = np.log(ACTOR_STD_MAX)
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def gaussian_logp(action, mean, std):
    z = (action - mean) / std
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(np.log(std)) - _HALF_LOG_2PI * action.shape[-1]


def gaussian_entropy(std, n: int) -> np.ndarray:
    h = float(np.sum(np.log(std)) + 0.5 * len(std) * np.log(2.0 * np.pi * np.e))
    return np.full(n, h)


def gaussian_kl(mean_old, std_old, mean_new, std_new) -> float:
    var_new = std_new**2
    kl = np.log(std_new / std_old) + (std_old**2 + (mean_old - mean_new) ** 2) / (2.0 * var_new) - 0.5
    return float(np.mean(np.sum(kl, axis=-1)))


class _Env:
    """One rollout stream over a reference clip."""

    def __init__(self, clip: MotionClip, dt: float, plant_cfg: PlantConfig):
        self.clip = clip
        self.dt = dt
        self.plant = Plant(clip.skeleton, dt, plant_cfg)
        self.tick = 0
        self.bin_index = -1
        self.prev_action = np.zeros(clip.skeleton.joint_count)

    def reset(self, start_time: float, bin_index: int):
        self.tick = int(round(start_time * self.clip.fps))
        self.tick = min(self.tick, len(self.clip) - 1)
        self.bin_index = bin_index
        frame = self.clip.frame(self.tick)
        self.plant.reset_to_frame(frame)
        self.prev_action = frame.joint_pos.copy()

    def failed(self) -> bool:
        ref = self.clip.frame_at(self.plant.time)
        if abs(ref.root_pos[2] - self.plant.root_pos[2]) > HEIGHT_LIMIT_M:
            return True
        return bool(geodesic_angle(ref.root_rot, self.plant.root_rot) > ORIENTATION_LIMIT_RAD)

    def at_end(self) -> bool:
        return self.tick >= len(self.clip) - 1


@dataclass
class TrainResult:
    history: list
    sampler: AdaptiveSampler


def train_tracking(
    clip: MotionClip,
    params: TokenParams,
    critic: Mlp,
    cfg: PpoConfig,
    iterations: int = 30,
    seed: int = 0,
    weights: RewardWeights = RewardWeights(),
    plant_cfg: PlantConfig | None = None,
) -> TrainResult:
    """PPO on the surrogate plant; the root follows the reference clip and
    the policy owns the joints.  Returns per-iteration log rows."""
    rng = np.random.default_rng(seed)
    skeleton = clip.skeleton
    dt = 1.0 / clip.fps
    plant_cfg = plant_cfg or PlantConfig()
    n_env = cfg.envs_per_worker
    t_len = cfg.steps_per_env

    # frozen encoder sweep: one token per policy tick of the clip
    codes = np.stack([
        encode(slice_command(clip, i * dt, CommandKind.ROBOT), "E_r", params).codes.astype(float)
        for i in range(len(clip))
    ])
    ref_states = [BodyState.from_frame(clip.frame(i)) for i in range(len(clip))]

    envs = [_Env(clip, dt, plant_cfg) for _ in range(n_env)]
    sampler = AdaptiveSampler([clip.duration], bin_duration=1.0)
    for env in envs:
        b, _, t0 = sampler.sample_start(rng)
        env.reset(t0, b)

    actor_params = params.dec_control.param_list() + [params.log_std]
    actor_opt = Adam(actor_params, lr=cfg.actor_lr)
    critic_opt = Adam(critic.param_list(), lr=cfg.critic_lr)
    actor_lr = cfg.actor_lr
    history = []

    def obs_of(env: _Env) -> np.ndarray:
        proprio = env.plant.proprioception(env.prev_action)
        return np.concatenate([codes[min(env.tick, len(clip) - 1)], proprio.flatten()])

    for it in range(iterations):
        obs = np.zeros((n_env, t_len, params.dec_control.in_dim))
        acts = np.zeros((n_env, t_len, params.action_dim))
        means = np.zeros_like(acts)
        logps = np.zeros((n_env, t_len))
        rewards = np.zeros((n_env, t_len))
        dones = np.zeros((n_env, t_len), dtype=bool)
        values = np.zeros((n_env, t_len + 1))
        std = params.action_std()

        finished = []  # (bin, failed)
        for e, env in enumerate(envs):
            for t in range(t_len):
                x = obs_of(env)
                mean = params.dec_control(x)
                action = mean + std * rng.normal(size=mean.shape)
                ref_next = clip.frame_at(env.plant.time + dt)
                env.plant.step(action, RootRef(
                    pos=ref_next.root_pos, yaw=float(yaw_of_quat(ref_next.root_rot)),
                    lin_vel=ref_next.root_lin_vel, yaw_rate=float(ref_next.root_ang_vel[2]),
                ))
                env.tick += 1
                frame = env.plant.pose_frame()
                p_state = BodyState.from_frame(frame)
                g_state = ref_states[min(env.tick, len(clip) - 1)]
                r, _ = step_reward(
                    p_state, g_state, action, env.prev_action, env.plant.q, skeleton,
                    env.plant.contact_report(frame), weights,
                )
                obs[e, t] = x
                acts[e, t] = action
                means[e, t] = mean
                logps[e, t] = gaussian_logp(action, mean, std)
                values[e, t] = float(critic(x)[0])
                rewards[e, t] = r
                env.prev_action = action

                failed = env.failed()
                if failed or env.at_end():
                    dones[e, t] = True
                    finished.append((env.bin_index, failed))
                    b, _, t0 = sampler.sample_start(rng)
                    env.reset(t0, b)
            values[e, t_len] = float(critic(obs_of(env))[0])

        for b, failed in finished:
            sampler.record(b, failed)

        advs = np.zeros((n_env, t_len))
        rets = np.zeros((n_env, t_len))
        for e in range(n_env):
            advs[e], rets[e] = gae(rewards[e], values[e], dones[e], cfg.gamma, cfg.lam)
        flat_obs = obs.reshape(-1, obs.shape[-1])
        flat_acts = acts.reshape(-1, params.action_dim)
        flat_means_old = means.reshape(-1, params.action_dim)
        flat_logp_old = logps.reshape(-1)
        flat_adv = advs.reshape(-1)
        flat_ret = rets.reshape(-1)
        flat_adv = (flat_adv - flat_adv.mean()) / (flat_adv.std() + 1e-8)
        std_old = std.copy()

        n_samples = flat_obs.shape[0]
        kl_measured = 0.0
        loss_policy = loss_value = 0.0
        for _ in range(cfg.epochs):
            order = rng.permutation(n_samples)
            for mb in np.array_split(order, cfg.minibatches):
                x = flat_obs[mb]
                a = flat_acts[mb]
                adv = flat_adv[mb]
                ret = flat_ret[mb]
                std = params.action_std()

                mean, cache = params.dec_control.forward(x)
                logp_new = gaussian_logp(a, mean, std)
                ratio = np.exp(logp_new - flat_logp_old[mb])
                surr1 = ratio * adv
                surr2 = np.clip(ratio, 1 - cfg.clip, 1 + cfg.clip) * adv
                use_unclipped = surr1 <= surr2
                m = len(mb)

                # d(policy)/d(logp_new): only the unclipped branch carries gradient
                dlogp = np.where(use_unclipped, -adv * ratio, 0.0) / m
                z = (a - mean) / std
                dmean = dlogp[:, None] * (z / std)
                _, actor_grads = params.dec_control.backward(cache, dmean)
                # log-std gradient: policy term plus entropy bonus
                dlogstd = np.sum(dlogp[:, None] * (z * z - 1.0), axis=0)
                dlogstd -= cfg.entropy_coef * np.ones_like(dlogstd)
                grad_list = params.dec_control.grad_list(actor_grads) + [dlogstd]
                clip_grad_norm(grad_list, cfg.max_grad_norm)
                actor_opt.lr = actor_lr
                actor_opt.step(grad_list)
                params.log_std[:] = np.clip(params.log_std, _LOG_STD_MIN, _LOG_STD_MAX)

                v, vcache = critic.forward(x)
                v = v.reshape(-1)
                dv = cfg.value_coef * 2.0 * (v - ret) / m
                _, critic_grads = critic.backward(vcache, dv.reshape(-1, 1))
                cg = critic.grad_list(critic_grads)
                clip_grad_norm(cg, cfg.max_grad_norm)
                critic_opt.step(cg)

                loss_policy = -float(np.mean(np.minimum(surr1, surr2)))
                loss_value = float(np.mean((v - ret) ** 2))
            mean_all = params.dec_control(flat_obs)
            kl_measured = gaussian_kl(flat_means_old, std_old, mean_all, params.action_std())
            actor_lr = adapt_lr(kl_measured, actor_lr, cfg)

        history.append({
            "iteration": it,
            "mean_reward": float(np.mean(rewards)),
            "policy_loss": loss_policy,
            "value_loss": loss_value,
            "kl": kl_measured,
            "actor_lr": actor_lr,
            "sampler_entropy": sampler.entropy(),
            "episodes_finished": len(finished),
        })
    return TrainResult(history=history, sampler=sampler)
