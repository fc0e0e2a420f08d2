"""RL math core: GAE, clipped PPO surrogate, adaptive-KL learning rate,
bin-based adaptive motion sampling, and a desk-scale training loop that
exercises the whole pipeline end to end.

The adaptive sampler partitions the motion dataset into fixed-duration
bins, tracks per-bin failure rates (exponentially averaged), caps each
rate at ``beta`` times the mean rate, and blends the normalized rates
with the uniform distribution:

    p_i = alpha * p_hat_i + (1 - alpha) / N

which keeps every bin's probability at least ``(1 - alpha) / N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

class RlError(ValueError):
    pass


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    entropy_coef: float = 0.013
    value_coef: float = 1.0
    actor_lr: float = 2e-5
    critic_lr: float = 1e-3
    max_grad_norm: float = 0.1
    desired_kl: float = 0.01
    lr_min: float = 1e-5
    lr_max: float = 2e-4
    init_noise_std: float = 0.05
    epochs: int = 5
    minibatches: int = 4
    steps_per_env: int = 24
    envs_per_worker: int = 4096

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must be in (0, 1]")
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError("lambda must be in [0, 1]")
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if self.lr_min > self.lr_max:
            raise ValueError("lr bounds reversed")

    def desk(self) -> "PpoConfig":
        from dataclasses import replace

        return replace(self, envs_per_worker=16)


def gae(rewards, values, dones, gamma: float, lam: float):
    """Generalized advantage estimation.

    ``values`` has one more entry than ``rewards`` (bootstrap appended).
    ``dones[t]`` masks all propagation past step t.
    Returns (advantages, returns); returns = advantages + values[:-1].
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    t_len = len(rewards)
    if len(values) != t_len + 1 or len(dones) != t_len:
        raise RlError("gae: rewards (T,), values (T+1,), dones (T,) required")
    adv = np.zeros(t_len)
    running = 0.0
    for t in range(t_len - 1, -1, -1):
        mask = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * mask * values[t + 1] - values[t]
        running = delta + gamma * lam * mask * running
        adv[t] = running
    return adv, adv + values[:-1]


def ppo_loss(logp_new, logp_old, advantages, values_new, returns, entropy, cfg: PpoConfig):
    """Clipped surrogate + value MSE - entropy bonus. Returns (total, parts)."""
    arrays = [np.asarray(a, dtype=float) for a in (logp_new, logp_old, advantages, values_new, returns, entropy)]
    logp_new, logp_old, advantages, values_new, returns, entropy = arrays
    n = len(logp_new)
    if any(len(a) != n for a in arrays[1:5]):
        raise RlError("ppo_loss: length mismatch")
    if any(not np.all(np.isfinite(a)) for a in arrays):
        raise RlError("ppo_loss: non-finite inputs")
    ratio = np.exp(logp_new - logp_old)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * advantages
    policy = -float(np.mean(np.minimum(surr1, surr2)))
    value = float(np.mean((values_new - returns) ** 2))
    ent = float(np.mean(entropy))
    total = policy + cfg.value_coef * value - cfg.entropy_coef * ent
    return total, {"policy": policy, "value": value, "entropy": ent}


def adapt_lr(kl: float, lr: float, cfg: PpoConfig) -> float:
    """Standard adaptive-KL schedule, clamped to the configured bounds."""
    if kl > 2.0 * cfg.desired_kl:
        lr = lr / 1.5
    elif 0.0 < kl < cfg.desired_kl / 2.0:
        lr = lr * 1.5
    return float(np.clip(lr, cfg.lr_min, cfg.lr_max))


# -- adaptive motion sampling ------------------------------------------


def sampler_distribution(failures, attempts, alpha: float = 0.1, beta: float = 200.0) -> np.ndarray:
    """Bin sampling probabilities from raw failure/attempt counts.

    f_i = failures_i / attempts_i (0 where nothing was attempted), capped
    at beta times the mean rate, normalized, then blended with uniform.
    """
    failures = np.asarray(failures, dtype=float)
    attempts = np.asarray(attempts, dtype=float)
    n = len(failures)
    if n < 1 or len(attempts) != n:
        raise RlError("need matching nonempty failure/attempt arrays")
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(attempts > 0, failures / np.maximum(attempts, 1e-300), 0.0)
    f = np.minimum(f, beta * np.mean(f))
    total = np.sum(f)
    p_hat = f / total if total > 0 else np.full(n, 1.0 / n)
    return alpha * p_hat + (1.0 - alpha) / n


@dataclass
class AdaptiveSampler:
    """Per-bin failure bookkeeping over a set of clips.

    Bins are fixed-duration windows (1 s by default).  Rates are
    exponentially averaged with a configurable half-life measured in
    recorded episodes per bin.
    """

    clip_durations: list[float]
    bin_duration: float = 1.0
    alpha: float = 0.1
    beta: float = 200.0
    half_life: float = 64.0
    _bins: list[tuple[int, float]] = field(init=False)  # (clip index, bin start time)
    attempts: np.ndarray = field(init=False)
    failures: np.ndarray = field(init=False)

    def __post_init__(self):
        self._bins = []
        for ci, dur in enumerate(self.clip_durations):
            n = max(1, int(np.ceil(dur / self.bin_duration)))
            for b in range(n):
                self._bins.append((ci, b * self.bin_duration))
        self.attempts = np.zeros(len(self._bins))
        self.failures = np.zeros(len(self._bins))

    @property
    def n_bins(self) -> int:
        return len(self._bins)

    def bin_of(self, clip_index: int, start_time: float) -> int:
        for i, (ci, t0) in enumerate(self._bins):
            if ci == clip_index and t0 <= start_time < t0 + self.bin_duration:
                return i
        raise RlError(f"no bin for clip {clip_index} at t={start_time}")

    def record(self, bin_index: int, failed: bool) -> None:
        decay = 0.5 ** (1.0 / self.half_life)
        self.attempts[bin_index] *= decay
        self.failures[bin_index] *= decay
        self.attempts[bin_index] += 1.0
        if failed:
            self.failures[bin_index] += 1.0

    def distribution(self) -> np.ndarray:
        return sampler_distribution(self.failures, self.attempts, self.alpha, self.beta)

    def sample_start(self, rng: np.random.Generator) -> tuple[int, int, float]:
        """Draw (bin index, clip index, start time): bin from the adaptive
        distribution, start uniform within the bin, clipped to the clip."""
        p = self.distribution()
        bin_index = int(rng.choice(len(p), p=p))
        ci, t0 = self._bins[bin_index]
        hi = min(t0 + self.bin_duration, self.clip_durations[ci])
        t = float(rng.uniform(t0, hi))
        return bin_index, ci, t

    def entropy(self) -> float:
        p = self.distribution()
        return float(-np.sum(p * np.log(np.maximum(p, 1e-300))))
