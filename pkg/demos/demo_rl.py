"""RL core in miniature: GAE, clipped PPO, adaptive sampling, training.

Run: python demos/demo_rl.py  (the training pass takes ~30 s)
"""

import numpy as np

from motionkit.fsq import FsqSpec
from motionkit.nets import Mlp, desk_mlp_spec
from motionkit.rl import AdaptiveSampler, PpoConfig, adapt_lr, gae, ppo_loss, sampler_distribution
from motionkit.skeletons import desk_skeleton
from motionkit.synth import constant_pose_clip
from motionkit.tokens import make_token_params
from motionkit.train import train_tracking


def main():
    print("GAE on a toy 5-step episode (gamma 0.99, lambda 0.95):")
    rewards = np.array([1.0, 0.0, 0.0, 1.0, 0.0])
    values = np.array([0.5, 0.4, 0.3, 0.6, 0.2, 0.1])
    adv, ret = gae(rewards, values, np.zeros(5, dtype=bool), 0.99, 0.95)
    print(f"  advantages: {np.round(adv, 3).tolist()}")
    print(f"  returns:    {np.round(ret, 3).tolist()}")

    cfg = PpoConfig()
    _, parts = ppo_loss(np.array([np.log(2.0)]), np.zeros(1), np.array([1.0]),
                        np.zeros(1), np.zeros(1), np.zeros(1), cfg)
    print(f"\nclipped surrogate at ratio 2, advantage +1: policy term {parts['policy']:+.2f}")
    print(f"adaptive LR from 1e-4 at KL 0.05: {adapt_lr(0.05, 1e-4, cfg):.2e}")

    print("\nadaptive sampling: one hard bin out of three:")
    p = sampler_distribution([8, 0, 0], [10, 10, 10])
    print(f"  p = {np.round(p, 3).tolist()} (floor {0.9 / 3:.3f} everywhere)")
    sampler = AdaptiveSampler([3.0])
    for _ in range(30):
        sampler.record(1, True)
    print(f"  after 30 failures in bin 1: p = {np.round(sampler.distribution(), 3).tolist()}")

    print("\ndesk-scale PPO on a hold-pose task (16 envs, 24 steps, 20 iterations):")
    desk = desk_skeleton()
    pose = 0.3 * np.sin(np.arange(desk.joint_count) + 0.5)
    clip = constant_pose_clip(desk, duration=3.0, joint_pos=pose)
    rng = np.random.default_rng(21)
    params = make_token_params(desk, FsqSpec(dims=4, levels=5), desk_mlp_spec(), rng)
    spec = desk_mlp_spec()
    critic = Mlp(params.dec_control.in_dim, spec.critic, 1, spec.activation, rng, out_scale=0.01)
    result = train_tracking(clip, params, critic, PpoConfig().desk(), iterations=20, seed=7)
    for h in result.history[::4] + [result.history[-1]]:
        print(f"  iter {h['iteration']:2d}: reward {h['mean_reward']:7.3f} "
              f"kl {h['kl']:.4f} lr {h['actor_lr']:.1e}")


if __name__ == "__main__":
    main()
