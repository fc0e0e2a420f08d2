"""Universal token space: modality encoders, decoders, alignment losses.

Robot, human, and hybrid goal windows are flattened (layouts in
docs/features.md), encoded by modality-specific MLPs into a shared
latent, bounded and quantized by FSQ into a universal token.  Two
decoders consume the token: a control decoder producing joint target
means and a motion decoder reconstructing the flattened robot window.

Three alignment losses tie the space together for synchronized views
of the same motion:

* reconstruction: every modality's token must decode to the robot window,
* token: robot and human tokens must coincide,
* cycle: re-encoding the decoded robot window from the human token must
  return the robot token.

Losses operate on the bounded pre-round values (the straight-through
continuous values), so they are differentiable everywhere; code-space
agreement is reported as a metric.  All gradients are explicit
reverse-mode passes and are checked against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .commands import (
    CommandKind,
    HumanCommand,
    HybridCommand,
    MotionCommand,
    Proprioception,
    RobotCommand,
    command_flat_dim,
)
from .fsq import FsqSpec, UniversalToken, fsq_bound, fsq_bound_grad, fsq_codes, fsq_quantize
from .nets import Mlp, MlpSpec, load_tensors, save_tensors
from .skeletons import SkeletonSpec

ACTOR_STD_MIN = 0.001
ACTOR_STD_MAX = 0.5

ENCODER_KIND = {"E_r": CommandKind.ROBOT, "E_h": CommandKind.HUMAN, "E_m": CommandKind.HYBRID}


class TokenSpaceError(ValueError):
    pass


@dataclass
class TokenParams:
    """Parameter bundle for the whole token space."""

    spec: FsqSpec
    skeleton: SkeletonSpec
    enc_r: Mlp
    enc_h: Mlp
    enc_m: Mlp
    dec_control: Mlp
    dec_motion: Mlp
    log_std: np.ndarray  # (action_dim,)

    @property
    def action_dim(self) -> int:
        return self.dec_control.out_dim

    def action_std(self) -> np.ndarray:
        return np.clip(np.exp(self.log_std), ACTOR_STD_MIN, ACTOR_STD_MAX)

    def encoder(self, which: str) -> Mlp:
        try:
            return {"E_r": self.enc_r, "E_h": self.enc_h, "E_m": self.enc_m}[which]
        except KeyError:
            raise TokenSpaceError(f"unknown encoder {which!r}") from None

    def named_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, net in (("enc_r.", self.enc_r), ("enc_h.", self.enc_h), ("enc_m.", self.enc_m),
                            ("dec_control.", self.dec_control), ("dec_motion.", self.dec_motion)):
            out.update(net.named_params(prefix))
        out["log_std"] = self.log_std
        return out

    def save(self, path):
        save_tensors(path, self.named_tensors())

    def load_into(self, path):
        tensors = load_tensors(path)
        for name, arr in self.named_tensors().items():
            if name not in tensors:
                raise TokenSpaceError(f"checkpoint missing tensor {name!r}")
            if tensors[name].shape != arr.shape:
                raise TokenSpaceError(f"tensor {name!r}: shape {tensors[name].shape} != {arr.shape}")
            arr[...] = tensors[name]


def make_token_params(
    skeleton: SkeletonSpec,
    fsq_spec: FsqSpec = FsqSpec(),
    mlp_spec: MlpSpec | None = None,
    rng: np.random.Generator | None = None,
    init_noise_std: float = 0.05,
) -> TokenParams:
    mlp_spec = mlp_spec or MlpSpec()
    rng = rng or np.random.default_rng(0)
    act = mlp_spec.activation
    d = fsq_spec.dims
    action_dim = skeleton.joint_count
    proprio_dim = Proprioception.flat_dim(skeleton)
    return TokenParams(
        spec=fsq_spec,
        skeleton=skeleton,
        enc_r=Mlp(command_flat_dim(CommandKind.ROBOT, skeleton), mlp_spec.encoder, d, act, rng),
        enc_h=Mlp(command_flat_dim(CommandKind.HUMAN, skeleton), mlp_spec.encoder, d, act, rng),
        enc_m=Mlp(command_flat_dim(CommandKind.HYBRID, skeleton), mlp_spec.encoder, d, act, rng),
        # small head init keeps fresh policies near the zero pose
        dec_control=Mlp(d + proprio_dim, mlp_spec.control_decoder, action_dim, act, rng, out_scale=0.01),
        dec_motion=Mlp(d, mlp_spec.motion_decoder, command_flat_dim(CommandKind.ROBOT, skeleton), act, rng),
        log_std=np.full(action_dim, np.log(init_noise_std)),
    )


def encode(command: MotionCommand, which: str, params: TokenParams) -> UniversalToken:
    """Flatten, run the modality encoder, bound and quantize."""
    expect = ENCODER_KIND.get(which)
    if expect is None:
        raise TokenSpaceError(f"unknown encoder {which!r}")
    if command.kind is not expect:
        raise TokenSpaceError(f"{which} expects a {expect.value} command, got {command.kind.value}")
    u = params.encoder(which)(command.flatten())
    return fsq_quantize(u, params.spec)


def decode_control(token: UniversalToken, proprio: Proprioception, params: TokenParams) -> np.ndarray:
    """Mean of the diagonal-Gaussian action head (target joint positions)."""
    x = np.concatenate([token.codes.astype(float), proprio.flatten()])
    return params.dec_control(x)


def decode_motion(token: UniversalToken, params: TokenParams) -> RobotCommand:
    """Reconstruct the robot goal window from a token (deployment path)."""
    flat = params.dec_motion(token.codes.astype(float))
    return RobotCommand.from_flat(flat, params.skeleton)


@dataclass(frozen=True)
class AlignmentResult:
    l_recon: float
    l_token: float
    l_cycle: float
    total: float
    code_match_rh: float  # fraction of dimensions where robot/human codes agree

    def as_dict(self) -> dict:
        return {
            "l_recon": self.l_recon, "l_token": self.l_token,
            "l_cycle": self.l_cycle, "total": self.total, "code_match_rh": self.code_match_rh,
        }


def _as_batch(x, dim, label):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != dim:
        raise TokenSpaceError(f"{label}: expected (*, {dim}) features, got {x.shape}")
    return x


def alignment_losses(x_r, x_h, x_m, params: TokenParams, with_grads: bool = False):
    """Alignment losses over synchronized flattened command batches.

    Returns an :class:`AlignmentResult`, plus a gradient dict when
    ``with_grads`` is set.  Losses are sums over the batch; callers
    normalize as they see fit.
    """
    sk = params.skeleton
    x_r = _as_batch(x_r, command_flat_dim(CommandKind.ROBOT, sk), "x_r")
    x_h = _as_batch(x_h, command_flat_dim(CommandKind.HUMAN, sk), "x_h")
    x_m = _as_batch(x_m, command_flat_dim(CommandKind.HYBRID, sk), "x_m")
    if not (x_r.shape[0] == x_h.shape[0] == x_m.shape[0]):
        raise TokenSpaceError("unsynchronized batches: row counts differ")

    spec = params.spec
    u_r, c_r = params.enc_r.forward(x_r)
    u_h, c_h = params.enc_h.forward(x_h)
    u_m, c_m = params.enc_m.forward(x_m)
    z_r = fsq_bound(u_r, spec)
    z_h = fsq_bound(u_h, spec)
    z_m = fsq_bound(u_m, spec)

    y_r, dc_r = params.dec_motion.forward(z_r)
    y_h, dc_h = params.dec_motion.forward(z_h)
    y_m, dc_m = params.dec_motion.forward(z_m)

    u_c, c_c = params.enc_r.forward(y_h)
    z_c = fsq_bound(u_c, spec)

    l_recon = float(np.sum((y_r - x_r) ** 2) + np.sum((y_h - x_r) ** 2) + np.sum((y_m - x_r) ** 2))
    l_token = float(np.sum((z_r - z_h) ** 2))
    l_cycle = float(np.sum((z_c - z_r) ** 2))
    result = AlignmentResult(
        l_recon=l_recon,
        l_token=l_token,
        l_cycle=l_cycle,
        total=l_recon + l_token + l_cycle,
        code_match_rh=float(np.mean(fsq_codes(z_r) == fsq_codes(z_h))),
    )
    if not with_grads:
        return result

    # reverse pass; d<name> is the gradient of the total w.r.t. <name>
    dz_c = 2.0 * (z_c - z_r)
    dy_h_cycle, g_enc_r_cycle = params.enc_r.backward(c_c, dz_c * fsq_bound_grad(u_c, spec))

    dy_r = 2.0 * (y_r - x_r)
    dy_h = 2.0 * (y_h - x_r) + dy_h_cycle
    dy_m = 2.0 * (y_m - x_r)

    dz_r_dec, g_dec_r = params.dec_motion.backward(dc_r, dy_r)
    dz_h_dec, g_dec_h = params.dec_motion.backward(dc_h, dy_h)
    dz_m_dec, g_dec_m = params.dec_motion.backward(dc_m, dy_m)
    g_dec = Mlp.accumulate(Mlp.accumulate(g_dec_r, g_dec_h), g_dec_m)

    dz_r = dz_r_dec + 2.0 * (z_r - z_h) - dz_c
    dz_h = dz_h_dec - 2.0 * (z_r - z_h)
    dz_m = dz_m_dec

    _, g_enc_r = params.enc_r.backward(c_r, dz_r * fsq_bound_grad(u_r, spec))
    _, g_enc_h = params.enc_h.backward(c_h, dz_h * fsq_bound_grad(u_h, spec))
    _, g_enc_m = params.enc_m.backward(c_m, dz_m * fsq_bound_grad(u_m, spec))
    g_enc_r = Mlp.accumulate(g_enc_r, g_enc_r_cycle)

    grads = {"enc_r": g_enc_r, "enc_h": g_enc_h, "enc_m": g_enc_m, "dec_motion": g_dec}
    return result, grads


def alignment_losses_from_commands(g_r: RobotCommand, g_h: HumanCommand, g_m: HybridCommand,
                                   params: TokenParams) -> AlignmentResult:
    for cmd, kind in ((g_r, CommandKind.ROBOT), (g_h, CommandKind.HUMAN), (g_m, CommandKind.HYBRID)):
        if cmd.kind is not kind:
            raise TokenSpaceError(f"expected a {kind.value} command, got {cmd.kind.value}")
    return alignment_losses(g_r.flatten(), g_h.flatten(), g_m.flatten(), params)


def synchronized_batch(clip, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flattened synchronized (robot, human, hybrid) views at the given times."""
    from .commands import slice_command

    xs = {k: [] for k in CommandKind}
    for t in times:
        for kind in CommandKind:
            xs[kind].append(slice_command(clip, float(t), kind).flatten())
    return (
        np.stack(xs[CommandKind.ROBOT]),
        np.stack(xs[CommandKind.HUMAN]),
        np.stack(xs[CommandKind.HYBRID]),
    )


def train_alignment(
    clip,
    params: TokenParams,
    iterations: int = 200,
    batch: int = 16,
    pool: int = 128,
    lr: float = 1e-3,
    seed: int = 0,
):
    """Toy alignment training on one clip. Returns per-iteration rows."""
    from .nets import Adam

    rng = np.random.default_rng(seed)
    pool_times = rng.uniform(0.0, clip.end_time, size=pool)
    p_r, p_h, p_m = synchronized_batch(clip, pool_times)
    nets = [params.enc_r, params.enc_h, params.enc_m, params.dec_motion]
    flat_params = [p for net in nets for p in net.param_list()]
    opt = Adam(flat_params, lr=lr)
    history = []
    for it in range(iterations):
        pick = rng.integers(0, pool, size=batch)
        x_r, x_h, x_m = p_r[pick], p_h[pick], p_m[pick]
        result, grads = alignment_losses(x_r, x_h, x_m, params, with_grads=True)
        flat_grads = []
        for name, net in (("enc_r", params.enc_r), ("enc_h", params.enc_h),
                          ("enc_m", params.enc_m), ("dec_motion", params.dec_motion)):
            flat_grads += net.grad_list(grads[name])
        scale = 1.0 / batch
        opt.step([g * scale for g in flat_grads])
        row = {"iteration": it}
        row.update({k: v / batch if k != "code_match_rh" else v for k, v in result.as_dict().items()})
        history.append(row)
    return history


def reconstruction_mse(clip, params: TokenParams, times) -> float:
    """Mean squared robot-window reconstruction error through the token space."""
    x_r, _, _ = synchronized_batch(clip, times)
    u = params.enc_r(x_r)
    y = params.dec_motion(fsq_bound(u, params.spec))
    return float(np.mean((y - x_r) ** 2))
