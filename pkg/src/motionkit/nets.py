"""Small fully-connected networks with explicit reverse-mode gradients.

No autodiff framework: each layer caches its forward activations and
implements its own backward pass, so gradient checks against finite
differences stay self-contained.  Networks are f64 throughout.

Also provides Adam, global gradient-norm clipping, and a versioned
binary checkpoint of named tensors (see docs/formats.md).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_grad(x):
    return (x > 0).astype(float)


def _tanh(x):
    return np.tanh(x)


def _tanh_grad(x):
    return 1.0 - np.tanh(x) ** 2


def _identity(x):
    return x


def _identity_grad(x):
    return np.ones_like(x)


ACTIVATIONS = {
    "elu": (_elu, _elu_grad),
    "relu": (_relu, _relu_grad),
    "tanh": (_tanh, _tanh_grad),
    "identity": (_identity, _identity_grad),
}


@dataclass(frozen=True)
class MlpSpec:
    """Hidden layer widths for the standard networks of the stack."""

    encoder: tuple[int, ...] = (2048, 1024, 512, 512)
    control_decoder: tuple[int, ...] = (2048, 2048, 1024, 1024, 512, 512)
    motion_decoder: tuple[int, ...] = (2048, 1024, 512, 512)
    critic: tuple[int, ...] = (2048, 2048, 1024, 1024, 512, 512)
    activation: str = "elu"

    def __post_init__(self):
        for name in ("encoder", "control_decoder", "motion_decoder", "critic"):
            if any(s < 1 for s in getattr(self, name)):
                raise ValueError(f"{name}: layer sizes must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def scaled(self, divisor: int) -> "MlpSpec":
        def shrink(sizes):
            return tuple(max(1, s // divisor) for s in sizes)

        return MlpSpec(
            encoder=shrink(self.encoder),
            control_decoder=shrink(self.control_decoder),
            motion_decoder=shrink(self.motion_decoder),
            critic=shrink(self.critic),
            activation=self.activation,
        )


def desk_mlp_spec() -> MlpSpec:
    """Widths divided by 64 for fast tests."""
    return MlpSpec().scaled(64)


class Mlp:
    """Plain MLP. Hidden layers use the configured activation; the output
    layer is linear."""

    def __init__(self, in_dim: int, hidden: tuple[int, ...], out_dim: int,
                 activation: str = "elu", rng: np.random.Generator | None = None,
                 out_scale: float = 1.0):
        rng = rng or np.random.default_rng(0)
        self.activation = activation
        self._act, self._act_grad = ACTIVATIONS[activation]
        sizes = (in_dim,) + tuple(hidden) + (out_dim,)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            scale = np.sqrt(2.0 / a)
            if i == len(sizes) - 2:
                scale *= out_scale
            self.weights.append(rng.normal(0.0, scale, size=(a, b)))
            self.biases.append(np.zeros(b))

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def forward(self, x: np.ndarray):
        """Returns (output, cache). Accepts (d,) or (N, d)."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        h = x.reshape(1, -1) if squeeze else x
        pre = []
        post = [h]
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = post[-1] @ w + b
            pre.append(z)
            post.append(self._act(z) if i < n - 1 else z)
        y = post[-1][0] if squeeze else post[-1]
        return y, (pre, post, squeeze)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, dy: np.ndarray):
        """Backprop. Returns (dx, grads) with grads a list of (dW, db)."""
        pre, post, squeeze = cache
        g = np.asarray(dy, dtype=float)
        if squeeze:
            g = g.reshape(1, -1)
        grads = [None] * len(self.weights)
        n = len(self.weights)
        for i in range(n - 1, -1, -1):
            if i < n - 1:
                g = g * self._act_grad(pre[i])
            grads[i] = (post[i].T @ g, g.sum(axis=0))
            g = g @ self.weights[i].T
        dx = g[0] if squeeze else g
        return dx, grads

    # -- parameter plumbing -------------------------------------------

    def named_params(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}w{i}"] = w
            out[f"{prefix}b{i}"] = b
        return out

    def param_list(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def grad_list(self, grads) -> list[np.ndarray]:
        out = []
        for dw, db in grads:
            out += [dw, db]
        return out

    def zero_grads(self):
        return [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(self.weights, self.biases)]

    @staticmethod
    def accumulate(into, grads):
        for (aw, ab), (gw, gb) in zip(into, grads):
            aw += gw
            ab += gb
        return into


def clip_grad_norm(arrays: list[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so the global L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float(np.sum(a * a)) for a in arrays)))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for a in arrays:
            a *= scale
    return total


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


# -- checkpoint format (magic NTV1, see docs/formats.md) ---------------

_CKPT_MAGIC = b"NTV1"
_CKPT_VERSION = 1
_DTYPES = {0: "<f8", 1: "<f4"}
_DTYPE_CODES = {"float64": 0, "float32": 1}


class CheckpointError(ValueError):
    pass


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<II", _CKPT_VERSION, len(tensors)))
        for name in sorted(tensors):
            arr = np.asarray(tensors[name])
            if not arr.flags["C_CONTIGUOUS"]:
                arr = np.ascontiguousarray(arr)  # keeps 0-d shape when already contiguous
            code = _DTYPE_CODES.get(arr.dtype.name)
            if code is None:
                raise CheckpointError(f"{name}: unsupported dtype {arr.dtype}")
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<BB", code, arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(arr.astype(_DTYPES[code]).tobytes())


def load_tensors(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != _CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    off = 4

    def take(n):
        nonlocal off
        if off + n > len(data):
            raise CheckpointError(f"{path}: truncated")
        chunk = data[off:off + n]
        off += n
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version != _CKPT_VERSION:
        raise CheckpointError(f"{path}: version {version}, expected {_CKPT_VERSION}")
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        code, ndim = struct.unpack("<BB", take(2))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        n_items = int(np.prod(shape)) if shape else 1
        itemsize = 8 if code == 0 else 4
        arr = np.frombuffer(take(n_items * itemsize), dtype=_DTYPES[code]).reshape(shape)
        out[name] = arr.astype(float) if code == 1 else arr.copy()
    if off != len(data):
        raise CheckpointError(f"{path}: trailing bytes")
    return out
