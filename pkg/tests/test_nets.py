import numpy as np
import pytest

from motionkit.nets import (
    Adam,
    CheckpointError,
    Mlp,
    MlpSpec,
    clip_grad_norm,
    desk_mlp_spec,
    load_tensors,
    save_tensors,
)


def test_desk_spec_divides_by_64():
    spec = desk_mlp_spec()
    assert spec.encoder == (32, 16, 8, 8)
    assert spec.control_decoder == (32, 32, 16, 16, 8, 8)
    assert spec.critic == (32, 32, 16, 16, 8, 8)


def test_paper_spec_widths():
    spec = MlpSpec()
    assert spec.encoder == (2048, 1024, 512, 512)
    assert spec.motion_decoder == (2048, 1024, 512, 512)


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x).reshape(-1)
        e[i] = h
        e = e.reshape(x.shape)
        g.reshape(-1)[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("activation", ["elu", "relu", "tanh", "identity"])
def test_backward_matches_fd_wrt_input(activation):
    rng = np.random.default_rng(0)
    net = Mlp(5, (8, 6), 3, activation=activation, rng=rng)
    x = rng.normal(size=5) * 0.5

    def loss(xv):
        y = net(xv)
        return float(np.sum(y**2))

    y, cache = net.forward(x)
    dx, _ = net.backward(cache, 2 * y)
    fd = numeric_grad(loss, x)
    assert np.max(np.abs(dx - fd)) < 1e-6


def test_backward_matches_fd_wrt_params():
    rng = np.random.default_rng(1)
    net = Mlp(4, (6,), 2, activation="elu", rng=rng)
    x = rng.normal(size=(3, 4))

    y, cache = net.forward(x)
    _, grads = net.backward(cache, 2 * y)

    h = 1e-6
    for li, (w, b) in enumerate(zip(net.weights, net.biases)):
        for arr, g in ((w, grads[li][0]), (b, grads[li][1])):
            flat = arr.reshape(-1)
            idx = rng.integers(0, flat.size, size=min(10, flat.size))
            for i in idx:
                old = flat[i]
                flat[i] = old + h
                up = float(np.sum(net(x) ** 2))
                flat[i] = old - h
                dn = float(np.sum(net(x) ** 2))
                flat[i] = old
                fd = (up - dn) / (2 * h)
                assert np.isclose(fd, g.reshape(-1)[i], rtol=1e-5, atol=1e-8)


def test_batch_and_single_agree():
    net = Mlp(3, (5,), 2, rng=np.random.default_rng(2))
    x = np.random.default_rng(3).normal(size=(4, 3))
    batch = net(x)
    singles = np.stack([net(row) for row in x])
    assert np.allclose(batch, singles)


def test_clip_grad_norm():
    arrays = [np.array([3.0, 0.0]), np.array([[0.0, 4.0]])]
    total = clip_grad_norm(arrays, 1.0)
    assert np.isclose(total, 5.0)
    new_norm = np.sqrt(sum(float(np.sum(a * a)) for a in arrays))
    assert np.isclose(new_norm, 1.0)


def test_adam_reduces_quadratic():
    rng = np.random.default_rng(4)
    x = [rng.normal(size=5)]
    opt = Adam(x, lr=0.1)
    for _ in range(200):
        opt.step([2 * x[0]])
    assert np.max(np.abs(x[0])) < 1e-2


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    tensors = {
        "enc.w0": rng.normal(size=(4, 3)),
        "enc.b0": rng.normal(size=3),
        "scalar": np.array(2.5),
    }
    path = tmp_path / "params.ntv1"
    save_tensors(path, tensors)
    back = load_tensors(path)
    assert set(back) == set(tensors)
    for k in tensors:
        assert np.array_equal(back[k], tensors[k])


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ntv1"
    path.write_bytes(b"nope")
    with pytest.raises(CheckpointError):
        load_tensors(path)
