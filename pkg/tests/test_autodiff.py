"""Unit and property tests for the autodiff engine.

Gradient correctness is checked against central finite differences
(h = 1e-3) on randomized inputs, one oracle per op class.
"""

import numpy as np
import pytest

import shapeforge.grad as G
from shapeforge.grad import nn, optim
from shapeforge.grad.rng import stream

H = 1e-3


def fd_grad(f, x, h=H):
    """Central finite differences of the scalar function f() w.r.t. ndarray x
    (f reads x in place)."""
    g = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return g


def check_grads(build_loss, inputs, rtol=1e-3, atol=1e-3):
    """build_loss() -> scalar Tensor reading the ndarrays in `inputs`.

    Compares the relative L2 error of each input's gradient against the
    finite-difference reference; the vector norm averages out float32
    rounding noise in the FD evaluations.
    """
    tensors = [G.Tensor(x, requires_grad=True) for x in inputs]
    loss = build_loss(*tensors)
    grads = G.gradients(loss, tensors)
    for t, x, g in zip(tensors, inputs, grads):
        ref = fd_grad(lambda: build_loss(*[G.Tensor(a) for a in inputs]).item(), x)
        denom = np.linalg.norm(ref)
        if denom < atol:
            assert np.linalg.norm(g - ref) < atol
        else:
            rel = np.linalg.norm(g - ref) / denom
            assert rel <= rtol, f"relative grad error {rel:.2e} > {rtol}"


def weighted(rng, t):
    # weights depend only on the output shape so repeated loss evaluations
    # (the FD oracle) see the same function
    w = stream(1234, "weights", t.data.shape).standard_normal(t.data.shape)
    return G.reduce_sum(G.mul(t, G.constant(w.astype(np.float32))))


# ---------------------------------------------------------------------------
# forward examples
# ---------------------------------------------------------------------------

def test_matmul_identity():
    a = G.Tensor([[1.0, 2.0], [3.0, 4.0]])
    out = G.matmul(a, G.Tensor(np.eye(2)))
    np.testing.assert_array_equal(out.data, [[1, 2], [3, 4]])


def test_exp_of_zero_is_one():
    out = G.exp(G.Tensor(np.zeros(7)))
    np.testing.assert_array_equal(out.data, np.ones(7, np.float32))


def conv3d_ref(x, w, b, stride, pad):
    """Direct-summation convolution oracle."""
    B, C, D, Hh, W = x.shape
    O, _, k, _, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad), (pad, pad)))
    do = (D + 2 * pad - k) // stride + 1
    ho = (Hh + 2 * pad - k) // stride + 1
    wo = (W + 2 * pad - k) // stride + 1
    out = np.zeros((B, O, do, ho, wo), np.float64)
    for bi in range(B):
        for o in range(O):
            for i in range(do):
                for j in range(ho):
                    for l in range(wo):
                        patch = xp[bi, :, i * stride:i * stride + k,
                                   j * stride:j * stride + k, l * stride:l * stride + k]
                        out[bi, o, i, j, l] = (patch * w[o]).sum() + b[o]
    return out


def test_conv3d_all_ones_center():
    x = G.Tensor(np.ones((1, 1, 4, 4, 4)))
    w = G.Tensor(np.ones((1, 1, 3, 3, 3)))
    out = G.conv3d(x, w, stride=1, padding=1)
    assert out.data.shape == (1, 1, 4, 4, 4)
    # interior positions see the full 3x3x3 window
    assert out.data[0, 0, 1, 1, 1] == 27.0
    assert out.data[0, 0, 2, 2, 2] == 27.0


@pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 1)])
def test_conv3d_matches_direct_summation(stride, pad):
    rng = stream(11, "conv", stride, pad)
    x = rng.standard_normal((2, 3, 5, 5, 5)).astype(np.float32)
    w = rng.standard_normal((4, 3, 3, 3, 3)).astype(np.float32)
    b = rng.standard_normal(4).astype(np.float32)
    out = G.conv3d(G.Tensor(x), G.Tensor(w), G.Tensor(b), stride=stride, padding=pad)
    ref = conv3d_ref(x, w, b, stride, pad)
    np.testing.assert_allclose(out.data, ref, rtol=1e-4, atol=1e-4)


# ---------------------------------------------------------------------------
# backward basics
# ---------------------------------------------------------------------------

def test_square_gradient():
    x = G.Tensor(3.0, requires_grad=True)
    G.backward(G.mul(x, x))
    np.testing.assert_allclose(x.grad, 6.0)


def test_tanh_gradient_at_zero():
    x = G.Tensor(0.0, requires_grad=True)
    G.backward(G.tanh(x))
    np.testing.assert_allclose(x.grad, 1.0)


def test_sum_gradient_is_ones():
    x = G.Tensor(np.arange(12).reshape(3, 4), requires_grad=True)
    G.backward(G.reduce_sum(x))
    np.testing.assert_array_equal(x.grad, np.ones((3, 4), np.float32))


def test_backward_rejects_non_scalar():
    x = G.Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        G.backward(G.mul(x, 2.0))


def test_unreached_leaf_gets_zero_gradient():
    x = G.Tensor(np.ones(3), requires_grad=True)
    y = G.Tensor(np.ones(3), requires_grad=True)
    loss = G.reduce_sum(x)
    gx, gy = G.gradients(loss, [x, y])
    np.testing.assert_array_equal(gx, np.ones(3, np.float32))
    np.testing.assert_array_equal(gy, np.zeros(3, np.float32))


def test_shape_mismatch_error_names_shapes():
    with pytest.raises(G.ShapeMismatch) as e:
        G.matmul(G.Tensor(np.ones((2, 3))), G.Tensor(np.ones((2, 3))))
    assert e.value.shapes == ((2, 3), (2, 3))
    assert "(2, 3)" in str(e.value)


def test_determinism_bit_identical():
    def run():
        rng = stream(99, "det")
        x = G.Tensor(rng.standard_normal((4, 6)).astype(np.float32), requires_grad=True)
        w = G.Tensor(rng.standard_normal((6, 3)).astype(np.float32), requires_grad=True)
        loss = G.reduce_sum(G.tanh(G.matmul(x, w)))
        G.backward(loss)
        return loss.data.copy(), x.grad.copy(), w.grad.copy()

    a = run()
    b = run()
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


# ---------------------------------------------------------------------------
# finite-difference property suite: every op class, randomized inputs
# ---------------------------------------------------------------------------

def _elemwise_cases():
    return {
        "add": lambda a, b: G.add(a, b),
        "add_broadcast": lambda a, b: G.add(a, G.reshape(G.reduce_sum(b, axis=0, keepdims=True), (1, -1))),
        "mul": lambda a, b: G.mul(a, b),
        "div": lambda a, b: G.div(a, G.add(G.mul(b, b), 0.5)),
        "where": lambda a, b: G.where(np.arange(10).reshape(2, 5) % 2 == 0, a, b),
    }


@pytest.mark.parametrize("name", sorted(_elemwise_cases()))
@pytest.mark.parametrize("seed", range(5))
def test_fd_elemwise(name, seed):
    rng = stream(seed, "fd", name)
    a = rng.standard_normal((2, 5)).astype(np.float32)
    b = rng.standard_normal((2, 5)).astype(np.float32)
    op = _elemwise_cases()[name]
    check_grads(lambda ta, tb: weighted(rng, op(ta, tb)), [a, b])


def _unary_cases():
    return {
        "exp": (G.exp, lambda r: r.standard_normal(10) * 0.5),
        "log": (G.log, lambda r: r.uniform(0.5, 2.0, 10)),
        "tanh": (G.tanh, lambda r: r.standard_normal(10)),
        "relu": (G.relu, lambda r: np.where(np.abs(z := r.standard_normal(10)) < 0.05, 0.5, z)),
        "sigmoid": (G.sigmoid, lambda r: r.standard_normal(10)),
        "pow": (lambda t: G.pow_scalar(t, 3.0), lambda r: r.standard_normal(10)),
        "sqrt": (lambda t: G.pow_scalar(t, 0.5), lambda r: r.uniform(0.5, 2.0, 10)),
    }


@pytest.mark.parametrize("name", sorted(_unary_cases()))
@pytest.mark.parametrize("seed", range(5))
def test_fd_unary(name, seed):
    op, sampler = _unary_cases()[name]
    rng = stream(seed, "fd_un", name)
    x = sampler(rng).astype(np.float32)
    check_grads(lambda t: weighted(rng, op(t)), [x])


@pytest.mark.parametrize("seed", range(5))
def test_fd_matmul(seed):
    rng = stream(seed, "fd_mm")
    a = rng.standard_normal((2, 5)).astype(np.float32)
    b = rng.standard_normal((5, 2)).astype(np.float32)
    check_grads(lambda ta, tb: weighted(rng, G.matmul(ta, tb)), [a, b])


def _reduction_cases():
    return {
        "sum_all": lambda t: G.reduce_sum(t),
        "sum_axis": lambda t: G.reduce_sum(t, axis=1),
        "mean_axis": lambda t: G.reduce_mean(t, axis=0),
        "max_axis": lambda t: G.reduce_max(t, axis=1),
        "softmax": lambda t: G.softmax(t, axis=1),
        "log_softmax": lambda t: G.log_softmax(t, axis=1),
    }


@pytest.mark.parametrize("name", sorted(_reduction_cases()))
@pytest.mark.parametrize("seed", range(5))
def test_fd_reductions(name, seed):
    rng = stream(seed, "fd_red", name)
    x = rng.standard_normal((2, 5)).astype(np.float32)
    op = _reduction_cases()[name]

    def loss(t):
        out = op(t)
        return weighted(rng, out) if out.data.ndim else out

    check_grads(loss, [x])


def _shape_cases():
    return {
        "reshape": lambda t: G.reshape(t, (5, 2)),
        "transpose": lambda t: G.transpose(t, (1, 0)),
        "slice": lambda t: G.take(t, (slice(None), slice(1, 4))),
        "concat": lambda t: G.concat([t, G.mul(t, 2.0)], axis=1),
    }


@pytest.mark.parametrize("name", sorted(_shape_cases()))
@pytest.mark.parametrize("seed", range(5))
def test_fd_shape_ops(name, seed):
    rng = stream(seed, "fd_shape", name)
    x = rng.standard_normal((2, 5)).astype(np.float32)
    op = _shape_cases()[name]
    check_grads(lambda t: weighted(rng, op(t)), [x])


@pytest.mark.parametrize("seed", range(5))
def test_fd_embedding(seed):
    rng = stream(seed, "fd_emb")
    table = rng.standard_normal((6, 4)).astype(np.float32)
    ids = rng.integers(0, 6, size=(3, 2))
    check_grads(lambda t: weighted(rng, G.embedding(t, ids)), [table])


@pytest.mark.parametrize("stride,pad", [(1, 1), (2, 1)])
@pytest.mark.parametrize("seed", range(3))
def test_fd_conv3d(stride, pad, seed):
    rng = stream(seed, "fd_conv", stride, pad)
    x = rng.standard_normal((2, 2, 4, 4, 4)).astype(np.float32) * 0.5
    w = rng.standard_normal((3, 2, 3, 3, 3)).astype(np.float32) * 0.5
    b = rng.standard_normal(3).astype(np.float32)
    check_grads(
        lambda tx, tw, tb: weighted(rng, G.conv3d(tx, tw, tb, stride=stride, padding=pad)),
        [x, w, b], rtol=2e-3, atol=2e-3)


@pytest.mark.parametrize("seed", range(3))
def test_fd_batchnorm_train(seed):
    rng = stream(seed, "fd_bn")
    x = rng.standard_normal((6, 3)).astype(np.float32)
    gamma = rng.uniform(0.5, 1.5, 3).astype(np.float32)
    beta = rng.standard_normal(3).astype(np.float32)

    def loss(tx, tg, tb):
        bn = nn.BatchNorm(3)
        bn.gamma = tg
        bn.beta = tb
        return weighted(rng, bn(tx))

    check_grads(loss, [x, gamma, beta], rtol=3e-3, atol=3e-3)


def test_batchnorm_eval_uses_running_stats():
    bn = nn.BatchNorm(2)
    rng = stream(0, "bn_eval")
    for _ in range(20):
        bn(G.Tensor(rng.standard_normal((16, 2)).astype(np.float32) * 2 + 1))
    bn.eval()
    x = np.asarray([[1.0, 1.0]], np.float32)
    out1 = bn(G.Tensor(x)).data
    out2 = bn(G.Tensor(x)).data
    assert np.array_equal(out1, out2)  # eval mode has no state updates


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

def test_adam_single_step_analytic():
    p = G.Tensor(1.0, requires_grad=True)
    opt = optim.Adam([("p", p)], lr=0.1)
    p.grad = np.asarray(1.0, np.float32)
    opt.step()
    assert opt.t == 1
    # mhat = vhat = 1 -> update = lr / (1 + eps)
    np.testing.assert_allclose(p.data, 0.9, atol=1e-6)


def test_adam_zero_gradient_leaves_params():
    p = G.Tensor([1.0, -2.0], requires_grad=True)
    opt = optim.Adam([("p", p)], lr=0.1)
    p.grad = np.zeros(2, np.float32)
    opt.step()
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_adam_descends_quadratic():
    # hand-simulated scalar Adam on f(p) = p^2, compared step by step
    p = G.Tensor(1.0, requires_grad=True)
    opt = optim.Adam([("p", p)], lr=0.1)
    m = v = 0.0
    trail = [abs(p.item())]
    for t in range(1, 6):
        g = 2.0 * p.item()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = p.item() - 0.1 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        opt.zero_grad()
        G.backward(G.mul(p, p))
        opt.step()
        np.testing.assert_allclose(p.item(), ref, rtol=1e-4)
        trail.append(abs(p.item()))
    assert all(b < a for a, b in zip(trail, trail[1:]))


def test_adam_aborts_on_nan_gradient():
    p = G.Tensor([1.0, 2.0], requires_grad=True)
    opt = optim.Adam([("p", p)], lr=0.1)
    p.grad = np.asarray([np.nan, 0.0], np.float32)
    with pytest.raises(optim.NonFiniteGradient) as e:
        opt.step()
    assert e.value.param == "p"
    assert opt.t == 0
    np.testing.assert_array_equal(p.data, [1.0, 2.0])


# ---------------------------------------------------------------------------
# checkpoint round trip
# ---------------------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    from shapeforge.grad import checkpoint as ckpt

    rng = stream(5, "ckpt")
    arrays = {
        "enc.w": rng.standard_normal((3, 4)).astype(np.float32),
        "enc.b": rng.standard_normal(4).astype(np.float32),
    }
    ckpt.save_checkpoint(tmp_path / "m", "demo", {"lr": 1e-4}, arrays)
    manifest, loaded = ckpt.load_checkpoint(tmp_path / "m")
    assert manifest["architecture"] == "demo"
    assert manifest["params"]["enc.w"] == [3, 4]
    for k in arrays:
        np.testing.assert_array_equal(arrays[k], loaded[k])
    h1 = ckpt.checkpoint_hash(tmp_path / "m")
    ckpt.save_checkpoint(tmp_path / "m2", "demo", {"lr": 1e-4}, arrays)
    assert h1 == ckpt.checkpoint_hash(tmp_path / "m2")
