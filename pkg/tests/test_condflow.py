import numpy as np
import pytest

import shapeforge.grad as G
from shapeforge.grad import tensor as T
from shapeforge.grad.rng import StreamPool, stream
from shapeforge import flow as F

from helpers import fd_weight_check

LOG_2PI = np.log(2 * np.pi)


def perturb(model, rng, scale=0.2):
    """Nudge every parameter so the flow is non-trivial but well-conditioned."""
    for _, p in model.named_parameters():
        p.data += (rng.standard_normal(p.data.shape) * scale).astype(np.float32)
    return model


def small_flow(seed, family="realnvp", mask="dimension_wise",
               conditioning="affine_coupling", dim=16, cond=8, hidden=48,
               batch_norm=True, perturbed=True):
    pool = StreamPool(seed)
    model = F.build_flow(dim, cond, pool.stream("init"), family=family,
                         n_blocks=5, hidden=hidden, mask_kind=mask,
                         conditioning=conditioning, batch_norm=batch_norm)
    if perturbed:
        perturb(model, pool.stream("perturb"))
    model.eval()
    return model


# ---------------------------------------------------------------------------
# masks
# ---------------------------------------------------------------------------

def test_checkerboard_mask_odd_indices():
    m = F.build_mask("checkerboard", 6)
    assert list(m) == [False, True, False, True, False, True]


def test_dimension_mask_first_half():
    m = F.build_mask("dimension_wise", 5)
    assert list(m) == [True, True, True, False, False]


@pytest.mark.parametrize("kind", F.MASK_KINDS)
def test_consecutive_masks_complementary(kind):
    stack = F.mask_stack(kind, 9, 4)
    for a, b in zip(stack, stack[1:]):
        assert np.array_equal(a, ~b)
        assert np.all(a | b)  # union of transformed dims covers everything


def test_unknown_mask_kind():
    with pytest.raises(ValueError):
        F.build_mask("diagonal", 4)


# ---------------------------------------------------------------------------
# coupling block closed forms
# ---------------------------------------------------------------------------

def test_identity_coupling_zero_nets():
    blk = F.CouplingBlock(F.build_mask("dimension_wise", 6), 0, stream(0, "cb"), hidden=16)
    x = T.Tensor(stream(1, "cbx").standard_normal((4, 6)).astype(np.float32))
    z, ld = blk.forward(x, None)
    np.testing.assert_array_equal(z.data, x.data)
    np.testing.assert_array_equal(ld.data, np.zeros(4, np.float32))


def test_constant_scale_logdet_closed_form():
    sigma = 0.5
    dim = 8
    blk = F.CouplingBlock(F.build_mask("dimension_wise", dim), 0, stream(2, "cs"), hidden=16)
    # force s_raw = atanh(sigma) via the output bias, keep t = 0
    blk.s_net.layers[-1].bias.data[:] = np.arctanh(sigma)
    x = T.Tensor(stream(3, "csx").standard_normal((5, dim)).astype(np.float32))
    z, ld = blk.forward(x, None)
    n_transformed = dim - (dim + 1) // 2
    np.testing.assert_allclose(ld.data, n_transformed * sigma, rtol=1e-6)
    np.testing.assert_allclose(z.data[:, blk.out_idx],
                               x.data[:, blk.out_idx] * np.exp(sigma), rtol=1e-5)


# ---------------------------------------------------------------------------
# log-det exactness: finite-difference dense Jacobian oracle at D = 8
# ---------------------------------------------------------------------------

def _jacobian_fd(fn, e, h):
    d = e.size
    jac = np.zeros((d, d))
    for j in range(d):
        ep, em = e.copy(), e.copy()
        ep[j] += h
        em[j] -= h
        jac[:, j] = (fn(ep) - fn(em)) / (2 * h)
    return jac


def numeric_logdet(fn, e, h=4e-3):
    """log|det J| by central differences with Richardson extrapolation
    (cancels the O(h^2) truncation term that float32 evaluations magnify)."""
    j1 = _jacobian_fd(fn, e, h)
    j2 = _jacobian_fd(fn, e, 2 * h)
    jac = (4.0 * j1 - j2) / 3.0
    sign, logdet = np.linalg.slogdet(jac)
    assert sign > 0
    return logdet


FAMILIES = [
    ("realnvp", "checkerboard", "affine_coupling"),
    ("realnvp", "dimension_wise", "affine_coupling"),
    ("realnvp", "dimension_wise", "prior_network"),
    ("maf", "autoregressive", "affine_coupling"),
]


@pytest.mark.parametrize("family,mask,conditioning", FAMILIES)
def test_logdet_matches_dense_jacobian(family, mask, conditioning):
    dim = 8
    kw = {} if family == "maf" else {"mask": mask, "conditioning": conditioning}
    model = small_flow(5, family=family, dim=dim, cond=4, hidden=24, **kw)
    rng = stream(6, "ld", family, mask, conditioning)
    for _ in range(3):
        e = rng.standard_normal(dim).astype(np.float32)
        c = rng.standard_normal(4).astype(np.float32)
        ct = T.Tensor(c.reshape(1, -1))

        def push(x):
            with G.no_grad():
                z, _ = model.forward(T.Tensor(x.astype(np.float32).reshape(1, -1)), ct)
            return z.data[0].astype(np.float64)

        with G.no_grad():
            _, ld = model.forward(T.Tensor(e.reshape(1, -1)), ct)
        ref = numeric_logdet(push, e.astype(np.float64))
        assert abs(float(ld.data[0]) - ref) < 1e-3


# ---------------------------------------------------------------------------
# invertibility: >= 200 random model/input cases across all variants
# ---------------------------------------------------------------------------

def test_roundtrip_property_200_cases():
    cases = 0
    for family, mask, conditioning in FAMILIES:
        for model_seed in range(5):
            kw = {} if family == "maf" else {"mask": mask, "conditioning": conditioning}
            model = small_flow(100 + model_seed, family=family, dim=12, cond=6,
                               hidden=32, **kw)
            rng = stream(7, "rt", family, mask, conditioning, model_seed)
            e = rng.standard_normal((10, 12)).astype(np.float32)
            c = T.Tensor(rng.standard_normal((10, 6)).astype(np.float32))
            with G.no_grad():
                z, _ = model.forward(T.Tensor(e), c)
                back = model.inverse(z, c)
            err = np.abs(back.data - e).max()
            assert err < 1e-4, f"{family}/{mask}/{conditioning}: {err}"
            cases += 10
    assert cases >= 200


def test_identity_model_inverse_is_identity():
    model = small_flow(8, perturbed=False, batch_norm=False)
    z = stream(9, "inv").standard_normal((4, 16)).astype(np.float32)
    c = T.Tensor(np.zeros((4, 8), np.float32))
    out = model.inverse(T.Tensor(z), c)
    np.testing.assert_array_equal(out.data, z)


# ---------------------------------------------------------------------------
# log_prob closed forms
# ---------------------------------------------------------------------------

def test_identity_flow_standard_normal_density():
    pool = StreamPool(10)
    model = F.FlowModel(2, 2, pool.stream("i"), n_blocks=5, hidden=8,
                        batch_norm=False)
    model.eval()
    lp = model.log_prob_values(np.zeros((1, 2), np.float32), np.zeros((1, 2), np.float32))
    np.testing.assert_allclose(lp[0], -np.log(2 * np.pi), atol=1e-6)


def test_fixed_scale_block_shifts_logprob_by_closed_form():
    sigma = 0.4
    dim = 4
    pool = StreamPool(11)
    model = F.FlowModel(dim, 0, pool.stream("i"), n_blocks=1, hidden=8,
                        batch_norm=False)
    blk = model.blocks[0]
    blk.s_net.layers[-1].bias.data[:] = np.arctanh(sigma)
    model.eval()
    e = stream(12, "aff").standard_normal((3, dim)).astype(np.float32)
    c = np.zeros((3, 0), np.float32)
    lp = model.log_prob_values(e, c)
    # closed form: z = [kept, rest*exp(sigma)], logdet = n_t * sigma
    kept = e[:, blk.in_idx]
    rest = e[:, blk.out_idx] * np.exp(sigma)
    z = np.concatenate([kept, rest], axis=1)
    ref = -0.5 * (z**2).sum(1) - 0.5 * dim * LOG_2PI + len(blk.out_idx) * sigma
    np.testing.assert_allclose(lp, ref, rtol=1e-5)


def test_untrained_flow_density_integrates_to_one():
    # quadrature of exp(log_prob) over [-6, 6]^2 for a mildly perturbed flow
    model = small_flow(13, dim=2, cond=2, hidden=16)
    n = 240
    xs = np.linspace(-6, 6, n)
    cell = (xs[1] - xs[0]) ** 2
    gx, gy = np.meshgrid(xs, xs)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1).astype(np.float32)
    c = np.zeros((len(pts), 2), np.float32)
    total = 0.0
    for lo in range(0, len(pts), 8192):
        total += np.exp(model.log_prob_values(pts[lo:lo + 8192], c[lo:lo + 8192])).sum()
    assert abs(total * cell - 1.0) <= 0.02


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("family", ["realnvp", "maf"])
def test_nll_gradients_match_fd(family):
    pool = StreamPool(14)
    model = F.build_flow(6, 3, pool.stream("init"), family=family, n_blocks=2,
                         hidden=12, batch_norm=True)
    model.train()
    e = T.Tensor(pool.stream("e").standard_normal((8, 6)).astype(np.float32))
    c = T.Tensor(pool.stream("c").standard_normal((8, 3)).astype(np.float32))

    def build_loss():
        return T.mul(T.reduce_mean(model.log_prob(e, c)), -1.0)

    fd_weight_check(build_loss, list(model.named_parameters()), 20,
                    pool.stream("pick"), rtol=2e-2, atol=2e-3)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_mean_mode_deterministic():
    model = small_flow(15)
    c = stream(16, "c").standard_normal(8).astype(np.float32)
    a = model.sample(c, mean_mode=True)
    b = model.sample(c, mean_mode=True)
    assert a.shape == (1, 16)
    assert np.array_equal(a, b)


def test_sample_reproducible_and_prefix_stable():
    model = small_flow(17)
    c = stream(18, "c").standard_normal(8).astype(np.float32)
    s5 = model.sample(c, n=5, rng=stream(19, "z"))
    s5b = model.sample(c, n=5, rng=stream(19, "z"))
    s6 = model.sample(c, n=6, rng=stream(19, "z"))
    assert np.array_equal(s5, s5b)
    assert np.array_equal(s6[:5], s5)


def test_samples_live_in_high_density_region():
    model = small_flow(20)
    rng = stream(21, "zz")
    c = rng.standard_normal(8).astype(np.float32)
    samples = model.sample(c, n=64, rng=rng)
    cond = np.tile(c, (64, 1))
    lp_samples = model.log_prob_values(samples, cond).mean()
    raw = rng.standard_normal((64, 16)).astype(np.float32)
    lp_raw = model.log_prob_values(raw, cond).mean()
    assert lp_samples >= lp_raw


# ---------------------------------------------------------------------------
# stage-2 training
# ---------------------------------------------------------------------------

def toy_tables(seed=22, n=96, d=8, e_dim=4, k=3):
    """Latents linearly generated from per-view conditions plus noise."""
    rng = stream(seed, "toy")
    conds = rng.standard_normal((n, k, e_dim)).astype(np.float32)
    w = rng.standard_normal((e_dim, d)).astype(np.float32)
    base = conds.mean(axis=1) @ w
    lat = (base + 0.1 * rng.standard_normal((n, d))).astype(np.float32)
    return lat, conds


def test_train_stage2_reduces_nll():
    lat, conds = toy_tables()
    model, hist = F.train_stage2(lat, conds, epochs=30, batch=16, lr=1e-3,
                                 hidden=32, n_blocks=3, seed=1)
    assert hist[-1] < hist[0]
    held = F.mean_nll(model, lat, conds[:, 0])
    assert np.isfinite(held)


def test_train_stage2_rejects_misaligned_tables():
    lat, conds = toy_tables()
    with pytest.raises(ValueError):
        F.train_stage2(lat[:10], conds, epochs=1)


def test_conditioning_is_effective_after_training():
    lat, conds = toy_tables()
    model, _ = F.train_stage2(lat, conds, epochs=30, batch=16, lr=1e-3,
                              hidden=32, n_blocks=3, seed=2)
    a = model.sample(conds[0, 0], mean_mode=True)
    b = model.sample(conds[1, 0], mean_mode=True)
    assert not np.allclose(a, b, atol=1e-3)


def test_views_ablation_records_both_cells():
    lat, conds = toy_tables(k=4)
    out = {}
    for k_use in (1, 4):
        model, hist = F.train_stage2(lat, conds, epochs=8, batch=16, lr=1e-3,
                                     hidden=24, n_blocks=2, seed=3,
                                     views_per_shape=k_use)
        out[k_use] = F.mean_nll(model, lat, conds[:, 0])
    assert set(out) == {1, 4}
    assert all(np.isfinite(v) for v in out.values())
