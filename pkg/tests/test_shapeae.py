import numpy as np
import pytest

import shapeforge.grad as G
from shapeforge import synthshape as S
from shapeforge import shapeae as A
from shapeforge.grad import checkpoint as ckpt
from shapeforge.grad import nn
from shapeforge.grad import tensor as T
from shapeforge.grad.rng import StreamPool, stream

from helpers import fd_weight_check


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    cfg = S.CorpusConfig(shapes_per_category=3, resolution=16, views=2,
                         queries=512, image_size=32, test_fraction=0.2,
                         render_resolution=32, seed=31)
    return S.build_corpus(cfg, tmp_path_factory.mktemp("sae") / "c")


def small_model(seed=0, resolution=16, decoder="concat", encoder="vox"):
    return A.ShapeAutoencoder(32, resolution, stream(seed, "sae_init"),
                              encoder=encoder, decoder=decoder,
                              channels=(4, 8, 16, 32), width=32, blocks=5)


# ---------------------------------------------------------------------------
# encode
# ---------------------------------------------------------------------------

def test_encode_without_noise_is_deterministic(corpus):
    model = small_model().eval()
    grids = np.stack([corpus.voxels("train", i) for i in range(2)]).astype(np.float32)
    a = model.encode(grids).data
    b = model.encode(grids).data
    assert np.array_equal(a, b)


def test_encode_noise_reproducible_per_stream(corpus):
    model = small_model().eval()
    grids = corpus.voxels("train", 0).astype(np.float32)[None]
    a = model.encode(grids, 0.1, stream(5, "eps")).data
    b = model.encode(grids, 0.1, stream(5, "eps")).data
    assert np.array_equal(a, b)
    c = model.encode(grids, 0.1, stream(6, "eps")).data
    assert not np.array_equal(a, c)


def test_encode_noise_requires_stream(corpus):
    model = small_model().eval()
    grids = corpus.voxels("train", 0).astype(np.float32)[None]
    with pytest.raises(ValueError):
        model.encode(grids, 0.1)


def test_encode_noise_empirical_std(corpus):
    model = small_model().eval()
    grids = np.repeat(corpus.voxels("train", 0).astype(np.float32)[None], 100, axis=0)
    clean = model.encode(grids).data
    rng = stream(7, "std")
    draws = []
    for _ in range(100):  # 100 x 100 = 1e4 noise draws
        noisy = model.encode(grids, A.LATENT_NOISE_STD, rng).data
        draws.append(noisy - clean)
    eps = np.concatenate(draws)  # (10000, D)
    stds = eps.std(axis=0)
    assert np.all(np.abs(stds - 0.1) <= 0.005)


def test_encoder_rejects_wrong_resolution():
    model = small_model()
    with pytest.raises(ValueError):
        model.encode(np.zeros((1, 8, 8, 8), np.float32))


# ---------------------------------------------------------------------------
# decode
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("decoder", ["concat", "cbn"])
def test_decode_pure_and_in_unit_interval(decoder):
    model = small_model(decoder=decoder).eval()
    e = T.Tensor(stream(1, "lat").standard_normal((1, 32)).astype(np.float32))
    pt = np.asarray([[[0.1, -0.2, 0.3], [0.1, -0.2, 0.3]]], np.float32)
    with G.no_grad():
        out = model.decode_probabilities(e, pt).data
    assert out[0, 0] == out[0, 1]
    assert np.all((out > 0) & (out < 1))


def test_decode_invariant_to_point_order():
    model = small_model().eval()
    e = T.Tensor(stream(2, "lat").standard_normal((1, 32)).astype(np.float32))
    pts = stream(3, "pts").uniform(-0.5, 0.5, (1, 64, 3)).astype(np.float32)
    perm = stream(4, "perm").permutation(64)
    with G.no_grad():
        a = model.decode_probabilities(e, pts).data[0]
        b = model.decode_probabilities(e, pts[:, perm]).data[0]
    np.testing.assert_allclose(a[perm], b, atol=1e-6)


def test_mse_loss_zero_for_perfect_predictions():
    targ = np.asarray([0.0, 1.0, 1.0, 0.0], np.float32)
    probs = T.Tensor(targ)
    diff = T.add(probs, T.constant(-targ))
    assert T.reduce_mean(T.mul(diff, diff)).item() == 0.0


# ---------------------------------------------------------------------------
# chamfer
# ---------------------------------------------------------------------------

def test_chamfer_identical_sets_zero():
    pts = stream(8, "ch").uniform(-0.5, 0.5, (20, 3))
    assert A.chamfer(pts, pts) == 0.0


def test_chamfer_unit_offset_convention():
    assert A.chamfer([[0.0, 0.0, 0.0]], [[1.0, 0.0, 0.0]]) == pytest.approx(2.0)


def test_chamfer_rejects_empty():
    with pytest.raises(ValueError):
        A.chamfer(np.zeros((0, 3)), [[0, 0, 0]])


def test_chamfer_matches_bruteforce():
    rng = stream(9, "chbf")
    a = rng.uniform(-1, 1, (50, 3))
    b = rng.uniform(-1, 1, (37, 3))
    ref = 0.0
    for p in a:
        ref += min(((p - q) ** 2).sum() for q in b) / len(a)
    for q in b:
        ref += min(((q - p) ** 2).sum() for p in a) / len(b)
    assert A.chamfer(a, b) == pytest.approx(ref, rel=1e-12)


def test_chamfer_loss_gradient_matches_fd():
    rng = stream(10, "chg")
    pred = G.Tensor(rng.uniform(-1, 1, (2, 8, 3)).astype(np.float32), requires_grad=True)
    target = rng.uniform(-1, 1, (2, 6, 3)).astype(np.float32)
    loss = A.chamfer_loss(pred, target)
    (g,) = G.gradients(loss, [pred])
    h = 1e-3
    for _ in range(10):
        i = tuple(rng.integers(0, s) for s in pred.data.shape)
        orig = pred.data[i]
        pred.data[i] = orig + h
        fp = A.chamfer_loss(G.Tensor(pred.data), target).item()
        pred.data[i] = orig - h
        fm = A.chamfer_loss(G.Tensor(pred.data), target).item()
        pred.data[i] = orig
        np.testing.assert_allclose(g[i], (fp - fm) / (2 * h), rtol=5e-2, atol=5e-3)


# ---------------------------------------------------------------------------
# stage-1 training
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def trained_stage1(corpus):
    model, history = A.train_stage1(
        corpus, epochs=60, batch=8, lr=1e-3, points_per_step=256,
        latent_dim=32, channels=(4, 8, 16, 32), width=64, seed=3)
    return model, history


def test_stage1_loss_decreases(trained_stage1):
    _, history = trained_stage1
    assert np.isfinite(history).all()
    assert history[-1] < history[0]


def test_trained_decoder_close_to_oracle(corpus, trained_stage1):
    model, _ = trained_stage1
    # pick a train-set box
    idx = next(i for i in range(corpus.count("train"))
               if corpus.meta("train", i)["category"] == "box")
    spec = corpus.spec("train", idx)
    e = model.encode_clean(corpus.voxels("train", idx).astype(np.float32)[None])[0]
    pts, occ = S.sample_queries(spec, 2048, stream(12, "fresh"))
    with G.no_grad():
        probs = model.decode_probabilities(T.Tensor(e[None]), pts[None]).data[0]
    assert np.mean(np.abs(probs - occ)) < 0.1


def test_latent_table_regenerates_from_checkpoint(corpus, trained_stage1, tmp_path):
    model, _ = trained_stage1
    table = A.latent_table(model, corpus)
    ckpt.save_checkpoint(tmp_path / "s1", "stage1", model.hyperparameters(),
                         model.state_arrays())
    fresh = A.ShapeAutoencoder(32, corpus.cfg.resolution, stream(99, "other"),
                               channels=(4, 8, 16, 32), width=64, blocks=5)
    _, arrays = ckpt.load_checkpoint(tmp_path / "s1")
    fresh.load_state_arrays(arrays)
    fresh.eval()
    table2 = A.latent_table(fresh, corpus)
    assert np.array_equal(table, table2)


def test_latent_table_save_load_roundtrip(corpus, trained_stage1, tmp_path):
    model, _ = trained_stage1
    table = A.latent_table(model, corpus)
    ids = [corpus.meta("train", i)["id"] for i in range(corpus.count("train"))]
    A.save_latent_table(tmp_path / "lat", table, ids)
    loaded, index = A.load_latent_table(tmp_path / "lat")
    assert np.array_equal(table, loaded)
    assert index["rows"][str(ids[3])] == 3


def test_stage1_gradients_match_fd(corpus):
    pool = StreamPool(17)
    model = A.ShapeAutoencoder(8, 16, pool.stream("init"),
                               channels=(2, 3, 4, 5), width=16, blocks=2)
    grids = np.stack([corpus.voxels("train", i) for i in range(2)]).astype(np.float32)
    pts, occ = corpus.queries("train", 0)
    pts = np.stack([pts[:32], pts[32:64]])
    occ = np.stack([occ[:32], occ[32:64]])
    eps = pool.stream("eps").normal(0, 0.1, (2, 8)).astype(np.float32)

    def build_loss():
        e = T.add(model.encoder(grids), T.constant(eps))
        probs = model.decode_probabilities(e, pts)
        diff = T.add(probs, T.constant(-occ))
        return T.reduce_mean(T.mul(diff, diff))

    fd_weight_check(build_loss, list(model.named_parameters()), 20,
                    pool.stream("pick"), rtol=2e-2, atol=2e-3)


# ---------------------------------------------------------------------------
# reconstruction metrics
# ---------------------------------------------------------------------------

class OracleModel(nn.Module):
    """Stub that decodes the exact analytic occupancy; latents carry the
    sample index."""

    encoder_kind = "vox"
    latent_dim = 1

    def __init__(self, corpus, split):
        super().__init__()
        self._specs = {}
        for i in range(corpus.count(split)):
            key = corpus.voxels(split, i).astype(np.float32).tobytes()
            self._specs[key] = (i, corpus.spec(split, i))
        self._by_index = {i: spec for i, spec in self._specs.values()}

    def encode_clean(self, inputs):
        return np.asarray([[float(self._specs[np.asarray(g, np.float32).tobytes()][0])]
                           for g in inputs], np.float32)

    def decode_probabilities(self, e, points):
        spec = self._by_index[int(round(float(e.data[0, 0])))]
        occ = S.occupancy(spec, points[0]).astype(np.float32)
        return T.Tensor(occ[None])


def test_metrics_perfect_model(corpus):
    model = OracleModel(corpus, "test")
    out = A.reconstruction_metrics(model, corpus, "test", n_points=256, max_samples=3)
    assert out["mse"] == 0.0
    assert out["iou"] == 1.0


def test_metrics_empty_split_raises(corpus, trained_stage1):
    model, _ = trained_stage1
    with pytest.raises(ValueError):
        A.reconstruction_metrics(model, corpus, "nope")


def test_grid_iou_conventions():
    a = np.zeros((4, 4, 4), bool)
    b = np.zeros((4, 4, 4), bool)
    b[0, 0, 0] = True
    assert A.grid_iou(a, b) == 0.0  # disjoint
    assert A.grid_iou(b, b) == 1.0
    assert A.grid_iou(a, a) == 0.0  # both empty counts as 0


# ---------------------------------------------------------------------------
# point-cloud variant
# ---------------------------------------------------------------------------

def test_folding_decoder_count_and_finite():
    dec = A.FoldingDecoder(16, stream(20, "fold"), grid_side=16)
    e = T.Tensor(stream(21, "fl").standard_normal((2, 16)).astype(np.float32))
    with G.no_grad():
        out = dec(e).data
    assert out.shape == (2, 256, 3)
    assert np.all(np.isfinite(out))


def test_pointcloud_variant_training(corpus):
    model, history, clouds = A.train_pointcloud_variant(
        corpus, epochs=12, batch=8, lr=1e-3, latent_dim=32, grid_side=16,
        cloud_points=512, input_points=256, seed=5)
    assert history[-1] < history[0]
    # per-item improvement vs the untrained model on >= 90% of train items
    fresh_pool = StreamPool(5)
    fresh = A.PointAutoencoder(
        A.PointNetEncoder(32, fresh_pool.stream("init")),
        A.FoldingDecoder(32, fresh_pool.stream("init", "fold"), grid_side=16))
    fresh.eval()
    wins = 0
    n = len(clouds)
    for i in range(n):
        target = clouds[i][None]
        with G.no_grad():
            before = A.chamfer(fresh(target[:, :256]).data[0], clouds[i])
            after = A.chamfer(model(target[:, :256]).data[0], clouds[i])
        wins += int(after < before)
    assert wins / n >= 0.9
