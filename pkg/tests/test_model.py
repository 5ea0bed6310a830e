import numpy as np
import pytest

from gaptal import tensor as tt
from gaptal.checkpoint import load_checkpoint, save_checkpoint
from gaptal.errors import ConfigError, NumericError, ShapeError
from gaptal.model import (
    ModelConfig,
    decode,
    encode,
    forward,
    generation_head,
    init_params,
    rectify,
)
from gaptal.roi import roi_align, roi_align_np
from gaptal.tensor import Tape, Tensor, backward

SMALL = ModelConfig(
    dim=16,
    num_queries=5,
    encoder_layers=1,
    decoder_layers=1,
    attention_heads=4,
    roi_bins=8,
    dropout=0.0,
)


def small_params(seed=0):
    return init_params(SMALL, seed=seed)


def video(t=8, d=16, seed=0):
    return Tensor(np.random.default_rng(seed).normal(size=(t, d)).astype(np.float32))


class TestConfig:
    def test_head_divisibility(self):
        with pytest.raises(ConfigError):
            ModelConfig(dim=10, attention_heads=4)

    def test_rectify_mode_validated(self):
        with pytest.raises(ConfigError):
            ModelConfig(rectify_aggregation="sum")


class TestEncode:
    def test_shapes(self):
        enc, logits = encode(small_params(), SMALL, video())
        assert enc.shape == (8, 16)
        assert logits.shape == (8,)

    def test_frame_order_matters(self):
        params = small_params()
        x = video(seed=3)
        enc1, _ = encode(params, SMALL, x)
        flipped = Tensor(x.data[::-1].copy())
        enc2, _ = encode(params, SMALL, flipped)
        assert not np.allclose(enc1.data, enc2.data[::-1])

    def test_zero_conv_head_logits_equal_bias(self):
        params = small_params()
        params["actionness.conv2.w"].data[:] = 0.0
        params["actionness.conv2.b"].data[:] = 0.75
        _, logits = encode(params, SMALL, video(seed=5))
        np.testing.assert_allclose(logits.data, np.full(8, 0.75), rtol=1e-6)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            encode(small_params(), SMALL, Tensor(np.zeros((8, 12), dtype=np.float32)))


class TestDecode:
    def test_shape(self):
        params = small_params()
        enc, _ = encode(params, SMALL, video())
        assert decode(params, SMALL, enc).shape == (5, 16)

    def test_zeroed_projections_leave_layer_normed_queries(self):
        params = small_params()
        for name in list(params):
            if name.startswith("decoder.") and (".out.w" in name or ".ffn2.w" in name):
                params[name].data[:] = 0.0
            if name.startswith("decoder.") and (".out.b" in name or ".ffn2.b" in name):
                params[name].data[:] = 0.0
        enc, _ = encode(params, SMALL, video(seed=2))
        out = decode(params, SMALL, enc)
        q = params["queries"].data
        mu = q.mean(axis=-1, keepdims=True)
        var = ((q - mu) ** 2).mean(axis=-1, keepdims=True)
        expected = (q - mu) / np.sqrt(var + 1e-5)
        np.testing.assert_allclose(out.data, expected, atol=1e-5)

    def test_duplicate_queries_stay_identical(self):
        params = small_params()
        params["queries"].data[:] = params["queries"].data[0]
        enc, _ = encode(params, SMALL, video(seed=4))
        out = decode(params, SMALL, enc).data
        np.testing.assert_allclose(out, np.broadcast_to(out[0], out.shape), atol=1e-6)


class TestRoiAlign:
    def test_constant_field(self):
        v = np.full((10, 3), 2.5, dtype=np.float32)
        out = roi_align(Tensor(v), np.array([[0.1, 0.8], [0.0, 1.0], [0.5, 0.5]]), 4)
        np.testing.assert_allclose(out.bins.data, np.full((3, 4, 3), 2.5), atol=1e-6)

    def test_linear_ramp_closed_form(self):
        x = np.arange(16, dtype=np.float32).reshape(16, 1)
        out = roi_align(Tensor(x), np.array([[0.0, 1.0]]), 16)
        np.testing.assert_allclose(out.bins.data.reshape(16), np.arange(16.0), atol=1e-6)

    def test_zero_width_proposal(self):
        x = np.arange(16, dtype=np.float32).reshape(16, 1)
        out = roi_align(Tensor(x), np.array([[0.5, 0.5]]), 4)
        # every bin samples u = 0.5 * 16 = 8 -> value 7.5
        np.testing.assert_allclose(out.bins.data.reshape(4), np.full(4, 7.5), atol=1e-6)

    def test_inverted_rows_swapped(self):
        x = np.arange(16, dtype=np.float32).reshape(16, 1)
        fwd = roi_align(Tensor(x), np.array([[0.2, 0.7]]), 8)
        rev = roi_align(Tensor(x), np.array([[0.7, 0.2]]), 8)
        np.testing.assert_allclose(fwd.bins.data, rev.bins.data)
        np.testing.assert_allclose(rev.source_proposals, [[0.2, 0.7]])

    def test_numpy_path_matches_tensor_path(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(12, 5)).astype(np.float32)
        props = np.column_stack([rng.uniform(0, 0.5, 6), rng.uniform(0.5, 1, 6)])
        a = roi_align(Tensor(x), props, 7).bins.data
        b = roi_align_np(x, props, 7)
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_non_finite_proposal(self):
        with pytest.raises(NumericError):
            roi_align(Tensor(np.zeros((4, 2), dtype=np.float32)), np.array([[np.nan, 0.5]]), 4)

    def test_no_gradient_reaches_proposals(self):
        x = Tensor(np.random.default_rng(0).normal(size=(10, 4)).astype(np.float32))
        props = Tensor(np.array([[0.1, 0.9]], dtype=np.float32), requires_grad=True)
        with Tape() as tape:
            pooled = roi_align(x, props, 4)
            loss = tt.reduce_sum(pooled.bins)
        backward(loss, tape)
        assert props.grad is None  # exactly zero: the coordinate path records nothing


class TestRectify:
    def test_shape(self):
        params = small_params()
        q = Tensor(np.random.default_rng(1).normal(size=(5, 16)).astype(np.float32))
        z = Tensor(np.random.default_rng(2).normal(size=(5, 8, 16)).astype(np.float32))
        assert rectify(params, SMALL, q, z).shape == (5, 16)

    def test_zeroed_sa_projection_is_identity(self):
        params = small_params()
        params["rectifier.sa.out.w"].data[:] = 0.0
        params["rectifier.sa.out.b"].data[:] = 0.0
        q = Tensor(np.random.default_rng(3).normal(size=(5, 16)).astype(np.float32))
        z = Tensor(np.random.default_rng(4).normal(size=(5, 8, 16)).astype(np.float32))
        out = rectify(params, SMALL, q, z)
        np.testing.assert_array_equal(out.data, q.data)

    def test_mean_aggregation_constant_bins(self):
        config = ModelConfig(
            dim=16, num_queries=5, encoder_layers=1, decoder_layers=1,
            attention_heads=4, roi_bins=8, dropout=0.0, rectify_aggregation="mean",
        )
        params = init_params(config, seed=0)
        const = np.random.default_rng(5).normal(size=(5, 1, 16)).astype(np.float32)
        z = Tensor(np.repeat(const, 8, axis=1))
        pooled_expected = const[:, 0, :]
        projected = pooled_expected @ params["rectifier.pool_proj.w"].data + params["rectifier.pool_proj.b"].data
        q = Tensor(np.zeros((5, 16), dtype=np.float32))
        params["rectifier.sa.out.w"].data[:] = np.eye(16, dtype=np.float32)
        # verify the pooled projection feeds the SA block unchanged by
        # checking the pooling+projection stage directly
        from gaptal.model import _linear
        pooled = tt.reduce_mean(z, axis=1)
        got = _linear(params, "rectifier.pool_proj", pooled)
        np.testing.assert_allclose(got.data, projected, atol=1e-5)

    def test_joint_bins_variant_runs(self):
        config = ModelConfig(
            dim=16, num_queries=5, encoder_layers=1, decoder_layers=1,
            attention_heads=4, roi_bins=8, dropout=0.0, rectify_joint_bins=True,
        )
        params = init_params(config, seed=0)
        q = Tensor(np.random.default_rng(1).normal(size=(5, 16)).astype(np.float32))
        z = Tensor(np.random.default_rng(2).normal(size=(5, 8, 16)).astype(np.float32))
        assert rectify(params, config, q, z).shape == (5, 16)


class TestForward:
    def test_output_ranges(self):
        batch = forward(small_params(), SMALL, video(seed=7))
        assert batch.proposals.shape == (5, 2)
        assert np.all((batch.proposals >= 0) & (batch.proposals <= 1))
        assert batch.foreground_scores.shape == (5,)
        assert np.all((batch.foreground_scores > 0) & (batch.foreground_scores < 1))
        assert batch.actionness_logits.shape == (8,)

    def test_no_rectify_equals_zeroed_rectifier(self):
        params = small_params(seed=9)
        x = video(seed=10)
        params["rectifier.sa.out.w"].data[:] = 0.0
        params["rectifier.sa.out.b"].data[:] = 0.0
        full = forward(params, SMALL, x)
        off = forward(params, ModelConfig(**{**SMALL.__dict__, "use_rectifying": False}), x)
        np.testing.assert_array_equal(full.proposals, off.proposals)
        np.testing.assert_array_equal(full.foreground_scores, off.foreground_scores)

    def test_permutation_covariance(self):
        params = small_params(seed=11)
        x = video(seed=12)
        base = forward(params, SMALL, x)
        perm = np.array([3, 0, 4, 1, 2])
        params2 = {k: Tensor(v.data.copy(), requires_grad=True) for k, v in params.items()}
        params2["queries"].data[:] = params["queries"].data[perm]
        permuted = forward(params2, SMALL, x)
        np.testing.assert_allclose(permuted.proposals, base.proposals[perm], atol=1e-5)
        np.testing.assert_allclose(permuted.foreground_scores, base.foreground_scores[perm], atol=1e-5)

    def test_deterministic_in_eval_mode(self):
        params = small_params(seed=13)
        x = video(seed=14)
        a = forward(params, SMALL, x)
        b = forward(params, SMALL, x)
        np.testing.assert_array_equal(a.proposals, b.proposals)
        np.testing.assert_array_equal(a.foreground_scores, b.foreground_scores)

    def test_dropout_changes_training_outputs(self):
        config = ModelConfig(**{**SMALL.__dict__, "dropout": 0.2})
        params = small_params(seed=15)
        x = video(seed=16)
        a = forward(params, config, x, rng=np.random.default_rng(0))
        b = forward(params, config, x, rng=np.random.default_rng(1))
        assert not np.array_equal(a.proposals, b.proposals)

    def test_prepass_path_carries_exactly_zero_gradient(self):
        # route a dedicated tensor into the pre-pass branch only; the loss
        # treats the pooled bins as constants of the proposal coordinates,
        # so the branch contributes exactly zero gradient
        params = small_params(seed=17)
        x = video(seed=18)
        enc, _ = encode(params, SMALL, x)
        q_hat = decode(params, SMALL, enc)
        q_pre = Tensor(q_hat.data.copy(), requires_grad=True)
        with Tape() as tape:
            with tt.no_grad():
                prepass = generation_head(params, q_pre)
            pooled = roi_align(x, prepass.data, SMALL.roi_bins)
            q_final = rectify(params, SMALL, q_hat, pooled.bins)
            loss = tt.reduce_sum(generation_head(params, q_final))
        backward(loss, tape)
        assert q_pre.grad is None  # nothing recorded on the pre-pass branch
        assert params["rectifier.sa.out.w"].grad is not None  # direct path alive


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        params = small_params(seed=20)
        path = tmp_path / "model.gapf"
        save_checkpoint(params, SMALL, path)
        loaded, config = load_checkpoint(path)
        assert config == SMALL
        assert sorted(loaded) == sorted(params)
        for name in params:
            assert loaded[name].data.tobytes() == params[name].data.tobytes()

    def test_save_load_save_identical_files(self, tmp_path):
        params = small_params(seed=21)
        p1, p2 = tmp_path / "a.gapf", tmp_path / "b.gapf"
        save_checkpoint(params, SMALL, p1)
        loaded, config = load_checkpoint(p1)
        save_checkpoint(loaded, config, p2)
        assert p1.read_bytes() == p2.read_bytes()
