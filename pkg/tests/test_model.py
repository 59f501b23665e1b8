import numpy as np
import pytest

from guidenet.core import ops
from guidenet.core.errors import ConfigError, DimensionError
from guidenet.core.tensor import Graph, Tensor, no_grad
from guidenet.models.config import ForwardMode, Regime, TrainConfig, preset
from guidenet.nn.guidance import GuidanceModel, attention_map, fuse, reweight
from guidenet.services.trainer import build_model, train


def make_inputs(config, rng, n=2, size=32):
    images = Tensor(rng.uniform(0, 1, size=(n, 3, size, size)))
    tokens = rng.integers(0, config.vocab_size, size=(n, config.max_seq_len))
    return images, tokens


def identity_hook(attn):
    return Tensor(np.broadcast_to(np.eye(attn.shape[-1]), attn.shape).copy())


# =============================================================================
# Shapes
# =============================================================================

class TestShapes:

    def test_desk_pipeline(self, desk_config, rng):
        model = GuidanceModel(desk_config, rng)
        images, tokens = make_inputs(desk_config, rng, n=1, size=64)
        text = model.encode_text(tokens[0])
        image = model.encode_image(Tensor(images.data[0]))
        fusion = fuse(text, image, model)
        attn = attention_map(fusion, model)
        assert text.shape == (64, 4, 4)
        assert image.shape == (128, 4, 4)
        assert fusion.shape == (128, 4, 4)
        assert attn.shape == (16, 16)
        assert reweight(attn, image).shape == (128, 4, 4)

    def test_paper_preset_dimensions(self, rng):
        assert preset("large") == preset("paper")
        config = preset("paper")
        model = GuidanceModel(config, rng)
        model.eval()
        tokens = rng.integers(0, config.vocab_size, size=121)
        with no_grad():
            text = model.encode_text(tokens)
            image = model.encode_image(Tensor(rng.uniform(0, 1, size=(3, 64, 64))))
            fusion = fuse(text, image, model)
            attn = attention_map(fusion, model)
        assert text.shape == (768, 11, 11)
        assert fusion.shape == (1024, 11, 11)
        assert attn.shape == (121, 121)

    def test_logits_shape_for_every_mode(self, tiny_config, rng):
        model = GuidanceModel(tiny_config, rng)
        images, tokens = make_inputs(tiny_config, rng, n=3)
        for mode in ForwardMode:
            assert model.forward(images, tokens, mode).shape == (3, 2)

    def test_text_token_layout_on_grid(self, tiny_config, rng):
        """Token i lands in cell (i // s, i % s)."""
        model = GuidanceModel(tiny_config, rng)
        tokens = np.array([2, 3, 4, 5])
        block = model.encode_text(tokens).data
        single = model.encode_text(np.array([4, 4, 4, 4])).data
        np.testing.assert_allclose(block[:, 1, 0], single[:, 0, 0])

    def test_small_image_rejected(self, tiny_config, rng):
        model = GuidanceModel(tiny_config, rng)
        with pytest.raises(DimensionError):
            model.forward_baseline(Tensor(np.zeros((1, 3, 8, 8))))

    def test_wrong_token_length_rejected(self, tiny_config, rng):
        model = GuidanceModel(tiny_config, rng)
        with pytest.raises(DimensionError):
            model.encode_text(np.zeros(5, dtype=np.int64))


# =============================================================================
# Attention and re-weighting
# =============================================================================

class TestAttention:

    def test_rows_stochastic(self, desk_config, rng):
        model = GuidanceModel(desk_config, rng)
        images, tokens = make_inputs(desk_config, rng)
        attn = model.guidance_map(model.encode_text(tokens), model.encode_image(images)).data
        np.testing.assert_allclose(attn.sum(axis=-1), 1.0, atol=1e-9)
        assert (attn >= 0).all()

    def test_identity_reweight_is_exact(self, rng):
        block = Tensor(rng.standard_normal((5, 3, 3)))
        np.testing.assert_array_equal(reweight(Tensor(np.eye(9)), block).data, block.data)

    def test_uniform_reweight_is_spatial_mean(self, rng):
        block = Tensor(rng.standard_normal((5, 3, 3)))
        out = reweight(Tensor(np.full((9, 9), 1 / 9)), block).data
        np.testing.assert_allclose(out, np.broadcast_to(block.data.mean(axis=(1, 2))[:, None, None], out.shape), atol=1e-12)

    def test_reweight_matches_weighted_sum_oracle(self, rng):
        c, s = 4, 3
        block = rng.standard_normal((c, s, s))
        a = rng.uniform(0, 1, size=(s * s, s * s))
        a /= a.sum(axis=1, keepdims=True)
        expected = np.zeros_like(block)
        for p in range(s * s):
            for q in range(s * s):
                expected[:, p // s, p % s] += a[p, q] * block[:, q // s, q % s]
        np.testing.assert_allclose(reweight(Tensor(a), Tensor(block)).data, expected, atol=1e-12, rtol=0)

    def test_reweight_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            reweight(Tensor(np.eye(4)), Tensor(rng.standard_normal((2, 3, 3))))

    def test_identity_attention_equals_baseline(self, desk_config, rng):
        model = GuidanceModel(desk_config, rng)
        model.eval()
        model.attention_hook = identity_hook
        images, tokens = make_inputs(desk_config, rng)
        with no_grad():
            guided = model.forward_guided(images, tokens).data
            baseline = model.forward_baseline(images).data
        np.testing.assert_allclose(guided, baseline, atol=1e-9, rtol=0)

    def test_caption_permutation_changes_attention(self, desk_config, rng):
        model = GuidanceModel(desk_config, rng)
        model.eval()
        changed = 0
        trials = 20
        with no_grad():
            for _ in range(trials):
                images, tokens = make_inputs(desk_config, rng, n=1)
                shuffled = tokens[:, rng.permutation(desk_config.max_seq_len)]
                while np.array_equal(shuffled, tokens):
                    shuffled = tokens[:, rng.permutation(desk_config.max_seq_len)]
                image = model.encode_image(images)
                a = model.guidance_map(model.encode_text(tokens), image).data
                b = model.guidance_map(model.encode_text(shuffled), image).data
                changed += not np.allclose(a, b, atol=1e-12, rtol=0)
        assert changed >= 0.95 * trials

    def test_trained_model_stays_order_sensitive(self, tiny_config, micro_splits, rng):
        train_data, _ = micro_splits
        config = TrainConfig(epochs=2, batch_size=16, seed=3, regime=Regime.GUIDED_UNFROZEN, learning_rate=1e-2)
        model, _ = train(build_model(tiny_config, config.seed), train_data, config, progress=False)
        varied = [i for i in range(len(train_data)) if len(set(train_data.tokens[i])) > 1]
        assert varied
        changed = 0
        with no_grad():
            for i in varied:
                tokens = train_data.tokens[i]
                shuffled = tokens
                while np.array_equal(shuffled, tokens):
                    shuffled = tokens[rng.permutation(tiny_config.max_seq_len)]
                image = model.encode_image(train_data.image(i))
                a = model.guidance_map(model.encode_text(tokens), image).data
                b = model.guidance_map(model.encode_text(shuffled), image).data
                changed += not np.allclose(a, b, atol=1e-12, rtol=0)
        assert changed >= 0.95 * len(varied)


# =============================================================================
# Inference path
# =============================================================================

class TestInference:

    def test_none_mode_equals_baseline_bitwise(self, desk_config, rng):
        model = GuidanceModel(desk_config, rng)
        model.eval()
        images, _ = make_inputs(desk_config, rng)
        with no_grad():
            np.testing.assert_array_equal(model.forward_inference(images).data, model.forward_baseline(images).data)

    def test_none_mode_runs_no_text_side_ops(self, desk_config, rng):
        model = GuidanceModel(desk_config, rng)
        model.eval()
        images, _ = make_inputs(desk_config, rng)
        graph = Graph()
        with graph.record(), no_grad():
            model.forward_inference(images)
        assert graph.scopes() == {"image", "classifier"}
        assert "embedding" not in graph.ops()

    def test_guided_graph_covers_every_stage(self, tiny_config, rng):
        model = GuidanceModel(tiny_config, rng)
        images, tokens = make_inputs(tiny_config, rng)
        graph = Graph()
        with graph.record():
            model.forward_guided(images, tokens)
        assert graph.scopes() == {"text", "image", "fusion", "attention", "reweight", "classifier"}

    def test_image_self_needs_matching_channels(self):
        with pytest.raises(ConfigError):
            preset("desk", image_embed_channels=64, inference_attention="image-self")

    def test_image_self_skips_text(self, desk_config, rng):
        model = GuidanceModel(desk_config.with_overrides(inference_attention="image-self"), rng)
        model.eval()
        images, _ = make_inputs(desk_config, rng)
        graph = Graph()
        with graph.record(), no_grad():
            logits = model.forward_inference(images)
        assert logits.shape == (2, 2)
        assert "image_attention" in graph.scopes()
        assert not graph.scopes() & {"text", "fusion", "attention"}

    def test_baseline_identical_twice_in_eval(self, tiny_config, rng):
        model = GuidanceModel(tiny_config, rng)
        model.eval()
        images, _ = make_inputs(tiny_config, rng)
        np.testing.assert_array_equal(model.forward_baseline(images).data, model.forward_baseline(images).data)


# =============================================================================
# Parameters and freezing
# =============================================================================

class TestParameters:

    def test_baseline_parameters_are_image_and_classifier(self, desk_config, rng):
        model = GuidanceModel(desk_config, rng)
        baseline = sum(p.size for p in model.baseline_parameters())
        assert baseline == model.image.num_parameters() + model.classifier.num_parameters()
        assert model.num_parameters() > baseline

    def test_unfrozen_text_gets_gradient(self, tiny_config, rng):
        model = GuidanceModel(tiny_config, rng)
        images, tokens = make_inputs(tiny_config, rng)
        ops.cross_entropy(model.forward_guided(images, tokens), np.array([0, 1])).backward()
        assert model.text.embedding.table.grad is not None
        assert np.abs(model.text.embedding.table.grad).sum() > 0

    def test_frozen_text_gets_no_gradient(self, tiny_config, rng):
        model = GuidanceModel(tiny_config, rng)
        model.set_text_frozen(True)
        images, tokens = make_inputs(tiny_config, rng)
        ops.cross_entropy(model.forward_guided(images, tokens), np.array([0, 1])).backward()
        assert all(p.grad is None for p in model.text_parameters())
        assert model.fusion.convs[0].kernel.grad is not None

    def test_same_rng_same_weights(self, tiny_config):
        a = GuidanceModel(tiny_config, np.random.default_rng(3)).state_dict()
        b = GuidanceModel(tiny_config, np.random.default_rng(3)).state_dict()
        assert a.keys() == b.keys()
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_state_dict_holds_running_stats(self, tiny_config, rng):
        state = GuidanceModel(tiny_config, rng).state_dict()
        assert "image.blocks.0.norm.running_mean" in state
        assert "fusion.norms.2.running_var" in state
