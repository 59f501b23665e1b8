import math

import numpy as np
import pytest

from guidenet.core.errors import ConfigError, NumericError
from guidenet.services.dataset import load_vocab
from guidenet.services.trainer import build_model
from guidenet.services.zero_shot import class_captions, embed_captions, zero_shot_classify, zero_shot_evaluate


def brute_force(image, classes):
    def cosine(a, b):
        dot = sum(x * y for x, y in zip(a, b))
        return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))

    scores = [cosine(image, c) for c in classes]
    return scores.index(max(scores))


class TestZeroShotClassify:

    def test_exact_match(self):
        assert zero_shot_classify(np.array([1.0, 0.0]), [np.array([1.0, 0.0]), np.array([0.0, 1.0])]) == 0

    def test_scale_invariant_direction(self):
        assert zero_shot_classify(np.array([1.0, 1.0]), [np.array([2.0, 2.0]), np.array([-1.0, -1.0])]) == 0

    @pytest.mark.parametrize("scale", [0.01, 1.0, 100.0])
    def test_positive_rescaling_keeps_argmax(self, scale, rng):
        for _ in range(50):
            image = rng.standard_normal(6)
            classes = rng.standard_normal((4, 6))
            expected = zero_shot_classify(image, classes)
            assert zero_shot_classify(scale * image, classes) == expected
            rescaled = classes.copy()
            rescaled[rng.integers(4)] *= scale
            assert zero_shot_classify(image, rescaled) == expected

    def test_matches_brute_force(self, rng):
        for _ in range(1000):
            k, d = rng.integers(2, 6), rng.integers(2, 10)
            image = rng.standard_normal(d)
            classes = rng.standard_normal((k, d))
            assert zero_shot_classify(image, classes) == brute_force(image.tolist(), classes.tolist())

    def test_ties_go_to_lowest_index(self):
        classes = [np.array([0.0, 1.0]), np.array([3.0, 0.0]), np.array([1.0, 0.0])]
        assert zero_shot_classify(np.array([1.0, 0.0]), classes) == 1

    def test_zero_norm_image(self):
        with pytest.raises(NumericError):
            zero_shot_classify(np.zeros(2), [np.array([1.0, 0.0]), np.array([0.0, 1.0])])

    def test_zero_norm_class(self):
        with pytest.raises(NumericError):
            zero_shot_classify(np.array([1.0, 0.0]), [np.array([1.0, 0.0]), np.zeros(2)])

    def test_needs_two_classes(self):
        with pytest.raises(ConfigError):
            zero_shot_classify(np.array([1.0, 0.0]), [np.array([1.0, 0.0])])


class TestZeroShotEvaluate:

    def test_one_caption_per_class(self):
        captions = class_captions()
        assert len(captions) == 2
        assert "fight" in captions[1].split()

    def test_caption_embeddings_live_in_fusion_space(self, tiny_config, micro_dataset):
        embeddings = embed_captions(build_model(tiny_config, 1), class_captions(), load_vocab(micro_dataset))
        assert embeddings.shape == (2, tiny_config.fusion_channels)

    def test_scores_whole_split(self, tiny_config, micro_dataset, micro_splits):
        _, test = micro_splits
        report = zero_shot_evaluate(build_model(tiny_config, 1), test, load_vocab(micro_dataset), batch_size=4)
        assert report.total == len(test)
