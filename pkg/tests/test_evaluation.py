import numpy as np
import pytest

from guidenet.core.errors import ConfigError, ContractError, DimensionError
from guidenet.core.tensor import no_grad
from guidenet.models.config import ForwardMode, preset
from guidenet.models.records import MetricsReport
from guidenet.services.dataset import SplitData
from guidenet.services.evaluator import evaluate, metrics_from_predictions
from guidenet.services.latency import bench_interleaved, bench_latency, single_sample_forward
from guidenet.services.trainer import build_model


def predictions_for(tp, fp, tn, fn):
    preds = np.array([1] * tp + [1] * fp + [0] * tn + [0] * fn)
    labels = np.array([1] * tp + [0] * fp + [0] * tn + [1] * fn)
    return preds, labels


# =============================================================================
# Metrics
# =============================================================================

class TestMetrics:

    def test_worked_example(self):
        report = metrics_from_predictions(*predictions_for(3, 1, 4, 2))
        assert (report.tp, report.fp, report.tn, report.fn) == (3, 1, 4, 2)
        assert report.precision == pytest.approx(0.75)
        assert report.recall == pytest.approx(0.6)
        assert report.accuracy == pytest.approx(0.7)

    def test_perfect_classifier(self):
        labels = np.array([0, 1, 1, 0, 1])
        report = metrics_from_predictions(labels.copy(), labels)
        assert report.precision == report.recall == report.accuracy == 1.0

    def test_constant_negative_predictor(self):
        report = metrics_from_predictions(np.zeros(4, dtype=int), np.array([0, 1, 0, 1]))
        assert report.precision is None
        assert report.recall == 0.0
        assert report.accuracy == 0.5

    @pytest.mark.parametrize("counts", [(0, 0, 5, 0), (2, 3, 0, 7), (10, 1, 1, 10)])
    def test_accuracy_counts_identity(self, counts):
        report = metrics_from_predictions(*predictions_for(*counts))
        assert report.exact_accuracy * report.total == report.tp + report.tn

    def test_empty_is_config_error(self):
        with pytest.raises(ConfigError):
            metrics_from_predictions(np.zeros(0), np.zeros(0))

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            metrics_from_predictions(np.zeros(3), np.zeros(4))

    def test_from_counts_matches(self):
        assert MetricsReport.from_counts(3, 1, 4, 2) == metrics_from_predictions(*predictions_for(3, 1, 4, 2))


# =============================================================================
# Evaluation
# =============================================================================

class TestEvaluate:

    def test_scores_every_test_sample(self, tiny_config, micro_splits):
        _, test = micro_splits
        report = evaluate(build_model(tiny_config, 1), test)
        assert report.total == len(test)

    def test_audit_passes_for_guided_model(self, tiny_config, micro_splits):
        _, test = micro_splits
        evaluate(build_model(tiny_config, 1), test, ForwardMode.INFERENCE, audit=True)

    def test_audit_catches_text_on_inference_path(self, tiny_config, micro_splits, monkeypatch):
        _, test = micro_splits
        model = build_model(tiny_config, 1)
        monkeypatch.setattr(model, "forward_inference", lambda images: model.forward_guided(images, test.tokens[: images.shape[0]]))
        with pytest.raises(ContractError, match="text"):
            evaluate(model, test, ForwardMode.INFERENCE, audit=True)

    def test_guided_mode_is_not_audited(self, tiny_config, micro_splits):
        _, test = micro_splits
        report = evaluate(build_model(tiny_config, 1), test, ForwardMode.GUIDED, audit=True)
        assert report.total == len(test)

    def test_batching_does_not_change_predictions(self, tiny_config, micro_splits):
        train, _ = micro_splits
        model = build_model(tiny_config, 2)
        assert evaluate(model, train, batch_size=5) == evaluate(model, train, batch_size=64)

    def test_empty_split(self, tiny_config):
        empty = SplitData(ids=[], images=np.zeros((0, 3, 32, 32), dtype=np.uint8), tokens=np.zeros((0, 4), dtype=np.int64), labels=np.zeros(0, dtype=np.int64))
        with pytest.raises(ConfigError):
            evaluate(build_model(tiny_config, 1), empty)


# =============================================================================
# Latency
# =============================================================================

class TestLatency:

    def test_sample_count_and_order(self, tiny_config, micro_splits):
        _, test = micro_splits
        stats = bench_latency(build_model(tiny_config, 1), ForwardMode.INFERENCE, test.image(0), n_warmup=2, n_runs=100)
        assert len(stats.samples) == 100
        assert all(s > 0 for s in stats.samples)
        assert stats.median <= stats.p95

    def test_too_few_runs(self, tiny_config, micro_splits):
        _, test = micro_splits
        with pytest.raises(ConfigError):
            bench_latency(build_model(tiny_config, 1), ForwardMode.INFERENCE, test.image(0), n_warmup=0, n_runs=10)

    def test_interleaved_times_each_forward(self):
        calls = []
        stats = bench_interleaved({"a": lambda: calls.append("a"), "b": lambda: calls.append("b")}, n_warmup=1, n_runs=30)
        assert calls[:4] == ["a", "b", "a", "b"]
        assert len(calls) == 62
        assert len(stats["a"].samples) == len(stats["b"].samples) == 30

    def test_single_sample_forward_is_image_only(self, tiny_config, micro_splits):
        _, test = micro_splits
        model = build_model(tiny_config, 1)
        logits = single_sample_forward(model, ForwardMode.INFERENCE, test.image(0))()
        with no_grad():
            np.testing.assert_array_equal(logits.data, model.forward_baseline(test.image(0)).data)

    @pytest.mark.slow
    def test_inference_costs_no_more_than_baseline(self, micro_splits):
        _, test = micro_splits
        model = build_model(preset("desk"), 1)
        image = test.image(0)
        stats = bench_interleaved(
            {
                "baseline": single_sample_forward(model, ForwardMode.BASELINE, image),
                "inference": single_sample_forward(model, ForwardMode.INFERENCE, image),
            },
            n_warmup=100,
            n_runs=1000,
        )
        assert stats["inference"].median <= 1.05 * stats["baseline"].median
