import numpy as np
import pytest

from guidenet.core import ops
from guidenet.core.errors import ContractError
from guidenet.core.gradcheck import grad_check, relative_error
from guidenet.core.tensor import Tensor, make_result
from guidenet.services.grad_suite import primitive_cases, run_grad_suite


# =============================================================================
# grad_check
# =============================================================================

class TestGradCheck:

    def test_relative_error_is_normwise(self):
        assert relative_error(np.array([3.0, 4.0]), np.array([3.0, 4.0])) == 0.0
        assert relative_error(np.array([1.0, 0.0]), np.array([0.0, 0.0])) == pytest.approx(1.0)
        assert relative_error(np.zeros(2), np.zeros(2)) == 0.0

    def test_correct_gradient_passes(self, rng):
        x = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
        report = grad_check(lambda: ops.sum_all(ops.mul(x, x)), {"x": x})
        assert report.passed
        assert report.max_relative_error < 1e-8

    def test_wrong_gradient_is_reported_not_raised(self, rng):
        x = Tensor(rng.standard_normal(4), requires_grad=True)

        def bad_square(t):
            return make_result("bad_square", t.data ** 2, (t,), lambda g: (g * t.data,))  # missing factor 2

        report = grad_check(lambda: ops.sum_all(bad_square(x)), {"x": x})
        assert not report.passed
        assert report.offenders == ["x"]

    def test_subsampling_caps_checked_elements(self, rng):
        x = Tensor(rng.standard_normal(100), requires_grad=True)
        report = grad_check(lambda: ops.sum_all(ops.mul(x, x)), {"x": x}, fraction=0.05, max_per_block=3)
        assert report.blocks[0].checked == 3

    def test_params_restored_after_check(self, rng):
        data = rng.standard_normal(5)
        x = Tensor(data.copy(), requires_grad=True)
        grad_check(lambda: ops.sum_all(ops.mul(x, x)), {"x": x})
        np.testing.assert_array_equal(x.data, data)

    def test_rejects_non_positive_tolerance(self, rng):
        x = Tensor(np.ones(2), requires_grad=True)
        with pytest.raises(ContractError):
            grad_check(lambda: ops.sum_all(x), {"x": x}, tolerance=0.0)


# =============================================================================
# Suite
# =============================================================================

class TestGradSuite:

    @pytest.mark.parametrize("name", sorted(primitive_cases(np.random.default_rng(0))))
    def test_every_primitive_passes(self, name):
        loss_fn, params = primitive_cases(np.random.default_rng(0))[name]
        report = grad_check(loss_fn, params, tolerance=1e-4)
        assert report.passed, report.blocks

    def test_each_case_reads_its_own_params(self):
        rng = np.random.default_rng(1)
        for name, (loss_fn, params) in primitive_cases(np.random.default_rng(0)).items():
            base = loss_fn().item()
            for key, p in params.items():
                original = p.data.copy()
                p.data[...] = original + rng.standard_normal(original.shape)
                assert loss_fn().item() != base, f"{name}.{key}"
                p.data[...] = original
            assert loss_fn().item() == base

    def test_suite_without_models_passes(self):
        report = run_grad_suite(presets=())
        assert report.passed, report.offenders
        assert len(report.blocks) == sum(len(params) for _, params in primitive_cases(np.random.default_rng(0)).values())

    def test_tiny_model_passes(self):
        report = run_grad_suite(presets=("tiny",), fraction=1.0, max_per_block=10)
        assert report.passed, report.offenders
        assert any(b.name.startswith("tiny.fusion") for b in report.blocks)

    def test_sign_flip_in_conv_backward_is_caught(self, flipped_conv):
        report = run_grad_suite(presets=("tiny",), max_per_block=5)
        assert not report.passed
        assert "conv2d.input" in report.offenders
        assert "conv2d.kernel" in report.offenders
        assert "softmax_rows.input" not in report.offenders

    def test_tiny_tolerance_reports_failures(self):
        report = run_grad_suite(tolerance=1e-12, presets=())
        assert not report.passed
        assert report.blocks

    @pytest.mark.slow
    def test_desk_model_passes(self):
        report = run_grad_suite()
        assert report.passed, report.offenders
