import pytest
import torch

from fastnet_dehazing.errors import InvalidParameterError, MissingTargetError, ShapeMismatchError
from fastnet_dehazing.losses.composite import (
    CompositeSpec,
    CompositeTerm,
    composite_loss,
    composite_objective,
    mse_x1,
    mse_x4,
)
from fastnet_dehazing.losses.losses import (
    LOSS_COMBINATIONS,
    LossSpec,
    combination_tag,
    loss_forward_backward,
    loss_from_label,
    loss_value,
    parse_combination,
)
from fastnet_dehazing.models.builder import build_preset
from fastnet_dehazing.nn.gradcheck import numerical_gradient, relative_error


def _full(value, shape=(1, 3, 32, 32)):
    return torch.full(shape, value, dtype=torch.float64)


@pytest.fixture
def gen():
    return torch.Generator().manual_seed(3)


@pytest.fixture
def extractor():
    return build_preset("toy_fastnet", seed=0).double().feature_extractor()


class TestSingleLosses:
    @pytest.mark.parametrize("kind", ["mse", "l1", "ssim", "content"])
    def test_perfect_prediction(self, kind, gen, extractor):
        x = torch.rand(1, 3, 32, 32, generator=gen, dtype=torch.float64)
        value, grad = loss_forward_backward(x, x, LossSpec(kind=kind), extractor)
        assert value == pytest.approx(0.0, abs=1e-12)
        assert torch.allclose(grad, torch.zeros_like(grad), atol=1e-10)

    def test_constant_offsets(self):
        pred, truth = _full(0.6), _full(0.5)
        assert float(loss_value(pred, truth, LossSpec(kind="mse"))) == pytest.approx(0.01, abs=1e-12)
        assert float(loss_value(pred, truth, LossSpec(kind="l1"))) == pytest.approx(0.1, abs=1e-12)

    def test_weight_scales(self):
        pred, truth = _full(0.6), _full(0.5)
        assert float(loss_value(pred, truth, LossSpec(kind="mse", weight=3.0))) == pytest.approx(0.03, abs=1e-12)

    @pytest.mark.parametrize("kind", ["mse", "l1", "ssim", "content"])
    def test_gradients_match_finite_differences(self, kind, gen, extractor):
        truth = torch.rand(1, 3, 32, 32, generator=gen, dtype=torch.float64) * 0.5 + 0.25
        # Offsets keep L1 away from ties
        offset = (torch.rand(1, 3, 32, 32, generator=gen, dtype=torch.float64) * 0.1 + 0.05)
        sign = torch.where(torch.rand(1, 3, 32, 32, generator=gen) > 0.5, 1.0, -1.0).double()
        pred = (truth + sign * offset).clone()
        spec = LossSpec(kind=kind)
        _, grad = loss_forward_backward(pred, truth, spec, extractor)

        indices = torch.randperm(pred.numel(), generator=gen)[:40].tolist()
        numeric = numerical_gradient(lambda: loss_value(pred, truth, spec, extractor), pred, 1e-6, indices)
        assert relative_error(grad.reshape(-1)[indices], numeric) < 1e-5

    def test_ssim_spec_gets_default_params(self):
        assert LossSpec(kind="ssim").ssim is not None

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            LossSpec(weight=-1.0)

    def test_content_needs_extractor(self):
        with pytest.raises(InvalidParameterError):
            loss_value(_full(0.5), _full(0.5), LossSpec(kind="content"))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            loss_value(_full(0.5), _full(0.5, (1, 3, 16, 16)), LossSpec())

    def test_nonnegative(self, gen, extractor):
        a = torch.rand(1, 3, 32, 32, generator=gen, dtype=torch.float64)
        b = torch.rand(1, 3, 32, 32, generator=gen, dtype=torch.float64)
        for kind in ("mse", "l1", "ssim", "content"):
            assert float(loss_value(a, b, LossSpec(kind=kind), extractor)) >= 0.0


class TestCombinations:
    def test_all_combinations_parse(self):
        for name in LOSS_COMBINATIONS:
            base, refinement = parse_combination(name)
            assert combination_tag(base, refinement) == name

    def test_ascii_arrow(self):
        base, refinement = parse_combination("mse -> content loss")
        assert (base.kind, refinement.kind) == ("mse", "content")

    def test_unknown_label(self):
        with pytest.raises(InvalidParameterError):
            loss_from_label("perceptual")

    def test_malformed(self):
        with pytest.raises(InvalidParameterError):
            parse_combination("MSE → SSIM → L1")


class TestComposite:
    def _outputs(self, offset_t=0.0):
        return {
            "refined": _full(0.4),
            "dehazed": _full(0.4),
            "transmission": _full(0.5 + offset_t, (1, 1, 32, 32)),
            "airlight": _full(0.8),
        }

    def _truths(self):
        return {"clean": _full(0.4), "transmission": _full(0.5, (1, 1, 32, 32)), "airlight": _full(0.8)}

    def test_mse_x1_perfect(self):
        value, grads = composite_loss(self._outputs(), self._truths(), mse_x1())
        assert value == 0.0
        assert set(grads) == {"refined"}

    def test_mse_x4_transmission_term_only(self):
        value, grads = composite_loss(self._outputs(offset_t=0.1), self._truths(), mse_x4())
        assert value == pytest.approx(0.01, abs=1e-12)
        assert set(grads) == {"refined", "dehazed", "transmission", "airlight"}
        assert torch.all(grads["refined"] == 0)

    def test_mse_x4_is_sum_of_terms(self, gen):
        outputs = {
            "refined": torch.rand(1, 3, 32, 32, generator=gen, dtype=torch.float64),
            "dehazed": torch.rand(1, 3, 32, 32, generator=gen, dtype=torch.float64),
            "transmission": torch.rand(1, 1, 32, 32, generator=gen, dtype=torch.float64),
            "airlight": torch.rand(1, 3, 32, 32, generator=gen, dtype=torch.float64),
        }
        truths = self._truths()
        expected = (
            torch.mean((outputs["refined"] - truths["clean"]) ** 2)
            + torch.mean((outputs["dehazed"] - truths["clean"]) ** 2)
            + torch.mean((outputs["transmission"] - truths["transmission"]) ** 2)
            + torch.mean((outputs["airlight"] - truths["airlight"]) ** 2)
        )
        assert float(composite_objective(outputs, truths, mse_x4())) == pytest.approx(float(expected), abs=1e-9)

    def test_weighted_mixed_terms(self):
        spec = CompositeSpec(
            terms=[
                CompositeTerm(target="refined", loss=LossSpec(kind="l1", weight=2.0)),
                CompositeTerm(target="transmission", loss=LossSpec(kind="mse", weight=0.5)),
            ]
        )
        outputs = self._outputs(offset_t=0.2)
        outputs["refined"] = _full(0.5)
        value, _ = composite_loss(outputs, self._truths(), spec)
        assert value == pytest.approx(2.0 * 0.1 + 0.5 * 0.04, abs=1e-12)

    def test_missing_output(self):
        outputs = {"refined": _full(0.4)}
        with pytest.raises(MissingTargetError):
            composite_loss(outputs, self._truths(), mse_x4())

    def test_missing_truth(self):
        with pytest.raises(MissingTargetError):
            composite_loss(self._outputs(), {"clean": _full(0.4)}, mse_x4())

    def test_empty_spec_rejected(self):
        with pytest.raises(ValueError):
            CompositeSpec(terms=[])
