import numpy as np
import pytest
import torch

from fastnet_dehazing.errors import InputShapeError, ModelLoadError
from fastnet_dehazing.imaging.image_core import Image
from fastnet_dehazing.models.builder import (
    build_model,
    build_preset,
    dehaze,
    dehaze_tensor,
    encoder_decoder_params,
    forward,
    pad_to_multiple,
    parameter_breakdown,
    required_padding,
)
from fastnet_dehazing.models.config import PRESETS, REFERENCE_PARAMS, FastNetConfig
from fastnet_dehazing.nn.layers import param_count


def _conv(cin, cout, k, bias=False):
    return cin * cout * k * k + (cout if bias else 0)


def _bn(c):
    return 2 * c


def _tally_encoder_decoder(base, feature, blocks):
    """Layer-by-layer count of a basic-block encoder, LinkNet decoder and head."""
    total = _conv(3, base, 7) + _bn(base)
    cin = base
    for stage, count in enumerate(blocks):
        width = base * 2 ** stage
        for b in range(count):
            stride = 2 if stage > 0 and b == 0 else 1
            total += _conv(cin, width, 3) + _bn(width) + _conv(width, width, 3) + _bn(width)
            if stride != 1 or cin != width:
                total += _conv(cin, width, 1) + _bn(width)
            cin = width
    widths = [base * m for m in (1, 2, 4, 8)]
    for cin, cout in zip(widths, [base] + widths[:3]):
        mid = cin // 4
        total += _conv(cin, mid, 1) + _bn(mid) + _conv(mid, mid, 3) + _bn(mid) + _conv(mid, cout, 1) + _bn(cout)
    total += _conv(base, feature, 3) + _bn(feature)
    total += _conv(feature, feature, 3) + _bn(feature)
    total += _conv(feature, feature, 3, bias=True)
    return total


def _tally_refinement(cin, feature, scales):
    branch = feature // 4
    return len(scales) * _conv(cin, branch, 1, bias=True) + _conv(cin + branch * len(scales), 3, 3, bias=True)


class TestParameterCounts:
    def test_toy_fastnet_matches_hand_tally(self):
        model = build_preset("toy_fastnet", seed=0)
        expected = _tally_encoder_decoder(8, 8, [1, 1, 1, 1]) + _tally_refinement(8, 8, [1, 2, 4, 8])
        assert param_count(model) == expected

    def test_small_fastnet_near_reference(self):
        total = param_count(build_preset("small_fastnet", seed=0))
        assert abs(total - REFERENCE_PARAMS["small_fastnet"]) / REFERENCE_PARAMS["small_fastnet"] < 0.05

    def test_dual_fastnet_near_reference(self):
        total = param_count(build_preset("dual_fastnet", seed=0))
        assert abs(total - REFERENCE_PARAMS["dual_fastnet"]) / REFERENCE_PARAMS["dual_fastnet"] < 0.05

    @pytest.mark.slow
    def test_big_fastnet_near_reference(self):
        total = param_count(build_preset("big_fastnet", seed=0))
        assert abs(total - REFERENCE_PARAMS["big_fastnet"]) / REFERENCE_PARAMS["big_fastnet"] < 0.05

    def test_dual_is_two_trunks_plus_heads(self):
        architecture, cfg = PRESETS["toy_dual_fastnet"]
        model = build_model(architecture, cfg)
        projections = param_count(model.transmission.projection) + param_count(model.airlight.projection)
        expected = 2 * encoder_decoder_params(cfg) + projections + param_count(model.refinement)
        assert param_count(model) == expected

    def test_breakdown_sums_to_total(self):
        for name in ("toy_fastnet", "toy_dual_fastnet"):
            breakdown = parameter_breakdown(build_preset(name, seed=0))
            total = breakdown.pop("total")
            assert sum(breakdown.values()) == total

    def test_unknown_preset(self):
        with pytest.raises(ModelLoadError):
            build_preset("tiny_fastnet")


class TestFastNet:
    def test_shape_and_range(self, toy_fastnet):
        toy_fastnet.eval()
        x = torch.rand(2, 3, 64, 96, dtype=torch.float64)
        out = forward(toy_fastnet, x)["refined"]
        assert out.shape == x.shape
        assert torch.all((out > 0) & (out < 1))

    @pytest.mark.slow
    def test_full_scale_shape(self):
        model = build_preset("small_fastnet", seed=0).eval()
        with torch.no_grad():
            out = forward(model, torch.rand(1, 3, 256, 256))["refined"]
        assert out.shape == (1, 3, 256, 256)

    def test_bottleneck_encoder(self):
        cfg = FastNetConfig(encoder_kind="bottleneck", blocks_per_stage=[1, 1, 1, 1], base_width=4, feature_channels=8)
        model = build_model("fastnet", cfg, seed=0).eval()
        with torch.no_grad():
            assert forward(model, torch.rand(1, 3, 32, 32))["refined"].shape == (1, 3, 32, 32)

    def test_identical_batch_items_give_identical_outputs(self, toy_fastnet):
        toy_fastnet.eval()
        x = torch.rand(1, 3, 32, 32, dtype=torch.float64).repeat(3, 1, 1, 1)
        with torch.no_grad():
            out = forward(toy_fastnet, x)["refined"]
        torch.testing.assert_close(out[0], out[1], rtol=0, atol=0)
        torch.testing.assert_close(out[0], out[2], rtol=0, atol=0)

    def test_same_seed_same_weights(self):
        a = build_preset("toy_fastnet", seed=4)
        b = build_preset("toy_fastnet", seed=4)
        for (name, p), (_, q) in zip(a.state_dict().items(), b.state_dict().items()):
            assert torch.equal(p, q), name

    def test_indivisible_input_rejected(self, toy_fastnet):
        with pytest.raises(InputShapeError):
            forward(toy_fastnet, torch.rand(1, 3, 40, 32, dtype=torch.float64))


class TestDualFastNet:
    def test_outputs(self, toy_dual):
        toy_dual.eval()
        with torch.no_grad():
            out = forward(toy_dual, torch.rand(1, 3, 64, 64, dtype=torch.float64))
        assert out["transmission"].shape == (1, 1, 64, 64)
        assert out["airlight"].shape == (1, 3, 64, 64)
        assert out["refined"].shape == (1, 3, 64, 64)
        for name in ("transmission", "airlight", "refined"):
            assert torch.all((out[name] > 0) & (out[name] < 1)), name

    def test_unit_transmission_passes_input_through(self, toy_dual):
        toy_dual.eval()
        with torch.no_grad():
            toy_dual.transmission.projection.weight.zero_()
            toy_dual.transmission.projection.bias.fill_(50.0)
            x = torch.rand(1, 3, 32, 32, dtype=torch.float64)
            out = forward(toy_dual, x)
        assert torch.all(out["transmission"] == 1.0)
        assert torch.equal(out["dehazed"], x)


class TestPadding:
    def test_required_padding(self):
        assert required_padding(1600, 1200) == (0, 16)
        assert required_padding(64, 64) == (0, 0)

    def test_pad_to_multiple(self):
        padded, size = pad_to_multiple(torch.zeros(1, 3, 1600, 1200))
        assert padded.shape[-2:] == (1600, 1216)
        assert size == (1600, 1200)

    def test_small_input_uses_replicate(self):
        padded, _ = pad_to_multiple(torch.rand(1, 3, 5, 7))
        assert padded.shape[-2:] == (32, 32)

    def test_dehaze_any_size(self, toy_fastnet):
        img = Image(data=np.random.default_rng(0).uniform(size=(40, 50, 3)))
        out = dehaze(toy_fastnet, img)
        assert out.shape == (40, 50, 3)
        assert toy_fastnet.training

    def test_dehaze_tensor_crops_every_output(self, toy_dual):
        out = dehaze_tensor(toy_dual, torch.rand(1, 3, 33, 70, dtype=torch.float64))
        assert {k: tuple(v.shape[-2:]) for k, v in out.items()} == {
            "refined": (33, 70),
            "dehazed": (33, 70),
            "transmission": (33, 70),
            "airlight": (33, 70),
        }
