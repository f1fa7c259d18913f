import struct

import pytest
import torch

from fastnet_dehazing.errors import ArtifactWriteError, CheckpointFormatError, CheckpointMismatchError
from fastnet_dehazing.models.builder import build_model, build_preset, forward
from fastnet_dehazing.models.checkpoint import (
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    import_encoder_weights,
    load_checkpoint,
    model_from_checkpoint,
    read_checkpoint,
    save_checkpoint,
)
from fastnet_dehazing.models.config import PRESETS


@pytest.fixture
def trained_toy():
    """Float32 toy FastNet whose BN statistics have moved off their defaults."""
    model = build_preset("toy_fastnet", seed=1)
    model.train()
    with torch.no_grad():
        forward(model, torch.rand(2, 3, 64, 64, generator=torch.Generator().manual_seed(0)))
    return model


class TestRoundTrip:
    def test_bit_exact(self, tmp_path, trained_toy):
        save_checkpoint(trained_toy, tmp_path / "m.fdhz")
        restored = load_checkpoint(build_preset("toy_fastnet", seed=99), tmp_path / "m.fdhz")
        for (name, a), (_, b) in zip(trained_toy.state_dict().items(), restored.state_dict().items()):
            assert torch.equal(a, b), name

    def test_header_layout(self, trained_toy):
        payload = encode_checkpoint(trained_toy)
        assert payload[:4] == MAGIC
        assert struct.unpack_from("<I", payload, 4)[0] == 1
        (tag_len,) = struct.unpack_from("<H", payload, 8)
        assert payload[10:10 + tag_len] == b"fastnet"

    def test_metadata_kept(self, trained_toy):
        ckpt = decode_checkpoint(encode_checkpoint(trained_toy, {"epoch": 3}))
        assert ckpt.metadata == {"epoch": 3}
        assert ckpt.architecture == "fastnet"
        assert set(ckpt.tensors) == set(trained_toy.state_dict())

    def test_model_from_checkpoint(self, tmp_path, trained_toy):
        save_checkpoint(trained_toy, tmp_path / "m.fdhz")
        rebuilt = model_from_checkpoint(tmp_path / "m.fdhz").eval()
        trained_toy.eval()
        x = torch.rand(1, 3, 32, 32)
        with torch.no_grad():
            torch.testing.assert_close(forward(rebuilt, x)["refined"], forward(trained_toy, x)["refined"], rtol=0, atol=0)

    def test_dual_round_trip(self, tmp_path):
        model = build_preset("toy_dual_fastnet", seed=2)
        save_checkpoint(model, tmp_path / "d.fdhz")
        assert model_from_checkpoint(tmp_path / "d.fdhz").architecture == "dual_fastnet"


class TestRejection:
    def test_truncated_file_names_tensor(self, trained_toy):
        payload = encode_checkpoint(trained_toy)
        last = list(trained_toy.state_dict())[-1]
        with pytest.raises(CheckpointFormatError, match=f"tensor '{last}'"):
            decode_checkpoint(payload[:-2])

    def test_bad_magic(self, trained_toy):
        with pytest.raises(CheckpointFormatError, match="bad magic"):
            decode_checkpoint(b"XXXX" + encode_checkpoint(trained_toy)[4:])

    def test_bad_version(self, trained_toy):
        payload = bytearray(encode_checkpoint(trained_toy))
        payload[4:8] = struct.pack("<I", 2)
        with pytest.raises(CheckpointFormatError, match="version"):
            decode_checkpoint(bytes(payload))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointFormatError):
            read_checkpoint(tmp_path / "none.fdhz")

    def test_unwritable_path(self, tmp_path, trained_toy):
        with pytest.raises(ArtifactWriteError, match="checkpoint"):
            save_checkpoint(trained_toy, tmp_path / "missing" / "model.fdhz")

    def test_cross_config(self, tmp_path, trained_toy):
        save_checkpoint(trained_toy, tmp_path / "basic.fdhz")
        _, cfg = PRESETS["toy_fastnet"]
        bottleneck = build_model("fastnet", cfg.model_copy(update={"encoder_kind": "bottleneck"}))
        with pytest.raises(CheckpointMismatchError):
            load_checkpoint(bottleneck, tmp_path / "basic.fdhz")

    def test_cross_architecture(self, tmp_path, trained_toy):
        save_checkpoint(trained_toy, tmp_path / "m.fdhz")
        with pytest.raises(CheckpointMismatchError):
            load_checkpoint(build_preset("toy_dual_fastnet"), tmp_path / "m.fdhz")


class TestEncoderImport:
    def test_seeds_both_dual_encoders(self, tmp_path, trained_toy):
        save_checkpoint(trained_toy, tmp_path / "m.fdhz")
        dual = build_preset("toy_dual_fastnet", seed=5)
        copied = import_encoder_weights(dual, tmp_path / "m.fdhz")
        encoder_tensors = [n for n in trained_toy.state_dict() if "encoder." in n]
        assert copied == 2 * len(encoder_tensors)
        source = trained_toy.state_dict()["trunk.encoder.stem.0.weight"]
        assert torch.equal(dual.state_dict()["transmission.trunk.encoder.stem.0.weight"], source)
        assert torch.equal(dual.state_dict()["airlight.trunk.encoder.stem.0.weight"], source)
