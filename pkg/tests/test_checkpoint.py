import numpy as np
import pytest

from helpers import make_cross_model, toy_pairs
from xdocvec import checkpoint as ckpt
from xdocvec import tensor as T
from xdocvec.errors import FormatError
from xdocvec.model import context_for_sentence, shared_forward
from xdocvec.optim import Adam
from xdocvec.shared import STACKED_SATTN


@pytest.fixture
def frozen_model():
    model = make_cross_model(seed=0)
    model.nmt_ab.set_requires_grad(False)
    model.nmt_ba.set_requires_grad(False)
    return model


class TestCombinedRoundTrip:
    def test_forward_outputs_bitwise_identical(self, frozen_model, tmp_path):
        path = str(tmp_path / "model.ckpt")
        ids_a, ids_b = toy_pairs(1, seed=1)[0]
        with T.no_grad():
            before_ctx = context_for_sentence(frozen_model, "a", ids_a).data.copy()
            before_nll = shared_forward(frozen_model, "ab", ids_a, ids_b)[0].item()
        ckpt.save_combined_checkpoint(path, frozen_model, config={"d_h": 6}, seed=3,
                                      epoch=2)
        loaded, meta = ckpt.load_combined_checkpoint(path)
        with T.no_grad():
            after_ctx = context_for_sentence(loaded, "a", ids_a).data
            after_nll = shared_forward(loaded, "ab", ids_a, ids_b)[0].item()
        assert before_ctx.tobytes() == after_ctx.tobytes()
        assert before_nll == after_nll
        assert meta.epoch == 2 and meta.seed == 3 and meta.config == {"d_h": 6}

    def test_every_tensor_bitwise_identical(self, frozen_model, tmp_path):
        path = str(tmp_path / "model.ckpt")
        ckpt.save_combined_checkpoint(path, frozen_model, config={}, seed=0, epoch=0)
        loaded, _ = ckpt.load_combined_checkpoint(path)
        original = dict(frozen_model.named_tensors())
        for name, tensor in loaded.named_tensors():
            assert tensor.data.tobytes() == original[name].data.tobytes(), name
            assert not tensor.requires_grad

    def test_vocab_and_bpe_survive(self, frozen_model, tmp_path):
        frozen_model.bpe_a.merges.append(("x", "y"))
        path = str(tmp_path / "model.ckpt")
        ckpt.save_combined_checkpoint(path, frozen_model, config={}, seed=0, epoch=0)
        loaded, _ = ckpt.load_combined_checkpoint(path)
        assert loaded.bpe_a.merges == frozen_model.bpe_a.merges
        assert loaded.vocab_a.id_of == frozen_model.vocab_a.id_of
        assert loaded.vocab_b.symbol_of == frozen_model.vocab_b.symbol_of

    def test_optimizer_state_survives(self, frozen_model, tmp_path):
        opt = Adam(frozen_model.named_shared_tensors(), alpha=0.01)
        opt.state.m = [np.ones_like(p.data) for p in opt.params]
        opt.state.v = [np.full_like(p.data, 2.0) for p in opt.params]
        opt.state.step = 7
        path = str(tmp_path / "model.ckpt")
        ckpt.save_combined_checkpoint(path, frozen_model, config={}, seed=0, epoch=1,
                                      optimizer=opt)
        _, meta = ckpt.load_combined_checkpoint(path)
        assert meta.optimizer["step"] == 7
        assert meta.optimizer["alpha"] == 0.01


class TestGuards:
    def test_truncated_file_rejected(self, frozen_model, tmp_path):
        path = tmp_path / "model.ckpt"
        ckpt.save_combined_checkpoint(str(path), frozen_model, config={}, seed=0,
                                      epoch=0)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(FormatError):
            ckpt.load_combined_checkpoint(str(path))

    def test_corrupt_byte_rejected(self, frozen_model, tmp_path):
        path = tmp_path / "model.ckpt"
        ckpt.save_combined_checkpoint(str(path), frozen_model, config={}, seed=0,
                                      epoch=0)
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="digest"):
            ckpt.load_combined_checkpoint(str(path))

    def test_variant_mismatch_rejected(self, frozen_model, tmp_path):
        path = str(tmp_path / "model.ckpt")
        ckpt.save_combined_checkpoint(path, frozen_model, config={}, seed=0, epoch=0)
        with pytest.raises(FormatError, match="variant"):
            ckpt.load_combined_checkpoint(path, expected_variant=STACKED_SATTN)

    def test_wrong_kind_rejected(self, frozen_model, tmp_path):
        path = str(tmp_path / "nmt.ckpt")
        ckpt.save_nmt_checkpoint(path, frozen_model.nmt_ab, "ab", config={},
                                 bpe_a=frozen_model.bpe_a, bpe_b=frozen_model.bpe_b,
                                 vocab_a=frozen_model.vocab_a,
                                 vocab_b=frozen_model.vocab_b, seed=0, epoch=0)
        with pytest.raises(FormatError, match="combined"):
            ckpt.load_combined_checkpoint(path)


class TestNmtCheckpoint:
    def test_round_trip(self, frozen_model, tmp_path):
        path = str(tmp_path / "nmt_ab.ckpt")
        ckpt.save_nmt_checkpoint(path, frozen_model.nmt_ab, "ab",
                                 config={"d_enc": 4},
                                 bpe_a=frozen_model.bpe_a, bpe_b=frozen_model.bpe_b,
                                 vocab_a=frozen_model.vocab_a,
                                 vocab_b=frozen_model.vocab_b, seed=5, epoch=3)
        params, bpe_a, bpe_b, vocab_a, vocab_b, meta = ckpt.load_nmt_checkpoint(path)
        assert meta.direction == "ab" and meta.epoch == 3
        original = dict(frozen_model.nmt_ab.named_tensors("nmt"))
        for name, tensor in params.named_tensors("nmt"):
            assert tensor.data.tobytes() == original[name].data.tobytes()
        assert vocab_a.id_of == frozen_model.vocab_a.id_of
