"""Bundle of both translation directions plus the shared bottleneck.

Directions are named "ab" and "ba"; a sentence of language a embeds through
the "ab" path (the encoder trained to translate a into b), and vice versa.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bpe import PAD_ID, BpeModel, Vocabulary
from .errors import ContractError, InputError
from .nmt import NmtParams, encode_states, teacher_forced_nll
from .shared import SharedStack, bridge, forward_context
from .tensor import Tensor, no_grad

DIRECTIONS = ("ab", "ba")


@dataclass
class CrossModel:
    nmt_ab: NmtParams
    nmt_ba: NmtParams
    stack: SharedStack
    bpe_a: BpeModel
    bpe_b: BpeModel
    vocab_a: Vocabulary
    vocab_b: Vocabulary

    def direction(self, name: str) -> NmtParams:
        if name == "ab":
            return self.nmt_ab
        if name == "ba":
            return self.nmt_ba
        raise InputError(f"unknown direction {name!r}; expected 'ab' or 'ba'")

    def direction_for_language(self, lang: str) -> str:
        if lang == "a":
            return "ab"
        if lang == "b":
            return "ba"
        raise InputError(f"unknown language {lang!r}; expected 'a' or 'b'")

    def named_nmt_tensors(self) -> list[tuple[str, Tensor]]:
        return (self.nmt_ab.named_tensors("nmt_ab")
                + self.nmt_ba.named_tensors("nmt_ba"))

    def named_shared_tensors(self) -> list[tuple[str, Tensor]]:
        return self.stack.named_tensors("shared")

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        return self.named_nmt_tensors() + self.named_shared_tensors()

    def assert_nmt_frozen(self) -> None:
        for name, t in self.named_nmt_tensors():
            if t.requires_grad:
                raise ContractError(f"NMT tensor {name} is trainable but must be frozen")


class EncoderCache:
    """Per-sentence encoder states and previous-token embeddings.

    Valid only while the owning NMT parameters stay frozen: entries are
    detached constants, so reusing them after a parameter update would serve
    stale values.
    """

    def __init__(self, model: CrossModel):
        model.assert_nmt_frozen()
        self.model = model
        self._states: dict[tuple, Tensor] = {}
        self._prev_emb: dict[tuple, Tensor] = {}

    def states(self, direction: str, src_ids) -> Tensor:
        key = (direction, tuple(src_ids))
        hit = self._states.get(key)
        if hit is None:
            with no_grad():
                hit = encode_states(self.model.direction(direction), src_ids)
            self._states[key] = hit
        return hit

    def prev_emb(self, direction: str, tgt_ids) -> Tensor:
        key = (direction, tuple(tgt_ids))
        hit = self._prev_emb.get(key)
        if hit is None:
            params = self.model.direction(direction)
            prev_ids = [PAD_ID] + list(tgt_ids[:-1])
            hit = Tensor(params.tgt_emb.data[np.asarray(prev_ids, dtype=np.intp)])
            self._prev_emb[key] = hit
        return hit


def build_cross_model(vocab_a: Vocabulary, vocab_b: Vocabulary, *, emb_size: int,
                      d_enc: int, d_dec: int, d_att: int, d_h: int, r: int,
                      variant: str, seed: int, bpe_a: BpeModel | None = None,
                      bpe_b: BpeModel | None = None, init_scale: float = 0.08,
                      stack_init_scale: float | None = None) -> CrossModel:
    """Seeded construction. Both directions draw from the same derived seed,
    so initialization is a pure function of (src_vocab, tgt_vocab, seed) and
    swapping the corpus sides swaps the resulting models exactly."""
    nmt_ab = NmtParams.create(vocab_a.size, vocab_b.size, emb_size, d_enc, d_dec,
                              d_att, np.random.default_rng([seed, 0]), init_scale)
    nmt_ba = NmtParams.create(vocab_b.size, vocab_a.size, emb_size, d_enc, d_dec,
                              d_att, np.random.default_rng([seed, 0]), init_scale)
    stack = SharedStack.create(variant, d_h, r, 2 * d_enc,
                               np.random.default_rng([seed, 1]),
                               stack_init_scale if stack_init_scale is not None
                               else init_scale)
    return CrossModel(nmt_ab=nmt_ab, nmt_ba=nmt_ba, stack=stack,
                      bpe_a=bpe_a or BpeModel(), bpe_b=bpe_b or BpeModel(),
                      vocab_a=vocab_a, vocab_b=vocab_b)


def shared_forward(model: CrossModel, direction: str, src_ids, tgt_ids,
                   cache: EncoderCache | None = None) -> tuple[Tensor, Tensor]:
    """One direction's pass through encoder, shared stack and decoder.

    Returns (mean per-token NLL, context matrix); the decoder attends over
    the bridged context rows, not the raw encoder states.
    """
    params = model.direction(direction)
    if cache is not None:
        states = cache.states(direction, src_ids)
        prev_emb = cache.prev_emb(direction, tgt_ids)
    else:
        states = encode_states(params, src_ids)
        prev_emb = None
    context = forward_context(model.stack, direction, states)
    keys = bridge(model.stack, context)
    nll = teacher_forced_nll(params, keys, tgt_ids, tgt_emb_matrix=prev_emb)
    return nll, context


def context_for_sentence(model: CrossModel, lang: str, ids,
                         cache: EncoderCache | None = None) -> Tensor:
    """Context matrix of one sentence through its own language's encoder."""
    direction = model.direction_for_language(lang)
    if cache is not None:
        states = cache.states(direction, ids)
    else:
        states = encode_states(model.direction(direction), ids)
    return forward_context(model.stack, direction, states)
