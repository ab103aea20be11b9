"""Attention-based encoder-decoder for one translation direction.

Encoder: embedding + bidirectional GRU; each source frame's state is the
concatenation of the forward and backward scans. Decoder: a conditional GRU
(transition, attention read, second transition) with a single affine readout
over (state, context, previous embedding). The decoder attends over whatever
key matrix it is given, so the same frozen decoder can read either raw
encoder states or the shared bottleneck's projected output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .bpe import EOS_ID, PAD_ID
from .errors import DimensionError, InputError
from .rnn import GruParams, _gru_node, gru_scan, gru_step
from .tensor import Tensor


@dataclass
class AttentionParams:
    """Additive attention: score_i = v . tanh(query_proj + key_proj_i)."""

    u_a: Tensor  # (d_query, d_att)
    w_a: Tensor  # (d_key, d_att)
    v_a: Tensor  # (d_att, 1)

    @classmethod
    def create(cls, d_query: int, d_key: int, d_att: int, rng: np.random.Generator,
               init_scale: float = 0.08) -> "AttentionParams":
        u = rng.uniform(-init_scale, init_scale, size=(d_query, d_att))
        w = rng.uniform(-init_scale, init_scale, size=(d_key, d_att))
        v = rng.uniform(-init_scale, init_scale, size=(d_att, 1))
        return cls(Tensor(u, True), Tensor(w, True), Tensor(v, True))

    def named_tensors(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.u_a", self.u_a), (f"{prefix}.w_a", self.w_a),
                (f"{prefix}.v_a", self.v_a)]

    def validate(self) -> None:
        if self.u_a.data.shape[1] != self.w_a.data.shape[1] or \
                self.w_a.data.shape[1] != self.v_a.data.shape[0]:
            raise DimensionError(
                f"attention projections disagree: u_a {self.u_a.data.shape}, "
                f"w_a {self.w_a.data.shape}, v_a {self.v_a.data.shape}"
            )


@dataclass
class NmtParams:
    """All weights of one direction; hidden sizes are implied by the shapes."""

    src_emb: Tensor
    tgt_emb: Tensor
    enc_fwd: GruParams
    enc_bwd: GruParams
    dec_gru1: GruParams   # previous-token embedding -> hidden
    dec_gru2: GruParams   # attention context -> hidden
    att: AttentionParams
    w_out: Tensor
    b_out: Tensor
    w_init: Tensor
    b_init: Tensor

    @property
    def d_enc(self) -> int:
        return self.enc_fwd.hidden

    @property
    def d_key(self) -> int:
        return 2 * self.d_enc

    @property
    def d_dec(self) -> int:
        return self.dec_gru1.hidden

    @property
    def tgt_vocab_size(self) -> int:
        return self.tgt_emb.data.shape[0]

    @classmethod
    def create(cls, src_vocab: int, tgt_vocab: int, emb_size: int, d_enc: int,
               d_dec: int, d_att: int, rng: np.random.Generator,
               init_scale: float = 0.08) -> "NmtParams":
        d_key = 2 * d_enc

        def w(*shape):
            return Tensor(rng.uniform(-init_scale, init_scale, size=shape), True)

        return cls(
            src_emb=w(src_vocab, emb_size),
            tgt_emb=w(tgt_vocab, emb_size),
            enc_fwd=GruParams.create(emb_size, d_enc, rng, init_scale),
            enc_bwd=GruParams.create(emb_size, d_enc, rng, init_scale),
            dec_gru1=GruParams.create(emb_size, d_dec, rng, init_scale),
            dec_gru2=GruParams.create(d_key, d_dec, rng, init_scale),
            att=AttentionParams.create(d_dec, d_key, d_att, rng, init_scale),
            w_out=w(d_dec + d_key + emb_size, tgt_vocab),
            b_out=Tensor(np.zeros(tgt_vocab), True),
            w_init=w(d_key, d_dec),
            b_init=Tensor(np.zeros(d_dec), True),
        )

    def named_tensors(self, prefix: str) -> list[tuple[str, Tensor]]:
        out = [(f"{prefix}.src_emb", self.src_emb), (f"{prefix}.tgt_emb", self.tgt_emb)]
        out += self.enc_fwd.named_tensors(f"{prefix}.enc_fwd")
        out += self.enc_bwd.named_tensors(f"{prefix}.enc_bwd")
        out += self.dec_gru1.named_tensors(f"{prefix}.dec_gru1")
        out += self.dec_gru2.named_tensors(f"{prefix}.dec_gru2")
        out += self.att.named_tensors(f"{prefix}.att")
        out += [(f"{prefix}.w_out", self.w_out), (f"{prefix}.b_out", self.b_out),
                (f"{prefix}.w_init", self.w_init), (f"{prefix}.b_init", self.b_init)]
        return out

    def set_requires_grad(self, flag: bool) -> None:
        for _, t in self.named_tensors("m"):
            t.requires_grad = flag
            t.grad = np.zeros_like(t.data) if flag else None


@dataclass
class DecoderState:
    s: Tensor          # hidden state after the full conditional step
    s_hat: Tensor      # intermediate state between the two transitions
    y_prev: int
    c: Tensor | None   # context vector read on the last step


@dataclass
class TranslationResult:
    ids: list[int]
    truncated: bool = False


def _mean_rows(x: Tensor) -> Tensor:
    n = x.data.shape[0]
    ones = Tensor(np.full((1, n), 1.0 / n))
    return T.matmul(ones, x)


def encode_states(params: NmtParams, src_ids) -> Tensor:
    """(L, 2*d_enc) matrix of bidirectional encoder states; forward rows
    depend only on the prefix, backward rows only on the suffix."""
    if len(src_ids) == 0:
        raise InputError("cannot encode an empty id sequence")
    emb = T.embedding(params.src_emb, src_ids)
    fwd = gru_scan(params.enc_fwd, emb)
    bwd = gru_scan(params.enc_bwd, emb, reverse=True)
    return T.concat([fwd, bwd], axis=1)


def _attend(att: AttentionParams, keys: Tensor, keys_proj: Tensor,
            s_hat: Tensor) -> tuple[Tensor, Tensor]:
    q = T.matmul(s_hat, att.u_a)
    scores = T.matmul(T.tanh(T.add(keys_proj, q)), att.v_a)  # (L, 1)
    alpha = T.softmax(scores, axis=0)
    c = T.matmul(T.transpose(alpha), keys)                   # (1, d_key)
    return c, alpha


def attend(att: AttentionParams, keys: Tensor, s_hat: Tensor) -> tuple[Tensor, Tensor]:
    """Weighted mean of `keys` rows under additive attention scores; the
    weights sum to one. Returns (context, weights)."""
    if keys.data.shape[1] != att.w_a.data.shape[0]:
        raise DimensionError(
            f"keys of width {keys.data.shape[1]} vs attention w_a {att.w_a.data.shape}"
        )
    keys_proj = T.matmul(keys, att.w_a)
    return _attend(att, keys, keys_proj, s_hat)


def init_decoder_state(params: NmtParams, keys: Tensor) -> Tensor:
    """Initial decoder state: tanh-affine map of the mean key row."""
    return T.tanh(T.affine(_mean_rows(keys), params.w_init, params.b_init))


def decode_step(params: NmtParams, state: DecoderState, keys: Tensor,
                keys_proj: Tensor | None = None) -> tuple[DecoderState, Tensor]:
    """One conditional-GRU step: transition on the previous token, attention
    read over `keys`, second transition on the context, affine readout."""
    if not (0 <= state.y_prev < params.tgt_vocab_size):
        raise InputError(f"token id {state.y_prev} outside target vocabulary")
    if keys_proj is None:
        keys_proj = T.matmul(keys, params.att.w_a)
    e_prev = T.embedding(params.tgt_emb, [state.y_prev])
    s_hat = gru_step(params.dec_gru1, e_prev, state.s)
    c, _ = _attend(params.att, keys, keys_proj, s_hat)
    s = gru_step(params.dec_gru2, c, s_hat)
    logits = T.affine(T.concat([s, c, e_prev], axis=1), params.w_out, params.b_out)
    return DecoderState(s=s, s_hat=s_hat, y_prev=state.y_prev, c=c), logits


def teacher_forced_nll(params: NmtParams, keys: Tensor, tgt_ids,
                       tgt_emb_matrix: Tensor | None = None) -> Tensor:
    """Mean per-token NLL of `tgt_ids` (which end in eos) with the decoder
    attending over `keys`. The readout for all steps is batched into one
    affine + cross-entropy node."""
    if len(tgt_ids) == 0:
        raise InputError("cannot score an empty target sequence")
    prev_ids = [PAD_ID] + list(tgt_ids[:-1])
    prev_emb = tgt_emb_matrix if tgt_emb_matrix is not None \
        else T.embedding(params.tgt_emb, prev_ids)
    keys_proj = T.matmul(keys, params.att.w_a)
    s = init_decoder_state(params, keys)
    s_rows: list[Tensor] = []
    c_rows: list[Tensor] = []
    for j in range(len(tgt_ids)):
        s_hat = _gru_node(params.dec_gru1, prev_emb, j, s)
        c, _ = _attend(params.att, keys, keys_proj, s_hat)
        s = gru_step(params.dec_gru2, c, s_hat)
        s_rows.append(s)
        c_rows.append(c)
    s_mat = T.concat(s_rows, axis=0) if len(s_rows) > 1 else s_rows[0]
    c_mat = T.concat(c_rows, axis=0) if len(c_rows) > 1 else c_rows[0]
    features = T.concat([s_mat, c_mat, prev_emb], axis=1)
    logits = T.affine(features, params.w_out, params.b_out)
    return T.softmax_cross_entropy(logits, tgt_ids)


def sequence_loss(params: NmtParams, src_ids, tgt_ids, max_len: int | None = None) -> Tensor:
    """Teacher-forced mean NLL through the direct encoder-attention path.

    `max_len` caps content tokens (the trailing eos is not counted) and is a
    training-time restriction only.
    """
    if len(src_ids) == 0 or len(tgt_ids) == 0:
        raise InputError("sequence loss needs non-empty source and target")
    if max_len is not None:
        if len(src_ids) - 1 > max_len or len(tgt_ids) - 1 > max_len:
            raise InputError(
                f"sentence exceeds the training length cap {max_len}: "
                f"src={len(src_ids) - 1}, tgt={len(tgt_ids) - 1} content tokens"
            )
    return teacher_forced_nll(params, encode_states(params, src_ids), tgt_ids)


def greedy_decode(params: NmtParams, keys: Tensor, max_len: int) -> TranslationResult:
    """Argmax decoding over `keys` until eos or `max_len` emissions."""
    keys_proj = T.matmul(keys, params.att.w_a)
    state = DecoderState(s=init_decoder_state(params, keys), s_hat=None,
                         y_prev=PAD_ID, c=None)
    out: list[int] = []
    for _ in range(max_len):
        state, logits = decode_step(params, state, keys, keys_proj)
        y = int(np.argmax(logits.data[0]))
        if y == EOS_ID:
            return TranslationResult(ids=out, truncated=False)
        out.append(y)
        state = DecoderState(s=state.s, s_hat=state.s_hat, y_prev=y, c=state.c)
    return TranslationResult(ids=out, truncated=True)


def translate(params: NmtParams, src_ids, max_len: int) -> TranslationResult:
    """Greedy (beam 1) translation through the direct path; deterministic."""
    with T.no_grad():
        if max_len <= 0:
            return TranslationResult(ids=[], truncated=True)
        keys = encode_states(params, src_ids)
        return greedy_decode(params, keys, max_len)
