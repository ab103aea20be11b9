"""The shared bottleneck between the two translation directions.

Ordering for the default variant: per-language affine projection, a shared
GRU over frames, then r self-attentive pooling heads that squeeze any number
of frames into an (r, d_h) context matrix. Each head scores a frame by the
dot product of that frame's own query and key (frames never attend to each
other), softmaxes the scores over frames, and averages the frames' value
vectors. The stacked variant drops the first GRU and pools twice instead.

The bridge turns the context matrix back into decoder-readable keys: a GRU
scan over the r rows plus an affine projection up to the width the frozen
decoder attention was trained on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError, InputError
from .nmt import AttentionParams, attend
from .rnn import GruParams, gru_scan
from .tensor import Tensor

GRU_SATTN = "gru_sattn"
STACKED_SATTN = "stacked_sattn"
VARIANTS = (GRU_SATTN, STACKED_SATTN)


@dataclass
class LanguageProjection:
    """Affine map from encoder-state width down to d_h; one per direction."""

    w_e: Tensor
    b_e: Tensor

    @classmethod
    def create(cls, d_in: int, d_h: int, rng: np.random.Generator,
               init_scale: float = 0.08) -> "LanguageProjection":
        return cls(
            w_e=Tensor(rng.uniform(-init_scale, init_scale, size=(d_in, d_h)), True),
            b_e=Tensor(np.zeros(d_h), True),
        )

    def named_tensors(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.w_e", self.w_e), (f"{prefix}.b_e", self.b_e)]


@dataclass
class HeadParams:
    """Query/key/value projections of one pooling head; all d_h x d_h."""

    wq: Tensor
    wk: Tensor
    wv: Tensor
    bq: Tensor
    bk: Tensor
    bv: Tensor

    @classmethod
    def create(cls, d_h: int, rng: np.random.Generator,
               init_scale: float = 0.08) -> "HeadParams":
        def w():
            return Tensor(rng.uniform(-init_scale, init_scale, size=(d_h, d_h)), True)

        def b():
            return Tensor(np.zeros(d_h), True)

        return cls(wq=w(), wk=w(), wv=w(), bq=b(), bk=b(), bv=b())

    def named_tensors(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.{f}", getattr(self, f))
                for f in ("wq", "wk", "wv", "bq", "bk", "bv")]


@dataclass
class ContextMatrix:
    """Fixed-size (r, d_h) summary of a variable-length input."""

    values: np.ndarray
    source_length: int
    path: str  # which direction's encoder produced it, "ab" or "ba"

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ContractError("context matrix contains non-finite entries")


@dataclass
class SharedStack:
    variant: str
    proj_a: LanguageProjection
    proj_b: LanguageProjection
    heads: list[HeadParams]
    gru2: GruParams
    w_p: Tensor
    b_p: Tensor
    d_h: int
    r: int
    gru1: GruParams | None = None          # present only for gru_sattn
    heads2: list[HeadParams] | None = None  # present only for stacked_sattn

    @classmethod
    def create(cls, variant: str, d_h: int, r: int, d_key: int,
               rng: np.random.Generator, init_scale: float = 0.08) -> "SharedStack":
        if variant not in VARIANTS:
            raise InputError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
        stack = cls(
            variant=variant,
            proj_a=LanguageProjection.create(d_key, d_h, rng, init_scale),
            proj_b=LanguageProjection.create(d_key, d_h, rng, init_scale),
            heads=[HeadParams.create(d_h, rng, init_scale) for _ in range(r)],
            gru2=GruParams.create(d_h, d_h, rng, init_scale),
            w_p=Tensor(rng.uniform(-init_scale, init_scale, size=(d_h, d_key)), True),
            b_p=Tensor(np.zeros(d_key), True),
            d_h=d_h,
            r=r,
        )
        if variant == GRU_SATTN:
            stack.gru1 = GruParams.create(d_h, d_h, rng, init_scale)
        else:
            stack.heads2 = [HeadParams.create(d_h, rng, init_scale) for _ in range(r)]
        return stack

    def named_tensors(self, prefix: str = "shared") -> list[tuple[str, Tensor]]:
        out = self.proj_a.named_tensors(f"{prefix}.proj_a")
        out += self.proj_b.named_tensors(f"{prefix}.proj_b")
        if self.gru1 is not None:
            out += self.gru1.named_tensors(f"{prefix}.gru1")
        for i, head in enumerate(self.heads):
            out += head.named_tensors(f"{prefix}.heads.{i}")
        if self.heads2 is not None:
            for i, head in enumerate(self.heads2):
                out += head.named_tensors(f"{prefix}.heads2.{i}")
        out += self.gru2.named_tensors(f"{prefix}.gru2")
        out += [(f"{prefix}.w_p", self.w_p), (f"{prefix}.b_p", self.b_p)]
        return out


def project_in(proj: LanguageProjection, states: Tensor) -> Tensor:
    """Per-row affine map of (L, 2*d_enc) encoder states to (L, d_h)."""
    if states.data.shape[1] != proj.w_e.data.shape[0]:
        raise DimensionError(
            f"projection expects rows of width {proj.w_e.data.shape[0]}, "
            f"got {states.data.shape}"
        )
    return T.affine(states, proj.w_e, proj.b_e)


def shared_gru1(stack: SharedStack, projected: Tensor) -> Tensor:
    """Unidirectional GRU over the projected frames, zero initial state."""
    if stack.variant != GRU_SATTN:
        raise ContractError(f"shared_gru1 is undefined for variant {stack.variant!r}")
    return gru_scan(stack.gru1, projected)


def self_attend_head(head: HeadParams, frames: Tensor, d_h: int) -> tuple[Tensor, Tensor]:
    """One head's pooled vector over (L, d_h) frames.

    Each frame scores itself (query_i . key_i / sqrt(d_h)); the softmax over
    frames weights the frames' value vectors. Returns (pooled (1, d_h),
    weights (1, L)).
    """
    if frames.data.shape[0] == 0:
        raise InputError("self-attentive head needs at least one frame")
    q = T.affine(frames, head.wq, head.bq)
    k = T.affine(frames, head.wk, head.bk)
    v = T.affine(frames, head.wv, head.bv)
    scores = T.scale(T.row_dot(q, k), 1.0 / math.sqrt(d_h))
    weights = T.softmax(scores, axis=1)
    return T.matmul(weights, v), weights


def _pool_heads(heads: list[HeadParams], frames: Tensor, d_h: int) -> Tensor:
    rows = [self_attend_head(h, frames, d_h)[0] for h in heads]
    return T.concat(rows, axis=0) if len(rows) > 1 else rows[0]


def context_matrix(stack: SharedStack, frames: Tensor) -> Tensor:
    """(r, d_h) matrix whose row m is head m's pooled vector."""
    return _pool_heads(stack.heads, frames, stack.d_h)


def stacked_context_matrix(stack: SharedStack, projected: Tensor) -> Tensor:
    """Two chained pooling layers: the first squeezes L frames to r rows,
    the second re-pools those r rows. No shared GRU in this variant."""
    if stack.variant != STACKED_SATTN:
        raise ContractError(f"stacked_context_matrix is undefined for variant {stack.variant!r}")
    inner = _pool_heads(stack.heads, projected, stack.d_h)
    return _pool_heads(stack.heads2, inner, stack.d_h)


def forward_context(stack: SharedStack, direction: str, states: Tensor) -> Tensor:
    """Encoder states -> context matrix along one direction's path."""
    proj = stack.proj_a if direction == "ab" else stack.proj_b
    projected = project_in(proj, states)
    if stack.variant == GRU_SATTN:
        return context_matrix(stack, shared_gru1(stack, projected))
    return stacked_context_matrix(stack, projected)


def bridge(stack: SharedStack, context: Tensor) -> Tensor:
    """GRU scan over the r context rows, then per-row affine projection back
    up to the decoder-attention key width."""
    if context.data.shape[1] != stack.d_h:
        raise DimensionError(f"context rows of width {context.data.shape[1]}, "
                             f"stack d_h={stack.d_h}")
    scanned = gru_scan(stack.gru2, context)
    return T.affine(scanned, stack.w_p, stack.b_p)


def bridge_attend(att: AttentionParams, keys: Tensor, s_hat: Tensor) -> tuple[Tensor, Tensor]:
    """Decoder-side attention over the bridged rows; the mechanism is the
    encoder-attention one, just fed r rows instead of L."""
    return attend(att, keys, s_hat)


def as_context_matrix(values: Tensor, source_length: int, path: str) -> ContextMatrix:
    return ContextMatrix(values=np.array(values.data), source_length=source_length, path=path)
