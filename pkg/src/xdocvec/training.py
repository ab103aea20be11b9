"""Two-stage training.

Stage one trains each translation direction independently on cross-entropy.
Stage two freezes both directions and updates only the shared-stack tensors
(including the per-language projections) under a combined objective: the two
directions' translation losses plus a hinged distance term that pulls paired
context matrices together and pushes randomly sampled unpaired ones at least
a margin apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError, InputError
from .model import CrossModel, EncoderCache, shared_forward
from .nmt import NmtParams, sequence_loss
from .optim import Adam
from .tensor import Tensor, backward


@dataclass
class LossConfig:
    beta: float = 0.5
    n_neg: int = 20
    margin: float | None = None  # defaults to 2*sqrt(d_h) at use time
    max_len: int = 50
    symmetric_negatives: bool = False

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise InputError(f"beta must lie in [0, 1], got {self.beta}")
        if self.n_neg < 1:
            raise InputError(f"need at least one negative sample, got {self.n_neg}")
        if self.margin is not None and self.margin <= 0:
            raise InputError(f"margin must be positive, got {self.margin}")

    def margin_for(self, d_h: int) -> float:
        return self.margin if self.margin is not None else 2.0 * math.sqrt(d_h)


@dataclass
class LossBreakdown:
    """Per-batch record; list fields are indexed per pair in the batch."""

    l_mt_ab: float
    l_mt_ba: float
    l_mt: float
    d_pos: list[float]
    d_neg: list[list[float]]
    l_dj: list[list[float]]
    l_d: float
    l_com: float


@dataclass
class ParallelBatch:
    pairs: list[tuple[list[int], list[int]]]

    def __len__(self) -> int:
        return len(self.pairs)


def distance_loss(context_a: Tensor, context_b: Tensor) -> Tensor:
    """Squared Frobenius norm of the difference of two context matrices."""
    if context_a.data.shape != context_b.data.shape:
        raise DimensionError(
            f"context matrices disagree: {context_a.data.shape} vs {context_b.data.shape}"
        )
    return T.sum_all(T.square(T.sub(context_a, context_b)))


def negative_sample_loss(d_pos: Tensor, d_neg: Tensor, margin: float) -> Tensor:
    """Hinge on one negative: max(0, margin + d_pos - d_neg)."""
    return T.relu(T.shift(T.sub(d_pos, d_neg), margin))


def _mean_scalars(terms: list[Tensor]) -> Tensor:
    acc = terms[0]
    for t in terms[1:]:
        acc = T.add(acc, t)
    return T.scale(acc, 1.0 / len(terms)) if len(terms) > 1 else acc


def _sum_scalars(terms: list[Tensor]) -> Tensor:
    acc = terms[0]
    for t in terms[1:]:
        acc = T.add(acc, t)
    return acc


def combined_loss(batch: ParallelBatch, model: CrossModel, cfg: LossConfig,
                  sampler_seed, cache: EncoderCache | None = None,
                  ) -> tuple[Tensor, LossBreakdown]:
    """Both directions' translation losses through the shared stack, plus the
    hinged distance term over in-batch negatives.

    Negatives for pair i are other pairs' opposite-side context matrices,
    drawn without replacement when the batch allows. The per-pair hinge sums
    are averaged over the batch before mixing with the translation term.
    """
    n = len(batch)
    if n < 2:
        raise InputError(f"batch of {n} has no valid negatives (need at least 2 pairs)")
    rng = np.random.default_rng(sampler_seed)
    nll_ab: list[Tensor] = []
    nll_ba: list[Tensor] = []
    ctx_a: list[Tensor] = []
    ctx_b: list[Tensor] = []
    for a_ids, b_ids in batch.pairs:
        nll, ctx = shared_forward(model, "ab", a_ids, b_ids, cache)
        nll_ab.append(nll)
        ctx_a.append(ctx)
        nll, ctx = shared_forward(model, "ba", b_ids, a_ids, cache)
        nll_ba.append(nll)
        ctx_b.append(ctx)
    l_mt_ab = _mean_scalars(nll_ab)
    l_mt_ba = _mean_scalars(nll_ba)
    l_mt = T.add(l_mt_ab, l_mt_ba)

    margin = cfg.margin_for(model.stack.d_h)
    d_pos_vals: list[float] = []
    d_neg_vals: list[list[float]] = []
    l_dj_vals: list[list[float]] = []
    pair_sums: list[Tensor] = []
    for i in range(n):
        d_pos = distance_loss(ctx_a[i], ctx_b[i])
        others = np.array([j for j in range(n) if j != i])
        chosen = rng.choice(others, size=cfg.n_neg, replace=len(others) < cfg.n_neg)
        hinge_terms: list[Tensor] = []
        negs: list[float] = []
        hinges: list[float] = []
        for j in chosen:
            d_neg = distance_loss(ctx_a[i], ctx_b[int(j)])
            if cfg.symmetric_negatives:
                d_neg_sym = distance_loss(ctx_b[i], ctx_a[int(j)])
                term = T.scale(
                    T.add(negative_sample_loss(d_pos, d_neg, margin),
                          negative_sample_loss(d_pos, d_neg_sym, margin)), 0.5)
            else:
                term = negative_sample_loss(d_pos, d_neg, margin)
            hinge_terms.append(term)
            negs.append(d_neg.item())
            hinges.append(term.item())
        pair_sums.append(_sum_scalars(hinge_terms))
        d_pos_vals.append(d_pos.item())
        d_neg_vals.append(negs)
        l_dj_vals.append(hinges)
    l_d = T.scale(_sum_scalars(pair_sums), 1.0 / n)
    l_com = T.add(T.scale(l_d, cfg.beta), T.scale(l_mt, 1.0 - cfg.beta))
    breakdown = LossBreakdown(
        l_mt_ab=l_mt_ab.item(), l_mt_ba=l_mt_ba.item(), l_mt=l_mt.item(),
        d_pos=d_pos_vals, d_neg=d_neg_vals, l_dj=l_dj_vals,
        l_d=l_d.item(), l_com=l_com.item(),
    )
    return l_com, breakdown


def make_batches(n_items: int, batch_size: int, rng: np.random.Generator,
                 min_size: int = 1) -> list[np.ndarray]:
    """Shuffled index batches; a trailing batch below `min_size` is dropped."""
    order = rng.permutation(n_items)
    batches = [order[i:i + batch_size] for i in range(0, n_items, batch_size)]
    return [b for b in batches if len(b) >= min_size]


def train_nmt_direction(params: NmtParams, pairs: list[tuple[list[int], list[int]]],
                        epochs: int, batch_size: int, alpha: float, max_len: int,
                        seed: int) -> list[float]:
    """Adam on teacher-forced cross-entropy; returns the per-batch loss log."""
    if not pairs:
        raise InputError("cannot train on an empty corpus")
    opt = Adam(params.named_tensors("nmt"), alpha=alpha)
    rng = np.random.default_rng(seed)
    history: list[float] = []
    for _ in range(epochs):
        for batch in make_batches(len(pairs), batch_size, rng):
            opt.zero_grad()
            losses = [sequence_loss(params, pairs[i][0], pairs[i][1], max_len)
                      for i in batch]
            loss = _mean_scalars(losses)
            backward(loss)
            opt.step()
            history.append(loss.item())
    return history


def pretrain_nmt(pairs: list[tuple[list[int], list[int]]], nmt_ab: NmtParams,
                 nmt_ba: NmtParams, epochs: int, batch_size: int, alpha: float,
                 max_len: int, seed: int, freeze: bool = True,
                 ) -> dict[str, list[float]]:
    """Train both directions independently and mark them frozen for stage two.

    Both directions use the same derived seed, so swapping the corpus sides
    swaps the resulting models exactly.
    """
    if not pairs:
        raise InputError("cannot pretrain on an empty corpus")
    history_ab = train_nmt_direction(nmt_ab, pairs, epochs, batch_size, alpha,
                                     max_len, seed)
    swapped = [(b, a) for a, b in pairs]
    history_ba = train_nmt_direction(nmt_ba, swapped, epochs, batch_size, alpha,
                                     max_len, seed)
    if freeze:
        nmt_ab.set_requires_grad(False)
        nmt_ba.set_requires_grad(False)
    return {"ab": history_ab, "ba": history_ba}


def train_shared(pairs: list[tuple[list[int], list[int]]], model: CrossModel,
                 cfg: LossConfig, epochs: int, batch_size: int, alpha: float,
                 seed: int) -> list[LossBreakdown]:
    """Stage two: Adam on the combined loss, updating only shared-stack
    tensors. Encoder states are precomputed once since the encoders are
    frozen for the whole stage."""
    if not pairs:
        raise InputError("cannot train the shared stack on an empty corpus")
    model.assert_nmt_frozen()
    if batch_size < 2:
        raise InputError("shared training needs batches of at least 2 pairs")
    cache = EncoderCache(model)
    opt = Adam(model.named_shared_tensors(), alpha=alpha)
    rng = np.random.default_rng(seed)
    history: list[LossBreakdown] = []
    for epoch in range(epochs):
        for step, batch_idx in enumerate(make_batches(len(pairs), batch_size, rng,
                                                      min_size=2)):
            batch = ParallelBatch([pairs[i] for i in batch_idx])
            opt.zero_grad()
            loss, breakdown = combined_loss(batch, model, cfg,
                                            sampler_seed=[seed, epoch, step],
                                            cache=cache)
            backward(loss)
            opt.step()
            history.append(breakdown)
    return history
