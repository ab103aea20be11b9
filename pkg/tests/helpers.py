"""Shared toy-model builders for the test suite."""

import numpy as np

from xdocvec.bpe import EOS_ID, Vocabulary
from xdocvec.model import CrossModel, build_cross_model
from xdocvec.shared import GRU_SATTN


def tiny_vocab(size: int) -> Vocabulary:
    return Vocabulary.build([f"w{i}" for i in range(size - 3)])


def make_cross_model(vocab_a=14, vocab_b=14, emb=4, d_enc=4, d_dec=4, d_att=4,
                     d_h=6, r=2, variant=GRU_SATTN, seed=0) -> CrossModel:
    return build_cross_model(tiny_vocab(vocab_a), tiny_vocab(vocab_b),
                             emb_size=emb, d_enc=d_enc, d_dec=d_dec, d_att=d_att,
                             d_h=d_h, r=r, variant=variant, seed=seed)


def toy_pairs(n: int, vocab: int = 14, min_len: int = 2, max_len: int = 5,
              seed: int = 0) -> list[tuple[list[int], list[int]]]:
    """Random aligned id pairs ending in eos; ids avoid the reserved range."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        la = int(rng.integers(min_len, max_len + 1))
        lb = int(rng.integers(min_len, max_len + 1))
        a = rng.integers(3, vocab, size=la).tolist() + [EOS_ID]
        b = rng.integers(3, vocab, size=lb).tolist() + [EOS_ID]
        pairs.append((a, b))
    return pairs
