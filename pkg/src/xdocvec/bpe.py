"""Byte-pair encoding: learn merges on a corpus, segment words, map to ids.

Merges are word-internal; every word ends with a reserved end-of-word marker
symbol so segmentation is lossless: stripping the marker and concatenating
recovers the input text exactly.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InputError

END_OF_WORD = "</w>"
PAD, UNK, EOS = "<pad>", "<unk>", "</s>"
PAD_ID, UNK_ID, EOS_ID = 0, 1, 2
_RESERVED = (PAD, UNK, EOS)


@dataclass
class BpeModel:
    merges: list[tuple[str, str]] = field(default_factory=list)
    end_of_word_marker: str = END_OF_WORD
    _ranks: dict[tuple[str, str], int] = field(default_factory=dict, repr=False)
    _cache: dict[str, tuple[str, ...]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._ranks:
            self._ranks = {pair: i for i, pair in enumerate(self.merges)}

    @property
    def num_merges(self) -> int:
        return len(self.merges)


def _word_symbols(word: str, marker: str) -> tuple[str, ...]:
    return tuple(word) + (marker,)


def _pair_counts(vocab: dict[tuple[str, ...], int]) -> Counter:
    counts: Counter = Counter()
    for symbols, freq in vocab.items():
        for a, b in zip(symbols, symbols[1:]):
            counts[(a, b)] += freq
    return counts


def _merge_word(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    first, second = pair
    out: list[str] = []
    i = 0
    n = len(symbols)
    while i < n:
        if i < n - 1 and symbols[i] == first and symbols[i + 1] == second:
            out.append(first + second)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def learn_bpe(corpus: Iterable[str], num_merges: int, marker: str = END_OF_WORD) -> BpeModel:
    """Greedy most-frequent-pair merging; ties break lexicographically on the
    pair, so the merge list is a pure function of the corpus."""
    word_freq: Counter = Counter()
    for line in corpus:
        word_freq.update(line.split())
    if not word_freq:
        raise InputError("cannot learn BPE merges from an empty corpus")
    vocab = {_word_symbols(w, marker): f for w, f in word_freq.items()}
    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        counts = _pair_counts(vocab)
        if not counts:
            break
        best_freq = max(counts.values())
        if best_freq < 2:
            break  # no pair repeats; further merges would just memorize words
        best = min(p for p, c in counts.items() if c == best_freq)
        merges.append(best)
        vocab = {_merge_word(s, best): f for s, f in vocab.items()}
    return BpeModel(merges=merges, end_of_word_marker=marker)


def _segment_word(model: BpeModel, word: str) -> tuple[str, ...]:
    cached = model._cache.get(word)
    if cached is not None:
        return cached
    symbols = _word_symbols(word, model.end_of_word_marker)
    ranks = model._ranks
    while len(symbols) > 1:
        best_rank = None
        best_pair = None
        for pair in zip(symbols, symbols[1:]):
            rank = ranks.get(pair)
            if rank is not None and (best_rank is None or rank < best_rank):
                best_rank = rank
                best_pair = pair
        if best_pair is None:
            break
        symbols = _merge_word(symbols, best_pair)
    model._cache[word] = symbols
    return symbols


def apply_bpe(model: BpeModel, words: Sequence[str]) -> list[str]:
    """Split each word to characters plus the end-of-word marker, then apply
    merges in learned priority order. Unseen characters pass through."""
    out: list[str] = []
    for word in words:
        out.extend(_segment_word(model, word))
    return out


def join_bpe(subwords: Sequence[str], marker: str = END_OF_WORD) -> str:
    """Inverse of apply_bpe over a whole sentence: marker ends a word."""
    words: list[str] = []
    current: list[str] = []
    for s in subwords:
        if s.endswith(marker):
            current.append(s[: -len(marker)])
            words.append("".join(current))
            current = []
        else:
            current.append(s)
    if current:
        words.append("".join(current))
    return " ".join(words)


def save_merges(model: BpeModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for a, b in model.merges:
            f.write(f"{a} {b}\n")


def load_merges(path: str) -> BpeModel:
    merges: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected two space-separated symbols")
            merges.append((parts[0], parts[1]))
    return BpeModel(merges=merges)


@dataclass
class Vocabulary:
    id_of: dict[str, int]
    symbol_of: dict[int, str]

    @property
    def size(self) -> int:
        return len(self.id_of)

    @classmethod
    def build(cls, subwords: Iterable[str], limit: int = 0) -> "Vocabulary":
        """Frequency-ordered vocabulary with reserved pad/unk/eos ids; `limit`
        caps the total size when positive."""
        counts = Counter(subwords)
        id_of = {PAD: PAD_ID, UNK: UNK_ID, EOS: EOS_ID}
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        for symbol, _ in ordered:
            if symbol in id_of:
                continue
            if limit and len(id_of) >= limit:
                break
            id_of[symbol] = len(id_of)
        return cls(id_of=id_of, symbol_of={i: s for s, i in id_of.items()})


def encode(vocab: Vocabulary, subwords: Sequence[str]) -> list[int]:
    """Map symbols to ids (unknowns to the unk id) and append the eos id."""
    return [vocab.id_of.get(s, UNK_ID) for s in subwords] + [EOS_ID]


def decode(vocab: Vocabulary, ids: Sequence[int]) -> list[str]:
    """Inverse of encode: drops pad/eos, keeps the unk symbol visible."""
    out: list[str] = []
    for i in ids:
        symbol = vocab.symbol_of.get(int(i))
        if symbol is None:
            raise InputError(f"id {i} is outside the vocabulary (size {vocab.size})")
        if symbol in (PAD, EOS):
            continue
        out.append(symbol)
    return out


def save_vocab(vocab: Vocabulary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for symbol, idx in sorted(vocab.id_of.items(), key=lambda kv: kv[1]):
            f.write(f"{symbol}\t{idx}\n")


def load_vocab(path: str) -> Vocabulary:
    id_of: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected 'symbol<TAB>id'")
            id_of[parts[0]] = int(parts[1])
    for symbol, want in zip(_RESERVED, (PAD_ID, UNK_ID, EOS_ID)):
        if id_of.get(symbol) != want:
            raise InputError(f"{path}: reserved symbol {symbol!r} must map to id {want}")
    return Vocabulary(id_of=id_of, symbol_of={i: s for s, i in id_of.items()})
