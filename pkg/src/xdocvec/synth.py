"""Deterministic synthetic cross-lingual task.

Language a is a syllabic toy language with four disjoint topic lexicons plus
shared function words. Language b is a word-level bijective cipher of a with
deterministic local reordering (adjacent content words swap), so parallel
lines are exact translations but not positionally identical, and the task is
not a pure dictionary lookup. Everything is a pure function of the seed.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"

N_TOPICS = 4


@dataclass
class SyntheticTask:
    seed: int
    out_dir: str
    sizes: dict[str, int]
    topic_lexicons: list[list[str]]
    function_words: list[str]
    cipher: dict[str, str]
    files: dict[str, str] = field(default_factory=dict)

    def content_words(self) -> set[str]:
        return {w for lex in self.topic_lexicons for w in lex}


def _make_word(rng: np.random.Generator) -> str:
    n_syll = int(rng.integers(2, 4))
    return "".join(_CONSONANTS[int(rng.integers(len(_CONSONANTS)))]
                   + _VOWELS[int(rng.integers(len(_VOWELS)))]
                   for _ in range(n_syll))


def _make_unique_words(rng: np.random.Generator, count: int,
                       taken: set[str]) -> list[str]:
    words: list[str] = []
    while len(words) < count:
        w = _make_word(rng)
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


def swap_adjacent_content(tokens: list[str], content: set[str]) -> list[str]:
    """Swap each adjacent pair of content words, scanning left to right.
    Applying the rule twice restores the original order."""
    out = list(tokens)
    i = 0
    while i < len(out) - 1:
        if out[i] in content and out[i + 1] in content:
            out[i], out[i + 1] = out[i + 1], out[i]
            i += 2
        else:
            i += 1
    return out


def _sentence(rng: np.random.Generator, topic_words: list[str],
              function_words: list[str]) -> list[str]:
    length = int(rng.integers(5, 10))
    tokens = []
    for pos in range(length):
        # first two slots are always content so every sentence carries topic
        if pos < 2 or rng.random() < 0.6:
            tokens.append(topic_words[int(rng.integers(len(topic_words)))])
        else:
            tokens.append(function_words[int(rng.integers(len(function_words)))])
    return tokens


def _translate(tokens: list[str], cipher: dict[str, str],
               content_a: set[str]) -> list[str]:
    swapped = swap_adjacent_content(tokens, content_a)
    return [cipher[t] for t in swapped]


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


def make_synthetic_task(out_dir: str, seed: int, n_pairs: int = 2000,
                        n_train_docs: int = 400, n_test_docs: int = 400,
                        n_heldout: int = 200, words_per_topic: int = 18,
                        n_function_words: int = 30) -> SyntheticTask:
    """Emit aligned parallel files, held-out pairs, labeled document files in
    both languages, and a manifest. Byte-for-byte deterministic per seed."""
    for name, size in (("n_pairs", n_pairs), ("n_train_docs", n_train_docs),
                       ("n_test_docs", n_test_docs), ("n_heldout", n_heldout)):
        if size <= 0:
            raise InputError(f"{name} must be positive, got {size}")
    rng = np.random.default_rng(seed)
    taken: set[str] = set()
    topic_lexicons = [_make_unique_words(rng, words_per_topic, taken)
                      for _ in range(N_TOPICS)]
    function_words = _make_unique_words(rng, n_function_words, taken)
    a_words = sorted(taken)
    b_words = _make_unique_words(rng, len(a_words), taken)
    cipher = {a: b for a, b in zip(a_words, b_words)}
    content_a = {w for lex in topic_lexicons for w in lex}

    def parallel_lines(count: int) -> tuple[list[str], list[str]]:
        lines_a, lines_b = [], []
        for i in range(count):
            topic = i % N_TOPICS
            tokens = _sentence(rng, topic_lexicons[topic], function_words)
            lines_a.append(" ".join(tokens))
            lines_b.append(" ".join(_translate(tokens, cipher, content_a)))
        return lines_a, lines_b

    def labeled_docs(count: int, lang: str) -> list[str]:
        lines = []
        for i in range(count):
            topic = i % N_TOPICS
            n_sent = int(rng.integers(2, 5))
            tokens: list[str] = []
            for _ in range(n_sent):
                tokens.extend(_sentence(rng, topic_lexicons[topic], function_words))
            if lang == "b":
                tokens = _translate(tokens, cipher, content_a)
            lines.append(f"{topic}\t{' '.join(tokens)}")
        return lines

    os.makedirs(out_dir, exist_ok=True)
    train_a, train_b = parallel_lines(n_pairs)
    held_a, held_b = parallel_lines(n_heldout)
    files = {
        "train_a": "train.a.txt", "train_b": "train.b.txt",
        "heldout_a": "heldout.a.txt", "heldout_b": "heldout.b.txt",
        "docs_train_a": "docs_train.a.tsv", "docs_train_b": "docs_train.b.tsv",
        "docs_test_a": "docs_test.a.tsv", "docs_test_b": "docs_test.b.tsv",
        "manifest": "manifest.json",
    }
    _write_lines(os.path.join(out_dir, files["train_a"]), train_a)
    _write_lines(os.path.join(out_dir, files["train_b"]), train_b)
    _write_lines(os.path.join(out_dir, files["heldout_a"]), held_a)
    _write_lines(os.path.join(out_dir, files["heldout_b"]), held_b)
    _write_lines(os.path.join(out_dir, files["docs_train_a"]), labeled_docs(n_train_docs, "a"))
    _write_lines(os.path.join(out_dir, files["docs_train_b"]), labeled_docs(n_train_docs, "b"))
    _write_lines(os.path.join(out_dir, files["docs_test_a"]), labeled_docs(n_test_docs, "a"))
    _write_lines(os.path.join(out_dir, files["docs_test_b"]), labeled_docs(n_test_docs, "b"))

    task = SyntheticTask(
        seed=seed, out_dir=out_dir,
        sizes={"n_pairs": n_pairs, "n_train_docs": n_train_docs,
               "n_test_docs": n_test_docs, "n_heldout": n_heldout},
        topic_lexicons=topic_lexicons, function_words=function_words,
        cipher=cipher, files=files,
    )
    manifest = {
        "seed": seed, "sizes": task.sizes, "n_topics": N_TOPICS,
        "topic_lexicons": topic_lexicons, "function_words": function_words,
        "cipher": cipher, "files": files,
    }
    with open(os.path.join(out_dir, files["manifest"]), "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    return task


def read_labeled_documents(path: str) -> tuple[list[str], list[int]]:
    """'label TAB text' lines -> (documents, labels)."""
    docs: list[str] = []
    labels: list[int] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip("\n").split("\t", 1)
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected 'label<TAB>text'")
            labels.append(int(parts[0]))
            docs.append(parts[1])
    return docs, labels
