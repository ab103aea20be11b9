"""Production mode: fixed-size document vectors by forward pass only.

A document is tokenized as one continuous sequence (no sentence chunking,
no length cap) and pushed through an encoder plus the shared pooling layers.
No decoder, no output softmax, no parameter updates. The translator path
greedy-decodes the document into the other language first and embeds the
output through the opposite encoder; the translator is the model's own
frozen NMT direction, not an external system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, BinaryIO

import numpy as np

from . import bpe as bpe_mod
from .bpe import EOS_ID
from .errors import ContractError, FormatError, InputError
from .model import CrossModel, context_for_sentence
from .nmt import encode_states, greedy_decode
from .shared import ContextMatrix, forward_context
from .tensor import no_grad, read_tensor_block, write_tensor_block

VARIANTS = ("sum_a", "sum_b", "con_a", "con_b", "a_concat_b", "a_plus_b", "con_both")
MODES = ("direct_only", "translator_combined")


@dataclass
class DocVector:
    variant: str
    values: np.ndarray
    dim: int
    path_meta: dict[str, Any] = field(default_factory=dict)


def _other_lang(lang: str) -> str:
    return "b" if lang == "a" else "a"


def embed_direct(model: CrossModel, lang: str, ids) -> ContextMatrix:
    """Context matrix of a document through its own language's encoder."""
    if len(ids) == 0:
        raise InputError("cannot embed an empty document")
    with no_grad():
        context = context_for_sentence(model, lang, ids)
    return ContextMatrix(values=context.data, source_length=len(ids),
                         path=model.direction_for_language(lang))


def embed_via_translator(model: CrossModel, lang: str, ids, doc_id: str = "?",
                         max_len: int | None = None) -> ContextMatrix:
    """Translate the document with its own direction's decoder (beam 1), then
    embed the output through the opposite language's encoder."""
    if len(ids) == 0:
        raise InputError("cannot embed an empty document")
    direction = model.direction_for_language(lang)
    params = model.direction(direction)
    if max_len is None:
        max_len = 2 * len(ids) + 10
    with no_grad():
        keys = encode_states(params, ids)
        result = greedy_decode(params, keys, max_len)
        if not result.ids:
            raise InputError(
                f"document {doc_id!r}: translation produced no output tokens")
        translated = result.ids + [EOS_ID]
        other = _other_lang(lang)
        context = context_for_sentence(model, other, translated)
    out = ContextMatrix(values=context.data, source_length=len(translated),
                        path=model.direction_for_language(other))
    return out


def _row_sum(values: np.ndarray) -> np.ndarray:
    # strict left-to-right accumulation keeps the sum-composition identity exact
    return np.add.reduce(values, axis=0)


def compose(context_a: ContextMatrix | None, context_b: ContextMatrix | None,
            variant: str, con_both_concat: bool = False) -> DocVector:
    """Assemble one of the seven composition vectors from the available
    context matrices.

    `con_both` adds the two flattened matrices elementwise by default, which
    keeps its width equal to the single-path flattened width; pass
    `con_both_concat=True` for the doubled concatenated layout instead.
    """
    if variant not in VARIANTS:
        raise InputError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    need_a = variant in ("sum_a", "con_a", "a_concat_b", "a_plus_b", "con_both")
    need_b = variant in ("sum_b", "con_b", "a_concat_b", "a_plus_b", "con_both")
    if need_a and context_a is None:
        raise ContractError(f"variant {variant!r} needs the a-path context matrix")
    if need_b and context_b is None:
        raise ContractError(f"variant {variant!r} needs the b-path context matrix")

    meta: dict[str, Any] = {}
    if context_a is not None:
        meta["path_a"] = context_a.path
        meta["source_length_a"] = context_a.source_length
    if context_b is not None:
        meta["path_b"] = context_b.path
        meta["source_length_b"] = context_b.source_length

    if variant == "sum_a":
        values = _row_sum(context_a.values)
    elif variant == "sum_b":
        values = _row_sum(context_b.values)
    elif variant == "con_a":
        values = context_a.values.reshape(-1)
    elif variant == "con_b":
        values = context_b.values.reshape(-1)
    elif variant == "a_concat_b":
        values = np.concatenate([_row_sum(context_a.values), _row_sum(context_b.values)])
    elif variant == "a_plus_b":
        values = _row_sum(context_a.values) + _row_sum(context_b.values)
    else:  # con_both
        flat_a = context_a.values.reshape(-1)
        flat_b = context_b.values.reshape(-1)
        if con_both_concat:
            values = np.concatenate([flat_a, flat_b])
            meta["con_both_layout"] = "concat"
        else:
            values = flat_a + flat_b
            meta["con_both_layout"] = "sum"
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ContractError(f"variant {variant!r} produced non-finite values")
    return DocVector(variant=variant, values=values, dim=values.shape[0],
                     path_meta=meta)


def variant_dim(variant: str, d_h: int, r: int, con_both_concat: bool = False) -> int:
    """Contracted output width of each composition variant."""
    if variant in ("sum_a", "sum_b", "a_plus_b"):
        return d_h
    if variant == "a_concat_b":
        return 2 * d_h
    if variant in ("con_a", "con_b"):
        return r * d_h
    if variant == "con_both":
        return 2 * r * d_h if con_both_concat else r * d_h
    raise InputError(f"unknown variant {variant!r}")


def tokenize_document(model: CrossModel, text: str, lang: str) -> list[int]:
    """Whole document as one id sequence: BPE over all words, eos appended."""
    words = text.split()
    if not words:
        raise InputError("document has no tokens")
    if lang == "a":
        subwords = bpe_mod.apply_bpe(model.bpe_a, words)
        return bpe_mod.encode(model.vocab_a, subwords)
    if lang == "b":
        subwords = bpe_mod.apply_bpe(model.bpe_b, words)
        return bpe_mod.encode(model.vocab_b, subwords)
    raise InputError(f"unknown language {lang!r}; expected 'a' or 'b'")


def embed_document(model: CrossModel, text: str, lang: str, variant: str,
                   mode: str = "direct_only", doc_id: str = "?",
                   con_both_concat: bool = False) -> DocVector:
    """Tokenize the whole document as one sequence and compose the requested
    vector. direct_only runs only the document's own encoder; two-path
    variants need translator_combined."""
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}; expected one of {MODES}")
    ids = tokenize_document(model, text, lang)
    own_direct = embed_direct(model, lang, ids)
    context_a: ContextMatrix | None = None
    context_b: ContextMatrix | None = None
    if lang == "a":
        context_a = own_direct
    else:
        context_b = own_direct
    translator_used = False
    if mode == "translator_combined":
        translated = embed_via_translator(model, lang, ids, doc_id=doc_id)
        translator_used = True
        if lang == "a":
            context_b = translated
        else:
            context_a = translated
    try:
        vec = compose(context_a, context_b, variant, con_both_concat)
    except ContractError as exc:
        raise ContractError(f"{exc} (mode {mode!r} did not produce it)") from exc
    vec.path_meta["mode"] = mode
    vec.path_meta["language"] = lang
    vec.path_meta["translator_used"] = translator_used
    vec.path_meta["doc_id"] = doc_id
    return vec


# ---------------------------------------------------------------------------
# vector files
# ---------------------------------------------------------------------------


def write_vectors_text(path: str, entries: list[tuple[str, DocVector]]) -> None:
    """One document per line: id TAB variant TAB dim TAB space-joined values.
    Values use shortest round-trip decimal form, so rewriting is bitwise
    stable."""
    with open(path, "w", encoding="utf-8") as f:
        for doc_id, vec in entries:
            values = " ".join(repr(float(v)) for v in vec.values)
            f.write(f"{doc_id}\t{vec.variant}\t{vec.dim}\t{values}\n")


def read_vectors_text(path: str) -> list[tuple[str, str, np.ndarray]]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
            doc_id, variant, dim, values = parts
            arr = np.array([float(v) for v in values.split(" ")]) if values else np.array([])
            if int(dim) != arr.shape[0]:
                raise FormatError(f"{path}:{lineno}: dim field {dim} != {arr.shape[0]} values")
            out.append((doc_id, variant, arr))
    return out


_VEC_MAGIC = b"XDVEC1"


def write_vectors_binary(path: str, entries: list[tuple[str, DocVector]]) -> None:
    import struct

    with open(path, "wb") as f:
        f.write(_VEC_MAGIC)
        f.write(struct.pack("<I", len(entries)))
        for doc_id, vec in entries:
            for text in (doc_id, vec.variant):
                raw = text.encode("utf-8")
                f.write(struct.pack("<H", len(raw)))
                f.write(raw)
            write_tensor_block(f, vec.values)


def read_vectors_binary(path: str) -> list[tuple[str, str, np.ndarray]]:
    import struct

    with open(path, "rb") as f:
        if f.read(6) != _VEC_MAGIC:
            raise FormatError(f"{path}: bad vector-file magic")
        (count,) = struct.unpack("<I", f.read(4))
        out = []
        for _ in range(count):
            fields = []
            for _ in range(2):
                raw = f.read(2)
                if len(raw) != 2:
                    raise FormatError(f"{path}: truncated vector file")
                (n,) = struct.unpack("<H", raw)
                fields.append(f.read(n).decode("utf-8"))
            out.append((fields[0], fields[1], read_tensor_block(f)))
    return out
