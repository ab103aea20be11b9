"""Versioned binary checkpoints.

Layout: magic, u32 format version, length-prefixed JSON header (config,
languages, BPE merges, vocabularies, tensor manifest, optimizer scalars),
u32 tensor count, named tensor blocks, and a sha256 digest trailer over all
preceding bytes. Files are read fully and digest-verified before any state
is built, so a truncated or corrupt file never yields partial state.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass
from typing import Any

import numpy as np

from .bpe import BpeModel, Vocabulary
from .errors import FormatError
from .model import CrossModel
from .nmt import AttentionParams, NmtParams
from .optim import Adam
from .rnn import GruParams
from .shared import GRU_SATTN, HeadParams, LanguageProjection, SharedStack
from .tensor import Tensor, read_tensor_block, write_tensor_block

_MAGIC = b"XDVCKPT1"
_VERSION = 1


@dataclass
class CheckpointMeta:
    kind: str                 # "nmt" or "combined"
    config: dict[str, Any]
    seed: int
    epoch: int
    direction: str | None = None
    trainable: list[str] | None = None
    optimizer: dict[str, Any] | None = None


def _bpe_to_json(model: BpeModel) -> dict:
    return {"merges": [[a, b] for a, b in model.merges],
            "marker": model.end_of_word_marker}


def _bpe_from_json(obj: dict) -> BpeModel:
    return BpeModel(merges=[(a, b) for a, b in obj["merges"]],
                    end_of_word_marker=obj["marker"])


def _vocab_to_json(vocab: Vocabulary) -> list:
    return sorted(vocab.id_of.items(), key=lambda kv: kv[1])


def _vocab_from_json(obj: list) -> Vocabulary:
    id_of = {sym: int(idx) for sym, idx in obj}
    return Vocabulary(id_of=id_of, symbol_of={i: s for s, i in id_of.items()})


def _write(path: str, header: dict, tensors: list[tuple[str, np.ndarray]]) -> None:
    body = io.BytesIO()
    body.write(_MAGIC)
    body.write(struct.pack("<I", _VERSION))
    raw_header = json.dumps(header, sort_keys=True).encode("utf-8")
    body.write(struct.pack("<Q", len(raw_header)))
    body.write(raw_header)
    body.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        raw_name = name.encode("utf-8")
        body.write(struct.pack("<H", len(raw_name)))
        body.write(raw_name)
        write_tensor_block(body, arr)
    payload = body.getvalue()
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as f:
        f.write(payload)
        f.write(digest)


def _read(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < len(_MAGIC) + 4 + 8 + 4 + 32:
        raise FormatError(f"{path}: file too short to be a checkpoint")
    payload, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise FormatError(f"{path}: integrity digest mismatch (corrupt or truncated)")
    buf = io.BytesIO(payload)
    if buf.read(len(_MAGIC)) != _MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    (header_len,) = struct.unpack("<Q", buf.read(8))
    try:
        header = json.loads(buf.read(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header: {exc}") from exc
    (count,) = struct.unpack("<I", buf.read(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", buf.read(2))
        name = buf.read(name_len).decode("utf-8")
        tensors[name] = read_tensor_block(buf)
    return header, tensors


def _gru_from(tensors: dict[str, np.ndarray], prefix: str) -> GruParams:
    fields = {}
    for f in ("wz", "wr", "wn", "uz", "ur", "un", "bz", "br", "bn"):
        key = f"{prefix}.{f}"
        if key not in tensors:
            raise FormatError(f"checkpoint is missing tensor {key}")
        fields[f] = Tensor(tensors[key])
    return GruParams(**fields)


def _take(tensors: dict[str, np.ndarray], name: str) -> Tensor:
    if name not in tensors:
        raise FormatError(f"checkpoint is missing tensor {name}")
    return Tensor(tensors[name])


def _nmt_from(tensors: dict[str, np.ndarray], prefix: str) -> NmtParams:
    return NmtParams(
        src_emb=_take(tensors, f"{prefix}.src_emb"),
        tgt_emb=_take(tensors, f"{prefix}.tgt_emb"),
        enc_fwd=_gru_from(tensors, f"{prefix}.enc_fwd"),
        enc_bwd=_gru_from(tensors, f"{prefix}.enc_bwd"),
        dec_gru1=_gru_from(tensors, f"{prefix}.dec_gru1"),
        dec_gru2=_gru_from(tensors, f"{prefix}.dec_gru2"),
        att=AttentionParams(u_a=_take(tensors, f"{prefix}.att.u_a"),
                            w_a=_take(tensors, f"{prefix}.att.w_a"),
                            v_a=_take(tensors, f"{prefix}.att.v_a")),
        w_out=_take(tensors, f"{prefix}.w_out"),
        b_out=_take(tensors, f"{prefix}.b_out"),
        w_init=_take(tensors, f"{prefix}.w_init"),
        b_init=_take(tensors, f"{prefix}.b_init"),
    )


def _stack_from(tensors: dict[str, np.ndarray], variant: str, d_h: int,
                r: int) -> SharedStack:
    def proj(prefix):
        return LanguageProjection(w_e=_take(tensors, f"{prefix}.w_e"),
                                  b_e=_take(tensors, f"{prefix}.b_e"))

    def head(prefix):
        return HeadParams(**{f: _take(tensors, f"{prefix}.{f}")
                             for f in ("wq", "wk", "wv", "bq", "bk", "bv")})

    stack = SharedStack(
        variant=variant,
        proj_a=proj("shared.proj_a"),
        proj_b=proj("shared.proj_b"),
        heads=[head(f"shared.heads.{i}") for i in range(r)],
        gru2=_gru_from(tensors, "shared.gru2"),
        w_p=_take(tensors, "shared.w_p"),
        b_p=_take(tensors, "shared.b_p"),
        d_h=d_h,
        r=r,
    )
    if variant == GRU_SATTN:
        stack.gru1 = _gru_from(tensors, "shared.gru1")
    else:
        stack.heads2 = [head(f"shared.heads2.{i}") for i in range(r)]
    return stack


def save_nmt_checkpoint(path: str, params: NmtParams, direction: str,
                        config: dict, bpe_a: BpeModel, bpe_b: BpeModel,
                        vocab_a: Vocabulary, vocab_b: Vocabulary,
                        seed: int, epoch: int) -> None:
    header = {
        "kind": "nmt",
        "direction": direction,
        "config": config,
        "seed": seed,
        "epoch": epoch,
        "bpe": {"a": _bpe_to_json(bpe_a), "b": _bpe_to_json(bpe_b)},
        "vocab": {"a": _vocab_to_json(vocab_a), "b": _vocab_to_json(vocab_b)},
    }
    tensors = [(n, t.data) for n, t in params.named_tensors("nmt")]
    _write(path, header, tensors)


def load_nmt_checkpoint(path: str) -> tuple[NmtParams, BpeModel, BpeModel,
                                            Vocabulary, Vocabulary, CheckpointMeta]:
    header, tensors = _read(path)
    if header.get("kind") != "nmt":
        raise FormatError(f"{path}: expected an nmt checkpoint, found {header.get('kind')!r}")
    params = _nmt_from(tensors, "nmt")
    meta = CheckpointMeta(kind="nmt", config=header["config"], seed=header["seed"],
                          epoch=header["epoch"], direction=header["direction"])
    return (params, _bpe_from_json(header["bpe"]["a"]), _bpe_from_json(header["bpe"]["b"]),
            _vocab_from_json(header["vocab"]["a"]), _vocab_from_json(header["vocab"]["b"]),
            meta)


def save_combined_checkpoint(path: str, model: CrossModel, config: dict,
                             seed: int, epoch: int,
                             optimizer: Adam | None = None) -> None:
    trainable = [n for n, t in model.named_tensors() if t.requires_grad]
    header = {
        "kind": "combined",
        "variant": model.stack.variant,
        "d_h": model.stack.d_h,
        "r": model.stack.r,
        "config": config,
        "seed": seed,
        "epoch": epoch,
        "trainable": trainable,
        "bpe": {"a": _bpe_to_json(model.bpe_a), "b": _bpe_to_json(model.bpe_b)},
        "vocab": {"a": _vocab_to_json(model.vocab_a), "b": _vocab_to_json(model.vocab_b)},
        "optimizer": None,
    }
    tensors = [(n, t.data) for n, t in model.named_tensors()]
    if optimizer is not None:
        state = optimizer.state
        header["optimizer"] = {
            "alpha": state.alpha, "beta1": state.beta1, "beta2": state.beta2,
            "epsilon": state.epsilon, "step": state.step, "names": optimizer.names,
        }
        for name, m, v in zip(optimizer.names, state.m, state.v):
            tensors.append((f"__adam_m__.{name}", m))
            tensors.append((f"__adam_v__.{name}", v))
    _write(path, header, tensors)


def load_combined_checkpoint(path: str, expected_variant: str | None = None,
                             ) -> tuple[CrossModel, CheckpointMeta]:
    """Rebuild the full model; every tensor comes back frozen and the caller
    re-enables gradients on the shared stack if training is to continue."""
    header, tensors = _read(path)
    if header.get("kind") != "combined":
        raise FormatError(
            f"{path}: expected a combined checkpoint, found {header.get('kind')!r}")
    variant = header["variant"]
    if expected_variant is not None and variant != expected_variant:
        raise FormatError(
            f"{path}: checkpoint variant {variant!r} does not match the "
            f"requested variant {expected_variant!r}")
    model = CrossModel(
        nmt_ab=_nmt_from(tensors, "nmt_ab"),
        nmt_ba=_nmt_from(tensors, "nmt_ba"),
        stack=_stack_from(tensors, variant, header["d_h"], header["r"]),
        bpe_a=_bpe_from_json(header["bpe"]["a"]),
        bpe_b=_bpe_from_json(header["bpe"]["b"]),
        vocab_a=_vocab_from_json(header["vocab"]["a"]),
        vocab_b=_vocab_from_json(header["vocab"]["b"]),
    )
    meta = CheckpointMeta(kind="combined", config=header["config"],
                          seed=header["seed"], epoch=header["epoch"],
                          trainable=header.get("trainable"),
                          optimizer=header.get("optimizer"))
    return model, meta
