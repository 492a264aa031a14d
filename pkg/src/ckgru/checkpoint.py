"""Versioned binary checkpoints.

Layout: the magic string ``CKGRU1``, a length-prefixed UTF-8 JSON header
(model configuration, vocabulary + its SHA-256, feature selection,
metadata scaling stats), then one record per parameter: u32 name length,
name bytes, u32 rank, u32 dims, raw little-endian float64 values.  All
integers little-endian; parameters are read until end of file.
"""

import hashlib
import json
import struct

import numpy as np

from .features import MinMax
from .model import EmbeddingProvider, ModelConfig, SentimentModel
from .rng import Rng

MAGIC = b"CKGRU1"


class CheckpointError(ValueError):
    pass


def save_params(path, named_arrays, header):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name, arr in named_arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.ndim:
                arr = np.ascontiguousarray(arr)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8").tobytes())


def load_params(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a {MAGIC.decode()} checkpoint")
    off = len(MAGIC)

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise CheckpointError(f"{path}: truncated checkpoint")
        out = blob[off:off + n]
        off += n
        return out

    (hlen,) = struct.unpack("<I", take(4))
    header = json.loads(take(hlen).decode("utf-8"))
    arrays = {}
    while off < len(blob):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        count = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(take(8 * count), dtype="<f8").astype(np.float64)
        arrays[name] = arr.reshape(shape)
    return header, arrays


def save_model(path, fitted, max_len):
    """Serialize a Fitted model (see ckgru.training) for later inference."""
    model = fitted.model
    cfg = model.cfg
    vocab = fitted.embedding.vocab_list()
    header = {
        "format": 1,
        "layers": 2,
        "model": {
            "d_w": cfg.d_w, "d_c": cfg.d_c, "h": cfg.h, "d_red": cfg.d_red,
            "gcm_iterations": cfg.gcm_iterations,
            "gcm_residual": cfg.gcm_residual,
            "candidate_combine": cfg.candidate_combine,
            "dropout": cfg.dropout, "pos_size": cfg.pos_size,
            "dep_size": cfg.dep_size, "use_attention": cfg.use_attention,
            "use_vad": cfg.use_vad, "n_meta": cfg.n_meta,
            "concept_mode": cfg.concept_mode,
        },
        "max_len": max_len,
        "embedding_mode": fitted.embedding.mode,
        "vocab": vocab,
        "vocab_hash": fitted.embedding.vocab_hash(),
        "selection": list(fitted.selection),
        "meta_min": fitted.scaler.mins.tolist(),
        "meta_max": fitted.scaler.maxs.tolist(),
    }
    arrays = dict(fitted.model.params.value_dict())
    if fitted.embedding.mode == "file_backed":
        arrays["embed.table"] = fitted.embedding.table
    save_params(path, arrays, header)


def load_model(path):
    """Rebuild the model, embedding provider and scaler from a checkpoint.

    Returns (model, embedding, selection, scaler, max_len).
    """
    header, arrays = load_params(path)
    if header.get("format") != 1:
        raise CheckpointError(f"{path}: unsupported checkpoint format {header.get('format')!r}")
    vocab = header["vocab"]
    joined = "\n".join(vocab).encode("utf-8")
    if hashlib.sha256(joined).hexdigest() != header["vocab_hash"]:
        raise CheckpointError(f"{path}: vocabulary hash mismatch (corrupted checkpoint)")
    if "embed.table" not in arrays:
        raise CheckpointError(f"{path}: missing embedding table")
    table = arrays["embed.table"]
    embedding = EmbeddingProvider.from_vocab(vocab[1:], table)
    embedding.mode = header["embedding_mode"]
    mcfg = ModelConfig(**header["model"])
    model = SentimentModel(mcfg, embedding, Rng(0))
    if embedding.mode == "file_backed":
        arrays = {k: v for k, v in arrays.items() if k != "embed.table"}
    model.params.load_values(arrays)
    scaler = MinMax(np.asarray(header["meta_min"]), np.asarray(header["meta_max"]))
    return model, embedding, header["selection"], scaler, header["max_len"]
