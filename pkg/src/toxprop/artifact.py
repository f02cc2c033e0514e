"""Self-describing binary container for trained models.

Layout: a magic line, an 8-byte little-endian header length, a canonical
JSON header (sorted keys, compact separators), then the sections the header
lists, each as <8-byte LE name length><name UTF-8><8-byte LE payload
length><payload>. Weight payloads are little-endian float64. Everything is
canonicalized, so save -> load -> save reproduces the file byte for byte.

The JSON header carries: format version, model kind, a config snapshot
(shapes, biases, loss, pooling, truncation), and training metadata
(seed, data fingerprint, epochs). Section payloads carry the bulk data:
vocabulary or token index (text lines), weight vectors, embedding table.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import ParseError, ShapeError
from .features import NblrWeights, TruncationConfig, Vocabulary
from .models import (
    EmbeddingBetaModel,
    LinearBetaModel,
    LinearPointModel,
    Model,
)

MAGIC = b"TOXPROP1\n"
FORMAT_VERSION = 1
KINDS = ("linear-beta", "linear-point-mae", "linear-point-mse", "nblr", "embedding-beta")

METADATA_FIELDS = ("seed", "data_fingerprint", "epochs")


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


def _floats_to_bytes(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _floats_from_bytes(payload: bytes) -> np.ndarray:
    if len(payload) % 8:
        raise ParseError("weight section length is not a multiple of 8")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64)


def _encode_vocab(vocab: Vocabulary) -> bytes:
    lines = [f"{term}\t{index}\t{df}" for term, index, df in vocab.sorted_entries()]
    return ("\n".join(lines) + ("\n" if lines else "")).encode()


def _decode_vocab(payload: bytes, n_docs: int) -> Vocabulary:
    entries = []
    for line_no, line in enumerate(payload.decode().splitlines(), start=1):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"vocabulary line {line_no} is not term<TAB>index<TAB>df")
        entries.append((parts[0], int(parts[1]), int(parts[2])))
    return Vocabulary.from_entries(entries, n_docs)


def _encode_token_index(index: Mapping[str, int]) -> bytes:
    lines = [f"{token}\t{row}" for token, row in sorted(index.items(), key=lambda kv: kv[1])]
    return ("\n".join(lines) + "\n").encode()


def _decode_token_index(payload: bytes) -> dict[str, int]:
    out: dict[str, int] = {}
    for line_no, line in enumerate(payload.decode().splitlines(), start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"token index line {line_no} is not token<TAB>row")
        out[parts[0]] = int(parts[1])
    return out


def _normalized_metadata(metadata: Mapping[str, object]) -> dict:
    unknown = set(metadata) - set(METADATA_FIELDS)
    if unknown:
        raise ParseError(f"unknown metadata fields {sorted(unknown)}")
    return {k: metadata.get(k) for k in METADATA_FIELDS}


def _disassemble(model: Model) -> tuple[dict, dict[str, bytes]]:
    """(config snapshot, ordered sections) for any supported model."""
    if isinstance(model, LinearBetaModel):
        config = {
            "n_docs": int(model.vocab.n_docs),
            "vocab_size": int(model.vocab.size),
            "b_alpha": float(model.b_alpha),
            "b_beta": float(model.b_beta),
        }
        sections = {
            "vocab": _encode_vocab(model.vocab),
            "w_alpha": _floats_to_bytes(model.w_alpha),
            "w_beta": _floats_to_bytes(model.w_beta),
        }
        _attach_nblr(config, sections, model.nblr)
        return config, sections
    if isinstance(model, LinearPointModel):
        config = {
            "n_docs": int(model.vocab.n_docs),
            "vocab_size": int(model.vocab.size),
            "b": float(model.b),
            "loss": model.loss,
        }
        sections = {"vocab": _encode_vocab(model.vocab), "w": _floats_to_bytes(model.w)}
        _attach_nblr(config, sections, model.nblr)
        return config, sections
    if isinstance(model, EmbeddingBetaModel):
        config = {
            "rows": int(model.embeddings.shape[0]),
            "dim": int(model.dim),
            "b_alpha": float(model.b_alpha),
            "b_beta": float(model.b_beta),
            "pooling": model.pooling,
            "truncation": {
                "max_len": model.truncation.max_len,
                "head": model.truncation.head,
                "tail": model.truncation.tail,
            },
        }
        sections = {
            "token_index": _encode_token_index(model.token_index),
            "embeddings": _floats_to_bytes(model.embeddings),
            "gate": _floats_to_bytes(model.gate),
            "w_alpha": _floats_to_bytes(model.w_alpha),
            "w_beta": _floats_to_bytes(model.w_beta),
        }
        return config, sections
    raise ParseError(f"unsupported model type {type(model).__name__}")


def _attach_nblr(config: dict, sections: dict, nblr: NblrWeights | None) -> None:
    if nblr is not None:
        config["nblr_label_mean"] = float(nblr.label_mean)
        sections["nblr_weights"] = _floats_to_bytes(nblr.weights)


def _assemble(kind: str, config: dict, sections: Mapping[str, bytes]) -> Model:
    try:
        if kind in ("linear-beta", "linear-point-mae", "linear-point-mse", "nblr"):
            vocab = _decode_vocab(sections["vocab"], int(config["n_docs"]))
            if vocab.size != int(config["vocab_size"]):
                raise ParseError(
                    f"vocabulary has {vocab.size} terms, header says {config['vocab_size']}"
                )
            nblr = None
            if "nblr_weights" in sections:
                nblr = NblrWeights(
                    _floats_from_bytes(sections["nblr_weights"]),
                    float(config["nblr_label_mean"]),
                )
            if kind == "linear-beta":
                return LinearBetaModel(
                    vocab,
                    _floats_from_bytes(sections["w_alpha"]),
                    float(config["b_alpha"]),
                    _floats_from_bytes(sections["w_beta"]),
                    float(config["b_beta"]),
                    nblr=nblr,
                )
            return LinearPointModel(
                vocab,
                _floats_from_bytes(sections["w"]),
                float(config["b"]),
                config["loss"],
                nblr=nblr,
            )
        if kind == "embedding-beta":
            rows, dim = int(config["rows"]), int(config["dim"])
            table = _floats_from_bytes(sections["embeddings"])
            if table.size != rows * dim:
                raise ParseError(
                    f"embedding payload has {table.size} floats, header says {rows}x{dim}"
                )
            tc = config["truncation"]
            return EmbeddingBetaModel(
                token_index=_decode_token_index(sections["token_index"]),
                embeddings=table.reshape(rows, dim),
                gate=_floats_from_bytes(sections["gate"]),
                w_alpha=_floats_from_bytes(sections["w_alpha"]),
                b_alpha=float(config["b_alpha"]),
                w_beta=_floats_from_bytes(sections["w_beta"]),
                b_beta=float(config["b_beta"]),
                truncation=TruncationConfig(
                    max_len=int(tc["max_len"]), head=int(tc["head"]), tail=int(tc["tail"])
                ),
                pooling=config["pooling"],
            )
    except KeyError as exc:
        raise ParseError(f"artifact is missing {exc.args[0]!r}") from None
    raise ParseError(f"unrecognized model kind {kind!r}")


@dataclass(frozen=True)
class ModelArtifact:
    """A model plus its training metadata, as stored on disk."""

    model: Model
    metadata: dict
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.version != FORMAT_VERSION:
            raise ParseError(f"unrecognized format version {self.version}")
        if self.kind not in KINDS:
            raise ParseError(f"unrecognized model kind {self.kind!r}")
        object.__setattr__(self, "metadata", _normalized_metadata(self.metadata))

    @property
    def kind(self) -> str:
        return self.model.kind

    def to_bytes(self) -> bytes:
        config, sections = _disassemble(self.model)
        header = {
            "version": self.version,
            "kind": self.kind,
            "config": config,
            "metadata": self.metadata,
            "sections": list(sections),
        }
        blob = _canonical_json(header)
        out = [MAGIC, struct.pack("<Q", len(blob)), blob]
        for name, payload in sections.items():
            encoded = name.encode()
            out.append(struct.pack("<Q", len(encoded)))
            out.append(encoded)
            out.append(struct.pack("<Q", len(payload)))
            out.append(payload)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ModelArtifact":
        reader = _Reader(blob)
        if reader.take(len(MAGIC)) != MAGIC:
            raise ParseError("not a model artifact: bad magic bytes")
        header_len = reader.u64()
        try:
            header = json.loads(reader.take(header_len).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"malformed artifact header: {exc}") from None
        for field in ("version", "kind", "config", "metadata", "sections"):
            if field not in header:
                raise ParseError(f"artifact header is missing {field!r}")
        if header["version"] != FORMAT_VERSION:
            raise ParseError(f"unrecognized format version {header['version']}")
        sections: dict[str, bytes] = {}
        for expected in header["sections"]:
            name = reader.take(reader.u64()).decode()
            if name != expected:
                raise ParseError(f"section {name!r} where header promised {expected!r}")
            sections[name] = reader.take(reader.u64())
        if not reader.exhausted:
            raise ParseError("trailing bytes after the last section")
        model = _assemble(header["kind"], header["config"], sections)
        if model.kind != header["kind"]:
            raise ParseError(
                f"reconstructed kind {model.kind!r} contradicts header {header['kind']!r}"
            )
        return cls(model=model, metadata=header["metadata"], version=header["version"])

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ModelArtifact":
        try:
            blob = Path(path).read_bytes()
        except (OSError if isinstance(path, (str, Path)) else TypeError) as exc:
            raise ParseError(f"cannot read artifact {path}: {exc}") from None
        try:
            return cls.from_bytes(blob)
        except ShapeError as exc:
            raise ParseError(f"inconsistent artifact {path}: {exc}") from None


class _Reader:
    def __init__(self, blob: bytes):
        self._blob = blob
        self._pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._blob):
            raise ParseError("artifact truncated")
        chunk = self._blob[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._blob)
