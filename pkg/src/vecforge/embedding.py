"""Embedding model state, vector math, and persistence.

Matrices are float32 on disk and in the hot path.  The native model file is
self-describing (mode, hyper-parameters, vocabulary, document tags), so a
saved model can be reused for inference with no sidecar configuration.
Word-vector interchange follows the common text and binary layouts used by
off-the-shelf embedding tools.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, field
from typing import BinaryIO

import numpy as np

from .corpus import Vocabulary
from .errors import ModelFormatError, TrainingError

MODES = ("sg", "cbow", "dbow", "dmpv")
DOC_MODES = ("dbow", "dmpv")

MAGIC = b"VECFORGE1"
FORMAT_VERSION = 1


@dataclass
class Hyperparams:
    """The full training-parameter surface.

    Defaults follow the tuned values for the distributed-bag-of-words mode on
    duplicate-detection-sized corpora; the CLI adjusts window and subsampling
    when other modes are selected.
    """

    mode: str = "dbow"
    vector_size: int = 300
    window: int = 15
    min_count: int = 5
    subsample_t: float = 1e-5
    negative: int = 5
    epochs: int = 20
    alpha: float = 0.025
    alpha_min: float = 0.0001
    dbow_train_words: bool = False
    seed: int = 1
    workers: int = 1

    def validate(self) -> None:
        if self.mode not in MODES:
            raise TrainingError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.vector_size < 1:
            raise TrainingError("vector_size must be >= 1")
        if self.epochs < 1:
            raise TrainingError("epochs must be >= 1")
        if self.negative < 0:
            raise TrainingError("negative must be >= 0")
        if not (0 < self.alpha_min <= self.alpha):
            raise TrainingError("need 0 < alpha_min <= alpha")
        if self.min_count < 1:
            raise TrainingError("min_count must be >= 1")
        if self.subsample_t <= 0:
            raise TrainingError("subsample threshold must be > 0")
        if self.workers < 1:
            raise TrainingError("workers must be >= 1")
        needs_window = self.mode in ("sg", "cbow", "dmpv") or (
            self.mode == "dbow" and self.dbow_train_words
        )
        if needs_window and self.window < 1:
            raise TrainingError(f"window must be >= 1 for mode {self.mode}")

    def output_width(self) -> int:
        """Row width of the output matrix: d for summed inputs, d*(2w+1) when
        the document and context vectors are concatenated."""
        if self.mode == "dmpv":
            return self.vector_size * (2 * self.window + 1)
        return self.vector_size


@dataclass
class DocVector:
    """A single document embedding and where it came from."""

    values: np.ndarray
    tag: str = "inferred"


@dataclass
class EmbeddingModel:
    """Trained (or in-training) embedding state.

    ``w_in`` holds input word vectors; for the concatenating mode it carries
    one extra trainable row used to pad out-of-range context slots.  ``w_out``
    holds the output vectors scored against negative samples.  ``d`` holds one
    row per training document, addressed through ``doc_tags``.
    """

    vocabulary: Vocabulary
    params: Hyperparams
    w_in: np.ndarray
    w_out: np.ndarray
    d: np.ndarray
    doc_tags: dict[str, int] = field(default_factory=dict)

    @property
    def pad_index(self) -> int:
        """Row of w_in reserved for padding (concatenating mode only)."""
        return len(self.vocabulary)

    def doc_vector(self, tag: str) -> np.ndarray:
        try:
            return self.d[self.doc_tags[tag]]
        except KeyError:
            raise KeyError(f"unknown document tag {tag!r}") from None

    def word_vector(self, surface: str) -> np.ndarray:
        return self.w_in[self.vocabulary.position(surface)]


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("undefined cosine for zero-norm input")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


# --------------------------------------------------------------------------
# Native model format: MAGIC, u32 version, u32 metadata length, JSON metadata,
# raw float32 little-endian payloads (w_in, w_out, d), trailing crc32 of all
# preceding bytes.
# --------------------------------------------------------------------------


def save_model(model: EmbeddingModel, path: str) -> None:
    meta = {
        "params": asdict(model.params),
        "vocab": [[e.surface, e.count] for e in model.vocabulary.entries],
        "doc_tags": _tags_in_row_order(model.doc_tags),
        "shapes": {
            "w_in": list(model.w_in.shape),
            "w_out": list(model.w_out.shape),
            "d": list(model.d.shape),
        },
    }
    meta_bytes = json.dumps(meta, ensure_ascii=False).encode("utf-8")
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<I", FORMAT_VERSION)
    payload += struct.pack("<I", len(meta_bytes))
    payload += meta_bytes
    for matrix in (model.w_in, model.w_out, model.d):
        payload += np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    checksum = zlib.crc32(payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<I", checksum))


def _tags_in_row_order(doc_tags: dict[str, int]) -> list[str]:
    tags = [""] * len(doc_tags)
    for tag, row in doc_tags.items():
        tags[row] = tag
    return tags


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ModelFormatError(f"truncated model file while reading {what}")
    return data


def load_model(path: str) -> EmbeddingModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 12:
        raise ModelFormatError("truncated model file")
    if raw[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a vecforge model file (bad magic)")
    stored_crc = struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ModelFormatError("model file checksum mismatch")
    pos = len(MAGIC)
    version, meta_len = struct.unpack_from("<II", raw, pos)
    pos += 8
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    try:
        meta = json.loads(raw[pos : pos + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model metadata: {exc}") from exc
    pos += meta_len

    params = Hyperparams(**meta["params"])
    vocab = Vocabulary.from_ordered_counts(
        [(s, int(c)) for s, c in meta["vocab"]], params.subsample_t
    )
    matrices = []
    for name in ("w_in", "w_out", "d"):
        rows, cols = meta["shapes"][name]
        nbytes = rows * cols * 4
        if pos + nbytes > len(raw) - 4:
            raise ModelFormatError(f"truncated model file while reading {name}")
        arr = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=pos)
        matrices.append(arr.reshape(rows, cols).copy())
        pos += nbytes
    if pos != len(raw) - 4:
        raise ModelFormatError("model file has trailing garbage")
    doc_tags = {tag: i for i, tag in enumerate(meta["doc_tags"])}
    return EmbeddingModel(
        vocabulary=vocab,
        params=params,
        w_in=matrices[0],
        w_out=matrices[1],
        d=matrices[2],
        doc_tags=doc_tags,
    )


# --------------------------------------------------------------------------
# Word-vector interchange.
# Text: first line "<rows> <dim>", then "<token> <v1> ... <vd>" per row.
# Binary: same header line ending in \n, then per row the token bytes, one
# space, dim float32 little-endian values, and a row-separating \n.
# --------------------------------------------------------------------------


def _format_value(v: np.float32) -> str:
    # repr of the exact float64 promotion round-trips back to the same float32
    return repr(float(v))


def save_word_vectors(
    tokens: list[str], matrix: np.ndarray, path: str, fmt: str = "text"
) -> None:
    """Write (tokens, float32 matrix) in the standard interchange layout."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
        raise ValueError("matrix rows must match token count")
    rows, dim = matrix.shape
    if fmt == "text":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{rows} {dim}\n")
            for tok, row in zip(tokens, matrix):
                fh.write(tok + " " + " ".join(_format_value(v) for v in row) + "\n")
    elif fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(f"{rows} {dim}\n".encode("utf-8"))
            for tok, row in zip(tokens, matrix):
                fh.write(tok.encode("utf-8") + b" " + row.tobytes() + b"\n")
    else:
        raise ValueError(f"unknown word-vector format {fmt!r}")


def load_word_vectors(path: str, fmt: str = "text") -> tuple[list[str], np.ndarray]:
    """Read a word-vector file; returns tokens in file order and a float32 matrix."""
    if fmt == "text":
        return _load_text_vectors(path)
    if fmt == "binary":
        return _load_binary_vectors(path)
    raise ValueError(f"unknown word-vector format {fmt!r}")


def _parse_header(line: str, path: str) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise ModelFormatError(f"{path}: malformed header {line!r}")
    try:
        rows, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise ModelFormatError(f"{path}: malformed header {line!r}") from None
    if rows < 0 or dim < 1:
        raise ModelFormatError(f"{path}: nonsensical header {line!r}")
    return rows, dim


def _load_text_vectors(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ModelFormatError(f"{path}: empty word-vector file")
    rows, dim = _parse_header(lines[0], path)
    body = [ln for ln in lines[1:] if ln]
    if len(body) != rows:
        raise ModelFormatError(f"{path}: header claims {rows} rows, found {len(body)}")
    tokens: list[str] = []
    matrix = np.empty((rows, dim), dtype=np.float32)
    for i, line in enumerate(body):
        parts = line.split()
        if len(parts) != dim + 1:
            raise ModelFormatError(
                f"{path}: row {i} has {len(parts) - 1} values, expected {dim}"
            )
        tokens.append(parts[0])
        try:
            matrix[i] = [float(x) for x in parts[1:]]
        except ValueError as exc:
            raise ModelFormatError(f"{path}: row {i}: {exc}") from exc
    if not np.all(np.isfinite(matrix)):
        raise ModelFormatError(f"{path}: non-finite values in vectors")
    return tokens, matrix


def _load_binary_vectors(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as fh:
        header = bytearray()
        while True:
            b = fh.read(1)
            if not b:
                raise ModelFormatError(f"{path}: missing header")
            if b == b"\n":
                break
            header += b
            if len(header) > 128:
                raise ModelFormatError(f"{path}: malformed header")
        rows, dim = _parse_header(header.decode("utf-8"), path)
        tokens: list[str] = []
        matrix = np.empty((rows, dim), dtype=np.float32)
        for i in range(rows):
            tok = bytearray()
            while True:
                b = fh.read(1)
                if not b:
                    raise ModelFormatError(f"{path}: truncated at row {i}")
                if b == b" ":
                    break
                tok += b
            vec = _read_exact(fh, dim * 4, f"row {i}")
            matrix[i] = np.frombuffer(vec, dtype="<f4")
            sep = fh.read(1)
            if sep not in (b"\n", b""):
                raise ModelFormatError(f"{path}: missing row separator after row {i}")
            tokens.append(tok.decode("utf-8"))
        if fh.read(1):
            raise ModelFormatError(f"{path}: more rows than header claims")
    if not np.all(np.isfinite(matrix)):
        raise ModelFormatError(f"{path}: non-finite values in vectors")
    return tokens, matrix


def export_text(model: EmbeddingModel, which: str, path: str) -> None:
    """Export word or document vectors in the text interchange layout."""
    if which == "words":
        tokens = [e.surface for e in model.vocabulary.entries]
        matrix = model.w_in[: len(tokens)]  # pad row, if any, stays private
    elif which == "docs":
        if model.d.shape[0] == 0:
            raise TrainingError("no document vectors in this model")
        tokens = _tags_in_row_order(model.doc_tags)
        matrix = model.d
    else:
        raise ValueError(f"which must be 'words' or 'docs', got {which!r}")
    save_word_vectors(tokens, matrix, path, fmt="text")
