"""On-disk formats: docword corpora, target lists, and binary model files.

Readers reject malformed input with the offending line or byte position;
nothing is silently repaired. All binary payloads are 64-bit little-endian
floats, so files are portable across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import CONTINUOUS, DISCRETE, LabelEmbedding
from .corpus import Bag, Corpus
from .errors import DataFormatError, ModelFormatError
from .geometry import GridGeometry
from .model import CountingGrid

__all__ = [
    "read_corpus",
    "write_corpus",
    "read_targets",
    "write_targets",
    "read_vocab",
    "ModelFile",
    "write_model",
    "read_model",
]

MODEL_MAGIC = "gridcount-model"
MODEL_VERSION = 1


def _parse_count(token: str, path, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataFormatError(f"{path}:{line_no}: malformed count {token!r}")
    if not np.isfinite(value):
        raise DataFormatError(f"{path}:{line_no}: count must be finite")
    if value < 0:
        raise DataFormatError(f"{path}:{line_no}: negative count {token}")
    return value


def read_corpus(path) -> Corpus:
    """Parse a docword text file: T, Z, NNZ header lines then 1-based triples.

    Document ids absent from the triples come back as empty bags, preserving
    the header's document count.
    """
    path = Path(path)
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    header = []
    for line_no, name in enumerate(("document count", "vocabulary size", "entry count"), start=1):
        if line_no > len(lines):
            raise DataFormatError(f"{path}:{line_no}: missing {name} header line")
        token = lines[line_no - 1].strip()
        try:
            value = int(token)
        except ValueError:
            raise DataFormatError(f"{path}:{line_no}: malformed {name} {token!r}")
        if value < 0:
            raise DataFormatError(f"{path}:{line_no}: {name} must be non-negative")
        header.append(value)
    n_docs, vocab_size, n_entries = header

    entries: list[dict[int, float]] = [dict() for _ in range(n_docs)]
    found = 0
    for line_no, line in enumerate(lines[3:], start=4):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DataFormatError(
                f"{path}:{line_no}: expected 'doc word count', got {line.strip()!r}"
            )
        try:
            doc = int(parts[0])
            word = int(parts[1])
        except ValueError:
            raise DataFormatError(f"{path}:{line_no}: malformed id in {line.strip()!r}")
        if not 1 <= doc <= n_docs:
            raise DataFormatError(
                f"{path}:{line_no}: document id {doc} out of range 1..{n_docs}"
            )
        if not 1 <= word <= vocab_size:
            raise DataFormatError(
                f"{path}:{line_no}: word id {word} out of range 1..{vocab_size}"
            )
        count = _parse_count(parts[2], path, line_no)
        entries[doc - 1][word - 1] = entries[doc - 1].get(word - 1, 0.0) + count
        found += 1
    if found != n_entries:
        raise DataFormatError(
            f"{path}: header declares {n_entries} entries, found {found}"
        )
    bags = [Bag(entries=e, id=str(t)) for t, e in enumerate(entries)]
    return Corpus(bags=bags, vocab_size=vocab_size)


def _format_count(count: float) -> str:
    if count == int(count):
        return str(int(count))
    return repr(count)


def write_corpus(corpus: Corpus, path) -> None:
    """Write the docword format with entries sorted by (document, word)."""
    lines = [str(len(corpus.bags)), str(corpus.vocab_size)]
    triples = []
    for t, bag in enumerate(corpus.bags):
        for word in sorted(bag.entries):
            count = bag.entries[word]
            if count != 0:
                triples.append((t + 1, word + 1, count))
    lines.append(str(len(triples)))
    lines.extend(f"{d} {w} {_format_count(c)}" for d, w, c in triples)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_targets(path, kind: str, expected_count: int | None = None) -> list:
    """One target per line; line t binds to bag t.

    ``kind`` is ``"discrete"`` (non-negative integers) or ``"continuous"``
    (finite reals). ``expected_count`` cross-checks against the corpus size.
    """
    path = Path(path)
    values: list[int | float] = []
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            token = line.strip()
            if not token:
                continue
            if kind == DISCRETE:
                try:
                    label = int(token)
                except ValueError:
                    raise DataFormatError(
                        f"{path}:{line_no}: discrete target must be an integer, got {token!r}"
                    )
                if label < 0:
                    raise DataFormatError(f"{path}:{line_no}: negative label {label}")
                values.append(label)
            elif kind == CONTINUOUS:
                try:
                    value = float(token)
                except ValueError:
                    raise DataFormatError(
                        f"{path}:{line_no}: malformed target {token!r}"
                    )
                if not np.isfinite(value):
                    raise DataFormatError(
                        f"{path}:{line_no}: target must be finite, got {token}"
                    )
                values.append(value)
            else:
                raise ValueError(f"unknown target kind {kind!r}")
    if expected_count is not None and len(values) != expected_count:
        raise DataFormatError(
            f"{path}: {len(values)} targets for {expected_count} bags"
        )
    return values


def write_targets(targets, path) -> None:
    lines = [_format_count(float(v)) for v in targets]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="ascii")


def read_vocab(path) -> list[str]:
    """One word per line."""
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


@dataclass(frozen=True)
class ModelFile:
    """A trained grid plus its optional label embedding, as stored on disk."""

    grid: CountingGrid
    embedding: LabelEmbedding | None = None


def write_model(path, model: ModelFile | CountingGrid) -> None:
    """Serialize grid (and embedding, if any) with a text header + raw floats.

    Header lines are ASCII, terminated by a ``payload`` line; the payload is
    the grid distributions, then the embedding values, both row-major
    float64 little-endian.
    """
    if isinstance(model, CountingGrid):
        model = ModelFile(grid=model)
    grid = model.grid
    geometry = grid.geometry
    header = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        "extent " + " ".join(str(e) for e in geometry.extents),
        "window " + " ".join(str(w) for w in geometry.window),
        f"vocab {grid.vocab_size}",
    ]
    blocks = [np.ascontiguousarray(grid.probs.values, dtype="<f8")]
    if model.embedding is not None:
        emb = model.embedding
        if emb.geometry != geometry:
            raise ValueError("embedding geometry does not match grid")
        if emb.kind == DISCRETE:
            header.append(f"labels discrete {emb.n_classes}")
        else:
            header.append("labels continuous")
        blocks.append(np.ascontiguousarray(emb.values, dtype="<f8"))
    header.append("payload")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        for block in blocks:
            fh.write(block.tobytes())


def _read_header_line(fh, path) -> str:
    raw = fh.readline()
    if not raw.endswith(b"\n"):
        raise ModelFormatError(f"{path}: unexpected end of model header")
    try:
        return raw[:-1].decode("ascii")
    except UnicodeDecodeError:
        raise ModelFormatError(f"{path}: model header is not ASCII")


def _header_ints(line: str, key: str, path) -> list[int]:
    parts = line.split()
    if parts[0] != key:
        raise ModelFormatError(f"{path}: expected {key!r} header line, got {line!r}")
    try:
        return [int(p) for p in parts[1:]]
    except ValueError:
        raise ModelFormatError(f"{path}: malformed {key!r} header line {line!r}")


def read_model(path) -> ModelFile:
    """Inverse of :func:`write_model`; validates version, sizes, and invariants."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_header_line(fh, path).split()
        if len(magic) != 2 or magic[0] != MODEL_MAGIC:
            raise ModelFormatError(f"{path}: not a gridcount model file")
        if magic[1] != str(MODEL_VERSION):
            raise ModelFormatError(
                f"{path}: unsupported model version {magic[1]} (expected {MODEL_VERSION})"
            )
        extents = _header_ints(_read_header_line(fh, path), "extent", path)
        window = _header_ints(_read_header_line(fh, path), "window", path)
        (vocab_size,) = _header_ints(_read_header_line(fh, path), "vocab", path)
        label_kind = None
        n_classes = 0
        line = _read_header_line(fh, path)
        if line.startswith("labels"):
            parts = line.split()
            if len(parts) == 3 and parts[1] == DISCRETE:
                label_kind = DISCRETE
                n_classes = int(parts[2])
                if n_classes < 1:
                    raise ModelFormatError(f"{path}: class count must be positive")
            elif len(parts) == 2 and parts[1] == CONTINUOUS:
                label_kind = CONTINUOUS
            else:
                raise ModelFormatError(f"{path}: malformed labels header {line!r}")
            line = _read_header_line(fh, path)
        if line != "payload":
            raise ModelFormatError(f"{path}: expected 'payload' line, got {line!r}")

        try:
            geometry = GridGeometry(tuple(extents), tuple(window))
        except ValueError as exc:
            raise ModelFormatError(f"{path}: {exc}")
        n_cells = geometry.n_cells
        expected = n_cells * vocab_size
        if label_kind == DISCRETE:
            expected += n_cells * n_classes
        elif label_kind == CONTINUOUS:
            expected += n_cells
        payload = fh.read()
    if len(payload) < 8 * expected:
        raise ModelFormatError(f"{path}: unexpected end of model payload")
    if len(payload) > 8 * expected:
        raise ModelFormatError(f"{path}: trailing bytes after model payload")

    flat = np.frombuffer(payload, dtype="<f8")
    probs = flat[: n_cells * vocab_size].reshape(*geometry.extents, vocab_size)
    try:
        grid = CountingGrid.from_array(geometry, probs.copy())
    except ValueError as exc:
        raise ModelFormatError(f"{path}: invalid grid distributions: {exc}")
    embedding = None
    if label_kind is not None:
        values = flat[n_cells * vocab_size :]
        shape = (*geometry.extents, n_classes) if label_kind == DISCRETE else geometry.extents
        embedding = LabelEmbedding(geometry, label_kind, values.reshape(shape).copy())
    return ModelFile(grid=grid, embedding=embedding)
