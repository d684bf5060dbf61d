"""Two-source text corpus: data model, file I/O, and featurization.

A corpus is a set of records, each carrying a binary label ``y`` and a
binary provenance indicator ``z`` telling which of the two sources the
record came from. Records are featurized either as binary unigrams
(presence/absence of vocabulary terms) or by joining a precomputed
embedding table on record id.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from sklearn.base import BaseEstimator, TransformerMixin

__all__ = [
    "Record",
    "Corpus",
    "FeatureSpace",
    "EmbeddingTable",
    "CorpusFormatError",
    "EmbeddingTableError",
    "VocabularyError",
    "BinaryUnigramVectorizer",
    "tokenize",
    "load_corpus",
    "write_corpus",
    "build_vocabulary",
    "featurize_unigram",
    "unigram_matrix",
    "load_embedding_table",
    "write_embedding_table",
    "attach_embeddings",
    "embedding_matrix",
]


class CorpusFormatError(ValueError):
    """A corpus file line violates the corpus format."""


class EmbeddingTableError(ValueError):
    """An embedding-table file is malformed or incompatible with a corpus."""


class VocabularyError(ValueError):
    """Vocabulary construction failed (e.g. no term survives min_df)."""


# Maximal runs of alphanumeric characters, after lowercasing. ``\w`` minus
# underscore, so unicode letters and digits count but punctuation splits.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Record:
    """One text unit: id, binary label y, binary provenance z.

    At least one of ``text`` / ``features`` must be present. ``features``
    is a dense float vector (set by :func:`attach_embeddings`).
    """

    id: str
    y: int
    z: int
    text: str | None = None
    features: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.y not in (0, 1):
            raise ValueError(f"record {self.id!r}: label must be 0 or 1, got {self.y!r}")
        if self.z not in (0, 1):
            raise ValueError(f"record {self.id!r}: provenance must be 0 or 1, got {self.z!r}")
        if self.text is None and self.features is None:
            raise ValueError(f"record {self.id!r}: must have text or features")
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if not np.all(np.isfinite(feats)):
                raise ValueError(f"record {self.id!r}: non-finite feature components")
            feats.setflags(write=False)
            object.__setattr__(self, "features", feats)


@dataclass(frozen=True)
class Corpus:
    """An immutable sequence of records plus the source-name mapping.

    ``source_names[0]`` is the z=0 source and ``source_names[1]`` the z=1
    source; the mapping is positional, never alphabetical.
    """

    records: tuple[Record, ...]
    source_names: tuple[str, str]
    _by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "source_names", tuple(self.source_names))
        if len(self.source_names) != 2:
            raise ValueError("source_names must name exactly two sources")
        by_id: dict[str, Record] = {}
        for rec in self.records:
            if rec.id in by_id:
                raise ValueError(f"duplicate record id {rec.id!r}")
            by_id[rec.id] = rec
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def get(self, record_id: str) -> Record:
        return self._by_id[record_id]

    def cell_counts(self) -> dict[tuple[int, int], int]:
        """Record count per (y, z) cell; keys cover all four cells."""
        counts = {(y, z): 0 for y in (0, 1) for z in (0, 1)}
        for rec in self.records:
            counts[(rec.y, rec.z)] += 1
        return counts

    def cell_ids(self) -> dict[tuple[int, int], tuple[str, ...]]:
        """Record ids per (y, z) cell, sorted, so downstream draws depend
        only on corpus content and not on record order. Cached: the corpus
        is immutable and samplers call this per draw."""
        cached = getattr(self, "_cell_ids_cache", None)
        if cached is None:
            cells: dict[tuple[int, int], list[str]] = {
                (y, z): [] for y in (0, 1) for z in (0, 1)
            }
            for rec in self.records:
                cells[(rec.y, rec.z)].append(rec.id)
            cached = {cell: tuple(sorted(ids)) for cell, ids in cells.items()}
            object.__setattr__(self, "_cell_ids_cache", cached)
        return cached

    def subset(self, ids: Sequence[str]) -> tuple[Record, ...]:
        return tuple(self._by_id[i] for i in ids)


def load_corpus(path: str | Path, source_names: Sequence[str]) -> Corpus:
    """Read a corpus file (one JSON object per line).

    Required keys: ``id`` (string), ``label`` (integer 0/1), ``source``
    (one of ``source_names``). Optional: ``text``. Unknown keys are
    ignored. Any malformed line raises :class:`CorpusFormatError` naming
    the line number.
    """
    source_names = tuple(source_names)
    if len(source_names) != 2:
        raise ValueError("source_names must name exactly two sources")
    records = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"line {lineno}: expected an object")
            for key in ("id", "label", "source"):
                if key not in obj:
                    raise CorpusFormatError(f"line {lineno}: missing required key {key!r}")
            rec_id = obj["id"]
            if not isinstance(rec_id, str):
                raise CorpusFormatError(f"line {lineno}: id must be a string")
            if rec_id in seen:
                raise CorpusFormatError(f"line {lineno}: duplicate id {rec_id!r}")
            label = obj["label"]
            if isinstance(label, bool) or label not in (0, 1):
                raise CorpusFormatError(f"line {lineno}: label must be integer 0 or 1")
            source = obj["source"]
            if source not in source_names:
                raise CorpusFormatError(
                    f"line {lineno}: unknown source {source!r} (expected one of {source_names})"
                )
            text = obj.get("text")
            if text is not None and not isinstance(text, str):
                raise CorpusFormatError(f"line {lineno}: text must be a string")
            try:
                rec = Record(id=rec_id, y=label, z=source_names.index(source), text=text)
            except ValueError as exc:
                raise CorpusFormatError(f"line {lineno}: {exc}") from exc
            seen.add(rec_id)
            records.append(rec)
    return Corpus(records=tuple(records), source_names=source_names)


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in the standard one-object-per-line format."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus:
            obj = {
                "id": rec.id,
                "label": rec.y,
                "source": corpus.source_names[rec.z],
            }
            if rec.text is not None:
                obj["text"] = rec.text
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class FeatureSpace:
    """Either a unigram vocabulary (term -> column) or an embedding width."""

    kind: str
    vocabulary: Mapping[str, int] | None = None
    dim: int = 0

    def __post_init__(self) -> None:
        if self.kind == "unigram":
            vocab = self.vocabulary
            if vocab is None:
                raise ValueError("unigram feature space requires a vocabulary")
            indices = sorted(vocab.values())
            if indices != list(range(len(vocab))):
                raise ValueError("vocabulary indices must be 0..V-1 with no gaps")
            object.__setattr__(self, "dim", len(vocab))
        elif self.kind == "embedding":
            if self.dim < 1:
                raise ValueError("embedding feature space requires dim >= 1")
        else:
            raise ValueError(f"unknown feature space kind {self.kind!r}")


def build_vocabulary(records: Iterable[Record], min_df: int = 1) -> FeatureSpace:
    """Build a unigram vocabulary from training records only.

    Terms with document frequency >= ``min_df`` get columns assigned in
    lexicographic term order. Building from the training split only keeps
    the feature space independent of test records.
    """
    if min_df < 1:
        raise ValueError("min_df must be a positive integer")
    df: Counter[str] = Counter()
    for rec in records:
        if rec.text is None:
            raise ValueError(f"record {rec.id!r} has no text to tokenize")
        df.update(set(tokenize(rec.text)))
    terms = sorted(t for t, n in df.items() if n >= min_df)
    if not terms:
        raise VocabularyError(f"no term reaches document frequency {min_df}")
    return FeatureSpace(kind="unigram", vocabulary={t: i for i, t in enumerate(terms)})


def featurize_unigram(record: Record, space: FeatureSpace) -> frozenset[int]:
    """Column indices of vocabulary terms present in the record's text.

    Out-of-vocabulary terms are dropped; presence is binary.
    """
    if space.kind != "unigram":
        raise ValueError("featurize_unigram requires a unigram feature space")
    if record.text is None:
        raise ValueError(f"record {record.id!r} has no text to tokenize")
    vocab = space.vocabulary
    return frozenset(vocab[t] for t in set(tokenize(record.text)) if t in vocab)


def unigram_matrix(records: Sequence[Record], space: FeatureSpace) -> csr_matrix:
    """Stack binary unigram rows into a sparse design matrix."""
    indptr = [0]
    indices: list[int] = []
    for rec in records:
        cols = sorted(featurize_unigram(rec, space))
        indices.extend(cols)
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.float64)
    return csr_matrix(
        (data, np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(records), space.dim),
    )


class BinaryUnigramVectorizer(BaseEstimator, TransformerMixin):
    """Sklearn-style wrapper around the binary unigram featurizer.

    ``fit`` builds the vocabulary from the given documents; ``transform``
    produces a sparse 0/1 matrix with out-of-vocabulary terms dropped.
    """

    def __init__(self, min_df: int = 1):
        self.min_df = min_df

    def fit(self, raw_documents: Sequence[str], y=None) -> "BinaryUnigramVectorizer":
        df: Counter[str] = Counter()
        for doc in raw_documents:
            df.update(set(tokenize(doc)))
        terms = sorted(t for t, n in df.items() if n >= self.min_df)
        if not terms:
            raise VocabularyError(f"no term reaches document frequency {self.min_df}")
        self.vocabulary_ = {t: i for i, t in enumerate(terms)}
        self.feature_space_ = FeatureSpace(kind="unigram", vocabulary=self.vocabulary_)
        return self

    def transform(self, raw_documents: Sequence[str]) -> csr_matrix:
        if not hasattr(self, "vocabulary_"):
            raise ValueError("vectorizer is not fitted")
        vocab = self.vocabulary_
        indptr = [0]
        indices: list[int] = []
        for doc in raw_documents:
            cols = sorted({vocab[t] for t in set(tokenize(doc)) if t in vocab})
            indices.extend(cols)
            indptr.append(len(indices))
        data = np.ones(len(indices), dtype=np.float64)
        return csr_matrix(
            (data, np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
            shape=(len(raw_documents), len(vocab)),
        )

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        return np.asarray(sorted(self.vocabulary_, key=self.vocabulary_.get), dtype=object)


@dataclass(frozen=True)
class EmbeddingTable:
    """id -> fixed-width embedding vector, with declared pooling provenance."""

    dim: int
    pooling: str
    rows: Mapping[str, np.ndarray]
    model: str = ""

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("embedding dim must be a positive integer")
        if self.pooling not in ("mean", "native"):
            raise ValueError(f"pooling must be 'mean' or 'native', got {self.pooling!r}")
        rows = {}
        for rec_id, vec in self.rows.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise ValueError(
                    f"embedding for {rec_id!r} has length {arr.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"embedding for {rec_id!r} has non-finite components")
            arr.setflags(write=False)
            rows[rec_id] = arr
        object.__setattr__(self, "rows", rows)


def load_embedding_table(path: str | Path) -> EmbeddingTable:
    """Read an embedding-table file.

    Line 1 is a header object with keys ``dim``, ``pooling`` and ``model``;
    each following line is ``{"id": ..., "vector": [...]}`` with exactly
    ``dim`` finite numbers.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise EmbeddingTableError("missing header line")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise EmbeddingTableError(f"line 1: invalid JSON header ({exc.msg})") from exc
        if not isinstance(header, dict) or "dim" not in header or "pooling" not in header:
            raise EmbeddingTableError("header must be an object with keys dim and pooling")
        dim = header["dim"]
        if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
            raise EmbeddingTableError("header dim must be a positive integer")
        pooling = header["pooling"]
        if pooling not in ("mean", "native"):
            raise EmbeddingTableError("header pooling must be 'mean' or 'native'")
        model = header.get("model", "")
        rows: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbeddingTableError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or "id" not in obj or "vector" not in obj:
                raise EmbeddingTableError(f"line {lineno}: expected keys id and vector")
            rec_id = obj["id"]
            if not isinstance(rec_id, str):
                raise EmbeddingTableError(f"line {lineno}: id must be a string")
            if rec_id in rows:
                raise EmbeddingTableError(f"line {lineno}: duplicate id {rec_id!r}")
            vec = obj["vector"]
            if not isinstance(vec, list) or len(vec) != dim:
                raise EmbeddingTableError(
                    f"line {lineno}: vector must have exactly dim={dim} entries"
                )
            arr = np.asarray(vec, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise EmbeddingTableError(f"line {lineno}: non-finite vector component")
            rows[rec_id] = arr
    return EmbeddingTable(dim=dim, pooling=pooling, rows=rows, model=model)


def write_embedding_table(table: EmbeddingTable, path: str | Path) -> None:
    """Write an embedding table in the standard format (round-trip floats)."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"dim": table.dim, "pooling": table.pooling, "model": table.model}
        fh.write(json.dumps(header) + "\n")
        for rec_id in table.rows:
            vec = [float(x) for x in table.rows[rec_id]]
            fh.write(json.dumps({"id": rec_id, "vector": vec}) + "\n")


def attach_embeddings(corpus: Corpus, table: EmbeddingTable | str | Path) -> Corpus:
    """Join an embedding table onto a corpus by record id.

    Every record must be covered; the error lists all uncovered ids.
    Attaching the same table twice is a no-op on the resulting features.
    """
    if not isinstance(table, EmbeddingTable):
        table = load_embedding_table(table)
    missing = sorted(rec.id for rec in corpus if rec.id not in table.rows)
    if missing:
        raise EmbeddingTableError(
            f"embedding table covers {len(corpus) - len(missing)}/{len(corpus)} records; "
            f"missing ids: {', '.join(missing)}"
        )
    records = tuple(
        Record(id=r.id, y=r.y, z=r.z, text=r.text, features=table.rows[r.id])
        for r in corpus
    )
    return Corpus(records=records, source_names=corpus.source_names)


def embedding_matrix(records: Sequence[Record]) -> np.ndarray:
    """Stack attached embedding vectors into a dense design matrix."""
    feats = []
    for rec in records:
        if rec.features is None:
            raise ValueError(f"record {rec.id!r} has no attached features")
        feats.append(rec.features)
    dims = {f.shape[0] for f in feats}
    if len(dims) > 1:
        raise ValueError(f"inconsistent feature dimensions: {sorted(dims)}")
    return np.vstack(feats) if feats else np.empty((0, 0))
