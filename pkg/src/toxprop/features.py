"""Text featurization.

Whitespace tokenization with source offsets, head/tail truncation for long
articles, uni+bi-gram TF-IDF with smoothed inverse document frequency, and
the per-feature least-squares scaling weights used by the scaled-feature
linear baseline.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse

from .errors import ConfigError, DegenerateInput, ShapeError

_WORD_RE = re.compile(r"\S+")

NGRAM_RANGE = (1, 2)


class Token(NamedTuple):
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]


@dataclass(frozen=True)
class TruncationConfig:
    """Keep the first `head` and last `tail` tokens of long documents."""

    max_len: int = 510
    head: int = 128
    tail: int = 382

    def __post_init__(self):
        if self.head < 0 or self.tail < 0:
            raise ConfigError("head and tail must be >= 0")
        if self.head + self.tail != self.max_len:
            raise ConfigError(
                f"head + tail must equal max_len: {self.head} + {self.tail} != {self.max_len}"
            )


@dataclass(frozen=True)
class Vocabulary:
    """Uni/bi-gram table: term -> (dense index, document frequency, idf)."""

    n_docs: int
    _table: dict[str, tuple[int, int, float]]

    @property
    def size(self) -> int:
        return len(self._table)

    def __contains__(self, term: str) -> bool:
        return term in self._table

    def index_of(self, term: str) -> int:
        return self._table[term][0]

    def df_of(self, term: str) -> int:
        return self._table[term][1]

    def idf_of(self, term: str) -> float:
        return self._table[term][2]

    def idf_array(self) -> np.ndarray:
        out = np.zeros(self.size)
        for idx, _, idf in self._table.values():
            out[idx] = idf
        return out

    def term_by_index(self) -> list[str]:
        out = [""] * self.size
        for term, (idx, _, _) in self._table.items():
            out[idx] = term
        return out

    def sorted_entries(self) -> list[tuple[str, int, int]]:
        """(term, index, df) triples sorted by term, for serialization."""
        return sorted((t, i, df) for t, (i, df, _) in self._table.items())

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[str, int, int]], n_docs: int) -> "Vocabulary":
        table = {t: (i, df, _idf(n_docs, df)) for t, i, df in entries}
        return cls(n_docs=n_docs, _table=table)


@dataclass(frozen=True)
class FeatureVector:
    """Sparse vector as parallel (strictly ascending index, value) arrays."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.ndim != 1 or idx.shape != val.shape:
            raise ShapeError("indices and values must be parallel 1-d arrays")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0):
            raise ShapeError("indices must be strictly ascending and non-negative")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class NblrWeights:
    """Per-feature least-squares slopes plus the label mean they centered on."""

    weights: np.ndarray
    label_mean: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ShapeError("weights must be 1-d")
        if not np.all(np.isfinite(w)):
            raise ShapeError("weights must be finite")
        object.__setattr__(self, "weights", w)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> TokenSequence:
    """Lower-cased whitespace tokens with original character offsets.

    Leading and trailing punctuation is stripped from each token (internal
    punctuation such as apostrophes survives); tokens reduced to nothing
    are dropped.
    """
    tokens: list[Token] = []
    for m in _WORD_RE.finditer(text):
        start, end = m.start(), m.end()
        while start < end and _is_punct(text[start]):
            start += 1
        while end > start and _is_punct(text[end - 1]):
            end -= 1
        if start < end:
            tokens.append(Token(text[start:end].lower(), start, end))
    return TokenSequence(tuple(tokens))


def truncate(tokens: TokenSequence, config: TruncationConfig = TruncationConfig()) -> TokenSequence:
    """Identity under the limit; otherwise first `head` plus last `tail`."""
    if len(tokens) <= config.max_len:
        return tokens
    kept = tokens.tokens[: config.head] + tokens.tokens[len(tokens) - config.tail :]
    return TokenSequence(kept)


def ngrams(texts: Sequence[str]) -> list[str]:
    """Unigrams then space-joined bigrams, in document order."""
    out = list(texts)
    out.extend(f"{a} {b}" for a, b in zip(texts, texts[1:]))
    return out


def _idf(n_docs: int, df: int) -> float:
    return float(np.log((1.0 + n_docs) / (1.0 + df)) + 1.0)


def build_vocab(corpus: Iterable[TokenSequence], min_df: int = 2) -> Vocabulary:
    """Count document frequencies and assign dense indices.

    Indices go to frequent terms first (ties broken lexicographically) so
    two runs over the same corpus agree exactly.
    """
    if min_df < 1:
        raise ConfigError(f"min_df must be >= 1, got {min_df}")
    df_counts: dict[str, int] = {}
    n_docs = 0
    for seq in corpus:
        n_docs += 1
        for term in set(ngrams(seq.texts())):
            df_counts[term] = df_counts.get(term, 0) + 1
    if n_docs == 0:
        raise DegenerateInput("cannot build a vocabulary from an empty corpus")
    kept = [(term, df) for term, df in df_counts.items() if df >= min_df]
    kept.sort(key=lambda item: (-item[1], item[0]))
    table = {term: (idx, df, _idf(n_docs, df)) for idx, (term, df) in enumerate(kept)}
    return Vocabulary(n_docs=n_docs, _table=table)


def tfidf(tokens: TokenSequence, vocab: Vocabulary) -> FeatureVector:
    """L2-normalized (count x idf) vector; out-of-vocabulary n-grams ignored."""
    counts: dict[str, int] = {}
    for term in ngrams(tokens.texts()):
        if term in vocab:
            counts[term] = counts.get(term, 0) + 1
    if not counts:
        return FeatureVector(np.empty(0, dtype=np.int64), np.empty(0))
    pairs = sorted((vocab.index_of(t), c * vocab.idf_of(t)) for t, c in counts.items())
    indices = np.array([i for i, _ in pairs], dtype=np.int64)
    values = np.array([v for _, v in pairs])
    norm = np.linalg.norm(values)
    return FeatureVector(indices, values / norm)


def fit_nblr(
    features: Sequence[FeatureVector], labels: Sequence[float], size: int
) -> NblrWeights:
    """Per-column univariate least-squares slope of label on feature value.

    Implicit zeros count toward the column mean. Zero-variance columns get
    weight 0: they carry no signal and the slope is 0/0 there.
    """
    y = np.asarray(labels, dtype=np.float64)
    if len(features) != y.size:
        raise ShapeError(f"{len(features)} features vs {y.size} labels")
    if y.size < 2:
        raise DegenerateInput("need at least 2 examples to fit scaling weights")
    n = y.size
    col_sum = np.zeros(size)
    col_sumsq = np.zeros(size)
    col_cross = np.zeros(size)
    for fv, label in zip(features, y):
        if fv.nnz and int(fv.indices[-1]) >= size:
            raise ShapeError(f"feature index {int(fv.indices[-1])} >= size {size}")
        np.add.at(col_sum, fv.indices, fv.values)
        np.add.at(col_sumsq, fv.indices, fv.values**2)
        np.add.at(col_cross, fv.indices, fv.values * label)
    mean = col_sum / n
    y_mean = float(y.mean())
    numer = col_cross - n * mean * y_mean
    denom = col_sumsq - n * mean**2
    dead = denom <= 1e-12 * np.maximum(col_sumsq, 1e-300)
    weights = np.where(dead, 0.0, numer / np.where(dead, 1.0, denom))
    return NblrWeights(weights=weights, label_mean=y_mean)


def apply_nblr(fv: FeatureVector, nblr: NblrWeights) -> FeatureVector:
    """Scale each entry by its column weight, dropping zero-weight entries."""
    if fv.nnz and int(fv.indices[-1]) >= nblr.weights.size:
        raise ShapeError(
            f"feature index {int(fv.indices[-1])} >= weight length {nblr.weights.size}"
        )
    scaled = fv.values * nblr.weights[fv.indices]
    keep = nblr.weights[fv.indices] != 0.0
    return FeatureVector(fv.indices[keep], scaled[keep])


def document_vector(
    text: str,
    vocab: Vocabulary,
    truncation: TruncationConfig | None = None,
    nblr: NblrWeights | None = None,
) -> FeatureVector:
    """Full featurization chain: tokenize, truncate, TF-IDF, optional scaling."""
    tokens = tokenize(text)
    if truncation is not None:
        tokens = truncate(tokens, truncation)
    fv = tfidf(tokens, vocab)
    if nblr is not None:
        fv = apply_nblr(fv, nblr)
    return fv


def to_csr(features: Sequence[FeatureVector], size: int) -> scipy.sparse.csr_matrix:
    """Stack sparse vectors into one CSR matrix for batched linear algebra."""
    indptr = np.zeros(len(features) + 1, dtype=np.int64)
    for i, fv in enumerate(features):
        if fv.nnz and int(fv.indices[-1]) >= size:
            raise ShapeError(f"feature index {int(fv.indices[-1])} >= size {size}")
        indptr[i + 1] = indptr[i] + fv.nnz
    indices = np.concatenate([fv.indices for fv in features]) if features else np.empty(0, np.int64)
    values = np.concatenate([fv.values for fv in features]) if features else np.empty(0)
    return scipy.sparse.csr_matrix((values, indices, indptr), shape=(len(features), size))
