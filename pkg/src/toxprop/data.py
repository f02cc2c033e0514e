"""Corpus ingestion, labeling, date splits, and human-benchmark sampling.

Articles arrive as line-delimited JSON records with precomputed per-comment
toxicity scores. An article's propensity label is the mean of those scores.
Splits are chronological; benchmark sets are bucketed by label and sampled
with a seeded generator.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import ConfigError, DataError, DegenerateInput, DomainError, ParseError

TITLE_BODY_SEPARATOR = "\n"

# 5-level annotation scale and its signed numeric mapping.
ANNOTATION_VALUES = {"VU": -2, "U": -1, "N": 0, "L": 1, "VL": 2}
ANNOTATION_SCALE = ("VU", "U", "N", "L", "VL")

# Label buckets: six 0.1-wide intervals, then one wide tail where articles
# are scarce. The last bucket is closed on the right.
BUCKET_EDGES = ((0.0, 0.1), (0.1, 0.2), (0.2, 0.3), (0.3, 0.4), (0.4, 0.5), (0.5, 0.6), (0.6, 1.0))

DEFAULT_MIN_COMMENTS = 10
DEFAULT_RATIOS = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class RawArticle:
    id: str
    title: str
    body: str
    published_at: datetime
    comment_scores: tuple[float, ...]


@dataclass(frozen=True)
class LabeledExample:
    id: str
    text: str
    label: float
    published_at: datetime


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[LabeledExample, ...]
    validation: tuple[LabeledExample, ...]
    test: tuple[LabeledExample, ...]

    def all_examples(self) -> tuple[LabeledExample, ...]:
        return self.train + self.validation + self.test


@dataclass(frozen=True)
class AnnotationRecord:
    article_id: str
    group1: str
    group2: str

    def __post_init__(self):
        for lab in (self.group1, self.group2):
            if lab not in ANNOTATION_VALUES:
                raise ParseError(f"unknown annotation label {lab!r}")


@dataclass(frozen=True)
class Bucket:
    low: float
    high: float
    right_closed: bool
    examples: tuple[LabeledExample, ...]
    underfilled: bool

    def contains(self, label: float) -> bool:
        if self.right_closed:
            return self.low <= label <= self.high
        return self.low <= label < self.high


@dataclass(frozen=True)
class BenchmarkSet:
    buckets: tuple[Bucket, ...]
    training_holdout: tuple[str, ...]
    judged: tuple[AnnotationRecord, ...] = field(default=())

    def judged_examples(self) -> tuple[LabeledExample, ...]:
        return tuple(ex for b in self.buckets for ex in b.examples)

    def with_judgments(self, records: Sequence[AnnotationRecord]) -> "BenchmarkSet":
        known = {ex.id for ex in self.judged_examples()}
        for rec in records:
            if rec.article_id not in known:
                raise DataError(f"annotation for unknown article {rec.article_id!r}")
        return replace(self, judged=tuple(records))


class CommentScorer(Protocol):
    """Anything that maps a comment to a toxicity score in [0, 1]."""

    def score(self, comment: str) -> float: ...


class FileScoreTable:
    """Score lookup backed by a JSON file of {comment id: score}.

    Stands in for a live scoring API; the comment's id is used as the
    lookup key.
    """

    def __init__(self, path: str | Path):
        with open(path, encoding="utf-8") as fh:
            table = json.load(fh)
        if not isinstance(table, dict):
            raise ParseError(f"{path}: expected a JSON object of id -> score")
        self._table = {str(k): float(v) for k, v in table.items()}
        for k, v in self._table.items():
            if not 0.0 <= v <= 1.0:
                raise ParseError(f"score for {k!r} outside [0, 1]: {v}")

    def score(self, comment: str) -> float:
        try:
            return self._table[comment]
        except KeyError:
            raise DataError(f"no score on file for comment {comment!r}") from None


def label_article(comment_scores: Sequence[float]) -> float:
    """Mean toxicity of the article's comments; the training label."""
    if len(comment_scores) == 0:
        raise DegenerateInput("cannot label an article with no comment scores")
    arr = np.asarray(comment_scores, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("comment scores must lie in [0, 1]")
    return float(arr.mean())


def build_corpus(
    articles: Iterable[RawArticle], min_comments: int = DEFAULT_MIN_COMMENTS
) -> list[LabeledExample]:
    """Drop low-volume articles, label the rest."""
    if min_comments < 1:
        raise ConfigError(f"min_comments must be >= 1, got {min_comments}")
    out = []
    for art in articles:
        if len(art.comment_scores) < min_comments:
            continue
        out.append(
            LabeledExample(
                id=art.id,
                text=art.title + TITLE_BODY_SEPARATOR + art.body,
                label=label_article(art.comment_scores),
                published_at=art.published_at,
            )
        )
    return out


def split_by_date(
    examples: Sequence[LabeledExample],
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
) -> CorpusSplit:
    """Chronological split: earliest into train, latest into test.

    Sizes are floor(r*N) for train and validation, remainder test. Ties on
    the timestamp are broken by id so the split is reproducible.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(examples)
    if n < 3:
        raise DegenerateInput(f"need at least 3 examples to split, got {n}")
    ids = [ex.id for ex in examples]
    if len(set(ids)) != n:
        raise DataError("duplicate example ids")
    ordered = sorted(examples, key=lambda ex: (ex.published_at, ex.id))
    n_train = math.floor(ratios[0] * n)
    n_val = math.floor(ratios[1] * n)
    if n_train == 0 or n_val == 0:
        warnings.warn(f"split of {n} examples leaves an empty part: sizes "
                      f"({n_train}, {n_val}, {n - n_train - n_val})")
    return CorpusSplit(
        train=tuple(ordered[:n_train]),
        validation=tuple(ordered[n_train : n_train + n_val]),
        test=tuple(ordered[n_train + n_val :]),
    )


def bucket_sample(
    examples: Sequence[LabeledExample],
    per_bucket: int,
    holdout_fraction: float,
    seed: int,
) -> BenchmarkSet:
    """Sample each label bucket without replacement with a seeded generator.

    The first ceil(holdout_fraction * sampled) draws of each bucket go to
    the training holdout; the rest await human judgment. Empty buckets are
    kept (flagged) so downstream reports stay aligned.
    """
    if per_bucket < 1:
        raise ConfigError(f"per_bucket must be >= 1, got {per_bucket}")
    if not 0.0 <= holdout_fraction < 1.0:
        raise ConfigError(f"holdout_fraction must be in [0, 1), got {holdout_fraction}")
    rng = np.random.default_rng(seed)
    buckets: list[Bucket] = []
    holdout: list[str] = []
    last = len(BUCKET_EDGES) - 1
    for i, (low, high) in enumerate(BUCKET_EDGES):
        right_closed = i == last
        members = [
            ex
            for ex in examples
            if (low <= ex.label <= high if right_closed else low <= ex.label < high)
        ]
        take = min(per_bucket, len(members))
        if take == 0:
            warnings.warn(f"bucket [{low}, {high}{']' if right_closed else ')'} is empty")
            buckets.append(Bucket(low, high, right_closed, (), True))
            continue
        idx = rng.choice(len(members), size=take, replace=False)
        sampled = [members[j] for j in idx]
        n_hold = math.ceil(holdout_fraction * take)
        holdout.extend(ex.id for ex in sampled[:n_hold])
        buckets.append(
            Bucket(low, high, right_closed, tuple(sampled[n_hold:]), take < per_bucket)
        )
    return BenchmarkSet(buckets=tuple(buckets), training_holdout=tuple(holdout))


def joint_annotation_score(a: str, b: str) -> int:
    """Sum of the two annotators' signed levels, an integer in [-4, 4]."""
    try:
        return ANNOTATION_VALUES[a] + ANNOTATION_VALUES[b]
    except KeyError as exc:
        raise ParseError(f"unknown annotation label {exc.args[0]!r}") from None


def fingerprint(examples: Sequence[LabeledExample]) -> str:
    """Order-independent digest of (id, label) pairs identifying a corpus."""
    h = hashlib.sha256()
    for ex in sorted(examples, key=lambda e: e.id):
        h.update(f"{ex.id}\t{ex.label:.12g}\n".encode())
    return h.hexdigest()


def _parse_timestamp(raw: str, where: str) -> datetime:
    try:
        ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except (ValueError, AttributeError, TypeError):
        raise ParseError(f"{where}: bad timestamp {raw!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def load_articles(path: str | Path) -> list[RawArticle]:
    """Read line-delimited article records, one JSON object per line."""
    articles: list[RawArticle] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{where}: invalid JSON ({exc.msg})") from None
            try:
                art = RawArticle(
                    id=str(rec["id"]),
                    title=str(rec["title"]),
                    body=str(rec["body"]),
                    published_at=_parse_timestamp(rec["published_at"], where),
                    comment_scores=tuple(float(s) for s in rec["comment_scores"]),
                )
            except KeyError as exc:
                raise ParseError(f"{where}: missing field {exc.args[0]!r}") from None
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{where}: {exc}") from None
            if not art.id:
                raise ParseError(f"{where}: empty id")
            if art.id in seen:
                raise ParseError(f"{where}: duplicate id {art.id!r}")
            if any(not 0.0 <= s <= 1.0 for s in art.comment_scores):
                raise ParseError(f"{where}: comment score outside [0, 1]")
            seen.add(art.id)
            articles.append(art)
    return articles


def write_examples(examples: Iterable[LabeledExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "id": ex.id,
                        "text": ex.text,
                        "label": ex.label,
                        "published_at": ex.published_at.isoformat(),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_examples(path: str | Path) -> list[LabeledExample]:
    out: list[LabeledExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
                ex = LabeledExample(
                    id=str(rec["id"]),
                    text=str(rec["text"]),
                    label=float(rec["label"]),
                    published_at=_parse_timestamp(rec["published_at"], where),
                )
            except json.JSONDecodeError as exc:
                raise ParseError(f"{where}: invalid JSON ({exc.msg})") from None
            except KeyError as exc:
                raise ParseError(f"{where}: missing field {exc.args[0]!r}") from None
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{where}: {exc}") from None
            if not 0.0 <= ex.label <= 1.0:
                raise ParseError(f"{where}: label outside [0, 1]")
            out.append(ex)
    return out


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Read line-delimited {id, group1, group2} annotation records."""
    out: list[AnnotationRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
                out.append(
                    AnnotationRecord(
                        article_id=str(rec["id"]),
                        group1=str(rec["group1"]).upper(),
                        group2=str(rec["group2"]).upper(),
                    )
                )
            except json.JSONDecodeError as exc:
                raise ParseError(f"{where}: invalid JSON ({exc.msg})") from None
            except KeyError as exc:
                raise ParseError(f"{where}: missing field {exc.args[0]!r}") from None
    return out
