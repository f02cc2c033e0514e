"""Seeded synthetic corpora with planted toxicity drivers.

Documents are pseudo-word bags. A small set of planted driver words shifts
a latent propensity logit; labels are drawn from a Beta distribution whose
mean follows that logit and whose concentration controls the noise floor.
Knowing the planted words makes recovery and explanation quality testable.

Run as a module to write a corpus to disk for the CLI walkthrough:
    python -m toxprop.synthetic --out data/ --docs 1000
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .data import (
    ANNOTATION_SCALE,
    AnnotationRecord,
    CorpusSplit,
    LabeledExample,
    RawArticle,
    split_by_date,
)

_EPOCH = datetime(2022, 1, 1, tzinfo=timezone.utc)

_CONSONANTS = "bcdfglmnprstvz"
_VOWELS = "aeiou"


def pseudo_words(count: int) -> list[str]:
    """Deterministic pronounceable vocabulary: two-syllable pseudo-words."""
    syllables = [c + v for c, v in itertools.product(_CONSONANTS, _VOWELS)]
    words = ["".join(pair) for pair in itertools.product(syllables, repeat=2)]
    if count > len(words):
        raise ValueError(f"at most {len(words)} pseudo-words available, asked for {count}")
    return words[:count]


@dataclass(frozen=True)
class SyntheticSpec:
    n_docs: int = 5000
    vocab_size: int = 1000
    n_drivers: int = 20  # planted words; the last n_dispersion shift noise, not mean
    n_dispersion: int = 6
    seed: int = 0
    doc_len: tuple[int, int] = (20, 50)
    title_len: tuple[int, int] = (3, 6)
    driver_prob: float = 0.28  # per direction driver, per document
    dispersion_prob: float = 0.03  # per dispersion driver, per document
    repeat_prob: float = 0.3  # chance a present driver appears twice
    effect_scale: tuple[float, float] = (0.6, 1.1)
    dispersion_scale: tuple[float, float] = (-3.4, -2.6)  # log-concentration shift
    base_logit: float = -2.2
    concentration: float = 800.0  # alpha + beta of a clean document's labels

    def __post_init__(self):
        if not 0 <= self.n_dispersion <= self.n_drivers:
            raise ValueError("n_dispersion must lie within n_drivers")


@dataclass(frozen=True)
class SyntheticCorpus:
    examples: tuple[LabeledExample, ...]
    driver_effects: dict[str, float]  # word -> shift of the propensity logit
    dispersion_effects: dict[str, float]  # word -> shift of log concentration
    spec: SyntheticSpec = field(compare=False, default_factory=SyntheticSpec)

    @property
    def driver_words(self) -> tuple[str, ...]:
        return tuple(self.driver_effects) + tuple(self.dispersion_effects)

    def split(self) -> CorpusSplit:
        return split_by_date(self.examples)


def generate(spec: SyntheticSpec) -> SyntheticCorpus:
    """Build the corpus; fully determined by the spec (including its seed)."""
    rng = np.random.default_rng(spec.seed)
    words = pseudo_words(spec.vocab_size)
    driver_idx = rng.choice(spec.vocab_size, size=spec.n_drivers, replace=False)
    n_direction = spec.n_drivers - spec.n_dispersion
    signs = np.where(np.arange(n_direction) % 2 == 0, 1.0, -1.0)
    magnitudes = rng.uniform(*spec.effect_scale, size=n_direction)
    effects = {
        words[i]: float(s * m) for i, s, m in zip(driver_idx[:n_direction], signs, magnitudes)
    }
    nu = rng.uniform(*spec.dispersion_scale, size=spec.n_dispersion)
    dispersion = {words[i]: float(v) for i, v in zip(driver_idx[n_direction:], nu)}
    background = [w for i, w in enumerate(words) if i not in set(int(j) for j in driver_idx)]
    # mild Zipf-like tilt so document frequencies spread realistically
    ranks = np.arange(len(background), dtype=np.float64)
    probs = 1.0 / (ranks + 10.0)
    probs /= probs.sum()

    examples = []
    for n in range(spec.n_docs):
        n_title = int(rng.integers(spec.title_len[0], spec.title_len[1] + 1))
        n_body = int(rng.integers(spec.doc_len[0], spec.doc_len[1] + 1))
        tokens = list(rng.choice(background, size=n_title + n_body, p=probs))
        theta = spec.base_logit
        log_conc = np.log(spec.concentration)
        for word, effect in effects.items():
            if rng.random() >= spec.driver_prob:
                continue
            count = 2 if rng.random() < spec.repeat_prob else 1
            theta += count * effect
            for _ in range(count):
                tokens.insert(int(rng.integers(0, len(tokens) + 1)), word)
        for word, effect in dispersion.items():
            if rng.random() >= spec.dispersion_prob:
                continue
            count = 2 if rng.random() < spec.repeat_prob else 1
            log_conc += count * effect
            for _ in range(count):
                tokens.insert(int(rng.integers(0, len(tokens) + 1)), word)
        mu = 1.0 / (1.0 + np.exp(-theta))
        conc = np.exp(log_conc)
        label = float(rng.beta(mu * conc, (1.0 - mu) * conc))
        title = " ".join(tokens[:n_title])
        body = " ".join(tokens[n_title:])
        examples.append(
            LabeledExample(
                id=f"doc{n:05d}",
                text=title + "\n" + body,
                label=label,
                published_at=_EPOCH + timedelta(hours=n),
            )
        )
    return SyntheticCorpus(
        examples=tuple(examples),
        driver_effects=effects,
        dispersion_effects=dispersion,
        spec=spec,
    )


def as_articles(
    corpus: SyntheticCorpus,
    comments_range: tuple[int, int] = (10, 40),
    comment_concentration: float = 50.0,
    seed: int = 1,
) -> list[RawArticle]:
    """Re-express labeled examples as raw articles with per-comment scores.

    Comment scores are drawn around each example's label, so the ingest
    pipeline reconstructs approximately the same corpus.
    """
    rng = np.random.default_rng(seed)
    articles = []
    for ex in corpus.examples:
        title, _, body = ex.text.partition("\n")
        k = int(rng.integers(comments_range[0], comments_range[1] + 1))
        mu = min(max(ex.label, 1e-3), 1.0 - 1e-3)
        scores = rng.beta(mu * comment_concentration, (1.0 - mu) * comment_concentration, size=k)
        articles.append(
            RawArticle(
                id=ex.id,
                title=title,
                body=body,
                published_at=ex.published_at,
                comment_scores=tuple(float(s) for s in scores),
            )
        )
    return articles


def as_annotations(
    examples,
    seed: int = 2,
    noise: float = 0.35,
) -> list[AnnotationRecord]:
    """Two simulated annotator groups rating each example's propensity.

    Each group maps a noisy copy of the label onto the 5-level scale, so
    joint scores correlate with labels without agreeing perfectly.
    """
    rng = np.random.default_rng(seed)
    edges = [0.2, 0.4, 0.6, 0.8]

    def level(value: float) -> str:
        return ANNOTATION_SCALE[int(np.searchsorted(edges, value))]

    records = []
    for ex in examples:
        g1 = level(float(np.clip(ex.label + rng.normal(0.0, noise * 0.5), 0.0, 1.0)))
        g2 = level(float(np.clip(ex.label + rng.normal(0.0, noise * 0.5), 0.0, 1.0)))
        records.append(AnnotationRecord(article_id=ex.id, group1=g1, group2=g2))
    return records


def _main():
    import json
    from pathlib import Path

    import click

    @click.command(help="Write a synthetic article corpus for the CLI walkthrough.")
    @click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
    @click.option("--docs", default=1000, show_default=True)
    @click.option("--vocab", default=400, show_default=True)
    @click.option("--drivers", default=12, show_default=True)
    @click.option("--seed", default=0, show_default=True)
    def main(out: "Path", docs: int, vocab: int, drivers: int, seed: int):
        corpus = generate(
            SyntheticSpec(n_docs=docs, vocab_size=vocab, n_drivers=drivers, seed=seed)
        )
        out.mkdir(parents=True, exist_ok=True)
        articles = as_articles(corpus)
        with open(out / "articles.jsonl", "w", encoding="utf-8") as fh:
            for art in articles:
                fh.write(
                    json.dumps(
                        {
                            "id": art.id,
                            "title": art.title,
                            "body": art.body,
                            "published_at": art.published_at.isoformat(),
                            "comment_scores": list(art.comment_scores),
                        }
                    )
                    + "\n"
                )
        with open(out / "annotations.jsonl", "w", encoding="utf-8") as fh:
            for rec in as_annotations(corpus.examples[: max(200, docs // 5)]):
                fh.write(
                    json.dumps(
                        {"id": rec.article_id, "group1": rec.group1, "group2": rec.group2}
                    )
                    + "\n"
                )
        with open(out / "drivers.json", "w", encoding="utf-8") as fh:
            json.dump(corpus.driver_effects, fh, indent=2, sort_keys=True)
        click.echo(f"wrote {len(articles)} articles to {out}")

    main()


if __name__ == "__main__":
    _main()
