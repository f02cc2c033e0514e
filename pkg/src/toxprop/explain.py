"""Token-level attribution: which words drive a document's predicted propensity.

Five schemes, each producing one value per token position:

- SM (saliency map): L2 norm of the objective's gradient on the token's
  embedding; unsigned importance.
- DP (dot product): embedding . gradient; signed directional pull.
- HB (hybrid): SM magnitude with DP's sign.
- AS (ablation study): objective value of the full document minus the value
  with the token deleted (the remaining tokens are re-pooled).
- RC (regression coefficients): for linear models, the sum over in-vocabulary
  n-grams covering the position of coefficient x feature value. A Beta-headed
  linear model contributes w_alpha - w_beta as its effective coefficient,
  the direction its predicted mean moves.

SM/DP/HB differentiate through the embedding model and therefore require
one; RC requires a linear model; AS works with either. The objective is the
predicted mean by default; the mode objective falls back to the mean (with
a flag) when the distribution has no interior peak, mirroring mode_estimate.
Point models have a single output, so the objective choice is moot there,
as it is in their predict_score.

All functions are pure over immutable models.
"""

from __future__ import annotations

import html
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import beta as beta_core
from .errors import ConfigError, DegenerateInput
from .features import FeatureVector, TokenSequence, apply_nblr, tfidf, tokenize, truncate
from .models import (
    EmbeddingBetaModel,
    LinearBetaModel,
    LinearPointModel,
    Model,
    _clamp_logits,
    _sigmoid,
)

SCHEMES = ("SM", "DP", "HB", "AS", "RC")
OBJECTIVES = ("mean", "mode")

_GRADIENT_SCHEMES = ("SM", "DP", "HB")


@dataclass(frozen=True)
class Attribution:
    token: str
    position: int
    scheme: str
    objective: str
    value: float
    magnitude: float

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.position < 0:
            raise ConfigError(f"position must be >= 0, got {self.position}")
        if not math.isfinite(self.value) or not math.isfinite(self.magnitude):
            raise ConfigError("attribution values must be finite")
        if not math.isclose(abs(self.value), self.magnitude, rel_tol=1e-12, abs_tol=1e-300):
            raise ConfigError("magnitude must equal |value|")

    def to_dict(self) -> dict:
        return {
            "token": self.token,
            "position": self.position,
            "scheme": self.scheme,
            "objective": self.objective,
            "value": self.value,
            "magnitude": self.magnitude,
        }


@dataclass(frozen=True)
class GradientResult:
    """Per-position objective gradients over the (possibly truncated) tokens."""

    tokens: TokenSequence
    gradients: np.ndarray  # (len(tokens), model dim)
    objective: str  # the objective actually differentiated
    mode_fell_back: bool


@dataclass(frozen=True)
class ExplainReport:
    tokens: TokenSequence
    attributions: tuple[Attribution, ...]
    top: tuple[Attribution, ...]
    scheme: str
    objective_requested: str
    objective_used: str
    mode_fell_back: bool
    k: int

    def to_dict(self) -> dict:
        return {
            "tokens": [
                {"text": t.text, "start": t.start, "end": t.end} for t in self.tokens
            ],
            "attributions": [a.to_dict() for a in self.attributions],
            "top": [a.to_dict() for a in self.top],
            "scheme": self.scheme,
            "objective_requested": self.objective_requested,
            "objective_used": self.objective_used,
            "mode_fell_back": self.mode_fell_back,
            "k": self.k,
        }


def _check_objective(objective: str) -> None:
    if objective not in OBJECTIVES:
        raise ConfigError(f"objective must be one of {OBJECTIVES}, got {objective!r}")


def _check_scheme(scheme: str) -> None:
    if scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}, got {scheme!r}")


def attributed_tokens(model: Model, text: str) -> TokenSequence:
    """The token sequence attribution positions refer to for this model.

    Embedding models score a truncated window of long documents, so their
    attributions cover exactly that window; linear models cover every token.
    """
    tokens = tokenize(text)
    if isinstance(model, EmbeddingBetaModel):
        tokens = truncate(tokens, model.truncation)
    return tokens


def gradient_wrt_embeddings(
    model: EmbeddingBetaModel, tokens: TokenSequence, objective: str = "mean"
) -> GradientResult:
    """Exact gradient of the objective on each position's embedding vector.

    Repeated tokens get separate per-position gradients. A mode objective
    with no interior peak (alpha <= 1 or beta <= 1) falls back to the mean
    objective, reported via mode_fell_back.
    """
    if not isinstance(model, EmbeddingBetaModel):
        raise ConfigError("gradients are taken on an embedding model")
    _check_objective(objective)
    seq = truncate(tokens, model.truncation)
    rows = model.rows_for(seq)
    vectors = model.embeddings[rows]
    pooled, cache = model.pool(vectors)
    la_raw = float(model.w_alpha @ pooled) + model.b_alpha
    lb_raw = float(model.w_beta @ pooled) + model.b_beta
    (la, open_a), (lb, open_b) = _clamp_logits(la_raw), _clamp_logits(lb_raw)
    alpha, beta = float(np.exp(la)), float(np.exp(lb))

    used, fell_back = objective, False
    if objective == "mode" and (alpha <= 1.0 or beta <= 1.0):
        used, fell_back = "mean", True
    if used == "mean":
        m = float(_sigmoid(la - lb))
        g_la, g_lb = m * (1.0 - m), -m * (1.0 - m)
    else:
        denom = (alpha + beta - 2.0) ** 2
        g_la = alpha * (beta - 1.0) / denom
        g_lb = -beta * (alpha - 1.0) / denom
    d_pooled = (g_la * float(open_a)) * model.w_alpha + (g_lb * float(open_b)) * model.w_beta
    grads, _ = model.pool_backward(vectors, cache, d_pooled)
    return GradientResult(tokens=seq, gradients=grads, objective=used, mode_fell_back=fell_back)


def _linear_features(model: LinearBetaModel | LinearPointModel, seq: TokenSequence) -> FeatureVector:
    fv = tfidf(seq, model.vocab)
    if model.nblr is not None:
        fv = apply_nblr(fv, model.nblr)
    return fv


def _sequence_value(model: Model, seq: TokenSequence, objective: str) -> float:
    """Objective value of a token sequence under any model family."""
    if isinstance(model, EmbeddingBetaModel):
        params = model.params_from_rows(model.rows_for(seq))
    elif isinstance(model, LinearBetaModel):
        params = model.predict_params(_linear_features(model, seq))
    else:
        return model.predict(_linear_features(model, seq))
    if objective == "mode":
        value, _ = beta_core.mode_estimate(params)
        return value
    return beta_core.mean_estimate(params)


def _resolve_mode(model: Model, seq: TokenSequence, objective: str) -> tuple[str, bool]:
    """Pin the objective for a whole document before per-token evaluation."""
    if objective != "mode" or isinstance(model, LinearPointModel):
        return objective, False
    if isinstance(model, EmbeddingBetaModel):
        params = model.params_from_rows(model.rows_for(seq))
    else:
        params = model.predict_params(_linear_features(model, seq))
    if params.alpha <= 1.0 or params.beta <= 1.0:
        return "mean", True
    return "mode", False


def _gradient_attributions(
    model: Model, tokens: TokenSequence, scheme: str, objective: str
) -> list[Attribution]:
    if not isinstance(model, EmbeddingBetaModel):
        raise ConfigError(f"scheme {scheme} requires an embedding model, got {model.kind}")
    result = gradient_wrt_embeddings(model, tokens, objective)
    seq, grads = result.tokens, result.gradients
    sm = np.linalg.norm(grads, axis=1)
    if scheme == "SM":
        values = sm
    else:
        vectors = model.embeddings[model.rows_for(seq)]
        dp = np.einsum("ld,ld->l", vectors, grads)
        values = dp if scheme == "DP" else np.where(dp < 0.0, -1.0, 1.0) * sm
    return [
        Attribution(
            token=t.text,
            position=l,
            scheme=scheme,
            objective=result.objective,
            value=float(v),
            magnitude=float(abs(v)),
        )
        for l, (t, v) in enumerate(zip(seq, values))
    ]


def _ablation_attributions(
    model: Model, tokens: TokenSequence, objective: str
) -> list[Attribution]:
    seq = tokens
    if isinstance(model, EmbeddingBetaModel):
        seq = truncate(seq, model.truncation)
    if len(seq) < 2:
        raise DegenerateInput("ablation needs at least two tokens to delete one")
    used, _ = _resolve_mode(model, seq, objective)
    base = _sequence_value(model, seq, used)
    out = []
    for l, token in enumerate(seq):
        rest = TokenSequence(seq.tokens[:l] + seq.tokens[l + 1 :])
        value = base - _sequence_value(model, rest, used)
        out.append(
            Attribution(
                token=token.text,
                position=l,
                scheme="AS",
                objective=used,
                value=value,
                magnitude=abs(value),
            )
        )
    return out


def _coefficient_attributions(
    model: Model, tokens: TokenSequence, objective: str
) -> list[Attribution]:
    if isinstance(model, LinearBetaModel):
        coef = model.w_alpha - model.w_beta
    elif isinstance(model, LinearPointModel):
        coef = model.w
    else:
        raise ConfigError(f"scheme RC requires a linear model, got {model.kind}")
    fv = _linear_features(model, tokens)
    contribution = {int(i): float(coef[i] * v) for i, v in zip(fv.indices, fv.values)}
    vocab = model.vocab
    texts = tokens.texts()
    covering: list[set[int]] = [set() for _ in texts]
    for l, term in enumerate(texts):
        if term in vocab:
            covering[l].add(vocab.index_of(term))
    for l, (a, b) in enumerate(zip(texts, texts[1:])):
        bigram = f"{a} {b}"
        if bigram in vocab:
            idx = vocab.index_of(bigram)
            covering[l].add(idx)
            covering[l + 1].add(idx)
    out = []
    for l, token in enumerate(tokens):
        value = sum(contribution.get(i, 0.0) for i in sorted(covering[l]))
        out.append(
            Attribution(
                token=token.text,
                position=l,
                scheme="RC",
                objective=objective,
                value=value,
                magnitude=abs(value),
            )
        )
    return out


def attribute(
    model: Model, tokens: TokenSequence, scheme: str, objective: str = "mean"
) -> list[Attribution]:
    """One attribution per token position under the requested scheme."""
    _check_scheme(scheme)
    _check_objective(objective)
    if scheme in _GRADIENT_SCHEMES:
        return _gradient_attributions(model, tokens, scheme, objective)
    if scheme == "AS":
        return _ablation_attributions(model, tokens, objective)
    return _coefficient_attributions(model, tokens, objective)


def auto_k(token_count: int) -> int:
    """Default k when the caller does not pick one: 10% of tokens, at least 1."""
    return max(1, math.ceil(0.1 * token_count))


def top_k(attributions: Sequence[Attribution], k: int) -> list[Attribution]:
    """The k largest-magnitude attributions; ties go to the earlier position."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    ranked = sorted(attributions, key=lambda a: (-a.magnitude, a.position))
    return ranked[:k]


def hit_rate(predicted: Sequence[str], annotated: Sequence[str]) -> float:
    """Share of annotated tokens the prediction covers, case-insensitively."""
    annotated_set = {t.casefold() for t in annotated}
    if not annotated_set:
        raise DegenerateInput("hit rate needs a nonempty annotated token set")
    predicted_set = {t.casefold() for t in predicted}
    return len(predicted_set & annotated_set) / len(annotated_set)


def explain(
    model: Model, text: str, scheme: str, objective: str = "mean", k: int | None = None
) -> ExplainReport:
    """Attribution pipeline over raw text: tokenize, attribute, rank.

    k beyond the token count saturates to all tokens; k=None picks auto_k.
    """
    _check_scheme(scheme)
    _check_objective(objective)
    tokens = attributed_tokens(model, text)
    attributions = attribute(model, tokens, scheme, objective)
    if k is None:
        k = auto_k(len(attributions)) if attributions else 1
    elif k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    used = attributions[0].objective if attributions else objective
    return ExplainReport(
        tokens=tokens,
        attributions=tuple(attributions),
        top=tuple(top_k(attributions, k)),
        scheme=scheme,
        objective_requested=objective,
        objective_used=used,
        mode_fell_back=objective == "mode" and used == "mean",
        k=k,
    )


_HEATMAP_STYLE = """
body { font-family: sans-serif; margin: 2rem auto; max-width: 60rem; }
.doc { line-height: 1.9; font-size: 1.05rem; white-space: pre-wrap; }
.tok { padding: 0.05rem 0.1rem; border-radius: 0.2rem; }
.meta { color: #555; font-size: 0.9rem; }
"""


def html_heatmap(text: str, report: ExplainReport) -> str:
    """Standalone HTML page shading each token by its normalized magnitude.

    Positive values shade red, negative blue; intensity is magnitude divided
    by the document maximum. Unattributed stretches render as plain text.
    """
    by_position = {a.position: a for a in report.attributions}
    max_magnitude = max((a.magnitude for a in report.attributions), default=0.0)
    parts = []
    cursor = 0
    for position, token in enumerate(report.tokens):
        parts.append(html.escape(text[cursor : token.start]))
        att = by_position.get(position)
        if att is None or max_magnitude <= 0.0:
            parts.append(html.escape(text[token.start : token.end]))
        else:
            intensity = att.magnitude / max_magnitude
            color = (220, 38, 38) if att.value >= 0 else (37, 99, 235)
            parts.append(
                f'<span class="tok" style="background: rgba({color[0]},{color[1]},'
                f'{color[2]},{intensity:.3f})" title="{att.value:+.6g}">'
                f"{html.escape(text[token.start : token.end])}</span>"
            )
        cursor = token.end
    parts.append(html.escape(text[cursor:]))
    body = "".join(parts)
    meta = (
        f"scheme {report.scheme}, objective {report.objective_used}"
        + (" (mode fell back to mean)" if report.mode_fell_back else "")
        + f", top-{report.k}"
    )
    return (
        "<!doctype html>\n<html><head><meta charset=\"utf-8\">"
        f"<title>token attribution</title><style>{_HEATMAP_STYLE}</style></head>\n"
        f'<body><p class="doc">{body}</p>\n<p class="meta">{html.escape(meta)}</p>'
        "</body></html>\n"
    )
