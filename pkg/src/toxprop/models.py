"""Models and training.

Three model families over a fixed [0,1] regression target:

- LinearBetaModel: two linear heads over sparse TF-IDF features producing
  log(alpha) and log(beta) of a Beta distribution, trained by NLL.
- LinearPointModel: one linear head squashed through a logistic, trained by
  MAE or MSE; with scaling weights attached it is the scaled-feature
  variant of the MSE baseline.
- EmbeddingBetaModel: trainable token embeddings pooled to one vector, with
  the same two Beta heads on top. Pooling is softplus-gated attention by
  default so per-token gradients are position-specific; arithmetic mean
  pooling is available as an option.

Training is mini-batch Adam with exact analytic gradients, seeded
shuffling, optional early stopping on validation loss, and best-epoch
checkpointing. Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np

from . import beta as beta_core
from .data import CorpusSplit, LabeledExample
from .errors import ConfigError, DegenerateInput, ShapeError, TrainingDiverged
from .features import (
    FeatureVector,
    NblrWeights,
    TokenSequence,
    TruncationConfig,
    Vocabulary,
    document_vector,
    to_csr,
    tokenize,
    truncate,
)
from .metrics import (
    MetricsReport,
    RankCorrelation,
    kendall_tau_b,
    mae as mae_metric,
    rmse as rmse_metric,
    spearman_rho,
)

Estimator = Literal["mean", "mode"]
PointLoss = Literal["mae", "mse"]
Pooling = Literal["attention", "mean"]

# exp() of a head logit beyond this would dwarf any realistic optimum;
# clamping keeps alpha/beta finite for arbitrary inputs.
LOGIT_CLAMP = 30.0

UNK_TOKEN = "<unk>"

DEFAULT_LINEAR_LR = 1e-2
DEFAULT_EMBEDDING_LR = 1e-5
DEFAULT_EMBEDDING_DIM = 64


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _clamp_logits(raw):
    """Clamped logits plus the pass-through mask for the backward pass."""
    raw = np.asarray(raw, dtype=np.float64)
    clipped = np.clip(raw, -LOGIT_CLAMP, LOGIT_CLAMP)
    inside = (raw > -LOGIT_CLAMP) & (raw < LOGIT_CLAMP)
    return clipped, inside


@dataclass(frozen=True)
class LinearBetaModel:
    vocab: Vocabulary
    w_alpha: np.ndarray
    b_alpha: float
    w_beta: np.ndarray
    b_beta: float
    nblr: NblrWeights | None = None

    kind = "linear-beta"

    def __post_init__(self):
        for name in ("w_alpha", "w_beta"):
            w = np.asarray(getattr(self, name), dtype=np.float64)
            if w.shape != (self.vocab.size,):
                raise ShapeError(f"{name} must have vocabulary length {self.vocab.size}")
            if not np.all(np.isfinite(w)):
                raise ShapeError(f"{name} contains non-finite values")
            object.__setattr__(self, name, w)

    def featurize(self, text: str) -> FeatureVector:
        return document_vector(text, self.vocab, truncation=None, nblr=self.nblr)

    def _logits(self, fv: FeatureVector) -> tuple[float, float]:
        if fv.nnz and int(fv.indices[-1]) >= self.vocab.size:
            raise ShapeError("feature index outside model vocabulary")
        la = float(self.w_alpha[fv.indices] @ fv.values) + self.b_alpha
        lb = float(self.w_beta[fv.indices] @ fv.values) + self.b_beta
        return la, lb

    def predict_params(self, fv: FeatureVector) -> beta_core.BetaParams:
        la, lb = self._logits(fv)
        (ca, _), (cb, _) = _clamp_logits(la), _clamp_logits(lb)
        return beta_core.BetaParams(float(np.exp(ca)), float(np.exp(cb)))

    def predict_score(self, fv: FeatureVector, estimator: Estimator = "mean") -> float:
        params = self.predict_params(fv)
        if estimator == "mode":
            value, _ = beta_core.mode_estimate(params)
            return value
        return beta_core.mean_estimate(params)

    def score_text(self, text: str, estimator: Estimator = "mean") -> float:
        return self.predict_score(self.featurize(text), estimator)

    def batch_scores(self, texts: Sequence[str], estimator: Estimator = "mean") -> np.ndarray:
        X = to_csr([self.featurize(t) for t in texts], self.vocab.size)
        la, _ = _clamp_logits(X @ self.w_alpha + self.b_alpha)
        lb, _ = _clamp_logits(X @ self.w_beta + self.b_beta)
        alpha, bta = np.exp(la), np.exp(lb)
        mean = alpha / (alpha + bta)
        if estimator != "mode":
            return mean
        interior = (alpha > 1.0) & (bta > 1.0)
        mode = np.where(interior, (alpha - 1.0) / np.maximum(alpha + bta - 2.0, 1e-300), mean)
        return mode


@dataclass(frozen=True)
class LinearPointModel:
    vocab: Vocabulary
    w: np.ndarray
    b: float
    loss: PointLoss
    nblr: NblrWeights | None = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (self.vocab.size,):
            raise ShapeError(f"w must have vocabulary length {self.vocab.size}")
        if not np.all(np.isfinite(w)):
            raise ShapeError("w contains non-finite values")
        object.__setattr__(self, "w", w)
        if self.loss not in ("mae", "mse"):
            raise ConfigError(f"loss must be 'mae' or 'mse', got {self.loss!r}")

    @property
    def kind(self) -> str:
        if self.nblr is not None:
            return "nblr"
        return f"linear-point-{self.loss}"

    def featurize(self, text: str) -> FeatureVector:
        return document_vector(text, self.vocab, truncation=None, nblr=self.nblr)

    def predict(self, fv: FeatureVector) -> float:
        if fv.nnz and int(fv.indices[-1]) >= self.vocab.size:
            raise ShapeError("feature index outside model vocabulary")
        raw = float(self.w[fv.indices] @ fv.values) + self.b
        clipped, _ = _clamp_logits(raw)
        return float(_sigmoid(clipped))

    def predict_score(self, fv: FeatureVector, estimator: Estimator = "mean") -> float:
        # point models have a single output; the estimator choice is moot
        return self.predict(fv)

    def score_text(self, text: str, estimator: Estimator = "mean") -> float:
        return self.predict(self.featurize(text))

    def batch_scores(self, texts: Sequence[str], estimator: Estimator = "mean") -> np.ndarray:
        X = to_csr([self.featurize(t) for t in texts], self.vocab.size)
        z, _ = _clamp_logits(X @ self.w + self.b)
        return _sigmoid(z)


@dataclass(frozen=True)
class EmbeddingBetaModel:
    token_index: dict[str, int]  # UNK_TOKEN maps to row 0
    embeddings: np.ndarray  # (rows, dim)
    gate: np.ndarray  # (dim,), used only by attention pooling
    w_alpha: np.ndarray
    b_alpha: float
    w_beta: np.ndarray
    b_beta: float
    truncation: TruncationConfig = field(default_factory=TruncationConfig)
    pooling: Pooling = "attention"

    kind = "embedding-beta"

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] != len(self.token_index):
            raise ShapeError("embedding table must have one row per indexed token")
        if not np.all(np.isfinite(emb)):
            raise ShapeError("embedding table contains non-finite values")
        if self.token_index.get(UNK_TOKEN) != 0:
            raise ConfigError(f"token index must map {UNK_TOKEN!r} to row 0")
        dim = emb.shape[1]
        for name in ("gate", "w_alpha", "w_beta"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (dim,):
                raise ShapeError(f"{name} must have embedding dimension {dim}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "embeddings", emb)
        if self.pooling not in ("attention", "mean"):
            raise ConfigError(f"unknown pooling {self.pooling!r}")

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    def rows_for(self, tokens: TokenSequence) -> np.ndarray:
        return np.array(
            [self.token_index.get(t.text, 0) for t in tokens.tokens], dtype=np.int64
        )

    def featurize(self, text: str) -> np.ndarray:
        return self.rows_for(truncate(tokenize(text), self.truncation))

    def pool(self, vectors: np.ndarray) -> tuple[np.ndarray, dict]:
        """Pooled vector plus the forward cache the backward pass reuses."""
        length = vectors.shape[0]
        if length == 0:
            return np.zeros(self.dim), {"length": 0}
        if self.pooling == "mean":
            return vectors.mean(axis=0), {"length": length}
        z = vectors @ self.gate
        g = np.logaddexp(0.0, z)  # softplus, overflow-safe
        total = float(g.sum())
        with np.errstate(invalid="ignore"):  # diverged params caught downstream
            weights = g / total
        pooled = weights @ vectors
        return pooled, {"length": length, "z": z, "weights": weights, "total": total}

    def pool_backward(
        self, vectors: np.ndarray, cache: dict, d_pooled: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """(gradient on each input vector, gradient on the gate)."""
        if cache["length"] == 0:
            return np.zeros((0, self.dim)), np.zeros(self.dim)
        if self.pooling == "mean":
            d_vec = np.repeat(d_pooled[None, :] / cache["length"], cache["length"], axis=0)
            return d_vec, np.zeros(self.dim)
        weights, z, total = cache["weights"], cache["z"], cache["total"]
        q = vectors @ d_pooled
        dg = (q - float(weights @ q)) / total
        dz = dg * _sigmoid(z)  # softplus' = logistic
        d_vec = weights[:, None] * d_pooled[None, :] + dz[:, None] * self.gate[None, :]
        d_gate = vectors.T @ dz
        return d_vec, d_gate

    def params_from_rows(self, rows: np.ndarray) -> beta_core.BetaParams:
        pooled, _ = self.pool(self.embeddings[rows])
        (la, _), (lb, _) = (
            _clamp_logits(float(self.w_alpha @ pooled) + self.b_alpha),
            _clamp_logits(float(self.w_beta @ pooled) + self.b_beta),
        )
        return beta_core.BetaParams(float(np.exp(la)), float(np.exp(lb)))

    def predict_params(self, tokens: TokenSequence) -> beta_core.BetaParams:
        return self.params_from_rows(self.rows_for(tokens))

    def predict_score(self, tokens: TokenSequence, estimator: Estimator = "mean") -> float:
        params = self.predict_params(tokens)
        if estimator == "mode":
            value, _ = beta_core.mode_estimate(params)
            return value
        return beta_core.mean_estimate(params)

    def score_text(self, text: str, estimator: Estimator = "mean") -> float:
        params = self.params_from_rows(self.featurize(text))
        if estimator == "mode":
            value, _ = beta_core.mode_estimate(params)
            return value
        return beta_core.mean_estimate(params)

    def batch_scores(self, texts: Sequence[str], estimator: Estimator = "mean") -> np.ndarray:
        return np.array([self.score_text(t, estimator) for t in texts])


Model = LinearBetaModel | LinearPointModel | EmbeddingBetaModel


def init_linear_beta(vocab: Vocabulary, nblr: NblrWeights | None = None) -> LinearBetaModel:
    zeros = np.zeros(vocab.size)
    return LinearBetaModel(vocab, zeros, 0.0, zeros.copy(), 0.0, nblr=nblr)


def init_linear_point(
    vocab: Vocabulary, loss: PointLoss, nblr: NblrWeights | None = None
) -> LinearPointModel:
    return LinearPointModel(vocab, np.zeros(vocab.size), 0.0, loss, nblr=nblr)


def build_token_index(corpus: Sequence[TokenSequence], min_df: int = 2) -> dict[str, int]:
    """Unigram rows for the embedding table, frequent terms first, UNK at 0."""
    df: dict[str, int] = {}
    for seq in corpus:
        for term in set(seq.texts()):
            df[term] = df.get(term, 0) + 1
    kept = sorted(
        ((term, count) for term, count in df.items() if count >= min_df),
        key=lambda item: (-item[1], item[0]),
    )
    index = {UNK_TOKEN: 0}
    for row, (term, _) in enumerate(kept, start=1):
        index[term] = row
    return index


def init_embedding_beta(
    token_index: dict[str, int],
    dim: int = DEFAULT_EMBEDDING_DIM,
    seed: int = 0,
    truncation: TruncationConfig | None = None,
    pooling: Pooling = "attention",
) -> EmbeddingBetaModel:
    if dim < 1:
        raise ConfigError(f"embedding dimension must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    rows = len(token_index)
    return EmbeddingBetaModel(
        token_index=token_index,
        embeddings=rng.normal(0.0, 0.1, size=(rows, dim)),
        gate=rng.normal(0.0, 0.5, size=dim),
        w_alpha=rng.normal(0.0, 0.1, size=dim),
        b_alpha=0.0,
        w_beta=rng.normal(0.0, 0.1, size=dim),
        b_beta=0.0,
        truncation=truncation or TruncationConfig(),
        pooling=pooling,
    )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = DEFAULT_LINEAR_LR
    batch_size: int = 16
    epochs: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("Adam moment decays must lie in [0, 1)")
        if self.eps <= 0:
            raise ConfigError("eps must be > 0")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be >= 1 when set")


@dataclass(frozen=True)
class TrainReport:
    train_loss: tuple[float, ...]
    val_loss: tuple[float, ...]  # NaN entries when there is no validation split
    best_epoch: int
    epoch_seconds: tuple[float, ...] = field(compare=False, default=())

    def __post_init__(self):
        n = len(self.train_loss)
        if len(self.val_loss) != n or (self.epoch_seconds and len(self.epoch_seconds) != n):
            raise ShapeError("per-epoch series must have equal lengths")
        if not 0 <= self.best_epoch < n:
            raise ShapeError(f"best_epoch {self.best_epoch} outside 0..{n - 1}")

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    def to_records(self) -> list[dict]:
        return [
            {
                "epoch": i,
                "train_loss": tr,
                "val_loss": None if math.isnan(va) else va,
                "seconds": self.epoch_seconds[i] if self.epoch_seconds else None,
                "best": i == self.best_epoch,
            }
            for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss))
        ]


@dataclass(frozen=True)
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int

    @classmethod
    def fresh(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0,
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One functional Adam update: bias-corrected moments, new params/state."""
    if set(grads) != set(params):
        raise ShapeError(f"gradient keys {sorted(grads)} != parameter keys {sorted(params)}")
    t = state.t + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for key, p in params.items():
        g = np.asarray(grads[key], dtype=np.float64)
        if g.shape != np.shape(p):
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {np.shape(p)} for {key}")
        m = config.beta1 * state.m[key] + (1.0 - config.beta1) * g
        v = config.beta2 * state.v[key] + (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1**t)
        v_hat = v / (1.0 - config.beta2**t)
        new_params[key] = p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        new_m[key] = m
        new_v[key] = v
    return new_params, AdamState(m=new_m, v=new_v, t=t)


def _snapshot(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.array(v, copy=True) for k, v in params.items()}


def _optimize(
    params: dict[str, np.ndarray],
    n_train: int,
    config: TrainConfig,
    batch_fn: Callable[[dict, np.ndarray], tuple[float, dict]],
    loss_fn: Callable[[dict, str], float],
    has_validation: bool,
    rebuild: Callable[[dict], Model],
) -> tuple[dict[str, np.ndarray], TrainReport]:
    rng = np.random.default_rng(config.seed)
    state = AdamState.fresh(params)
    train_losses: list[float] = []
    val_losses: list[float] = []
    seconds: list[float] = []
    best_loss = math.inf
    best_epoch = 0
    best_params = _snapshot(params)
    last_finite = _snapshot(params)
    since_best = 0

    for epoch in range(config.epochs):
        started = time.perf_counter()
        order = rng.permutation(n_train)
        for lo in range(0, n_train, config.batch_size):
            batch = order[lo : lo + config.batch_size]
            batch_loss, grads = batch_fn(params, batch)
            if not math.isfinite(batch_loss):
                raise TrainingDiverged(
                    f"non-finite batch loss at epoch {epoch}", checkpoint=rebuild(last_finite)
                )
            params, state = adam_step(params, grads, state, config)

        train_loss = loss_fn(params, "train")
        val_loss = loss_fn(params, "val") if has_validation else math.nan
        if not math.isfinite(train_loss) or (has_validation and not math.isfinite(val_loss)):
            raise TrainingDiverged(
                f"non-finite epoch loss at epoch {epoch}", checkpoint=rebuild(last_finite)
            )
        last_finite = _snapshot(params)
        train_losses.append(train_loss)
        val_losses.append(val_loss)
        seconds.append(time.perf_counter() - started)

        monitored = val_loss if has_validation else train_loss
        if monitored < best_loss:
            best_loss = monitored
            best_epoch = epoch
            best_params = _snapshot(params)
            since_best = 0
        else:
            since_best += 1
            if config.patience is not None and since_best >= config.patience:
                break

    report = TrainReport(
        train_loss=tuple(train_losses),
        val_loss=tuple(val_losses),
        best_epoch=best_epoch,
        epoch_seconds=tuple(seconds),
    )
    return best_params, report


def _beta_forward_backward(y, la_raw, lb_raw):
    """Per-example NLL and gradients on the raw head logits.

    Non-finite logits (diverged parameters) surface as an infinite loss so
    the training loop can stop with a checkpoint instead of crashing.
    """
    la_arr, lb_arr = np.asarray(la_raw, dtype=np.float64), np.asarray(lb_raw, dtype=np.float64)
    if not (np.all(np.isfinite(la_arr)) and np.all(np.isfinite(lb_arr))):
        zeros = np.zeros_like(la_arr)
        return math.inf, zeros, zeros.copy()
    la, mask_a = _clamp_logits(la_raw)
    lb, mask_b = _clamp_logits(lb_raw)
    alpha, bta = np.exp(la), np.exp(lb)
    loss = float(np.mean(-beta_core.log_pdf(y, alpha, bta)))
    da, db = beta_core.grad_nll_logparams(y, alpha, bta)
    n = np.size(y)
    da = np.where(mask_a, da, 0.0) / n
    db = np.where(mask_b, db, 0.0) / n
    return loss, da, db


def _train_linear_beta(model: LinearBetaModel, split: CorpusSplit):
    X = {
        part: to_csr([model.featurize(ex.text) for ex in getattr(split, part)], model.vocab.size)
        for part in ("train", "validation")
    }
    y = {
        part: np.array([ex.label for ex in getattr(split, part)])
        for part in ("train", "validation")
    }
    params = {
        "w_alpha": model.w_alpha.copy(),
        "b_alpha": np.float64(model.b_alpha),
        "w_beta": model.w_beta.copy(),
        "b_beta": np.float64(model.b_beta),
    }

    def rebuild(p: dict) -> LinearBetaModel:
        return replace(
            model,
            w_alpha=p["w_alpha"],
            b_alpha=float(p["b_alpha"]),
            w_beta=p["w_beta"],
            b_beta=float(p["b_beta"]),
        )

    def forward(p: dict, X_part, y_part):
        la_raw = X_part @ p["w_alpha"] + p["b_alpha"]
        lb_raw = X_part @ p["w_beta"] + p["b_beta"]
        return _beta_forward_backward(y_part, la_raw, lb_raw)

    def batch_fn(p: dict, idx: np.ndarray):
        Xb, yb = X["train"][idx], y["train"][idx]
        loss, da, db = forward(p, Xb, yb)
        grads = {
            "w_alpha": Xb.T @ da,
            "b_alpha": np.float64(da.sum()),
            "w_beta": Xb.T @ db,
            "b_beta": np.float64(db.sum()),
        }
        return loss, grads

    def loss_fn(p: dict, part: str):
        key = "train" if part == "train" else "validation"
        loss, _, _ = forward(p, X[key], y[key])
        return loss

    return params, batch_fn, loss_fn, rebuild


def _train_linear_point(model: LinearPointModel, split: CorpusSplit):
    X = {
        part: to_csr([model.featurize(ex.text) for ex in getattr(split, part)], model.vocab.size)
        for part in ("train", "validation")
    }
    y = {
        part: np.array([ex.label for ex in getattr(split, part)])
        for part in ("train", "validation")
    }
    params = {"w": model.w.copy(), "b": np.float64(model.b)}

    def rebuild(p: dict) -> LinearPointModel:
        return replace(model, w=p["w"], b=float(p["b"]))

    def forward(p: dict, X_part, y_part):
        raw = X_part @ p["w"] + p["b"]
        z, mask = _clamp_logits(raw)
        pred = _sigmoid(z)
        n = y_part.size
        if model.loss == "mse":
            loss = float(np.mean((pred - y_part) ** 2))
            dz = 2.0 * (pred - y_part) * pred * (1.0 - pred)
        else:
            loss = float(np.mean(np.abs(pred - y_part)))
            # subgradient of |u| at 0 taken as 0
            dz = np.sign(pred - y_part) * pred * (1.0 - pred)
        dz = np.where(mask, dz, 0.0) / n
        return loss, dz

    def batch_fn(p: dict, idx: np.ndarray):
        Xb, yb = X["train"][idx], y["train"][idx]
        loss, dz = forward(p, Xb, yb)
        return loss, {"w": Xb.T @ dz, "b": np.float64(dz.sum())}

    def loss_fn(p: dict, part: str):
        key = "train" if part == "train" else "validation"
        loss, _ = forward(p, X[key], y[key])
        return loss

    return params, batch_fn, loss_fn, rebuild


def _train_embedding_beta(model: EmbeddingBetaModel, split: CorpusSplit):
    rows = {
        part: [model.featurize(ex.text) for ex in getattr(split, part)]
        for part in ("train", "validation")
    }
    y = {
        part: np.array([ex.label for ex in getattr(split, part)])
        for part in ("train", "validation")
    }
    params = {
        "embeddings": model.embeddings.copy(),
        "gate": model.gate.copy(),
        "w_alpha": model.w_alpha.copy(),
        "b_alpha": np.float64(model.b_alpha),
        "w_beta": model.w_beta.copy(),
        "b_beta": np.float64(model.b_beta),
    }

    def rebuild(p: dict) -> EmbeddingBetaModel:
        return replace(
            model,
            embeddings=p["embeddings"],
            gate=p["gate"],
            w_alpha=p["w_alpha"],
            b_alpha=float(p["b_alpha"]),
            w_beta=p["w_beta"],
            b_beta=float(p["b_beta"]),
        )

    def example_loss(current: EmbeddingBetaModel, idx_rows: np.ndarray, label: float) -> float:
        pooled, _ = current.pool(current.embeddings[idx_rows])
        la_raw = float(current.w_alpha @ pooled) + current.b_alpha
        lb_raw = float(current.w_beta @ pooled) + current.b_beta
        loss, _, _ = _beta_forward_backward(np.float64(label), la_raw, lb_raw)
        return loss

    def batch_fn(p: dict, idx: np.ndarray):
        current = rebuild(p)
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        total = 0.0
        n = idx.size
        for i in idx:
            idx_rows = rows["train"][int(i)]
            label = y["train"][int(i)]
            vectors = current.embeddings[idx_rows]
            pooled, cache = current.pool(vectors)
            la_raw = float(current.w_alpha @ pooled) + float(p["b_alpha"])
            lb_raw = float(current.w_beta @ pooled) + float(p["b_beta"])
            loss, da, db = _beta_forward_backward(np.float64(label), la_raw, lb_raw)
            total += loss
            da, db = float(da), float(db)
            grads["w_alpha"] += da * pooled
            grads["b_alpha"] += np.float64(da)
            grads["w_beta"] += db * pooled
            grads["b_beta"] += np.float64(db)
            d_pooled = da * current.w_alpha + db * current.w_beta
            d_vec, d_gate = current.pool_backward(vectors, cache, d_pooled)
            grads["gate"] += d_gate
            if idx_rows.size:
                np.add.at(grads["embeddings"], idx_rows, d_vec)
        for key in grads:
            grads[key] = grads[key] / n
        grads["b_alpha"] = np.float64(grads["b_alpha"])
        grads["b_beta"] = np.float64(grads["b_beta"])
        return total / n, grads

    def loss_fn(p: dict, part: str):
        key = "train" if part == "train" else "validation"
        current = rebuild(p)
        losses = [
            example_loss(current, idx_rows, label)
            for idx_rows, label in zip(rows[key], y[key])
        ]
        return float(np.mean(losses))

    return params, batch_fn, loss_fn, rebuild


def training_functions(model: Model, split: CorpusSplit):
    """Featurize the split once and return the training closures.

    Returns (params, batch_fn, loss_fn, rebuild): batch_fn(params, indices)
    gives the batch loss and exact analytic gradients; loss_fn(params, part)
    the full-split loss; rebuild(params) a model carrying those parameters.
    """
    if isinstance(model, LinearBetaModel):
        return _train_linear_beta(model, split)
    if isinstance(model, LinearPointModel):
        return _train_linear_point(model, split)
    if isinstance(model, EmbeddingBetaModel):
        return _train_embedding_beta(model, split)
    raise ConfigError(f"cannot train {type(model).__name__}")


def train(model: Model, split: CorpusSplit, config: TrainConfig) -> tuple[Model, TrainReport]:
    """Mini-batch Adam over the train split, best epoch kept by validation loss.

    With an empty validation split the train loss is monitored instead.
    Raises TrainingDiverged (carrying the last finite checkpoint) when any
    loss goes non-finite.
    """
    if not split.train:
        raise DegenerateInput("empty training split")
    params, batch_fn, loss_fn, rebuild = training_functions(model, split)
    has_validation = len(split.validation) > 0
    best_params, report = _optimize(
        params, len(split.train), config, batch_fn, loss_fn, has_validation, rebuild
    )
    return rebuild(best_params), report


def evaluate(
    model: Model, examples: Sequence[LabeledExample], estimator: Estimator = "mean"
) -> MetricsReport:
    """Score every example and compare against labels."""
    if not examples:
        raise DegenerateInput("cannot evaluate on an empty example list")
    labels = np.array([ex.label for ex in examples])
    preds = model.batch_scores([ex.text for ex in examples], estimator)
    if len(examples) == 1:
        # rank correlations are undefined on a single point
        kendall = spearman = RankCorrelation(0.0, True)
    else:
        kendall = kendall_tau_b(preds, labels)
        spearman = spearman_rho(preds, labels)
    return MetricsReport(
        kendall=kendall.value,
        spearman=spearman.value,
        mae=mae_metric(preds, labels),
        rmse=rmse_metric(preds, labels),
        n=len(examples),
        kendall_degenerate=kendall.degenerate,
        spearman_degenerate=spearman.degenerate,
    )


def score_payload(model: Model, text: str, curve_points: int = 0) -> dict:
    """JSON-ready score record, the shared shape for the CLI and the service.

    Beta models report the full predictive distribution (mean equals
    alpha/(alpha+beta) exactly); point models report their single estimate
    with null alpha/beta, and a null curve when one was requested.
    """
    if isinstance(model, LinearPointModel):
        value = model.predict(model.featurize(text))
        payload: dict = {
            "alpha": None,
            "beta": None,
            "mean": value,
            "mode": value,
            "mode_fallback": False,
        }
        if curve_points:
            payload["curve"] = None
        return payload
    if isinstance(model, LinearBetaModel):
        params = model.predict_params(model.featurize(text))
    elif isinstance(model, EmbeddingBetaModel):
        params = model.params_from_rows(model.featurize(text))
    else:
        raise ConfigError(f"cannot score objects of type {type(model).__name__}")
    mode, fell_back = beta_core.mode_estimate(params)
    payload = {
        "alpha": params.alpha,
        "beta": params.beta,
        "mean": beta_core.mean_estimate(params),
        "mode": mode,
        "mode_fallback": fell_back,
    }
    if curve_points:
        curve = beta_core.pdf_curve(params, curve_points)
        payload["curve"] = [{"y": y, "density": d} for y, d in curve.points()]
    return payload
