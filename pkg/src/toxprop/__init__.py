"""toxprop: article toxicity-propensity modeling.

Learns a Beta distribution over the toxicity of the comment section an
article will attract, from the article text alone, and explains the
prediction at token level.
"""

from .artifact import ModelArtifact
from .beta import BetaParams, PdfCurve, log_pdf, mean_estimate, mode_estimate, nll, pdf_curve
from .data import (
    AnnotationRecord,
    CorpusSplit,
    LabeledExample,
    RawArticle,
    build_corpus,
    bucket_sample,
    fingerprint,
    load_annotations,
    load_articles,
    load_examples,
    split_by_date,
    write_examples,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateInput,
    DomainError,
    ParseError,
    ShapeError,
    ToxpropError,
    TrainingDiverged,
)
# The attribution entrypoint is re-exported as `explain_text` so the package
# attribute `toxprop.explain` keeps naming the submodule, not the function.
from .explain import ExplainReport, explain as explain_text, html_heatmap
from .features import Vocabulary, build_vocab, document_vector, fit_nblr, tokenize
from .metrics import MetricsReport, cohens_kappa, kendall_tau_b, pr_curve, spearman_rho
from .models import (
    EmbeddingBetaModel,
    LinearBetaModel,
    LinearPointModel,
    TrainConfig,
    TrainReport,
    evaluate,
    init_embedding_beta,
    init_linear_beta,
    init_linear_point,
    score_payload,
    train,
)
from .synthetic import SyntheticSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "BetaParams",
    "ConfigError",
    "CorpusSplit",
    "DataError",
    "DegenerateInput",
    "DomainError",
    "EmbeddingBetaModel",
    "ExplainReport",
    "LabeledExample",
    "LinearBetaModel",
    "LinearPointModel",
    "MetricsReport",
    "ModelArtifact",
    "ParseError",
    "PdfCurve",
    "RawArticle",
    "ShapeError",
    "SyntheticSpec",
    "ToxpropError",
    "TrainConfig",
    "TrainReport",
    "Vocabulary",
    "build_corpus",
    "build_vocab",
    "bucket_sample",
    "cohens_kappa",
    "document_vector",
    "evaluate",
    "explain_text",
    "fingerprint",
    "fit_nblr",
    "generate",
    "html_heatmap",
    "init_embedding_beta",
    "init_linear_beta",
    "init_linear_point",
    "kendall_tau_b",
    "load_annotations",
    "load_articles",
    "load_examples",
    "log_pdf",
    "mean_estimate",
    "mode_estimate",
    "nll",
    "pdf_curve",
    "pr_curve",
    "score_payload",
    "spearman_rho",
    "split_by_date",
    "tokenize",
    "train",
    "write_examples",
    "__version__",
]
