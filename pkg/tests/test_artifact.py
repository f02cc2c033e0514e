import struct

import numpy as np
import pytest

from toxprop.artifact import FORMAT_VERSION, KINDS, MAGIC, ModelArtifact
from toxprop.data import LabeledExample
from toxprop.errors import ParseError
from toxprop.features import (
    NblrWeights,
    TruncationConfig,
    Vocabulary,
    build_vocab,
    fit_nblr,
    tfidf,
    tokenize,
)
from toxprop.models import (
    UNK_TOKEN,
    EmbeddingBetaModel,
    LinearBetaModel,
    LinearPointModel,
    init_linear_beta,
    train,
    TrainConfig,
)
from toxprop.synthetic import SyntheticSpec, generate

META = {"seed": 7, "data_fingerprint": "abc123", "epochs": 5}


def small_vocab():
    texts = ["red green blue", "green blue yellow", "blue cyan red", "naïve über red"]
    return build_vocab([tokenize(t) for t in texts], min_df=1)


def beta_model(nblr=None):
    vocab = small_vocab()
    rng = np.random.default_rng(0)
    return LinearBetaModel(
        vocab,
        rng.normal(size=vocab.size),
        0.25,
        rng.normal(size=vocab.size),
        -0.75,
        nblr=nblr,
    )


def point_model(loss="mse", nblr=None):
    vocab = small_vocab()
    rng = np.random.default_rng(1)
    return LinearPointModel(vocab, rng.normal(size=vocab.size), 0.5, loss, nblr=nblr)


def nblr_weights(vocab):
    feats = [tfidf(tokenize(t), vocab) for t in ["red green", "blue cyan", "green yellow"]]
    return fit_nblr(feats, [0.1, 0.5, 0.9], vocab.size)


def embedding_model(pooling="attention"):
    rng = np.random.default_rng(2)
    index = {UNK_TOKEN: 0, "red": 1, "green": 2, "blue": 3}
    return EmbeddingBetaModel(
        token_index=index,
        embeddings=rng.normal(size=(4, 3)),
        gate=rng.normal(size=3),
        w_alpha=rng.normal(size=3),
        b_alpha=0.9,
        w_beta=rng.normal(size=3),
        b_beta=0.1,
        truncation=TruncationConfig(max_len=6, head=2, tail=4),
        pooling=pooling,
    )


def all_models():
    vocab = small_vocab()
    return [
        ("linear-beta", beta_model()),
        ("linear-beta", beta_model(nblr=nblr_weights(vocab))),
        ("linear-point-mse", point_model("mse")),
        ("linear-point-mae", point_model("mae")),
        ("nblr", point_model("mse", nblr=nblr_weights(vocab))),
        ("embedding-beta", embedding_model()),
        ("embedding-beta", embedding_model(pooling="mean")),
    ]


class TestByteRoundTrip:
    @pytest.mark.parametrize("kind,model", all_models(), ids=lambda v: v if isinstance(v, str) else "")
    def test_save_load_save_identical(self, kind, model):
        artifact = ModelArtifact(model=model, metadata=META)
        assert artifact.kind == kind
        blob = artifact.to_bytes()
        reloaded = ModelArtifact.from_bytes(blob)
        assert reloaded.kind == kind
        assert reloaded.metadata == META
        assert reloaded.to_bytes() == blob

    def test_predictions_survive_round_trip(self):
        model = beta_model(nblr=nblr_weights(small_vocab()))
        loaded = ModelArtifact.from_bytes(
            ModelArtifact(model=model, metadata=META).to_bytes()
        ).model
        for text in ["red green blue", "cyan yellow", "naïve über red", ""]:
            assert loaded.score_text(text) == model.score_text(text)

    def test_embedding_predictions_survive_round_trip(self):
        model = embedding_model()
        loaded = ModelArtifact.from_bytes(
            ModelArtifact(model=model, metadata=META).to_bytes()
        ).model
        assert loaded.pooling == "attention"
        assert loaded.truncation == model.truncation
        for text in ["red green blue", "blue blue red green blue red red", "unseen words"]:
            assert loaded.score_text(text) == model.score_text(text)

    def test_trained_model_round_trip(self, tmp_path):
        corpus = generate(
            SyntheticSpec(n_docs=60, vocab_size=40, n_drivers=4, n_dispersion=1, seed=5)
        )
        split = corpus.split()
        vocab = build_vocab([tokenize(e.text) for e in split.train], min_df=2)
        model, report = train(init_linear_beta(vocab), split, TrainConfig(epochs=2, seed=0))
        artifact = ModelArtifact(
            model=model,
            metadata={"seed": 0, "data_fingerprint": "d" * 8, "epochs": report.epochs_run},
        )
        path = tmp_path / "model.tox"
        artifact.save(path)
        loaded = ModelArtifact.load(path)
        assert loaded.to_bytes() == artifact.to_bytes()
        text = split.test[0].text
        assert loaded.model.score_text(text) == model.score_text(text)

    def test_empty_vocabulary_round_trips(self):
        vocab = Vocabulary.from_entries([], n_docs=0)
        model = LinearPointModel(vocab, np.zeros(0), 0.0, "mae")
        blob = ModelArtifact(model=model, metadata=META).to_bytes()
        assert ModelArtifact.from_bytes(blob).to_bytes() == blob

    def test_metadata_insertion_order_irrelevant(self):
        a = ModelArtifact(model=point_model(), metadata={"seed": 1, "epochs": 2})
        b = ModelArtifact(
            model=point_model(), metadata={"epochs": 2, "data_fingerprint": None, "seed": 1}
        )
        assert a.to_bytes() == b.to_bytes()

    def test_exact_float_bit_patterns(self):
        vocab = small_vocab()
        w = np.zeros(vocab.size)
        w[0] = 5e-324  # smallest subnormal
        w[1] = -0.0
        w[2] = 0.1 + 0.2  # not exactly 0.3
        model = LinearPointModel(vocab, w, 1e-300, "mse")
        loaded = ModelArtifact.from_bytes(
            ModelArtifact(model=model, metadata=META).to_bytes()
        ).model
        assert loaded.w.tobytes() == w.tobytes()
        assert loaded.b == 1e-300


class TestValidation:
    def blob(self):
        return ModelArtifact(model=point_model(), metadata=META).to_bytes()

    def test_kinds_registry(self):
        assert set(KINDS) == {
            "linear-beta",
            "linear-point-mae",
            "linear-point-mse",
            "nblr",
            "embedding-beta",
        }

    def test_bad_magic(self):
        blob = b"NOTMODEL\n" + self.blob()[len(MAGIC) :]
        with pytest.raises(ParseError, match="magic"):
            ModelArtifact.from_bytes(blob)

    def test_truncated_everywhere(self):
        blob = self.blob()
        for cut in [0, 4, len(MAGIC) + 3, len(blob) // 2, len(blob) - 1]:
            with pytest.raises(ParseError):
                ModelArtifact.from_bytes(blob[:cut])

    def test_trailing_bytes_rejected(self):
        with pytest.raises(ParseError, match="trailing"):
            ModelArtifact.from_bytes(self.blob() + b"x")

    def test_unknown_metadata_field_rejected(self):
        with pytest.raises(ParseError, match="metadata"):
            ModelArtifact(model=point_model(), metadata={"seed": 1, "timestamp": "now"})

    def test_bad_version_rejected(self):
        with pytest.raises(ParseError, match="version"):
            ModelArtifact(model=point_model(), metadata=META, version=99)
        blob = self.blob()
        header_len = struct.unpack("<Q", blob[len(MAGIC) : len(MAGIC) + 8])[0]
        start = len(MAGIC) + 8
        header = blob[start : start + header_len].replace(b'"version":1', b'"version":9')
        with pytest.raises(ParseError, match="version"):
            ModelArtifact.from_bytes(blob[:start] + header + blob[start + header_len :])

    def test_malformed_header_json(self):
        payload = b"{not json"
        blob = MAGIC + struct.pack("<Q", len(payload)) + payload
        with pytest.raises(ParseError, match="header"):
            ModelArtifact.from_bytes(blob)

    def test_inconsistent_weight_length(self):
        blob = self.blob()
        # chop the final section (w) down to a non-multiple of 8 bytes
        with pytest.raises(ParseError):
            ModelArtifact.from_bytes(blob[:-3])

    def test_vocab_size_mismatch(self):
        blob = self.blob()
        mutated = blob.replace(b'"vocab_size":', b'"vocab_size":1')  # prepends a digit
        with pytest.raises(ParseError):
            ModelArtifact.from_bytes(mutated)

    def test_unreadable_path(self, tmp_path):
        with pytest.raises(ParseError, match="cannot read"):
            ModelArtifact.load(tmp_path / "missing.tox")


class TestMetadataNormalization:
    def test_missing_fields_become_none(self):
        artifact = ModelArtifact(model=point_model(), metadata={"seed": 3})
        assert artifact.metadata == {"seed": 3, "data_fingerprint": None, "epochs": None}

    def test_loaded_metadata_matches_saved(self):
        artifact = ModelArtifact(model=point_model(), metadata=META)
        assert ModelArtifact.from_bytes(artifact.to_bytes()).metadata == META
