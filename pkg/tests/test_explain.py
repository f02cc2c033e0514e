import dataclasses
import math

import numpy as np
import pytest

from toxprop.beta import mean_estimate, mode_estimate
from toxprop.errors import ConfigError, DegenerateInput
from toxprop.explain import (
    Attribution,
    attribute,
    attributed_tokens,
    auto_k,
    explain,
    gradient_wrt_embeddings,
    hit_rate,
    html_heatmap,
    top_k,
)
from toxprop.features import (
    TokenSequence,
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
)

WORDS = ["alpha", "bravo", "charly", "delta", "echo", "foxtrot", "golf", "hotel"]


def embedding_model(
    seed=0, dim=5, pooling="attention", scale=0.4, head_scale=0.5, b_alpha=0.7, b_beta=0.4
):
    rng = np.random.default_rng(seed)
    index = {UNK_TOKEN: 0}
    for w in WORDS:
        index[w] = len(index)
    return EmbeddingBetaModel(
        token_index=index,
        embeddings=rng.normal(0.0, scale, size=(len(index), dim)),
        gate=rng.normal(0.0, scale, size=dim),
        w_alpha=rng.normal(0.0, head_scale, size=dim),
        b_alpha=b_alpha,
        w_beta=rng.normal(0.0, head_scale, size=dim),
        b_beta=b_beta,
        pooling=pooling,
    )


def small_vocab():
    texts = ["alpha bravo charly", "alpha bravo delta", "bravo charly echo"]
    return build_vocab([tokenize(t) for t in texts], min_df=1)


def linear_beta(vocab, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    return LinearBetaModel(
        vocab,
        rng.normal(0.0, scale, size=vocab.size),
        0.6,
        rng.normal(0.0, scale, size=vocab.size),
        0.3,
    )


def linear_point(vocab, seed=0, loss="mse", nblr=None):
    rng = np.random.default_rng(seed)
    return LinearPointModel(vocab, rng.normal(0.0, 0.5, size=vocab.size), 0.1, loss, nblr=nblr)


def objective_value(model, seq, objective):
    params = model.params_from_rows(model.rows_for(seq))
    if objective == "mode":
        value, _ = mode_estimate(params)
        return value
    return mean_estimate(params)


class TestGradientFiniteDifference:
    @pytest.mark.parametrize("pooling", ["attention", "mean"])
    @pytest.mark.parametrize("objective", ["mean", "mode"])
    def test_matches_central_differences(self, pooling, objective):
        # b_alpha/b_beta chosen so alpha, beta > 1: the mode path is exercised
        model = embedding_model(seed=3, pooling=pooling)
        tokens = tokenize("alpha bravo charly delta echo")
        result = gradient_wrt_embeddings(model, tokens, objective)
        assert result.objective == objective and not result.mode_fell_back
        rows = model.rows_for(result.tokens)
        assert len(set(rows.tolist())) == len(rows)  # unique rows: per-position FD
        h = 1e-6
        fd = np.zeros_like(result.gradients)
        for l, row in enumerate(rows):
            for c in range(model.dim):
                up = model.embeddings.copy()
                up[row, c] += h
                down = model.embeddings.copy()
                down[row, c] -= h
                f_up = objective_value(
                    dataclasses.replace(model, embeddings=up), result.tokens, objective
                )
                f_down = objective_value(
                    dataclasses.replace(model, embeddings=down), result.tokens, objective
                )
                fd[l, c] = (f_up - f_down) / (2.0 * h)
        denom = max(np.max(np.abs(fd)), 1e-3)
        assert np.max(np.abs(fd - result.gradients)) / denom < 1e-5

    def test_repeated_token_gradients_sum_to_row_derivative(self):
        model = embedding_model(seed=5, pooling="attention")
        tokens = tokenize("alpha bravo alpha charly alpha")
        result = gradient_wrt_embeddings(model, tokens, "mean")
        row = model.token_index["alpha"]
        positions = [l for l, t in enumerate(result.tokens) if t.text == "alpha"]
        assert len(positions) == 3
        h = 1e-6
        for c in range(model.dim):
            up = model.embeddings.copy()
            up[row, c] += h
            down = model.embeddings.copy()
            down[row, c] -= h
            fd = (
                objective_value(dataclasses.replace(model, embeddings=up), result.tokens, "mean")
                - objective_value(
                    dataclasses.replace(model, embeddings=down), result.tokens, "mean"
                )
            ) / (2.0 * h)
            total = sum(result.gradients[l, c] for l in positions)
            assert abs(fd - total) <= 1e-5 * max(abs(fd), 1e-3)

    def test_constant_model_zero_gradients(self):
        model = embedding_model(seed=1)
        model = dataclasses.replace(
            model, w_alpha=np.zeros(model.dim), w_beta=np.zeros(model.dim)
        )
        result = gradient_wrt_embeddings(model, tokenize("alpha bravo charly"), "mean")
        assert np.all(result.gradients == 0.0)

    def test_mean_pooling_duplicate_positions_equal(self):
        model = embedding_model(seed=2, pooling="mean")
        result = gradient_wrt_embeddings(model, tokenize("alpha bravo alpha"), "mean")
        np.testing.assert_array_equal(result.gradients[0], result.gradients[2])

    def test_mode_fallback_flag_and_values(self):
        model = embedding_model(seed=4, b_alpha=-2.0)  # alpha < 1 for small weights
        tokens = tokenize("alpha bravo charly")
        mode_result = gradient_wrt_embeddings(model, tokens, "mode")
        mean_result = gradient_wrt_embeddings(model, tokens, "mean")
        assert mode_result.mode_fell_back
        assert mode_result.objective == "mean"
        np.testing.assert_array_equal(mode_result.gradients, mean_result.gradients)
        assert not mean_result.mode_fell_back

    def test_truncation_applied(self):
        model = dataclasses.replace(
            embedding_model(seed=6), truncation=TruncationConfig(max_len=4, head=2, tail=2)
        )
        text = " ".join(WORDS)  # 8 tokens
        result = gradient_wrt_embeddings(model, tokenize(text), "mean")
        assert [t.text for t in result.tokens] == ["alpha", "bravo", "golf", "hotel"]
        assert result.gradients.shape == (4, model.dim)

    def test_rejects_linear_model_and_bad_objective(self):
        vocab = small_vocab()
        with pytest.raises(ConfigError):
            gradient_wrt_embeddings(linear_beta(vocab), tokenize("alpha bravo"), "mean")
        with pytest.raises(ConfigError):
            gradient_wrt_embeddings(embedding_model(), tokenize("alpha"), "median")


class TestGradientSchemeIdentities:
    @pytest.mark.parametrize("pooling", ["attention", "mean"])
    def test_sm_dp_hb_identities_every_position(self, pooling):
        model = embedding_model(seed=7, pooling=pooling)
        tokens = tokenize("alpha bravo charly delta echo foxtrot")
        sm = attribute(model, tokens, "SM")
        dp = attribute(model, tokens, "DP")
        hb = attribute(model, tokens, "HB")
        grads = gradient_wrt_embeddings(model, tokens, "mean").gradients
        for l in range(len(tokens)):
            assert sm[l].value == sm[l].magnitude == pytest.approx(
                float(np.linalg.norm(grads[l])), rel=1e-12
            )
            assert hb[l].magnitude == sm[l].magnitude
            assert dp[l].magnitude == abs(dp[l].value)
            if dp[l].value != 0.0:
                assert math.copysign(1.0, hb[l].value) == math.copysign(1.0, dp[l].value)

    def test_positions_and_tokens_recorded(self):
        model = embedding_model(seed=8)
        atts = attribute(model, tokenize("bravo alpha bravo"), "SM")
        assert [a.position for a in atts] == [0, 1, 2]
        assert [a.token for a in atts] == ["bravo", "alpha", "bravo"]
        assert all(a.scheme == "SM" and a.objective == "mean" for a in atts)


class TestAblation:
    def test_value_is_full_minus_deleted(self):
        model = embedding_model(seed=9)
        tokens = tokenize("alpha bravo charly")
        atts = attribute(model, tokens, "AS")
        base = objective_value(model, tokens, "mean")
        for l, att in enumerate(atts):
            rest = TokenSequence(tokens.tokens[:l] + tokens.tokens[l + 1 :])
            assert att.value == pytest.approx(base - objective_value(model, rest, "mean"), abs=1e-15)

    def test_single_token_degenerate(self):
        with pytest.raises(DegenerateInput):
            attribute(embedding_model(), tokenize("alpha"), "AS")
        with pytest.raises(DegenerateInput):
            attribute(embedding_model(), tokenize(""), "AS")

    def test_linear_model_ablation_recomputes_features(self):
        vocab = small_vocab()
        model = linear_point(vocab, seed=3)
        tokens = tokenize("alpha bravo")
        atts = attribute(model, tokens, "AS")
        full = model.predict(tfidf(tokens, vocab))
        only_bravo = model.predict(tfidf(tokenize("bravo"), vocab))
        assert atts[0].value == pytest.approx(full - only_bravo, abs=1e-15)

    def test_dp_sign_agreement_with_centered_embeddings(self):
        # paired +v/-v embeddings pool to zero under the arithmetic mean, the
        # regime where ablation and the gradient dot product must agree in sign
        rng = np.random.default_rng(11)
        dim = 6
        index = {UNK_TOKEN: 0}
        vectors = [np.zeros(dim)]
        for i in range(4):
            v = rng.normal(0.0, 0.8, size=dim)
            index[f"plus{i}"] = len(index)
            vectors.append(v)
            index[f"minus{i}"] = len(index)
            vectors.append(-v)
        model = EmbeddingBetaModel(
            token_index=index,
            embeddings=np.array(vectors),
            gate=np.zeros(dim),
            w_alpha=rng.normal(0.0, 0.7, size=dim),
            b_alpha=0.8,
            w_beta=rng.normal(0.0, 0.7, size=dim),
            b_beta=0.5,
            pooling="mean",
        )
        tokens = tokenize("plus0 minus0 plus1 minus1 plus2 minus2 plus3 minus3")
        dp = attribute(model, tokens, "DP")
        ablation = attribute(model, tokens, "AS")
        assert all(abs(a.value) > 1e-9 for a in dp)
        for d, a in zip(dp, ablation):
            assert math.copysign(1.0, d.value) == math.copysign(1.0, a.value)

    def test_mode_objective_pinned_for_whole_document(self):
        model = embedding_model(seed=10, b_alpha=-2.0)
        atts = attribute(model, tokenize("alpha bravo charly"), "AS", objective="mode")
        assert all(a.objective == "mean" for a in atts)  # fallback re-tags

    def test_point_model_objective_moot(self):
        vocab = small_vocab()
        model = linear_point(vocab, seed=4)
        tokens = tokenize("alpha bravo charly")
        mean_atts = attribute(model, tokens, "AS", objective="mean")
        mode_atts = attribute(model, tokens, "AS", objective="mode")
        assert [a.value for a in mean_atts] == [a.value for a in mode_atts]


class TestRegressionCoefficients:
    def test_hand_computed_credit(self):
        vocab = small_vocab()
        w = np.zeros(vocab.size)
        w[vocab.index_of("alpha")] = 2.0
        w[vocab.index_of("bravo")] = -1.0
        w[vocab.index_of("alpha bravo")] = 0.5
        model = LinearPointModel(vocab, w, 0.0, "mse")
        tokens = tokenize("alpha bravo alpha")
        fv = tfidf(tokens, vocab)
        value = {int(i): float(v) for i, v in zip(fv.indices, fv.values)}
        c_alpha = 2.0 * value[vocab.index_of("alpha")]
        c_bravo = -1.0 * value[vocab.index_of("bravo")]
        c_bigram = 0.5 * value[vocab.index_of("alpha bravo")]
        atts = attribute(model, tokens, "RC")
        # position 0: alpha + "alpha bravo"; position 1: bravo + "alpha bravo"
        # ("bravo alpha" has weight 0, so covering it adds nothing); position
        # 2's trailing alpha is covered by the unigram only
        assert atts[0].value == pytest.approx(c_alpha + c_bigram, abs=1e-15)
        assert atts[1].value == pytest.approx(c_bravo + c_bigram, abs=1e-15)
        assert atts[2].value == pytest.approx(c_alpha, abs=1e-15)

    def test_beta_linear_uses_head_difference(self):
        vocab = small_vocab()
        model = linear_beta(vocab, seed=5)
        tokens = tokenize("alpha bravo")
        fv = tfidf(tokens, vocab)
        value = {int(i): float(v) for i, v in zip(fv.indices, fv.values)}
        coef = model.w_alpha - model.w_beta
        atts = attribute(model, tokens, "RC")
        covering = [
            [vocab.index_of("alpha"), vocab.index_of("alpha bravo")],
            [vocab.index_of("bravo"), vocab.index_of("alpha bravo")],
        ]
        for att, idxs in zip(atts, covering):
            expected = sum(coef[i] * value.get(i, 0.0) for i in idxs)
            assert att.value == pytest.approx(expected, abs=1e-15)

    def test_oov_tokens_get_zero(self):
        vocab = small_vocab()
        model = linear_point(vocab, seed=6)
        atts = attribute(model, tokenize("zulu yankee"), "RC")
        assert [a.value for a in atts] == [0.0, 0.0]

    def test_scaled_features_respect_dropped_columns(self):
        vocab = small_vocab()
        feats = [tfidf(tokenize(t), vocab) for t in ["alpha bravo", "charly delta"]]
        nblr = fit_nblr(feats, [0.2, 0.8], vocab.size)
        model = linear_point(vocab, seed=7, nblr=nblr)
        atts = attribute(model, tokenize("alpha bravo charly"), "RC")
        dead = [i for i, w in enumerate(nblr.weights) if w == 0.0]
        # any position covered only by dead columns must get exactly zero
        fv = model.featurize("alpha bravo charly")
        assert set(fv.indices.tolist()).isdisjoint(dead)

    def test_requires_linear_model(self):
        with pytest.raises(ConfigError):
            attribute(embedding_model(), tokenize("alpha"), "RC")

    def test_gradient_schemes_require_embedding_model(self):
        vocab = small_vocab()
        for scheme in ("SM", "DP", "HB"):
            with pytest.raises(ConfigError):
                attribute(linear_beta(vocab), tokenize("alpha"), scheme)

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ConfigError):
            attribute(embedding_model(), tokenize("alpha"), "IG")


class TestConstantModels:
    def test_constant_embedding_model_all_schemes_zero(self):
        model = embedding_model(seed=12)
        model = dataclasses.replace(
            model, w_alpha=np.zeros(model.dim), w_beta=np.zeros(model.dim)
        )
        tokens = tokenize("alpha bravo charly")
        for scheme in ("SM", "DP", "HB", "AS"):
            assert all(a.value == 0.0 for a in attribute(model, tokens, scheme))

    def test_constant_linear_model_zero(self):
        vocab = small_vocab()
        model = LinearPointModel(vocab, np.zeros(vocab.size), 0.3, "mae")
        tokens = tokenize("alpha bravo")
        for scheme in ("AS", "RC"):
            assert all(a.value == 0.0 for a in attribute(model, tokens, scheme))


class TestTopK:
    def build(self, magnitudes):
        return [
            Attribution(
                token=f"t{i}",
                position=i,
                scheme="DP",
                objective="mean",
                value=m,
                magnitude=abs(m),
            )
            for i, m in enumerate(magnitudes)
        ]

    def test_orders_by_magnitude(self):
        out = top_k(self.build([3.0, 1.0, 2.0]), 2)
        assert [a.position for a in out] == [0, 2]

    def test_tie_goes_to_earlier_position(self):
        out = top_k(self.build([2.0, 2.0]), 1)
        assert [a.position for a in out] == [0]

    def test_saturates(self):
        out = top_k(self.build([1.0, 2.0, 3.0]), 10)
        assert len(out) == 3

    def test_permutation_invariant(self):
        atts = self.build([5.0, -7.0, 1.0, 7.0, 3.0])
        expected = [a.position for a in top_k(atts, 3)]
        assert expected == [1, 3, 0]  # |−7| ties |7|, earlier position first
        for perm in ([4, 2, 0, 3, 1], [1, 0, 3, 2, 4]):
            shuffled = [atts[i] for i in perm]
            assert [a.position for a in top_k(shuffled, 3)] == expected

    def test_k_below_one_rejected(self):
        with pytest.raises(ConfigError):
            top_k(self.build([1.0]), 0)


class TestHitRate:
    def test_full_and_disjoint(self):
        assert hit_rate({"a", "b", "c"}, {"a", "b", "c"}) == 1.0
        assert hit_rate({"x"}, {"a"}) == 0.0

    def test_case_insensitive(self):
        assert hit_rate({"Alpha", "BRAVO"}, {"alpha", "bravo"}) == 1.0

    def test_partial(self):
        assert hit_rate({"a", "z"}, {"a", "b", "c", "d"}) == 0.25

    def test_empty_annotated_degenerate(self):
        with pytest.raises(DegenerateInput):
            hit_rate({"a"}, set())

    def test_monotone_in_k(self):
        model = embedding_model(seed=13)
        tokens = tokenize("alpha bravo charly delta echo foxtrot golf")
        atts = attribute(model, tokens, "SM")
        annotated = {"charly", "foxtrot"}
        rates = [
            hit_rate({a.token for a in top_k(atts, k)}, annotated)
            for k in range(1, len(atts) + 1)
        ]
        assert all(a <= b for a, b in zip(rates, rates[1:]))
        assert rates[-1] == 1.0


class TestAutoK:
    def test_ceiling(self):
        assert auto_k(1) == 1
        assert auto_k(10) == 1
        assert auto_k(11) == 2
        assert auto_k(95) == 10

    def test_floor_of_one(self):
        assert auto_k(0) == 1


class TestExplainReport:
    def test_auto_k_and_top(self):
        model = embedding_model(seed=14)
        report = explain(model, "alpha bravo charly delta echo", "SM")
        assert report.k == 1  # ceil(0.1 * 5)
        assert len(report.top) == 1
        assert report.top[0].magnitude == max(a.magnitude for a in report.attributions)
        assert report.objective_used == "mean" and not report.mode_fell_back

    def test_explicit_k_saturates(self):
        model = embedding_model(seed=14)
        report = explain(model, "alpha bravo", "SM", k=10)
        assert len(report.top) == 2

    def test_mode_fallback_reported(self):
        model = embedding_model(seed=15, b_alpha=-2.0)
        report = explain(model, "alpha bravo charly", "SM", objective="mode")
        assert report.mode_fell_back
        assert report.objective_requested == "mode"
        assert report.objective_used == "mean"

    def test_serialization_contract(self):
        model = embedding_model(seed=16)
        payload = explain(model, "alpha bravo", "DP", k=1).to_dict()
        assert set(payload["attributions"][0]) == {
            "token",
            "position",
            "scheme",
            "objective",
            "value",
            "magnitude",
        }
        assert payload["tokens"][0] == {"text": "alpha", "start": 0, "end": 5}
        assert payload["scheme"] == "DP" and payload["k"] == 1

    def test_invalid_k_rejected(self):
        with pytest.raises(ConfigError):
            explain(embedding_model(), "alpha bravo", "SM", k=0)

    def test_attributed_tokens_match_linear_positions(self):
        vocab = small_vocab()
        model = linear_beta(vocab)
        text = "Alpha, bravo! charly"
        tokens = attributed_tokens(model, text)
        report = explain(model, text, "RC")
        assert [t.text for t in report.tokens] == [t.text for t in tokens]
        assert [a.position for a in report.attributions] == list(range(len(tokens)))


class TestHtmlHeatmap:
    def test_spans_and_intensity(self):
        model = embedding_model(seed=17)
        text = "alpha bravo charly"
        report = explain(model, text, "DP", k=2)
        page = html_heatmap(text, report)
        assert page.count('<span class="tok"') == 3
        assert "rgba(" in page
        top_mag = max(a.magnitude for a in report.attributions)
        # the maximal token is fully saturated
        assert ",1.000)" in page
        assert "scheme DP" in page

    def test_escapes_and_preserves_text(self):
        model = embedding_model(seed=18)
        text = "alpha <b>bravo</b> & charly"
        report = explain(model, text, "SM")
        page = html_heatmap(text, report)
        assert "<b>" not in page.split("<p class=\"doc\">")[1].split("</p>")[0].replace(
            '<span class="tok"', ""
        )
        assert "&lt;b&gt;" in page and "&amp;" in page

    def test_constant_model_plain_rendering(self):
        model = embedding_model(seed=19)
        model = dataclasses.replace(
            model, w_alpha=np.zeros(model.dim), w_beta=np.zeros(model.dim)
        )
        text = "alpha bravo"
        page = html_heatmap(text, explain(model, text, "SM"))
        assert "<span" not in page.split('<p class="doc">')[1].split("</p>")[0]

    def test_sign_colors(self):
        model = embedding_model(seed=20)
        text = "alpha bravo charly delta echo foxtrot"
        report = explain(model, text, "DP")
        page = html_heatmap(text, report)
        signs = {a.value >= 0 for a in report.attributions}
        if True in signs:
            assert "rgba(220,38,38" in page
        if False in signs:
            assert "rgba(37,99,235" in page
