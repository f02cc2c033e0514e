"""Command-line interface.

Pipeline commands (ingest -> split -> train -> eval) plus one-off scoring,
explanation, benchmarking, and a `serve` command that exposes the scoring
service over HTTP. Report-producing commands write figures next to their
delimited outputs.

Exit codes: 0 success; 1 usage error; 2 data error; 3 training divergence.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .artifact import ModelArtifact
from .beta import BetaParams, pdf_curve
from .data import (
    TITLE_BODY_SEPARATOR,
    CorpusSplit,
    build_corpus,
    fingerprint,
    joint_annotation_score,
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
from .explain import SCHEMES, explain as explain_text, html_heatmap
from .features import build_vocab, document_vector, fit_nblr, tokenize
from .metrics import pr_curve
from .models import (
    DEFAULT_EMBEDDING_DIM,
    DEFAULT_EMBEDDING_LR,
    DEFAULT_LINEAR_LR,
    TrainConfig,
    build_token_index,
    evaluate,
    init_embedding_beta,
    init_linear_beta,
    init_linear_point,
    score_payload,
    train as train_model,
)

MODEL_FAMILIES = ("bow-beta", "bow-mae", "bow-mse", "nblr", "emb-beta")
SPLIT_PARTS = ("train", "validation", "test")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3

_DATA_ERRORS = (ParseError, DataError, DegenerateInput, DomainError, ShapeError)


@click.group(name="toxprop", help="Article toxicity-propensity models: train, evaluate, explain, serve.")
def cli() -> None:
    pass


def _echo_json(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


def _resolve_text(text: str | None, title: str | None, body: str | None) -> str:
    if text is not None and (title is not None or body is not None):
        raise click.UsageError("give either TEXT or --title/--body, not both")
    if text is not None:
        return text
    if title is not None or body is not None:
        return (title or "") + TITLE_BODY_SEPARATOR + (body or "")
    data = click.get_text_stream("stdin").read()
    if not data.strip():
        raise click.UsageError("no input text: pass TEXT, --title/--body, or pipe stdin")
    return data


def _require_model(path: str | None) -> ModelArtifact:
    if not path:
        raise click.UsageError("no model: pass --model PATH or set PROPENSITY_MODEL")
    return ModelArtifact.load(path)


_model_option = click.option(
    "--model",
    "model_path",
    envvar="PROPENSITY_MODEL",
    default=None,
    help="Model artifact path (defaults to $PROPENSITY_MODEL).",
)


def _load_split(data_dir: str | Path) -> CorpusSplit:
    base = Path(data_dir)
    parts = {}
    for name in SPLIT_PARTS:
        path = base / f"{name}.jsonl"
        if not path.exists():
            raise DataError(f"{base} is not a split directory: missing {path.name}")
        parts[name] = tuple(load_examples(path))
    return CorpusSplit(train=parts["train"], validation=parts["validation"], test=parts["test"])


def _parse_ratios(_ctx, _param, value: str) -> tuple[float, float, float]:
    parts = value.split(":")
    if len(parts) != 3:
        raise click.BadParameter(f"expected three numbers like 8:1:1, got {value!r}")
    try:
        weights = [float(p) for p in parts]
    except ValueError:
        raise click.BadParameter(f"expected three numbers like 8:1:1, got {value!r}") from None
    if any(w <= 0 for w in weights):
        raise click.BadParameter("all ratio parts must be > 0")
    total = sum(weights)
    return (weights[0] / total, weights[1] / total, weights[2] / total)


def _parse_thresholds(_ctx, _param, value: str) -> tuple[int, ...]:
    try:
        thresholds = tuple(int(p) for p in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected integers like 2,3,4, got {value!r}") from None
    if not thresholds:
        raise click.BadParameter("at least one threshold required")
    if any(not -4 <= t <= 4 for t in thresholds):
        raise click.BadParameter("thresholds must lie in [-4, 4]")
    return thresholds


@cli.command(help="Label raw articles by their comment scores and write a corpus file.")
@click.argument("articles", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="Output corpus (JSONL of labeled examples).")
@click.option("--min-comments", default=10, show_default=True,
              help="Drop articles with fewer scored comments than this.")
def ingest(articles: str, out: Path, min_comments: int) -> None:
    raw = load_articles(articles)
    examples = build_corpus(raw, min_comments=min_comments)
    if not examples:
        raise DegenerateInput(
            f"no article has >= {min_comments} scored comments; nothing to write"
        )
    out.parent.mkdir(parents=True, exist_ok=True)
    write_examples(examples, out)
    click.echo(f"kept {len(examples)} of {len(raw)} articles -> {out}")


@cli.command(help="Chronological train/validation/test split of a corpus file.")
@click.argument("examples", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True,
              help="Directory for train.jsonl, validation.jsonl, test.jsonl.")
@click.option("--ratios", default="8:1:1", show_default=True, callback=_parse_ratios,
              help="Relative sizes train:validation:test.")
def split(examples: str, out: Path, ratios: tuple[float, float, float]) -> None:
    corpus = load_examples(examples)
    parts = split_by_date(corpus, ratios=ratios)
    out.mkdir(parents=True, exist_ok=True)
    for name in SPLIT_PARTS:
        write_examples(getattr(parts, name), out / f"{name}.jsonl")
    click.echo(
        f"split {len(corpus)} examples -> train {len(parts.train)}, "
        f"validation {len(parts.validation)}, test {len(parts.test)} in {out}"
    )


def _init_model(family: str, split_data: CorpusSplit, min_df: int, dim: int, seed: int):
    token_seqs = [tokenize(ex.text) for ex in split_data.train]
    if family == "emb-beta":
        index = build_token_index(token_seqs, min_df=min_df)
        return init_embedding_beta(index, dim=dim, seed=seed)
    vocab = build_vocab(token_seqs, min_df=min_df)
    if family == "bow-beta":
        return init_linear_beta(vocab)
    if family == "nblr":
        features = [document_vector(ex.text, vocab) for ex in split_data.train]
        weights = fit_nblr(features, [ex.label for ex in split_data.train], vocab.size)
        return init_linear_point(vocab, "mse", nblr=weights)
    loss = {"bow-mae": "mae", "bow-mse": "mse"}[family]
    return init_linear_point(vocab, loss)


@cli.command(help="Train a model on a split directory and save the artifact.")
@click.option("--data", "data_dir", type=click.Path(file_okay=False), required=True,
              help="Split directory from `toxprop split`.")
@click.option("--model", "family", type=click.Choice(MODEL_FAMILIES), required=True,
              help="Model family to train.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="Artifact output path; history CSV and training figure land alongside.")
@click.option("--lr", type=float, default=None,
              help=f"Learning rate (default {DEFAULT_LINEAR_LR} linear, {DEFAULT_EMBEDDING_LR} emb-beta).")
@click.option("--batch", default=16, show_default=True, help="Mini-batch size.")
@click.option("--epochs", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--patience", type=int, default=None,
              help="Stop after this many epochs without validation improvement.")
@click.option("--min-df", default=2, show_default=True,
              help="Minimum document frequency for vocabulary terms.")
@click.option("--dim", default=DEFAULT_EMBEDDING_DIM, show_default=True,
              help="Embedding dimension (emb-beta only).")
def train(data_dir: str, family: str, out: Path, lr: float | None, batch: int,
          epochs: int, seed: int, patience: int | None, min_df: int, dim: int) -> None:
    split_data = _load_split(data_dir)
    if not split_data.train:
        raise DegenerateInput(f"{data_dir}: empty training part")
    model = _init_model(family, split_data, min_df, dim, seed)
    if lr is None:
        lr = DEFAULT_EMBEDDING_LR if family == "emb-beta" else DEFAULT_LINEAR_LR
    config = TrainConfig(
        learning_rate=lr, batch_size=batch, epochs=epochs, patience=patience, seed=seed
    )
    trained, report = train_model(model, split_data, config)
    artifact = ModelArtifact(
        model=trained,
        metadata={
            "seed": seed,
            "data_fingerprint": fingerprint(split_data.train),
            "epochs": report.epochs_run,
        },
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    artifact.save(out)

    history_path = out.parent / (out.name + ".history.csv")
    with open(history_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_loss", "seconds", "best"])
        writer.writeheader()
        writer.writerows(report.to_records())
    from . import plots

    figure_path = plots.save_training_curve(report, out.parent / (out.name + ".training.png"))
    click.echo(
        f"trained {trained.kind} for {report.epochs_run} epochs "
        f"(best {report.best_epoch}) -> {out}"
    )
    click.echo(f"history -> {history_path}")
    click.echo(f"figure -> {figure_path}")


@cli.command(name="eval", help="Score a split part against its labels and report rank metrics.")
@_model_option
@click.option("--data", "data_dir", type=click.Path(file_okay=False), required=True,
              help="Split directory from `toxprop split`.")
@click.option("--part", type=click.Choice(SPLIT_PARTS), default="test", show_default=True)
@click.option("--estimator", type=click.Choice(("mean", "mode")), default="mean", show_default=True)
@click.option("--force", is_flag=True,
              help="Evaluate even when the split's train part does not match the artifact fingerprint.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Directory for metrics.csv and the prediction scatter figure.")
def eval_cmd(model_path: str | None, data_dir: str, part: str, estimator: str,
             force: bool, out_dir: Path | None) -> None:
    artifact = _require_model(model_path)
    split_data = _load_split(data_dir)
    recorded = artifact.metadata.get("data_fingerprint")
    if recorded is not None and not force:
        current = fingerprint(split_data.train)
        if current != recorded:
            raise DataError(
                f"{data_dir}: train part fingerprint {current[:12]}... does not match "
                f"the artifact's {recorded[:12]}...; pass --force to evaluate anyway"
            )
    examples = getattr(split_data, part)
    report = evaluate(artifact.model, examples, estimator)
    payload = {"part": part, "estimator": estimator, **report.to_dict()}
    _echo_json(payload)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "metrics.csv"
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(payload))
            writer.writeheader()
            writer.writerow(payload)
        from . import plots

        labels = [ex.label for ex in examples]
        preds = artifact.model.batch_scores([ex.text for ex in examples], estimator)
        plots.save_score_scatter(labels, list(preds), out_dir / "scatter.png")
        click.echo(f"report -> {csv_path} and {out_dir / 'scatter.png'}", err=True)


@cli.command(help="Score one article (TEXT, --title/--body, or stdin) with a saved model.")
@_model_option
@click.argument("text", required=False)
@click.option("--title", default=None)
@click.option("--body", default=None)
@click.option("--curve-points", default=0, show_default=True,
              help="Also include this many pdf samples in the JSON output.")
def score(model_path: str | None, text: str | None, title: str | None,
          body: str | None, curve_points: int) -> None:
    artifact = _require_model(model_path)
    resolved = _resolve_text(text, title, body)
    _echo_json(score_payload(artifact.model, resolved, curve_points))


@cli.command(help="Token-level attribution for one article.")
@_model_option
@click.argument("text", required=False)
@click.option("--title", default=None)
@click.option("--body", default=None)
@click.option("--scheme", type=click.Choice(tuple(s.lower() for s in SCHEMES)), required=True)
@click.option("--objective", type=click.Choice(("mean", "mode")), default="mean", show_default=True)
@click.option("--k", type=int, default=None, help="Top-k size (default: 10% of tokens).")
@click.option("--html", "html_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Also write a standalone HTML heatmap here.")
def explain(model_path: str | None, text: str | None, title: str | None, body: str | None,
            scheme: str, objective: str, k: int | None, html_path: Path | None) -> None:
    artifact = _require_model(model_path)
    resolved = _resolve_text(text, title, body)
    report = explain_text(artifact.model, resolved, scheme.upper(), objective, k=k)
    _echo_json(report.to_dict())
    if html_path is not None:
        html_path.parent.mkdir(parents=True, exist_ok=True)
        html_path.write_text(html_heatmap(resolved, report), encoding="utf-8")
        click.echo(f"heatmap -> {html_path}", err=True)


@cli.command(name="nblr-weights", help="Dump a model's NBLR scaling weights as CSV.")
@_model_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="CSV output path (default: stdout).")
def nblr_weights(model_path: str | None, out: Path | None) -> None:
    artifact = _require_model(model_path)
    nblr = getattr(artifact.model, "nblr", None)
    if nblr is None:
        raise DataError(f"model kind {artifact.kind!r} carries no NBLR weights")
    vocab = artifact.model.vocab
    rows = [(term, nblr.weights[index]) for term, index, _df in vocab.sorted_entries()]
    rows.sort(key=lambda item: item[0])
    lines = ["term,weight"] + [f"{term},{weight:.12g}" for term, weight in rows]
    text = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        click.echo(f"{len(rows)} weights (label mean {nblr.label_mean:.6g}) -> {out}")


@cli.command(name="pdf-curve", help="Sample a Beta pdf, either from --alpha/--beta or a model + TEXT.")
@_model_option
@click.argument("text", required=False)
@click.option("--alpha", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--points", default=101, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="CSV output path; a PNG figure lands alongside (default: CSV on stdout).")
def pdf_curve_cmd(model_path: str | None, text: str | None, alpha: float | None,
                  beta: float | None, points: int, out: Path | None) -> None:
    if (alpha is None) != (beta is None):
        raise click.UsageError("--alpha and --beta must be given together")
    if alpha is not None:
        if text is not None:
            raise click.UsageError("give either --alpha/--beta or TEXT, not both")
        params = BetaParams(alpha, beta)
    else:
        artifact = _require_model(model_path)
        payload = score_payload(artifact.model, _resolve_text(text, None, None))
        if payload["alpha"] is None:
            raise DataError(f"model kind {artifact.kind!r} has no predictive distribution")
        params = BetaParams(payload["alpha"], payload["beta"])
    curve = pdf_curve(params, points)
    lines = ["y,density"] + [f"{y:.12g},{d:.12g}" for y, d in curve.points()]
    text_out = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text_out, nl=False)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text_out, encoding="utf-8")
        from . import plots

        figure = plots.save_pdf_curve(
            curve, out.with_suffix(".png"),
            title=f"Beta({params.alpha:.4g}, {params.beta:.4g})",
        )
        click.echo(f"curve -> {out}, figure -> {figure}")


@cli.command(help="AUC@PR of model scores against human joint annotations at several thresholds.")
@_model_option
@click.option("--data", "examples_path", type=click.Path(dir_okay=False), required=True,
              help="Labeled corpus (JSONL) the annotations refer to.")
@click.option("--annotations", type=click.Path(dir_okay=False), required=True,
              help="JSONL of {id, group1, group2} annotation records.")
@click.option("--thresholds", default="2,3,4", show_default=True, callback=_parse_thresholds,
              help="Joint-score cutoffs; an article is positive when group1+group2 >= t.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Directory for bench.csv and the precision-recall figure.")
def bench(model_path: str | None, examples_path: str, annotations: str,
          thresholds: tuple[int, ...], out_dir: Path | None) -> None:
    artifact = _require_model(model_path)
    examples = {ex.id: ex for ex in load_examples(examples_path)}
    records = load_annotations(annotations)
    if not records:
        raise DegenerateInput(f"{annotations}: no annotation records")
    missing = [rec.article_id for rec in records if rec.article_id not in examples]
    if missing:
        raise DataError(
            f"{len(missing)} annotated articles missing from {examples_path} "
            f"(first: {missing[0]!r})"
        )
    joined = [(examples[rec.article_id], joint_annotation_score(rec.group1, rec.group2))
              for rec in records]
    scores = artifact.model.batch_scores([ex.text for ex, _ in joined], "mean")
    curves = {}
    rows = []
    for t in thresholds:
        labels = [joint >= t for _, joint in joined]
        try:
            curve = pr_curve(list(scores), labels)
        except DegenerateInput:
            # a threshold nobody reaches gets a null area, not a dead report
            rows.append({"threshold": t, "auc_pr": None, "positives": sum(labels), "n": len(labels)})
            continue
        curves[f"joint >= {t}"] = curve
        rows.append({
            "threshold": t,
            "auc_pr": curve.area,
            "positives": curve.positives,
            "n": len(labels),
        })
    if not curves:
        raise DegenerateInput(
            f"no threshold in {list(thresholds)} separates the annotations into two classes"
        )
    _echo_json({"results": rows})
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "bench.csv"
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["threshold", "auc_pr", "positives", "n"])
            writer.writeheader()
            writer.writerows(rows)
        from . import plots

        figure = plots.save_pr_curves(curves, out_dir / "pr_curves.png")
        click.echo(f"report -> {csv_path} and {figure}", err=True)


@cli.command(help="Serve the scoring/explanation HTTP API for a saved model.")
@_model_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(model_path: str | None, host: str, port: int) -> None:
    artifact = _require_model(model_path)
    import uvicorn

    from .service import create_app

    app = create_app(artifact)
    click.echo(f"serving {artifact.kind} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def entry(argv: list[str] | None = None) -> int:
    """Run the CLI and map failures onto the documented exit codes."""
    try:
        result = cli.main(args=argv, prog_name="toxprop", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        click.echo(f"training diverged: {exc}", err=True)
        return EXIT_DIVERGED
    except _DATA_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except ToxpropError as exc:  # any library error not singled out above
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(entry())
