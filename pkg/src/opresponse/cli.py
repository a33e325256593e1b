"""Pipeline driver: extract, train, evaluate, compare, report, predict, serve.

Every artifact embeds the seed, a hash of the resolved command parameters
and a hash of the input features file, and is written atomically with
sorted keys, so rerunning a command with the same inputs produces
byte-identical files. Exit codes: 0 success, 1 input error, 2 numerical
failure.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import sys
from pathlib import Path

import click

from . import bayes, comparisons, evaluate, evidence, features, ingest, logistic, pipeline
from .errors import InputError, NumericalError, OpresponseError
from .sessions import validate_session
from .util import atomic_write_text, canonical_json, sha256_file, sha256_text


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputError as exc:
            click.echo(f"input error: {exc}", err=True)
            sys.exit(1)
        except NumericalError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(2)
        except OpresponseError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _config_hash(params: dict) -> str:
    return sha256_text(canonical_json(params))


def _artifact(payload: dict, params: dict, features_path=None) -> str:
    meta = {"config_hash": _config_hash(params), "params": params}
    if features_path is not None:
        meta["features_sha256"] = sha256_file(features_path)
    payload = dict(payload)
    payload["meta"] = meta
    return json.dumps(payload, indent=2, sort_keys=True)


@click.group()
def main():
    """Behavioural analytics and failure prediction for alarm-response logs."""


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Extraction thresholds/targets JSON; defaults apply otherwise.")
@click.option("--subjective", "subjective_path", type=click.Path(exists=True, dir_okay=False),
              help="Questionnaire scores to merge by participant id.")
@_exit_codes
def extract(manifest, out, config_path, subjective_path):
    """Extract one feature row per session in the manifest."""
    cfg = features.load_config(config_path) if config_path else features.ExtractionConfig()
    records = ingest.load_manifest(manifest)
    vectors = []
    failures = []
    for record in records:
        try:
            log = ingest.load_session(record)
            violations = validate_session(log)
            if violations:
                raise InputError(
                    "; ".join(str(v) for v in violations[:3])
                    + (" ..." if len(violations) > 3 else "")
                )
            vectors.append(features.extract_features(log, cfg))
        except OpresponseError as exc:
            failures.append(f"{record.participant_id} ({record.path}): {exc}")
    if failures:
        for line in failures:
            click.echo(f"failed: {line}", err=True)
        raise InputError(f"{len(failures)} of {len(records)} sessions failed extraction")

    vectors = features.assign_performance(vectors, cfg)

    if subjective_path:
        scores = ingest.load_subjective(subjective_path)
        merged = []
        for fv in vectors:
            s = scores.get(fv.participant_id)
            if s is None:
                merged.append(fv)
                continue
            merged.append(dataclasses.replace(
                fv, tlx_index=s.tlx, sart_index=s.sart, spam_index=s.spam,
                familiarity=s.familiarity, training=s.training,
            ))
        vectors = merged

    features.write_features(vectors, out)
    absents = {
        name: sum(1 for fv in vectors if getattr(fv, name) is None)
        for name in ("reaction_time_s", "response_time_s", "recovery_time_s",
                     "procedures_opened", "tlx_index", "sart_index")
    }
    fills = sum(1 for fv in vectors if fv.accuracy_filled)
    click.echo(f"extracted {len(vectors)} sessions -> {out}")
    click.echo(f"accuracy fills (missing adjustment, stored as 0): {fills}")
    click.echo("absent values: " + ", ".join(f"{k}={v}" for k, v in absents.items()))


def _load_table(features_path: str, feature_set: str,
                encoding: str = "ordinal") -> pipeline.ModelTable:
    vectors = features.read_features(features_path)
    table = pipeline.build_table(vectors, feature_set, encoding)
    if table.dropped:
        click.echo(
            f"dropped {len(table.dropped)} rows with missing features "
            f"(first: {table.dropped[0]})",
            err=True,
        )
    return table


_FAMILY = click.Choice(pipeline.MODEL_FAMILIES)
_FEATURE_SET = click.Choice(sorted(pipeline.FEATURE_SETS))


@main.command()
@click.option("--features", "features_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--family", type=_FAMILY, default="tan", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--criterion", type=click.Choice(["aic", "bic"]), default="aic",
              show_default=True)
@click.option("--feature-set", type=_FEATURE_SET, default="behavioural",
              show_default=True)
@click.option("--smoothing", type=float, default=1.0, show_default=True,
              help="Additive smoothing for discrete-model probability tables.")
@click.option("--root", default=None, help="Pin the tree root feature.")
@click.option("--encoding", type=click.Choice(["ordinal", "dummy"]), default="ordinal",
              show_default=True,
              help="Categorical coding; dummy is for the logistic families only.")
@_exit_codes
def train(features_path, family, out, seed, criterion, feature_set, smoothing, root,
          encoding):
    """Fit one model family on the whole features file."""
    params = {
        "command": "train", "family": family, "seed": seed, "criterion": criterion,
        "feature_set": feature_set, "smoothing": smoothing, "root": root,
        "encoding": encoding,
    }
    table = _load_table(features_path, feature_set, encoding)
    model = pipeline.train_family(table, family, alpha=smoothing,
                                  criterion=criterion, root=root)
    if isinstance(model, bayes.BnModel):
        doc = json.loads(bayes.model_to_json(model))
    else:
        doc = json.loads(logistic.model_to_json(model))
    atomic_write_text(out, _artifact(doc, params, features_path))
    click.echo(f"trained {family} on {table.n_rows} rows -> {out}")


@main.command(name="evaluate")
@click.option("--features", "features_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--family", type=_FAMILY, default="tan", show_default=True)
@click.option("--folds", type=int, default=evaluate.DEFAULT_FOLDS, show_default=True)
@click.option("--test-fraction", type=float, default=evaluate.DEFAULT_TEST_FRACTION,
              show_default=True)
@click.option("--threshold", type=float, default=evaluate.DEFAULT_THRESHOLD,
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--criterion", type=click.Choice(["aic", "bic"]), default="aic",
              show_default=True)
@click.option("--feature-set", type=_FEATURE_SET, default="behavioural",
              show_default=True)
@click.option("--smoothing", type=float, default=1.0, show_default=True)
@click.option("--encoding", type=click.Choice(["ordinal", "dummy"]), default="ordinal",
              show_default=True,
              help="Categorical coding; dummy is for the logistic families only.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_exit_codes
def evaluate_cmd(features_path, family, folds, test_fraction, threshold, seed,
                 criterion, feature_set, smoothing, encoding, out):
    """Repeated stratified-split evaluation of one model family."""
    params = {
        "command": "evaluate", "family": family, "folds": folds,
        "test_fraction": test_fraction, "threshold": threshold, "seed": seed,
        "criterion": criterion, "feature_set": feature_set, "smoothing": smoothing,
        "encoding": encoding,
    }
    table = _load_table(features_path, feature_set, encoding)
    fit_score = pipeline.fit_score_for(table, family, alpha=smoothing,
                                       criterion=criterion)
    report = evaluate.evaluate(fit_score, table.y, folds=folds,
                               test_fraction=test_fraction,
                               threshold=threshold, seed=seed)
    atomic_write_text(out, _artifact(evaluate.report_to_dict(report), params,
                                     features_path))
    atomic_write_text(Path(out).with_suffix(".txt"), evaluate.render_matrix(report) + "\n")
    click.echo(evaluate.render_matrix(report))


@main.command()
@click.option("--features", "features_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", default="G1:G2,G2:G3,G3:G4", show_default=True,
              help="Comma-separated group pairs to compare.")
@click.option("--alpha", type=float, default=comparisons.DEFAULT_ALPHA, show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@_exit_codes
def compare(features_path, pairs, alpha, out_dir):
    """Run the statistical battery for each requested group pair."""
    params = {"command": "compare", "pairs": pairs, "alpha": alpha}
    vectors = features.read_features(features_path)
    out_dir = Path(out_dir)
    for pair in pairs.split(","):
        try:
            left, right = pair.strip().split(":")
        except ValueError:
            raise InputError(f"bad pair {pair!r}; expected like G1:G2")
        rows_a = [fv for fv in vectors if fv.group.value == left]
        rows_b = [fv for fv in vectors if fv.group.value == right]
        if not rows_a or not rows_b:
            raise InputError(f"no rows for pair {pair!r}")
        results = comparisons.run_battery(rows_a, rows_b, alpha=alpha)
        stem = f"battery_{left}_{right}"
        payload = json.loads(comparisons.battery_to_json(results))
        atomic_write_text(out_dir / f"{stem}.json",
                          _artifact({"results": payload, "pair": [left, right]},
                                    params, features_path))
        atomic_write_text(out_dir / f"{stem}.tsv",
                          comparisons.render_battery(results) + "\n")
        n_sig = sum(1 for r in results if r.significant)
        click.echo(f"{left} vs {right}: {len(results)} comparisons, {n_sig} significant")


@main.command()
@click.option("--features", "features_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--folds", type=int, default=evaluate.DEFAULT_FOLDS, show_default=True)
@click.option("--test-fraction", type=float, default=evaluate.DEFAULT_TEST_FRACTION,
              show_default=True)
@click.option("--threshold", type=float, default=evaluate.DEFAULT_THRESHOLD,
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--criterion", type=click.Choice(["aic", "bic"]), default="aic",
              show_default=True)
@click.option("--smoothing", type=float, default=1.0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@_exit_codes
def report(features_path, folds, test_fraction, threshold, seed, criterion,
           smoothing, out_dir):
    """Information ranking, per-cell success tables and model comparison."""
    params = {
        "command": "report", "folds": folds, "test_fraction": test_fraction,
        "threshold": threshold, "seed": seed, "criterion": criterion,
        "smoothing": smoothing,
    }
    table = _load_table(features_path, "behavioural")
    out_dir = Path(out_dir)

    mi = pipeline.mi_report(table)
    atomic_write_text(out_dir / "mutual_information.json",
                      _artifact(mi, params, features_path))

    tan_model = pipeline.train_bn(table, "tan", alpha=smoothing)
    lr_model = pipeline.train_lr(table, "lr-stepwise", criterion)
    cells = {
        "tan": pipeline.bn_cell_success(tan_model),
        "lr_stepwise": pipeline.lr_cell_success(lr_model, table),
        "lr_selected_features": list(lr_model.feature_names),
    }
    atomic_write_text(out_dir / "success_cells.json",
                      _artifact(cells, params, features_path))

    side_by_side = {}
    for family in ("tan", "lr-stepwise"):
        fit_score = pipeline.fit_score_for(table, family, alpha=smoothing,
                                           criterion=criterion)
        rep = evaluate.evaluate(fit_score, table.y, folds=folds,
                                test_fraction=test_fraction,
                                threshold=threshold, seed=seed)
        side_by_side[family] = evaluate.report_to_dict(rep)
    atomic_write_text(out_dir / "model_comparison.json",
                      _artifact(side_by_side, params, features_path))

    lines = [f"{'metric':<12} {'tan':>10} {'lr-stepwise':>12}"]
    for metric in ("accuracy", "precision", "recall", "f1", "auc_mean"):
        lines.append(
            f"{metric:<12} {side_by_side['tan'][metric]:>10.3f} "
            f"{side_by_side['lr-stepwise'][metric]:>12.3f}"
        )
    atomic_write_text(out_dir / "model_comparison.txt", "\n".join(lines) + "\n")
    click.echo("\n".join(lines))
    click.echo(f"information ranking: {', '.join(mi['ranking'])}")
    click.echo(f"reports written to {out_dir}")


@main.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--evidence", "evidence_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON file with optional 'evidence' and 'raw' maps.")
@click.option("--url", default=None,
              help="Query a running service instead of inferring locally.")
@click.option("--features", "features_path", type=click.Path(exists=True, dir_okay=False),
              help="Cross-check that the model was trained on this features file.")
@_exit_codes
def predict(model_path, evidence_path, url, features_path):
    """Posterior failure probability for one evidence pattern."""
    body = {}
    if evidence_path:
        body = json.loads(Path(evidence_path).read_text())
        unknown = set(body) - {"evidence", "raw"}
        if unknown:
            raise InputError(f"unexpected evidence file keys: {sorted(unknown)}")

    document = json.loads(Path(model_path).read_text())
    recorded = document.get("meta", {}).get("features_sha256")
    if features_path and recorded and recorded != sha256_file(features_path):
        raise InputError(
            "stale model: the features file does not match the one it was trained on"
        )

    if url:
        import httpx

        response = httpx.post(url.rstrip("/") + "/predict", json=body, timeout=30.0)
        if response.status_code != 200:
            raise InputError(f"service returned {response.status_code}: {response.text}")
        click.echo(json.dumps(response.json(), indent=2, sort_keys=True))
        return

    model = bayes.model_from_json(json.dumps(document))
    payload = evidence.predict_payload(model, body.get("evidence"), body.get("raw"))
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@main.command()
@click.option("--model", "model_path", required=True, envvar="OPRESPONSE_MODEL",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--lr-model", "lr_model_path", envvar="OPRESPONSE_LR_MODEL",
              type=click.Path(exists=True, dir_okay=False),
              help="Optional logistic model for the full-evidence endpoint.")
@click.option("--host", default="127.0.0.1", show_default=True, envvar="OPRESPONSE_HOST")
@click.option("--port", type=int, default=8000, show_default=True, envvar="OPRESPONSE_PORT")
@_exit_codes
def serve(model_path, lr_model_path, host, port):
    """Run the live error-probability service."""
    import uvicorn

    from .service.app import create_app

    app = create_app(model_path=model_path, lr_model_path=lr_model_path)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
