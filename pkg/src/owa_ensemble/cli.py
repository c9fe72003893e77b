"""Command-line surface: synth, screen, train, evaluate, fuse, report.

Exit codes: 0 success, 2 configuration problems, 3 data/schema problems,
4 numeric failures. Commands never modify their input files; all outputs
go under --out-dir.
"""

from __future__ import annotations

import csv
import functools
import os
import sys

import click

from .dataset import feature_correlation_matrix, load_csv, write_synth_csv
from .errors import ConfigError, DataError, NumericError, OwaEnsembleError
from .learners import PredictionMatrix
from .pipeline import (
    RunConfig,
    evaluate_with_artifact,
    fuse_prediction_matrix,
    load_json,
    render_metrics_text,
    run_experiment,
    write_fusion_trace_csv,
    write_metrics_outputs,
    write_screening_outputs,
)
from .screening import ForestConfig, screen as screen_features

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except DataError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except (NumericError, OwaEnsembleError, FloatingPointError) as exc:
            click.echo(f"numeric error: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)

    return wrapper


def _require_file(path, what: str) -> str:
    if not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


@click.group()
def main():
    """Fraud-style binary classification via an OWA fusion ensemble."""


@main.command()
@click.option("--out", required=True, help="Destination CSV path.")
@click.option("--n-samples", default=5000, show_default=True, type=int)
@click.option("--n-informative", default=5, show_default=True, type=int)
@click.option("--n-noise", default=15, show_default=True, type=int)
@click.option("--separation", default=2.0, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@_exit_codes
def synth(out, n_samples, n_informative, n_noise, separation, seed):
    """Generate a two-class Gaussian benchmark dataset in the ingestion schema."""
    write_synth_csv(
        out,
        n_samples=n_samples,
        n_informative=n_informative,
        n_noise=n_noise,
        class_separation=separation,
        seed=seed,
    )
    click.echo(f"wrote {out}")


@main.command()
@click.option("--data", required=True, help="Input dataset CSV.")
@click.option("--label", default="Class", show_default=True, help="Label column name.")
@click.option("--threshold", default=0.5, show_default=True, type=float,
              help="Contribution percentage below which features are dropped.")
@click.option("--trees", default=100, show_default=True, type=int)
@click.option("--max-depth", default=10, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out-dir", default=".", show_default=True)
@_exit_codes
def screen(data, label, threshold, trees, max_depth, seed, out_dir):
    """Rank features with a bootstrap forest and drop the insignificant ones."""
    _require_file(data, "dataset")
    dataset = load_csv(data, label)
    report = screen_features(
        dataset, ForestConfig(n_trees=trees, max_depth=max_depth, seed=seed), threshold
    )
    paths = write_screening_outputs(report, out_dir)
    corr_path = os.path.join(out_dir, "feature_correlations.csv")
    corr = feature_correlation_matrix(dataset)
    with open(corr_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature"] + dataset.feature_names)
        for name, row in zip(dataset.feature_names, corr):
            writer.writerow([name] + [repr(float(v)) for v in row])
    click.echo(
        f"retained {len(report.retained)}/{len(report.feature_names)} features "
        f"at threshold {threshold}%"
    )
    for p in list(paths.values()) + [corr_path]:
        click.echo(f"wrote {p}")


def _build_config(data, label, config, out_dir, seed, folds, threshold, groups) -> RunConfig:
    values = {}
    if config is not None:
        _require_file(config, "config file")
        doc = load_json(config)
        if not isinstance(doc, dict):
            raise ConfigError(f"config file must hold a JSON object: {config}")
        values.update(doc)
    values["data_path"] = data if data is not None else values.get("data_path")
    if values.get("data_path") is None:
        raise ConfigError("no dataset given: pass --data or put data_path in the config file")
    # flags override the config file
    if label is not None:
        values["label_column"] = label
    if out_dir is not None:
        values["out_dir"] = out_dir
    if seed is not None:
        values["seed"] = seed
    if folds is not None:
        values["folds"] = folds
    if threshold is not None:
        values["screening_threshold"] = threshold
    if groups is not None:
        values["groups"] = tuple(g.strip() for g in groups.split(",") if g.strip())
    return RunConfig.from_dict(values)


_run_options = [
    click.option("--data", default=None, help="Input dataset CSV."),
    click.option("--label", default=None, help="Label column name (default Class)."),
    click.option("--config", default=None, help="JSON config file; flags override it."),
    click.option("--out-dir", default=None, help="Output directory (default .)."),
    click.option("--seed", default=None, type=int, help="Master seed (default 0)."),
    click.option("--folds", default=None, type=int, help="Cross-validation folds (default 10)."),
    click.option("--threshold", default=None, type=float,
                 help="Screening threshold percent (default 0.5)."),
    click.option("--groups", default=None,
                 help="Comma-separated DOWA group override, e.g. boosted_trees,extra_trees,adaboost."),
]


def _with_run_options(fn):
    for opt in reversed(_run_options):
        fn = opt(fn)
    return fn


@main.command()
@_with_run_options
@_exit_codes
def train(data, label, config, out_dir, seed, folds, threshold, groups):
    """Screen, fit the first layer out-of-fold, fit the fusion stack, save the artifact."""
    run_config = _build_config(data, label, config, out_dir, seed, folds, threshold, groups)
    _require_file(run_config.data_path, "dataset")
    result = run_experiment(run_config, train_only=True)
    click.echo(
        f"dowa group: {', '.join(result.stack.plan.dowa_group)}; "
        f"iowa group: {', '.join(result.stack.plan.iowa_group)}"
    )
    for p in result.paths.values():
        click.echo(f"wrote {p}")


@main.command()
@click.option("--artifact", required=True, help="Trained ensemble artifact JSON.")
@_with_run_options
@_exit_codes
def evaluate(artifact, data, label, config, out_dir, seed, folds, threshold, groups):
    """Cross-validated metrics for an artifact's configuration on a dataset.

    The fusion stack is refitted per evaluation arrangement so that no
    component scores data it trained on; the artifact supplies the feature
    set, learner specs, seeds, and hyperparameters.
    """
    _require_file(artifact, "artifact")
    artifact_doc = load_json(artifact)
    data_path = data
    if data_path is None and config is not None:
        _require_file(config, "config file")
        data_path = load_json(config).get("data_path")
    if data_path is None:
        raise ConfigError("no dataset given: pass --data or put data_path in the config file")
    _require_file(data_path, "dataset")
    label_column = label if label is not None else artifact_doc.get("label_column", "Class")
    dataset = load_csv(data_path, label_column)
    echo = {
        "data_path": data_path,
        "artifact_master_seed": artifact_doc.get("master_seed"),
        "folds": artifact_doc.get("folds"),
        "label_column": label_column,
    }
    metrics, traces, _, _ = evaluate_with_artifact(dataset, artifact_doc, config_echo=echo)
    paths = write_metrics_outputs(metrics, traces, out_dir if out_dir is not None else ".")
    click.echo(
        f"accuracy {metrics.pooled['accuracy']:.4f}, auc {metrics.roc.auc:.4f} "
        f"({metrics.leakage['components_checked']} leakage checks passed)"
    )
    for p in paths.values():
        click.echo(f"wrote {p}")


@main.command()
@click.option("--artifact", required=True, help="Trained ensemble artifact JSON.")
@click.option("--preds", required=True, help="Prediction-matrix CSV to fuse.")
@click.option("--out-dir", default=".", show_default=True)
@_exit_codes
def fuse(artifact, preds, out_dir):
    """Apply a saved artifact's fusion stack to an external prediction matrix."""
    _require_file(artifact, "artifact")
    _require_file(preds, "prediction matrix")
    artifact_doc = load_json(artifact)
    pm = PredictionMatrix.from_csv(preds)
    outcome, traces = fuse_prediction_matrix(pm, artifact_doc)
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, "fusion_trace.csv")
    write_fusion_trace_csv(traces, trace_path)
    n_dowa = int((outcome.sources == "dowa").sum())
    click.echo(
        f"fused {pm.n_samples} samples: dowa selected {n_dowa}, "
        f"iowa selected {pm.n_samples - n_dowa}"
    )
    click.echo(f"wrote {trace_path}")


@main.command()
@click.option("--metrics", "metrics_path", required=True, help="metrics.json to render.")
@click.option("--out", default=None, help="Optional text file destination.")
@_exit_codes
def report(metrics_path, out):
    """Render a metrics JSON document as a readable text summary."""
    _require_file(metrics_path, "metrics file")
    doc = load_json(metrics_path)
    if not isinstance(doc, dict) or "metrics" not in doc:
        raise DataError(f"not a metrics document: {metrics_path}")
    text = render_metrics_text(doc)
    if out is not None:
        with open(out, "w") as fh:
            fh.write(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
