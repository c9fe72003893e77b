"""Experiment orchestration: screening, out-of-fold first-layer predictions,
leakage-safe cross-validated fusion, metrics, and artifact persistence.

Two cross-validation passes keep every stage honest. The first pass gives
each sample first-layer probabilities from models that never saw its fold.
The second, independently folded pass refits the whole fusion stack
(grouping, IOWA weights, ridge) on nine folds at a time and scores the
held-out fold, so no fitted component ever scores a sample it trained on.
Every fit/score pairing is recorded in a provenance log and checked.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone

import numpy as np

from .dataset import Dataset, load_csv
from .ensemble import (
    FusionStack,
    GroupingPlan,
    RidgeModel,
    apply_fusion_stack,
    fit_fusion_stack,
)
from .errors import ConfigError, DataError, LeakageError
from .learners import (
    KINDS,
    ClassifierSpec,
    PredictionMatrix,
    fit_predict_out_of_fold,
    stratified_fold_assignments,
)
from .metrics import (
    METRIC_NAMES,
    RocCurve,
    compute_metrics,
    confusion_from_predictions,
    roc_curve,
)
from .owa import IowaModel
from .screening import ForestConfig, ScreeningReport, screen

ARTIFACT_FORMAT = "owa-ensemble-artifact/1"


@dataclass
class RunConfig:
    """Everything a full run needs; mirrors the CLI flags and config file."""

    data_path: str
    label_column: str = "Class"
    out_dir: str = "."
    seed: int = 0
    folds: int = 10
    screening_threshold: float = 0.5
    forest_trees: int = 100
    forest_max_depth: int = 10
    forest_min_samples_split: int = 5
    learner_hyperparameters: dict = field(default_factory=dict)
    iowa_learning_rate: float = 0.1
    iowa_max_epochs: int = 200
    iowa_tolerance: float = 1e-6
    ridge_lambda: float = 1.0
    groups: tuple | None = None  # explicit DOWA group override

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if self.groups is not None:
            self.groups = tuple(self.groups)
        unknown = set(self.learner_hyperparameters) - set(KINDS)
        if unknown:
            raise ConfigError(f"learner_hyperparameters has unknown kinds: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "data_path" not in values:
            raise ConfigError("config requires data_path")
        return cls(**values)

    def echo(self) -> dict:
        """Config as written into reports; out_dir is a location, not a parameter."""
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.pop("out_dir")
        if d["groups"] is not None:
            d["groups"] = list(d["groups"])
        return d


def _derive_seeds(master_seed: int) -> dict:
    state = np.random.SeedSequence(master_seed).generate_state(10)
    return {
        "forest": int(state[0]),
        "first_layer_folds": int(state[1]),
        "learners": {kind: int(state[2 + i]) for i, kind in enumerate(KINDS)},
        "eval_folds": int(state[8]),
        "iowa": int(state[9]),
    }


@dataclass
class ProvenanceLog:
    """Which folds every fitted component trained on and which it scored."""

    entries: list = field(default_factory=list)

    def record(self, component: str, trained_folds, scored_folds) -> None:
        self.entries.append((component, frozenset(trained_folds), frozenset(scored_folds)))

    def check(self) -> int:
        """Raise LeakageError on any train/score fold overlap; return count checked."""
        for component, trained, scored in self.entries:
            overlap = trained & scored
            if overlap:
                raise LeakageError(
                    f"{component} scored folds {sorted(overlap)} it was trained on"
                )
        return len(self.entries)


@dataclass
class MetricsReport:
    pooled_counts: dict
    pooled: dict
    degenerate: list
    per_fold: list
    mean_std: dict
    roc: RocCurve
    first_layer_accuracy: dict
    selection_share: dict
    leakage: dict
    config_echo: dict
    seed: int

    def to_json_dict(self, generated_at: str | None = None) -> dict:
        if generated_at is None:
            generated_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return {
            "generated_at": generated_at,
            "seed": self.seed,
            "config": self.config_echo,
            "counts": self.pooled_counts,
            "metrics": self.pooled,
            "degenerate_metrics": self.degenerate,
            "per_fold": self.per_fold,
            "mean_std": self.mean_std,
            "auc": self.roc.auc,
            "roc_points": [[fpr, tpr] for fpr, tpr in self.roc.points],
            "first_layer_accuracy": self.first_layer_accuracy,
            "selection_share": self.selection_share,
            "leakage_checks": self.leakage,
        }


def _fusion_params(config: RunConfig) -> dict:
    return {
        "ridge_lambda": config.ridge_lambda,
        "iowa_learning_rate": config.iowa_learning_rate,
        "iowa_max_epochs": config.iowa_max_epochs,
        "iowa_tolerance": config.iowa_tolerance,
    }


def _cross_validated_evaluation(
    pm: PredictionMatrix,
    k_folds: int,
    fold_seed: int,
    fusion_params: dict,
    iowa_seed: int,
    override,
    provenance: ProvenanceLog,
    config_echo: dict,
    seed: int,
):
    """Second-level CV: refit the fusion stack per arrangement, score held-out."""
    folds2 = stratified_fold_assignments(pm.labels, k_folds, fold_seed)
    n = pm.n_samples
    f_dowa = np.empty((n, 2))
    f_iowa = np.empty((n, 2))
    selected = np.empty((n, 2))
    sources = np.empty(n, dtype=object)
    scores = np.empty(n)
    predicted = np.empty(n, dtype=int)
    all_folds = frozenset(range(k_folds))
    per_fold = []

    for f in range(k_folds):
        te = folds2 == f
        stack = fit_fusion_stack(
            pm.rows(~te),
            iowa_seed=iowa_seed + 2 * f,
            override=override,
            **fusion_params,
        )
        out = apply_fusion_stack(stack, pm.rows(te))
        f_dowa[te] = out.f_dowa
        f_iowa[te] = out.f_iowa
        selected[te] = out.selected
        sources[te] = out.sources
        scores[te] = out.scores
        predicted[te] = out.predicted
        provenance.record(
            f"fusion_stack[arrangement {f}]", all_folds - {f}, frozenset({f})
        )
        counts = confusion_from_predictions(pm.labels[te], out.predicted)
        sm = compute_metrics(counts)
        record = {"fold": f, "n_samples": int(te.sum())}
        record.update(tp=counts.tp, fp=counts.fp, tn=counts.tn, fn=counts.fn)
        record.update({k: float(v) for k, v in sm.as_dict().items()})
        record["degenerate"] = list(sm.degenerate)
        per_fold.append(record)

    pooled_counts = confusion_from_predictions(pm.labels, predicted)
    pooled = compute_metrics(pooled_counts)
    roc = roc_curve(scores, pm.labels)
    mean_std = {
        name: {
            "mean": float(np.mean([r[name] for r in per_fold])),
            "std": float(np.std([r[name] for r in per_fold], ddof=1)),
        }
        for name in METRIC_NAMES
    }
    n_checked = provenance.check()
    report = MetricsReport(
        pooled_counts={
            "tp": pooled_counts.tp,
            "fp": pooled_counts.fp,
            "tn": pooled_counts.tn,
            "fn": pooled_counts.fn,
        },
        pooled={k: float(v) for k, v in pooled.as_dict().items()},
        degenerate=list(pooled.degenerate),
        per_fold=per_fold,
        mean_std=mean_std,
        roc=roc,
        first_layer_accuracy={k: float(v) for k, v in pm.accuracies().items()},
        selection_share={
            "dowa": float((sources == "dowa").mean()),
            "iowa": float((sources == "iowa").mean()),
        },
        leakage={"components_checked": n_checked, "passed": True},
        config_echo=config_echo,
        seed=seed,
    )
    traces = _fusion_traces(pm, f_dowa, f_iowa, sources, scores, predicted)
    return report, traces


def _fusion_traces(pm, f_dowa, f_iowa, sources, scores, predicted) -> list:
    rows = []
    for i in range(pm.n_samples):
        rows.append(
            [
                int(pm.sample_ids[i]),
                float(f_dowa[i, 0]),
                float(f_dowa[i, 1]),
                float(f_iowa[i, 0]),
                float(f_iowa[i, 1]),
                str(sources[i]),
                float(scores[i]),
                int(predicted[i]),
                int(pm.labels[i]),
            ]
        )
    return rows


@dataclass
class ExperimentResult:
    config: RunConfig
    screening: ScreeningReport
    prediction_matrix: PredictionMatrix
    stack: FusionStack
    artifact: dict
    metrics: MetricsReport | None
    traces: list | None
    provenance: ProvenanceLog
    paths: dict = field(default_factory=dict)


def build_artifact(
    config: RunConfig, seeds: dict, specs, screening: ScreeningReport, stack: FusionStack
) -> dict:
    return {
        "format": ARTIFACT_FORMAT,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "master_seed": config.seed,
        "folds": config.folds,
        "label_column": config.label_column,
        "seeds": {
            "forest": seeds["forest"],
            "first_layer_folds": seeds["first_layer_folds"],
            "eval_folds": seeds["eval_folds"],
            "iowa": seeds["iowa"],
        },
        "screening": {
            "threshold_percent": screening.threshold_percent,
            "retained": list(screening.retained),
            "contributions": {
                name: float(pct)
                for name, pct in zip(screening.feature_names, screening.contributions)
            },
            "forest": {
                "n_trees": config.forest_trees,
                "max_depth": config.forest_max_depth,
                "min_samples_split": config.forest_min_samples_split,
                "seed": seeds["forest"],
            },
        },
        "learners": [
            {"kind": s.kind, "hyperparameters": dict(s.hyperparameters), "seed": s.seed}
            for s in specs
        ],
        "grouping": {
            "dowa": list(stack.plan.dowa_group),
            "iowa": list(stack.plan.iowa_group),
            "overridden": stack.plan.overridden,
            "spread": stack.plan.spread,
            "mean_correlation": stack.plan.mean_correlation,
            "correlations": stack.plan.correlations.tolist(),
        },
        "iowa": {
            "learning_rate": config.iowa_learning_rate,
            "max_epochs": config.iowa_max_epochs,
            "tolerance": config.iowa_tolerance,
            "class0": {
                "betas": stack.iowa_class0.betas.tolist(),
                "epochs_run": stack.iowa_class0.epochs_run,
                "final_mean_error": stack.iowa_class0.final_mean_error,
            },
            "class1": {
                "betas": stack.iowa_class1.betas.tolist(),
                "epochs_run": stack.iowa_class1.epochs_run,
                "final_mean_error": stack.iowa_class1.final_mean_error,
            },
        },
        "ridge": {
            "coefficients": stack.ridge.coefficients.tolist(),
            "bias": stack.ridge.bias,
            "lambda": stack.ridge.ridge_lambda,
        },
    }


def stack_from_artifact(artifact: dict) -> FusionStack:
    """Rebuild the fitted fusion stack recorded in an artifact."""
    g = artifact["grouping"]
    plan = GroupingPlan(
        tuple(g["dowa"]),
        tuple(g["iowa"]),
        np.asarray(g["correlations"], dtype=float),
        float(g["spread"]),
        float(g["mean_correlation"]),
        bool(g["overridden"]),
    )
    iowa_cfg = artifact["iowa"]
    models = []
    for key in ("class0", "class1"):
        m = iowa_cfg[key]
        models.append(
            IowaModel(
                betas=np.asarray(m["betas"], dtype=float),
                learning_rate=float(iowa_cfg["learning_rate"]),
                epochs_run=int(m["epochs_run"]),
                final_mean_error=float(m["final_mean_error"]),
            )
        )
    r = artifact["ridge"]
    ridge = RidgeModel(np.asarray(r["coefficients"], dtype=float), float(r["bias"]), float(r["lambda"]))
    return FusionStack(plan, models[0], models[1], ridge)


def specs_from_artifact(artifact: dict) -> list:
    return [
        ClassifierSpec(e["kind"], dict(e["hyperparameters"]), int(e["seed"]))
        for e in artifact["learners"]
    ]


def run_experiment(
    config: RunConfig,
    data: Dataset | None = None,
    train_only: bool = False,
    write: bool = True,
) -> ExperimentResult:
    """Screen, fit, and (unless train_only) cross-validate the full stack.

    Deterministic for a given (data, config): every random stream derives
    from the master seed.
    """
    if data is None:
        data = load_csv(config.data_path, config.label_column)
    seeds = _derive_seeds(config.seed)
    provenance = ProvenanceLog()

    forest_config = ForestConfig(
        n_trees=config.forest_trees,
        max_depth=config.forest_max_depth,
        min_samples_split=config.forest_min_samples_split,
        seed=seeds["forest"],
    )
    screening = screen(data, forest_config, config.screening_threshold)
    if not screening.retained:
        raise DataError(
            f"screening at {config.screening_threshold}% removed every feature; "
            "lower the threshold"
        )
    reduced = data.restrict(screening.retained)

    specs = [
        ClassifierSpec(kind, dict(config.learner_hyperparameters.get(kind, {})), seeds["learners"][kind])
        for kind in KINDS
    ]
    pm = fit_predict_out_of_fold(
        specs, reduced, config.folds, seeds["first_layer_folds"], provenance
    )

    # Training path: the deployable stack is fitted on the full out-of-fold table.
    stack = fit_fusion_stack(
        pm, iowa_seed=seeds["iowa"], override=config.groups, **_fusion_params(config)
    )
    artifact = build_artifact(config, seeds, specs, screening, stack)

    metrics = traces = None
    if not train_only:
        metrics, traces = _cross_validated_evaluation(
            pm,
            config.folds,
            seeds["eval_folds"],
            _fusion_params(config),
            seeds["iowa"] + 1000,
            config.groups,
            provenance,
            config.echo(),
            config.seed,
        )

    result = ExperimentResult(
        config, screening, pm, stack, artifact, metrics, traces, provenance
    )
    if write:
        result.paths = write_experiment_outputs(result, config.out_dir, train_only)
    return result


def evaluate_with_artifact(
    data: Dataset,
    artifact: dict,
    config_echo: dict | None = None,
):
    """Leakage-safe evaluation of an artifact's configuration on a dataset.

    First-layer probabilities are recomputed out-of-fold with the
    artifact's specs and seeds; the fusion stack is refitted per evaluation
    arrangement (the artifact's learned weights are for deployment via
    ``fuse``, not for scoring data they may have been fitted on).
    """
    if artifact.get("format") != ARTIFACT_FORMAT:
        raise DataError(f"not a recognized ensemble artifact (format {artifact.get('format')!r})")
    retained = artifact["screening"]["retained"]
    reduced = data.restrict(retained)
    specs = specs_from_artifact(artifact)
    provenance = ProvenanceLog()
    pm = fit_predict_out_of_fold(
        specs,
        reduced,
        int(artifact["folds"]),
        int(artifact["seeds"]["first_layer_folds"]),
        provenance,
    )
    iowa_cfg = artifact["iowa"]
    fusion_params = {
        "ridge_lambda": float(artifact["ridge"]["lambda"]),
        "iowa_learning_rate": float(iowa_cfg["learning_rate"]),
        "iowa_max_epochs": int(iowa_cfg["max_epochs"]),
        "iowa_tolerance": float(iowa_cfg["tolerance"]),
    }
    override = tuple(artifact["grouping"]["dowa"]) if artifact["grouping"]["overridden"] else None
    if config_echo is None:
        config_echo = {"artifact_master_seed": artifact["master_seed"], "folds": artifact["folds"]}
    metrics, traces = _cross_validated_evaluation(
        pm,
        int(artifact["folds"]),
        int(artifact["seeds"]["eval_folds"]),
        fusion_params,
        int(artifact["seeds"]["iowa"]) + 1000,
        override,
        provenance,
        config_echo,
        int(artifact["master_seed"]),
    )
    return metrics, traces, pm, provenance


def fuse_prediction_matrix(pm: PredictionMatrix, artifact: dict):
    """Apply an artifact's fitted stack to externally supplied probabilities."""
    if artifact.get("format") != ARTIFACT_FORMAT:
        raise DataError(f"not a recognized ensemble artifact (format {artifact.get('format')!r})")
    stack = stack_from_artifact(artifact)
    for name in stack.plan.dowa_group + stack.plan.iowa_group:
        pm.learner_index(name)  # raises DataError when a column is missing
    outcome = apply_fusion_stack(stack, pm)
    traces = _fusion_traces(
        pm, outcome.f_dowa, outcome.f_iowa, outcome.sources, outcome.scores, outcome.predicted
    )
    return outcome, traces


# ---------------------------------------------------------------- file I/O


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def write_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"cannot parse JSON file {path}: {exc}") from None


def write_roc_csv(roc: RocCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "tpr"])
        for thr, (fpr, tpr) in zip(roc.thresholds, roc.points):
            writer.writerow([repr(float(thr)), repr(float(fpr)), repr(float(tpr))])


TRACE_HEADER = [
    "sample_id",
    "f_dowa_0",
    "f_dowa_1",
    "f_iowa_0",
    "f_iowa_1",
    "source",
    "meta_score",
    "predicted",
    "true",
]


def write_fusion_trace_csv(traces: list, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for row in traces:
            out = list(row)
            for j in (1, 2, 3, 4, 6):
                out[j] = repr(float(out[j]))
            writer.writerow(out)


def write_screening_outputs(report: ScreeningReport, out_dir) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, "screening.json")
    csv_path = os.path.join(out_dir, "screening_contributions.csv")
    write_json(report.to_json_dict(), json_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "contribution_percent"])
        for name, pct in report.ranked():
            writer.writerow([name, repr(float(pct))])
    return {"screening_json": json_path, "screening_csv": csv_path}


def write_experiment_outputs(result: ExperimentResult, out_dir, train_only: bool) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    paths = write_screening_outputs(result.screening, out_dir)
    paths["prediction_matrix"] = os.path.join(out_dir, "prediction_matrix.csv")
    result.prediction_matrix.to_csv(paths["prediction_matrix"])
    paths["artifact"] = os.path.join(out_dir, "ensemble.json")
    write_json(result.artifact, paths["artifact"])
    if not train_only and result.metrics is not None:
        paths.update(write_metrics_outputs(result.metrics, result.traces, out_dir))
    return paths


def write_metrics_outputs(metrics: MetricsReport, traces, out_dir) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "metrics": os.path.join(out_dir, "metrics.json"),
        "roc": os.path.join(out_dir, "roc.csv"),
        "fusion_trace": os.path.join(out_dir, "fusion_trace.csv"),
    }
    write_json(metrics.to_json_dict(), paths["metrics"])
    write_roc_csv(metrics.roc, paths["roc"])
    write_fusion_trace_csv(traces, paths["fusion_trace"])
    return paths


def render_metrics_text(doc: dict) -> str:
    """Human-readable summary of a metrics JSON document."""
    lines = []
    lines.append("Ensemble evaluation summary")
    lines.append(f"  generated at: {doc.get('generated_at', '?')}")
    lines.append(f"  seed: {doc.get('seed')}")
    counts = doc.get("counts", {})
    lines.append(
        "  confusion counts: "
        f"tp={counts.get('tp')} fp={counts.get('fp')} tn={counts.get('tn')} fn={counts.get('fn')}"
    )
    lines.append("")
    lines.append("  metric        pooled     mean +/- std over folds")
    mean_std = doc.get("mean_std", {})
    for name in METRIC_NAMES:
        pooled = doc.get("metrics", {}).get(name)
        ms = mean_std.get(name, {})
        lines.append(
            f"  {name:<12}  {pooled:.6f}   {ms.get('mean', float('nan')):.6f} +/- "
            f"{ms.get('std', float('nan')):.6f}"
        )
    lines.append(f"  {'auc':<12}  {doc.get('auc'):.6f}")
    degenerate = doc.get("degenerate_metrics") or []
    if degenerate:
        lines.append(f"  degenerate (zero-denominator) metrics: {', '.join(degenerate)}")
    lines.append("")
    share = doc.get("selection_share", {})
    lines.append(
        f"  selection share: dowa={share.get('dowa', 0):.4f} iowa={share.get('iowa', 0):.4f}"
    )
    acc = doc.get("first_layer_accuracy", {})
    if acc:
        lines.append("  first-layer out-of-fold accuracy:")
        for name in sorted(acc):
            lines.append(f"    {name:<15} {acc[name]:.6f}")
    leak = doc.get("leakage_checks", {})
    lines.append(
        f"  leakage checks: {leak.get('components_checked', 0)} components, "
        f"passed={leak.get('passed')}"
    )
    return "\n".join(lines) + "\n"
