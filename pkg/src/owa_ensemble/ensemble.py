"""Fusion layers over the first-layer probability table.

The six classifiers are split into two groups of three by how close their
pairwise prediction correlations are: the tightest triple feeds the DOWA
operator (which punishes outlier predictions, so it needs like-minded
members) and the remaining three feed the learned IOWA operator. The
attention step aggregates each group's class probabilities into a 2-vector
per sample; the selection step keeps whichever vector separates the two
classes more confidently; a ridge model on the selected vectors makes the
final call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple

import numpy as np

from . import owa
from .errors import ConfigError, DataError, DimensionError
from .learners import PredictionMatrix

GROUP_SIZE = 3
N_LEARNERS = 6


def correlation_matrix(preds: PredictionMatrix) -> np.ndarray:
    """Pearson correlation between the learners' class-1 probability columns.

    A zero-variance column cannot be correlated with anything; its
    off-diagonal entries are set to 0 and a warning is issued.
    """
    if preds.n_samples < 2:
        raise DataError("need at least 2 samples to correlate predictions")
    p1 = preds.probs[:, :, 1]
    centered = p1 - p1.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    flat = norms == 0.0
    if flat.any():
        names = [preds.learner_names[i] for i in np.nonzero(flat)[0]]
        warnings.warn(
            f"constant prediction columns, correlations set to 0: {names}",
            RuntimeWarning,
            stacklevel=2,
        )
    unit = centered / np.where(flat, 1.0, norms)
    corr = unit.T @ unit
    corr[flat, :] = 0.0
    corr[:, flat] = 0.0
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


@dataclass(frozen=True)
class GroupingPlan:
    """Disjoint 3+3 split of the learners plus the correlations behind it."""

    dowa_group: tuple
    iowa_group: tuple
    correlations: np.ndarray
    spread: float
    mean_correlation: float
    overridden: bool = False


def _triple_stats(corr, triple):
    pair_corrs = [corr[a, b] for a, b in combinations(triple, 2)]
    return float(max(pair_corrs) - min(pair_corrs)), float(np.mean(pair_corrs))


def plan_grouping(corr: np.ndarray, learner_names, override=None) -> GroupingPlan:
    """Choose the DOWA triple as the one with the tightest correlations.

    Over all 20 three-subsets, pick the smallest spread (max minus min of
    the three pairwise correlations); ties prefer the higher mean
    correlation, then the lexicographically first subset in roster order.
    An explicit override names the DOWA group and is used verbatim.
    """
    corr = np.asarray(corr, dtype=float)
    names = list(learner_names)
    if len(names) != N_LEARNERS or corr.shape != (N_LEARNERS, N_LEARNERS):
        raise DimensionError(f"grouping expects {N_LEARNERS} learners and a matching matrix")
    if np.abs(corr - corr.T).max() > 1e-9 or np.abs(np.diag(corr) - 1.0).max() > 1e-9:
        raise DataError("correlation matrix must be symmetric with unit diagonal")

    if override is not None:
        chosen = tuple(override)
        if len(set(chosen)) != GROUP_SIZE or any(n not in names for n in chosen):
            raise ConfigError(
                f"group override must name {GROUP_SIZE} distinct learners from {names}, "
                f"got {list(override)}"
            )
        triple = tuple(names.index(n) for n in chosen)
        spread, mean_corr = _triple_stats(corr, triple)
        rest = tuple(n for n in names if n not in chosen)
        return GroupingPlan(chosen, rest, corr, spread, mean_corr, overridden=True)

    best = None
    for triple in combinations(range(N_LEARNERS), GROUP_SIZE):
        spread, mean_corr = _triple_stats(corr, triple)
        key = (spread, -mean_corr, triple)
        if best is None or key < best[0]:
            best = (key, triple, spread, mean_corr)
    _, triple, spread, mean_corr = best
    dowa = tuple(names[i] for i in triple)
    iowa = tuple(n for n in names if n not in dowa)
    return GroupingPlan(dowa, iowa, corr, spread, mean_corr)


class FusionVector(NamedTuple):
    """Aggregated (class-0, class-1) scores of one operator for one sample."""

    class0_score: float
    class1_score: float
    source: str  # "dowa" or "iowa"

    @property
    def margin(self) -> float:
        return abs(self.class0_score - self.class1_score)


def select(f_dowa: FusionVector, f_iowa: FusionVector) -> FusionVector:
    """Keep the vector with the larger class-score margin; ties go to DOWA."""
    return f_dowa if f_dowa.margin >= f_iowa.margin else f_iowa


def select_rows(f_dowa: np.ndarray, f_iowa: np.ndarray):
    """Vectorized selection. Returns (selected (N, 2), sources (N,) of "dowa"/"iowa")."""
    f_dowa = np.asarray(f_dowa, dtype=float)
    f_iowa = np.asarray(f_iowa, dtype=float)
    if f_dowa.shape != f_iowa.shape or f_dowa.ndim != 2 or f_dowa.shape[1] != 2:
        raise DimensionError("selection expects two (N, 2) score tables of equal shape")
    dowa_wins = np.abs(f_dowa[:, 0] - f_dowa[:, 1]) >= np.abs(f_iowa[:, 0] - f_iowa[:, 1])
    selected = np.where(dowa_wins[:, None], f_dowa, f_iowa)
    sources = np.where(dowa_wins, "dowa", "iowa")
    return selected, sources


def iowa_training_targets(preds: PredictionMatrix, plan: GroupingPlan):
    """Per-class IOWA training sets from the IOWA group's probabilities.

    For class c, every row becomes one sample whose arguments are the
    group's class-c probabilities and whose target is 1 when the row's true
    class is c, else 0.
    """
    out = []
    for c in (0, 1):
        probs = preds.class_probs(plan.iowa_group, c)
        targets = (preds.labels == c).astype(float)
        out.append(
            [
                owa.IowaTrainingSample(tuple(row), t)
                for row, t in zip(probs, targets)
            ]
        )
    return out[0], out[1]


def attention_layer(
    preds: PredictionMatrix,
    plan: GroupingPlan,
    iowa_class0: owa.IowaModel,
    iowa_class1: owa.IowaModel,
):
    """Per-sample fused 2-vectors from both operators.

    DOWA aggregates the DOWA group's class-0 and class-1 probabilities with
    instance-dependent weights; IOWA applies the class-specific learned
    weights to the IOWA group's probabilities. The two entries of each
    output are independent aggregations and are not renormalized.
    """
    if iowa_class0.n != GROUP_SIZE or iowa_class1.n != GROUP_SIZE:
        raise DimensionError(f"IOWA models must have dimension {GROUP_SIZE}")
    f_dowa = np.column_stack(
        [
            owa.dowa_aggregate_rows(preds.class_probs(plan.dowa_group, 0)),
            owa.dowa_aggregate_rows(preds.class_probs(plan.dowa_group, 1)),
        ]
    )
    w0 = owa.iowa_weights(iowa_class0)
    w1 = owa.iowa_weights(iowa_class1)
    iowa0 = -np.sort(-preds.class_probs(plan.iowa_group, 0), axis=1) @ w0
    iowa1 = -np.sort(-preds.class_probs(plan.iowa_group, 1), axis=1) @ w1
    return f_dowa, np.column_stack([iowa0, iowa1])


@dataclass
class RidgeModel:
    """Closed-form L2-regularized linear decision over the fused scores."""

    coefficients: np.ndarray
    bias: float
    ridge_lambda: float


def ridge_fit(features, labels, ridge_lambda: float = 1.0) -> RidgeModel:
    """Fit ridge regression on targets 0 -> -1, 1 -> +1.

    Features are centered so the bias stays unpenalized; the coefficients
    solve (X'X + lambda I) beta = X'y in closed form.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2:
        raise DimensionError("ridge features must be a 2-D matrix")
    if X.shape[0] != y.shape[0]:
        raise DimensionError("features and labels disagree on sample count")
    if X.shape[0] < 3:
        raise DataError(f"need at least 3 samples to fit ridge, got {X.shape[0]}")
    if ridge_lambda <= 0.0:
        raise ConfigError(f"ridge_lambda must be > 0, got {ridge_lambda}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("ridge inputs contain non-finite values")

    targets = np.where(y >= 0.5, 1.0, -1.0)
    x_mean = X.mean(axis=0)
    y_mean = targets.mean()
    Xc = X - x_mean
    yc = targets - y_mean
    d = X.shape[1]
    coef = np.linalg.solve(Xc.T @ Xc + ridge_lambda * np.eye(d), Xc.T @ yc)
    bias = float(y_mean - x_mean @ coef)
    return RidgeModel(coef, bias, float(ridge_lambda))


def ridge_predict(model: RidgeModel, features):
    """(predicted classes, decision scores); class 1 wherever score >= 0."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.coefficients.shape[0]:
        raise DimensionError(
            f"features must be (N, {model.coefficients.shape[0]}), got {X.shape}"
        )
    scores = X @ model.coefficients + model.bias
    return (scores >= 0.0).astype(int), scores


@dataclass
class FusionStack:
    """Everything fitted above the first layer, ready to score new rows."""

    plan: GroupingPlan
    iowa_class0: owa.IowaModel
    iowa_class1: owa.IowaModel
    ridge: RidgeModel


@dataclass
class FusionOutcome:
    """Row-aligned outputs of applying a fusion stack to a prediction matrix."""

    f_dowa: np.ndarray  # (N, 2)
    f_iowa: np.ndarray  # (N, 2)
    selected: np.ndarray  # (N, 2)
    sources: np.ndarray  # (N,) "dowa"/"iowa"
    scores: np.ndarray  # (N,) ridge decision scores
    predicted: np.ndarray  # (N,) 0/1


def fit_fusion_stack(
    preds: PredictionMatrix,
    ridge_lambda: float = 1.0,
    iowa_learning_rate: float = 0.1,
    iowa_max_epochs: int = 200,
    iowa_tolerance: float = 1e-6,
    iowa_seed: int = 0,
    override=None,
) -> FusionStack:
    """Fit grouping, both IOWA models, and the ridge meta-learner on one table."""
    corr = correlation_matrix(preds)
    plan = plan_grouping(corr, preds.learner_names, override=override)
    samples0, samples1 = iowa_training_targets(preds, plan)
    iowa_class0 = owa.iowa_train(
        samples0, iowa_learning_rate, iowa_max_epochs, iowa_tolerance, seed=iowa_seed
    )
    iowa_class1 = owa.iowa_train(
        samples1, iowa_learning_rate, iowa_max_epochs, iowa_tolerance, seed=iowa_seed + 1
    )
    f_dowa, f_iowa = attention_layer(preds, plan, iowa_class0, iowa_class1)
    selected, _ = select_rows(f_dowa, f_iowa)
    ridge = ridge_fit(selected, preds.labels, ridge_lambda)
    return FusionStack(plan, iowa_class0, iowa_class1, ridge)


def apply_fusion_stack(stack: FusionStack, preds: PredictionMatrix) -> FusionOutcome:
    """Score a prediction matrix with an already fitted stack."""
    f_dowa, f_iowa = attention_layer(preds, stack.plan, stack.iowa_class0, stack.iowa_class1)
    selected, sources = select_rows(f_dowa, f_iowa)
    predicted, scores = ridge_predict(stack.ridge, selected)
    return FusionOutcome(f_dowa, f_iowa, selected, sources, scores, predicted)
