"""First-layer probabilistic classifiers behind one small interface.

Six kinds are available: gradient-boosted trees, SGD logistic regression,
extra trees, AdaBoost over depth-1 stumps, a linear hinge-loss SVM with a
post-hoc sigmoid probability fit, and a one-hidden-layer MLP. scikit-learn
supplies the underlying estimators; this module owns the configuration
surface, split-local feature standardization for the gradient-based kinds,
and the out-of-fold prediction protocol that keeps every sample scored by
a model that never saw its fold.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import (
    AdaBoostClassifier,
    ExtraTreesClassifier,
    GradientBoostingClassifier,
)
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression, SGDClassifier
from sklearn.neural_network import MLPClassifier
from sklearn.tree import DecisionTreeClassifier

from .dataset import Dataset
from .errors import ConfigError, DataError, DimensionError, StratificationError

KINDS = ("boosted_trees", "sgd", "extra_trees", "adaboost", "svm", "mlp")

_ALLOWED_HYPERPARAMETERS = {
    "boosted_trees": {"n_trees", "max_depth", "shrinkage"},
    "sgd": {"learning_rate", "epochs"},
    "extra_trees": {"n_trees"},
    "adaboost": {"n_stumps"},
    "svm": {"learning_rate", "epochs"},
    "mlp": {"hidden_units", "learning_rate", "epochs", "momentum"},
}

# Gradient-based kinds get split-local standardization; trees take raw features.
_SCALED_KINDS = {"sgd", "svm", "mlp"}


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0


def default_specs(seed: int = 0):
    """The standard six-classifier roster with seeds derived from one seed."""
    return [ClassifierSpec(kind, {}, seed + i) for i, kind in enumerate(KINDS)]


def _hp(spec: ClassifierSpec, name: str, default):
    return type(default)(spec.hyperparameters.get(name, default))


class _Learner:
    """One first-layer classifier: fit(X, y) then predict_proba(X) -> (N, 2).

    ``proba_mode`` selects how class probabilities are produced: "native"
    uses the estimator's own predict_proba, "sigmoid_margin" maps the
    decision margin through a logistic, "platt" fits a sigmoid to the
    training decision values after the estimator is trained. Standardization
    statistics, when used, come from the fitted rows only.
    """

    def __init__(self, spec: ClassifierSpec, estimator, proba_mode: str = "native"):
        self.spec = spec
        self.kind = spec.kind
        self.estimator = estimator
        self.proba_mode = proba_mode
        self._scale = spec.kind in _SCALED_KINDS
        self._mean = None
        self._std = None
        self._platt = None

    def _transform(self, X):
        X = np.asarray(X, dtype=float)
        if not self._scale:
            return X
        return (X - self._mean) / self._std

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        if self._scale:
            self._mean = X.mean(axis=0)
            std = X.std(axis=0)
            self._std = np.where(std == 0.0, 1.0, std)
        Xs = self._transform(X)
        with warnings.catch_warnings():
            # Epoch budgets are intentional; a non-converged fit is still valid.
            warnings.simplefilter("ignore", ConvergenceWarning)
            self.estimator.fit(Xs, y)
        if self.proba_mode == "platt":
            scores = self.estimator.decision_function(Xs).reshape(-1, 1)
            self._platt = LogisticRegression().fit(scores, y)
        return self

    def predict_proba(self, X):
        Xs = self._transform(X)
        if self.proba_mode == "native":
            proba = self.estimator.predict_proba(Xs)
            p1 = proba[:, list(self.estimator.classes_).index(1)]
        elif self.proba_mode == "sigmoid_margin":
            p1 = _sigmoid(self.estimator.decision_function(Xs))
        elif self.proba_mode == "platt":
            scores = self.estimator.decision_function(Xs).reshape(-1, 1)
            p1 = self._platt.predict_proba(scores)[:, list(self._platt.classes_).index(1)]
        else:  # pragma: no cover
            raise ConfigError(f"unknown proba mode {self.proba_mode!r}")
        return np.column_stack([1.0 - p1, p1])


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def build(spec: ClassifierSpec) -> _Learner:
    """Construct an untrained classifier of the requested kind."""
    if spec.kind not in KINDS:
        raise ConfigError(f"unknown classifier kind {spec.kind!r}; valid kinds: {KINDS}")
    unknown = set(spec.hyperparameters) - _ALLOWED_HYPERPARAMETERS[spec.kind]
    if unknown:
        raise ConfigError(
            f"unknown hyperparameters for {spec.kind}: {sorted(unknown)} "
            f"(allowed: {sorted(_ALLOWED_HYPERPARAMETERS[spec.kind])})"
        )

    if spec.kind == "boosted_trees":
        est = GradientBoostingClassifier(
            n_estimators=_hp(spec, "n_trees", 100),
            max_depth=_hp(spec, "max_depth", 3),
            learning_rate=_hp(spec, "shrinkage", 0.1),
            random_state=spec.seed,
        )
        return _Learner(spec, est)
    if spec.kind == "sgd":
        est = SGDClassifier(
            loss="log_loss",
            penalty=None,
            learning_rate="constant",
            eta0=_hp(spec, "learning_rate", 0.01),
            max_iter=_hp(spec, "epochs", 50),
            tol=None,
            random_state=spec.seed,
        )
        return _Learner(spec, est)
    if spec.kind == "extra_trees":
        est = ExtraTreesClassifier(
            n_estimators=_hp(spec, "n_trees", 100),
            random_state=spec.seed,
        )
        return _Learner(spec, est)
    if spec.kind == "adaboost":
        est = AdaBoostClassifier(
            estimator=DecisionTreeClassifier(max_depth=1),
            n_estimators=_hp(spec, "n_stumps", 50),
            random_state=spec.seed,
        )
        return _Learner(spec, est, proba_mode="sigmoid_margin")
    if spec.kind == "svm":
        est = SGDClassifier(
            loss="hinge",
            penalty=None,
            learning_rate="constant",
            eta0=_hp(spec, "learning_rate", 0.01),
            max_iter=_hp(spec, "epochs", 50),
            tol=None,
            random_state=spec.seed,
        )
        return _Learner(spec, est, proba_mode="platt")
    est = MLPClassifier(
        hidden_layer_sizes=(_hp(spec, "hidden_units", 32),),
        activation="tanh",
        solver="sgd",
        learning_rate_init=_hp(spec, "learning_rate", 0.01),
        momentum=_hp(spec, "momentum", 0.9),
        nesterovs_momentum=False,
        max_iter=_hp(spec, "epochs", 200),
        random_state=spec.seed,
    )
    return _Learner(spec, est)


def stratified_fold_assignments(labels, k_folds: int, seed: int) -> np.ndarray:
    """Assign each sample to one of k folds, both classes in every fold.

    Members of each class are shuffled with the seed and dealt round-robin,
    so any class with at least k members reaches every fold.
    """
    if k_folds < 2:
        raise ConfigError(f"k_folds must be >= 2, got {k_folds}")
    labels = np.asarray(labels, dtype=int)
    counts = np.bincount(labels, minlength=2)
    for c in (0, 1):
        if counts[c] < k_folds:
            raise StratificationError(
                f"class {c} has {counts[c]} samples, fewer than {k_folds} folds; "
                "some fold would miss the class"
            )
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.shape[0], dtype=int)
    for c in (0, 1):
        idx = rng.permutation(np.nonzero(labels == c)[0])
        folds[idx] = np.arange(idx.size) % k_folds
    return folds


@dataclass
class PredictionMatrix:
    """Out-of-fold class probabilities for every (sample, learner) pair.

    ``probs[i, j]`` is the (p0, p1) row of learner j for sample i, produced
    by a model trained without sample i's fold. This table is the currency
    between the first layer and the fusion layers, and round-trips through
    a CSV interchange format.
    """

    learner_names: list
    probs: np.ndarray  # (N, K, 2)
    folds: np.ndarray  # (N,)
    labels: np.ndarray  # (N,)
    sample_ids: np.ndarray  # (N,)

    def validate(self):
        if self.probs.ndim != 3 or self.probs.shape[2] != 2:
            raise DimensionError("probability table must have shape (N, K, 2)")
        if self.probs.shape[1] != len(self.learner_names):
            raise DimensionError("probability table and learner names disagree")
        if not np.all(np.isfinite(self.probs)):
            raise DataError("probability table contains non-finite values")
        if self.probs.min() < -1e-9 or self.probs.max() > 1 + 1e-9:
            raise DataError("probabilities must lie in [0, 1]")
        sums = self.probs.sum(axis=2)
        if np.abs(sums - 1.0).max() > 1e-6:
            raise DataError("each (p0, p1) row must sum to 1 within 1e-6")
        return self

    @property
    def n_samples(self) -> int:
        return self.probs.shape[0]

    def learner_index(self, name: str) -> int:
        try:
            return self.learner_names.index(name)
        except ValueError:
            raise DataError(f"prediction matrix has no learner {name!r}") from None

    def class_probs(self, names, class_idx: int) -> np.ndarray:
        """(N, len(names)) matrix of one class's probabilities for the named learners."""
        cols = [self.learner_index(n) for n in names]
        return self.probs[:, cols, class_idx]

    def rows(self, selector) -> "PredictionMatrix":
        return PredictionMatrix(
            self.learner_names,
            self.probs[selector],
            self.folds[selector],
            self.labels[selector],
            self.sample_ids[selector],
        )

    def accuracies(self) -> dict:
        """Per-learner accuracy of thresholding p1 >= p0 against the labels."""
        out = {}
        for j, name in enumerate(self.learner_names):
            pred = (self.probs[:, j, 1] >= self.probs[:, j, 0]).astype(int)
            out[name] = float((pred == self.labels).mean())
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["sample_id", "fold", "true_class"]
            for name in self.learner_names:
                header += [f"{name}_p0", f"{name}_p1"]
            writer.writerow(header)
            for i in range(self.n_samples):
                row = [int(self.sample_ids[i]), int(self.folds[i]), int(self.labels[i])]
                for j in range(len(self.learner_names)):
                    row += [repr(float(self.probs[i, j, 0])), repr(float(self.probs[i, j, 1]))]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "PredictionMatrix":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"empty prediction matrix file: {path}") from None
            if header[:3] != ["sample_id", "fold", "true_class"]:
                raise DataError(
                    "prediction matrix must start with columns sample_id, fold, true_class"
                )
            names = []
            for col in header[3 : len(header) : 2]:
                if not col.endswith("_p0"):
                    raise DataError(f"expected a *_p0 column, found {col!r}")
                names.append(col[:-3])
            for name, col in zip(names, header[4 : len(header) : 2]):
                if col != f"{name}_p1":
                    raise DataError(f"expected column {name}_p1, found {col!r}")
            rows = list(reader)
        if not rows:
            raise DataError(f"no data rows in prediction matrix file: {path}")
        n, k = len(rows), len(names)
        probs = np.empty((n, k, 2))
        folds = np.empty(n, dtype=int)
        labels = np.empty(n, dtype=int)
        ids = np.empty(n, dtype=int)
        for i, row in enumerate(rows):
            if len(row) != 3 + 2 * k:
                raise DataError(f"data row {i} has {len(row)} cells, expected {3 + 2 * k}")
            try:
                ids[i] = int(row[0])
                folds[i] = int(row[1])
                labels[i] = int(row[2])
                values = [float(v) for v in row[3:]]
            except ValueError as exc:
                raise DataError(f"non-numeric cell at data row {i}: {exc}") from None
            probs[i] = np.asarray(values).reshape(k, 2)
        if not np.isin(labels, (0, 1)).all():
            raise DataError("true_class column must contain only 0 and 1")
        return cls(names, probs, folds, labels, ids).validate()


def fit_predict_out_of_fold(
    specs,
    data: Dataset,
    k_folds: int = 10,
    seed: int = 0,
    provenance=None,
) -> PredictionMatrix:
    """Out-of-fold probabilities for every spec over stratified folds.

    Each classifier (including its scaling statistics) is fitted k times,
    once per held-out fold, and scores only that fold.
    """
    folds = stratified_fold_assignments(data.y, k_folds, seed)
    n, k = data.n_samples, len(specs)
    probs = np.empty((n, k, 2))
    all_folds = frozenset(range(k_folds))
    for j, spec in enumerate(specs):
        for f in range(k_folds):
            te = folds == f
            tr = ~te
            clf = build(spec).fit(data.X[tr], data.y[tr])
            probs[te, j, :] = clf.predict_proba(data.X[te])
            if provenance is not None:
                provenance.record(
                    f"first_layer:{spec.kind}[heldout fold {f}]",
                    trained_folds=all_folds - {f},
                    scored_folds=frozenset({f}),
                )
    matrix = PredictionMatrix(
        [s.kind for s in specs], probs, folds, data.y.copy(), np.arange(n)
    )
    return matrix.validate()
