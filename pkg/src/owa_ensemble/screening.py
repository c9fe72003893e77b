"""Bootstrap-forest predictor screening.

A forest of binary decision trees is grown, each on a bootstrap resample
of the rows. Every split minimizes Gini impurity over a random subset of
features, with candidate thresholds at the midpoints between consecutive
sorted unique values. A feature's contribution is its share of the total
size-weighted impurity reduction across the whole forest, expressed in
percent; screening drops the features whose share falls under a threshold.

Trees are built independently from per-tree seed streams and reduced in
index order, so a fitted forest is reproducible (and could be built in
parallel without changing the result). Fitted forests are immutable and
safe for concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError

__all__ = [
    "ForestConfig",
    "ScreeningReport",
    "BootstrapForest",
    "fit_bootstrap_forest",
    "feature_contributions",
    "screen",
]


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 10
    min_samples_split: int = 5
    features_per_split: int | None = None  # None resolves to ceil(sqrt(d))
    seed: int = 0

    def validate(self, n_features: int) -> int:
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise ConfigError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ConfigError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        k = self.features_per_split
        if k is None:
            k = math.ceil(math.sqrt(n_features))
        if not 1 <= k <= n_features:
            raise ConfigError(f"features_per_split must be in [1, {n_features}], got {k}")
        return k


@dataclass
class _Tree:
    """Flat array representation; node 0 is the root, leaves have feature -1."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        return len(self.feature) - 1


@dataclass
class BootstrapForest:
    feature_names: list
    trees: list
    raw_importance: np.ndarray  # summed size-weighted Gini decrease per feature

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _best_split(X, y, idx, feat_ids):
    """Best (weighted child impurity, feature, threshold, left positions).

    Returns None when no feature in ``feat_ids`` has two distinct values.
    Thresholds are midpoints between consecutive sorted unique values; the
    partition is made positionally on the sorted order, so adjacent floats
    whose midpoint rounds onto one of them still split cleanly.
    """
    m = idx.size
    best = None
    for f in feat_ids:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        cuts = np.nonzero(xs[1:] > xs[:-1])[0]
        if cuts.size == 0:
            continue
        pos_prefix = np.cumsum(y[idx[order]])
        total_pos = pos_prefix[-1]
        n_left = (cuts + 1).astype(float)
        n_right = m - n_left
        pos_left = pos_prefix[cuts].astype(float)
        pos_right = total_pos - pos_left
        pl = pos_left / n_left
        pr = pos_right / n_right
        gini_left = 1.0 - pl**2 - (1.0 - pl) ** 2
        gini_right = 1.0 - pr**2 - (1.0 - pr) ** 2
        weighted = (n_left * gini_left + n_right * gini_right) / m
        j = int(np.argmin(weighted))
        if best is None or weighted[j] < best[0]:
            thr = 0.5 * (xs[cuts[j]] + xs[cuts[j] + 1])
            best = (float(weighted[j]), int(f), thr, idx[order[: cuts[j] + 1]], idx[order[cuts[j] + 1 :]])
    return best


def _grow_tree(X, y, config: ForestConfig, k_features: int, rng, importance) -> _Tree:
    n_total = X.shape[0]
    d = X.shape[1]
    bootstrap = rng.integers(0, n_total, size=n_total)
    tree = _Tree()
    root = tree.add_node()
    stack = [(root, bootstrap, 0)]
    while stack:
        node, idx, depth = stack.pop()
        m = idx.size
        n_pos = int(y[idx].sum())
        if depth >= config.max_depth or m < config.min_samples_split or n_pos in (0, m):
            continue
        if k_features >= d:
            feat_ids = np.arange(d)
        else:
            feat_ids = rng.choice(d, size=k_features, replace=False)
        split = _best_split(X, y, idx, feat_ids)
        if split is None:
            continue
        child_impurity, f, thr, left_idx, right_idx = split
        p = n_pos / m
        parent_gini = 1.0 - p * p - (1.0 - p) ** 2
        importance[f] += (m / n_total) * (parent_gini - child_impurity)
        tree.feature[node] = f
        tree.threshold[node] = thr
        left = tree.add_node()
        right = tree.add_node()
        tree.left[node] = left
        tree.right[node] = right
        stack.append((left, left_idx, depth + 1))
        stack.append((right, right_idx, depth + 1))
    return tree


def fit_bootstrap_forest(data: Dataset, config: ForestConfig = ForestConfig()) -> BootstrapForest:
    """Grow the forest; deterministic for a given (data, config)."""
    k_features = config.validate(data.n_features)
    if data.n_samples < 2:
        raise DataError(f"need at least 2 samples to fit a forest, got {data.n_samples}")
    counts = np.bincount(data.y, minlength=2)
    if counts[0] == 0 or counts[1] == 0:
        raise DataError("degenerate labels: both classes must be present")

    X = np.ascontiguousarray(data.X)
    y = data.y.astype(np.int64)
    importance = np.zeros(data.n_features)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees = [
        _grow_tree(X, y, config, k_features, np.random.default_rng(s), importance)
        for s in seeds
    ]
    return BootstrapForest(list(data.feature_names), trees, importance)


def feature_contributions(forest: BootstrapForest) -> np.ndarray:
    """Per-feature contribution percentages, aligned with feature_names.

    Nonnegative and summing to 100. A forest that never split (constant
    features) carries no ranking information and is rejected.
    """
    total = forest.raw_importance.sum()
    if total <= 0.0:
        raise DataError("forest made no informative splits; cannot rank features")
    return forest.raw_importance / total * 100.0


@dataclass
class ScreeningReport:
    threshold_percent: float
    feature_names: list
    contributions: np.ndarray  # percents, aligned with feature_names
    retained: list  # original column order

    def ranked(self):
        """(name, contribution_percent) pairs sorted by descending contribution."""
        order = np.argsort(-self.contributions, kind="stable")
        return [(self.feature_names[i], float(self.contributions[i])) for i in order]

    def to_json_dict(self) -> dict:
        return {
            "threshold": self.threshold_percent,
            "features": [
                {"name": name, "contribution_percent": pct} for name, pct in self.ranked()
            ],
            "retained": list(self.retained),
        }


def screen(
    data: Dataset,
    config: ForestConfig = ForestConfig(),
    threshold_percent: float = 0.5,
) -> ScreeningReport:
    """Rank features by forest contribution and drop those under threshold."""
    if not 0.0 <= threshold_percent <= 100.0:
        raise ConfigError(f"threshold_percent must be in [0, 100], got {threshold_percent}")
    forest = fit_bootstrap_forest(data, config)
    contributions = feature_contributions(forest)
    retained = [
        name
        for name, pct in zip(forest.feature_names, contributions)
        if pct >= threshold_percent
    ]
    return ScreeningReport(threshold_percent, forest.feature_names, contributions, retained)
