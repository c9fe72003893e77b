"""Ordered weighted averaging operators.

Two aggregation operators share the same shape: sort the arguments in
descending order, then take a weighted sum over the rank positions.

* DOWA derives its weights per call from how similar each ordered argument
  is to the argument mean, so an outlying input is down-weighted relative
  to the inputs that agree with each other.
* IOWA keeps a fixed weight vector on a softmax parameterization and learns
  it from (arguments, target) observations by per-sample gradient descent.

Aggregation functions here are pure; ``iowa_train`` mutates only the model
it is building, so independent trainings and any number of aggregations
can run concurrently without shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DataError, DimensionError, NumericError

__all__ = [
    "OrderedArguments",
    "IowaModel",
    "IowaTrainingSample",
    "mean_of",
    "order_arguments",
    "dowa_similarities",
    "dowa_weights",
    "dowa_aggregate",
    "dowa_aggregate_rows",
    "iowa_weights",
    "iowa_predict",
    "iowa_instant_error",
    "iowa_gradient",
    "iowa_train",
]

_RANGE_TOL = 1e-9


def _as_arguments(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError("argument vector must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise DataError("argument vector contains non-finite values")
    if arr.min() < -_RANGE_TOL or arr.max() > 1.0 + _RANGE_TOL:
        raise DataError("argument values must lie in [0, 1]")
    return np.clip(arr, 0.0, 1.0)


class OrderedArguments(NamedTuple):
    """Arguments sorted descending, plus the rank-to-original-index map."""

    sorted: np.ndarray
    permutation: np.ndarray


def order_arguments(values) -> OrderedArguments:
    """Sort descending; ties keep their original relative order (stable)."""
    arr = _as_arguments(values)
    perm = np.argsort(-arr, kind="stable")
    return OrderedArguments(arr[perm], perm)


def mean_of(values) -> float:
    """Arithmetic mean of an argument vector."""
    return float(_as_arguments(values).mean())


def dowa_similarities(values) -> np.ndarray:
    """Similarity of each ordered argument to the mean, in rank order.

    The similarity of a value v to the mean m is 1 - |v - m| / D where D is
    the total absolute deviation of all arguments from m. When every
    argument is equal, D vanishes and each similarity is defined as 1,
    which keeps the downstream weights uniform.
    """
    ordered, _ = order_arguments(values)
    if ordered[0] == ordered[-1]:  # all arguments equal, degenerate rule
        return np.ones(ordered.size)
    m = ordered.mean()
    total_dev = np.abs(ordered - m).sum()
    return 1.0 - np.abs(ordered - m) / total_dev


def dowa_weights(values) -> np.ndarray:
    """DOWA weight vector in rank order: similarities normalized to sum 1.

    All-equal input degenerates to the uniform vector 1/n.
    """
    sims = dowa_similarities(values)
    return sims / sims.sum()


def dowa_aggregate(values) -> float:
    """Aggregate an argument vector with instance-dependent DOWA weights.

    The result is a convex combination of the arguments, so it always lies
    within [min(values), max(values)], and it is invariant to permutations
    of the input.
    """
    ordered, _ = order_arguments(values)
    weights = dowa_weights(ordered)
    return float(ordered @ weights)


def dowa_aggregate_rows(rows) -> np.ndarray:
    """Row-wise DOWA aggregation of a 2-D array.

    The aggregate itself needs no sort: reordering the arguments permutes
    the similarity/argument pairs without changing their weighted sum.
    """
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise DimensionError("expected a 2-D array with at least one column")
    if not np.all(np.isfinite(arr)):
        raise DataError("argument rows contain non-finite values")
    if arr.min() < -_RANGE_TOL or arr.max() > 1.0 + _RANGE_TOL:
        raise DataError("argument values must lie in [0, 1]")
    arr = np.clip(arr, 0.0, 1.0)
    m = arr.mean(axis=1, keepdims=True)
    dev = np.abs(arr - m)
    total = dev.sum(axis=1, keepdims=True)
    # Degenerate rows aggregate to their constant value whatever the
    # similarities are, so a guarded denominator is enough.
    sims = 1.0 - dev / np.where(total == 0.0, 1.0, total)
    return (sims * arr).sum(axis=1) / sims.sum(axis=1)


@dataclass
class IowaModel:
    """Learned OWA position weights on a softmax parameterization.

    ``betas`` are unconstrained reals; the weight attached to rank position
    i is softmax(betas)[i], so the weights always form a valid probability
    vector. ``error_history`` records the epoch means of the instantaneous
    errors observed while training.
    """

    betas: np.ndarray
    learning_rate: float = 0.1
    epochs_run: int = 0
    final_mean_error: float = 0.0
    error_history: list = field(default_factory=list)

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=float)

    @property
    def n(self) -> int:
        return int(self.betas.size)


@dataclass(frozen=True)
class IowaTrainingSample:
    """One observation: an argument vector and the value it aggregated to."""

    arguments: tuple
    target: float

    def __post_init__(self):
        args = tuple(float(v) for v in self.arguments)
        object.__setattr__(self, "arguments", args)
        t = float(self.target)
        if not math.isfinite(t) or not 0.0 <= t <= 1.0:
            raise DataError(f"training target must be finite and in [0, 1], got {self.target!r}")
        object.__setattr__(self, "target", t)


def _softmax(betas: np.ndarray) -> np.ndarray:
    shifted = betas - betas.max()  # max-shift keeps exp() in range
    e = np.exp(shifted)
    return e / e.sum()


def iowa_weights(model: IowaModel) -> np.ndarray:
    """Current weight vector of a model: softmax of its betas."""
    betas = np.asarray(model.betas, dtype=float)
    if betas.ndim != 1 or betas.size == 0:
        raise DimensionError("model must hold a non-empty 1-D beta vector")
    if not np.all(np.isfinite(betas)):
        raise NumericError("corrupt model: non-finite beta parameters")
    return _softmax(betas)


def iowa_predict(model: IowaModel, values) -> float:
    """Aggregate an argument vector with the model's learned weights."""
    ordered, _ = order_arguments(values)
    if ordered.size != model.n:
        raise DimensionError(
            f"argument length {ordered.size} does not match model dimension {model.n}"
        )
    return float(ordered @ iowa_weights(model))


def iowa_instant_error(betas, values, target: float) -> float:
    """Half squared residual of the softmax-weighted OWA for one observation."""
    betas = np.asarray(betas, dtype=float)
    ordered, _ = order_arguments(values)
    if ordered.size != betas.size:
        raise DimensionError("argument length does not match beta length")
    d_hat = float(ordered @ _softmax(betas))
    return 0.5 * (d_hat - float(target)) ** 2


def iowa_gradient(betas, values, target: float) -> np.ndarray:
    """Analytic gradient of the instantaneous error in the beta parameters.

    With prediction d_hat = sum_i b_i w_i over the descending-ordered
    arguments b and weights w = softmax(betas), the partial derivative in
    beta_i is w_i (b_i - d_hat)(d_hat - d). This is the exact gradient of
    ``iowa_instant_error`` and the update direction used by training.
    """
    betas = np.asarray(betas, dtype=float)
    ordered, _ = order_arguments(values)
    if ordered.size != betas.size:
        raise DimensionError("argument length does not match beta length")
    w = _softmax(betas)
    d_hat = float(ordered @ w)
    return w * (ordered - d_hat) * (d_hat - float(target))


def iowa_train(
    samples: Sequence[IowaTrainingSample],
    learning_rate: float = 0.1,
    max_epochs: int = 200,
    tolerance: float = 1e-6,
    seed: int = 0,
) -> IowaModel:
    """Learn OWA position weights from observed aggregations.

    Betas start at zero (uniform weights) and are updated one observation
    at a time; each epoch visits the samples in a fresh seed-controlled
    shuffle. For every visit the weights are recomputed from the current
    betas, the prediction is formed, and the gradient step is applied.

    Training stops when the epoch mean of the instantaneous errors improves
    by less than ``tolerance``, or at ``max_epochs``. An epoch that made the
    mean worse is rolled back before stopping, so the recorded
    ``error_history`` is non-increasing and the returned betas are never
    worse than an earlier epoch's.
    """
    if not samples:
        raise DataError("cannot train on an empty sample sequence")
    if not 0.0 < learning_rate < 1.0:
        raise ConfigError(f"learning_rate must be in (0, 1), got {learning_rate}")
    if max_epochs < 1:
        raise ConfigError(f"max_epochs must be >= 1, got {max_epochs}")
    if tolerance < 0.0:
        raise ConfigError(f"tolerance must be >= 0, got {tolerance}")

    n = len(samples[0].arguments)
    ordered_args = []
    targets = []
    for s in samples:
        if len(s.arguments) != n:
            raise DimensionError("all training samples must share one argument length")
        vals = [float(v) for v in s.arguments]
        if not all(math.isfinite(v) for v in vals):
            raise DataError("training arguments contain non-finite values")
        ordered_args.append(sorted(vals, reverse=True))
        targets.append(s.target)

    rng = np.random.default_rng(seed)
    betas = [0.0] * n
    history: list = []
    prev_mean = None
    epochs_run = 0
    count = len(samples)

    for _ in range(max_epochs):
        snapshot = list(betas)
        total = 0.0
        for k in rng.permutation(count):
            b = ordered_args[k]
            mx = max(betas)
            exps = [math.exp(v - mx) for v in betas]
            norm = sum(exps)
            w = [e / norm for e in exps]
            d_hat = sum(wi * bi for wi, bi in zip(w, b))
            err = d_hat - targets[k]
            total += 0.5 * err * err
            step = learning_rate * err
            for i in range(n):
                betas[i] -= step * w[i] * (b[i] - d_hat)
        mean_err = total / count
        if prev_mean is not None and mean_err > prev_mean:
            betas = snapshot  # discard the worsening epoch
            break
        history.append(mean_err)
        epochs_run += 1
        if prev_mean is not None and prev_mean - mean_err < tolerance:
            break
        prev_mean = mean_err

    return IowaModel(
        betas=np.asarray(betas, dtype=float),
        learning_rate=learning_rate,
        epochs_run=epochs_run,
        final_mean_error=history[-1] if history else 0.0,
        error_history=history,
    )
