"""L2-regularized hinge-loss linear classifiers.

Each binary problem minimizes

    0.5 * (||w||^2 + b^2) + C * sum_i max(0, 1 - y_i * (w . x_i + b))

by coordinate ascent on the dual, visiting samples in a seeded random
order per epoch (the bias is folded in as a constant augmented feature,
so it is regularized like the weights). The inner loop is compiled with
numba when available and falls back to pure Python otherwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .seeding import keyed_rng

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


def _epoch_pass(X, y, qii, alpha, w, bias, c, order):
    for k in range(order.shape[0]):
        i = order[k]
        xi = X[i]
        margin = bias
        for j in range(xi.shape[0]):
            margin += w[j] * xi[j]
        g = y[i] * margin - 1.0
        a = alpha[i]
        if (a <= 0.0 and g >= 0.0) or (a >= c and g <= 0.0):
            continue
        a_new = a - g / qii[i]
        if a_new < 0.0:
            a_new = 0.0
        elif a_new > c:
            a_new = c
        delta = (a_new - a) * y[i]
        alpha[i] = a_new
        if delta != 0.0:
            for j in range(xi.shape[0]):
                w[j] += delta * xi[j]
            bias += delta
    return bias


if njit is not None:
    _epoch_pass = njit(cache=True)(_epoch_pass)


def _objective(X, y, w, bias, c) -> float:
    margins = 1.0 - y * (X @ w + bias)
    hinge = np.clip(margins, 0.0, None).sum()
    return float(0.5 * (w @ w + bias * bias) + c * hinge)


@dataclass(frozen=True)
class LinearFit:
    """Result of one binary hinge fit."""

    weights: np.ndarray
    bias: float
    converged: bool
    epochs: int
    objective: float


def train_linear_ovr(positives: np.ndarray, negatives: np.ndarray, c: float = 1.0,
                     tol: float = 1e-4, seed: int = 0,
                     max_epochs: int = 1000) -> LinearFit:
    """Fit one one-vs-rest hinge classifier separating two row sets.

    Training stops when the relative change of the primal objective
    between epochs drops below ``tol``. Hitting ``max_epochs`` first sets
    ``converged=False`` on the result (and emits a warning) rather than
    failing.
    """
    positives = np.ascontiguousarray(positives, dtype=np.float64)
    negatives = np.ascontiguousarray(negatives, dtype=np.float64)
    if positives.ndim != 2 or negatives.ndim != 2:
        raise ValueError("positives and negatives must be 2-d row matrices")
    if len(positives) == 0 or len(negatives) == 0:
        raise ValueError("both classes need at least one row")
    if positives.shape[1] != negatives.shape[1]:
        raise ValueError(
            f"dimension mismatch: {positives.shape[1]} vs {negatives.shape[1]}")
    if not c > 0:
        raise ValueError(f"regularization strength must be > 0, got {c}")
    if not tol > 0:
        raise ValueError(f"tolerance must be > 0, got {tol}")
    if max_epochs < 1:
        raise ValueError(f"max_epochs must be >= 1, got {max_epochs}")

    X = np.ascontiguousarray(np.vstack([positives, negatives]))
    y = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])
    qii = (X * X).sum(axis=1) + 1.0  # + bias column
    alpha = np.zeros(len(X))
    w = np.zeros(X.shape[1])
    bias = 0.0
    rng = keyed_rng("linear-fit", int(seed))

    previous = _objective(X, y, w, bias, c)
    converged = False
    epochs = 0
    for epochs in range(1, max_epochs + 1):
        order = rng.permutation(len(X)).astype(np.int64)
        bias = float(_epoch_pass(X, y, qii, alpha, w, bias, c, order))
        current = _objective(X, y, w, bias, c)
        if abs(previous - current) <= tol * max(1.0, abs(previous)):
            converged = True
            break
        previous = current
    if not converged:
        warnings.warn(
            f"hinge fit did not converge within {max_epochs} epochs "
            f"(last objective {current:.6g})", RuntimeWarning, stacklevel=2)
    w.flags.writeable = False
    return LinearFit(weights=w, bias=bias, converged=converged,
                     epochs=epochs, objective=_objective(X, y, w, bias, c))


@dataclass(frozen=True, eq=False)
class OneVsRestModel:
    """Stacked binary fits, one row of weights per class (id-sorted)."""

    class_ids: tuple[int, ...]
    weights: np.ndarray
    biases: np.ndarray
    converged: tuple[bool, ...]

    def scores(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights.T + self.biases


def fit_one_vs_rest(features: np.ndarray, labels: np.ndarray, c: float,
                    tol: float, seed: int, max_epochs: int = 1000) -> OneVsRestModel:
    """Train one hinge classifier per distinct label (each vs the rest)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    class_ids = tuple(sorted(int(v) for v in np.unique(labels)))
    if len(class_ids) < 2:
        raise ValueError("one-vs-rest needs at least two classes")
    weights = np.zeros((len(class_ids), features.shape[1]))
    biases = np.zeros(len(class_ids))
    flags = []
    for row, class_id in enumerate(class_ids):
        mask = labels == class_id
        fit = train_linear_ovr(features[mask], features[~mask], c=c, tol=tol,
                               seed=int(seed) + row, max_epochs=max_epochs)
        weights[row] = fit.weights
        biases[row] = fit.bias
        flags.append(fit.converged)
    weights.flags.writeable = False
    biases.flags.writeable = False
    return OneVsRestModel(class_ids=class_ids, weights=weights, biases=biases,
                          converged=tuple(flags))
