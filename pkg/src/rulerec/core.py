"""Shared domain types and the two training losses.

Each logged record carries customer features, the promotion that was
shown, and a binary conversion outcome.  A probability table assigns
every (record, action) pair a conversion probability; the best action
for a row is the one with the highest probability (ties broken to the
lowest index, everywhere in this package).  Everything downstream is
defined against two losses:

* :func:`regret_loss` -- total conversion-probability shortfall of a
  policy against the rowwise-best action, summed over the original
  records.
* :func:`weighted_loss` -- total weight of misclassified samples in a
  weighted training set (the standard multi-class 0/1 penalty).

The weighting scheme in :mod:`rulerec.transform` makes the second loss
an exact affine function of the first, which is what lets an ordinary
weighted tree learner minimize conversion regret.

All types are immutable after construction (arrays are marked
read-only) and safe to share across threads.  Loss reductions use
``np.sum`` over row-major arrays, so the summation order is fixed and
results are reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class RulerecError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(RulerecError, ValueError):
    """Inputs violate a documented precondition (domain, shape, finiteness)."""


class DimensionMismatchError(InvalidInputError):
    """Feature dimension or row count does not match between inputs."""


class InvalidClassifierError(RulerecError):
    """A classifier returned predictions outside the declared action range."""


class NegativeWeightError(RulerecError):
    """A transformed sample weight came out negative (shift too small)."""

    def __init__(self, message, row=None, action=None):
        super().__init__(message)
        self.row = row
        self.action = action


class MissingRowError(RulerecError, LookupError):
    """An oracle model was asked about a feature row it has never seen."""


class MissingActionDataError(RulerecError):
    """An estimator was asked to fit an action with no logged records."""


class MalformedDocumentError(RulerecError):
    """A serialized model or tree document cannot be parsed."""


class DataFormatError(RulerecError):
    """A CSV file violates its declared schema."""


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _as_prob_row(row) -> np.ndarray:
    p = np.asarray(row, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 2:
        raise InvalidInputError(
            f"probability row must be 1-D with at least 2 actions, got shape {p.shape}"
        )
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("probability row contains non-finite entries")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidInputError("probabilities must lie in [0, 1]")
    return p


def _as_feature_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError(f"feature matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("feature matrix contains non-finite entries")
    return X


def derive_seed(seed: int, label: str) -> int:
    """Derive a reproducible sub-seed from a master seed and a fixed label.

    Every internal random stream is keyed this way, so independent stages
    of a pipeline never share or reorder draws.
    """
    digest = hashlib.sha256(f"{label}:{seed}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ProbTable:
    """Conversion probabilities: one row per record, one column per action."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] < 2:
            raise InvalidInputError(
                f"probability table must be 2-D with at least 2 actions, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("probability table contains non-finite entries")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise InvalidInputError("probability table entries must lie in [0, 1]")
        self.values = _freeze(v)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.values[i]

    def subset(self, indices) -> "ProbTable":
        return ProbTable(self.values[np.asarray(indices)])


@dataclass(frozen=True)
class HistoryRecord:
    """One logged triple: customer features, shown action, binary outcome."""

    features: np.ndarray
    action: int
    outcome: int


@dataclass(eq=False)
class History:
    """A logged dataset: features ``X`` (n, d), shown ``actions``, ``outcomes``.

    ``n_actions`` is the declared size of the action catalogue; every
    logged action index must fall below it.
    """

    X: np.ndarray
    actions: np.ndarray
    outcomes: np.ndarray
    n_actions: int

    def __post_init__(self):
        X = _as_feature_matrix(self.X)
        actions = np.asarray(self.actions, dtype=np.int64)
        outcomes = np.asarray(self.outcomes, dtype=np.int64)
        if actions.ndim != 1 or outcomes.ndim != 1:
            raise InvalidInputError("actions and outcomes must be 1-D")
        if not (X.shape[0] == actions.shape[0] == outcomes.shape[0]):
            raise DimensionMismatchError(
                f"row counts disagree: features {X.shape[0]}, "
                f"actions {actions.shape[0]}, outcomes {outcomes.shape[0]}"
            )
        if self.n_actions < 2:
            raise InvalidInputError("a history needs at least 2 declared actions")
        if actions.size and (actions.min() < 0 or actions.max() >= self.n_actions):
            raise InvalidInputError(
                f"logged action index outside [0, {self.n_actions})"
            )
        if not np.all((outcomes == 0) | (outcomes == 1)):
            raise InvalidInputError("outcomes must be 0 or 1")
        self.X = _freeze(X)
        self.actions = _freeze(actions)
        self.outcomes = _freeze(outcomes)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def record(self, i: int) -> HistoryRecord:
        return HistoryRecord(self.X[i], int(self.actions[i]), int(self.outcomes[i]))

    def subset(self, indices) -> "History":
        idx = np.asarray(indices)
        return History(self.X[idx], self.actions[idx], self.outcomes[idx], self.n_actions)


@dataclass(eq=False)
class WeightedSet:
    """A weighted multi-class training set: (features, target action, weight)."""

    X: np.ndarray
    actions: np.ndarray
    weights: np.ndarray
    n_actions: int

    def __post_init__(self):
        X = _as_feature_matrix(self.X)
        actions = np.asarray(self.actions, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if actions.ndim != 1 or weights.ndim != 1:
            raise InvalidInputError("actions and weights must be 1-D")
        if not (X.shape[0] == actions.shape[0] == weights.shape[0]):
            raise DimensionMismatchError(
                f"row counts disagree: features {X.shape[0]}, "
                f"actions {actions.shape[0]}, weights {weights.shape[0]}"
            )
        if self.n_actions < 2:
            raise InvalidInputError("a weighted set needs at least 2 declared actions")
        if actions.size and (actions.min() < 0 or actions.max() >= self.n_actions):
            raise InvalidInputError(f"target action index outside [0, {self.n_actions})")
        if not np.all(np.isfinite(weights)):
            raise InvalidInputError("weights contain non-finite entries")
        if weights.size and weights.min() < 0.0:
            i = int(np.argmin(weights))
            raise NegativeWeightError(
                f"sample {i} (action {int(actions[i])}) has negative weight "
                f"{weights[i]!r}",
                row=i,
                action=int(actions[i]),
            )
        self.X = _freeze(X)
        self.actions = _freeze(actions)
        self.weights = _freeze(weights)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def subset(self, indices) -> "WeightedSet":
        idx = np.asarray(indices)
        return WeightedSet(self.X[idx], self.actions[idx], self.weights[idx], self.n_actions)


@dataclass(eq=False)
class RegretRow:
    """Per-action regrets for one record: best probability minus each entry.

    The minimum over actions is exactly 0.0 and is attained at ``best``.
    """

    q: np.ndarray
    best: int


@dataclass(eq=False)
class RegretTable:
    """Rowwise regrets for a whole probability table."""

    q: np.ndarray
    best: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.q.shape[0]

    @property
    def n_actions(self) -> int:
        return self.q.shape[1]


# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------


class Classifier(Protocol):
    """Anything that maps a feature matrix to one action index per row."""

    def predict(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantPolicy:
    """Recommends the same action to everyone."""

    action: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(X).shape[0], self.action, dtype=np.int64)


@dataclass(eq=False)
class LookupPolicy:
    """Maps each known feature row to a fixed action; unknown rows are errors.

    Useful for enumerating all policies over a small set of distinct
    feature points.
    """

    table: dict = field(default_factory=dict)

    @classmethod
    def from_pairs(cls, X, actions) -> "LookupPolicy":
        X = _as_feature_matrix(X)
        actions = np.asarray(actions, dtype=np.int64)
        return cls({X[i].tobytes(): int(actions[i]) for i in range(X.shape[0])})

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _as_feature_matrix(X)
        out = np.empty(X.shape[0], dtype=np.int64)
        for i in range(X.shape[0]):
            key = X[i].tobytes()
            if key not in self.table:
                raise MissingRowError(f"no action stored for feature row {i}")
            out[i] = self.table[key]
        return out


def checked_predictions(classifier: Classifier, X: np.ndarray, n_actions: int) -> np.ndarray:
    """Run ``classifier.predict`` and validate the returned action indices."""
    preds = np.asarray(classifier.predict(X))
    if preds.shape != (np.asarray(X).shape[0],):
        raise InvalidClassifierError(
            f"classifier returned shape {preds.shape}, expected ({np.asarray(X).shape[0]},)"
        )
    if not np.issubdtype(preds.dtype, np.integer):
        raise InvalidClassifierError(f"classifier returned dtype {preds.dtype}, expected integers")
    if preds.size and (preds.min() < 0 or preds.max() >= n_actions):
        bad = int(preds[(preds < 0) | (preds >= n_actions)][0])
        raise InvalidClassifierError(
            f"classifier returned action {bad} outside [0, {n_actions})"
        )
    return preds.astype(np.int64, copy=False)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def optimal_action(p_row) -> int:
    """Index of the highest conversion probability; ties go to the lowest index."""
    p = _as_prob_row(p_row)
    return int(np.argmax(p))


def optimal_actions(probs: ProbTable) -> np.ndarray:
    """Rowwise :func:`optimal_action` for a whole table."""
    return np.argmax(probs.values, axis=1).astype(np.int64)


def regret_row(p_row) -> RegretRow:
    """Per-action regret of one probability row.

    ``q[a]`` is the rowwise maximum minus ``p_row[a]``; it is exactly 0.0
    at the best action because both terms are the same float.
    """
    p = _as_prob_row(p_row)
    best = int(np.argmax(p))
    q = p[best] - p
    return RegretRow(q=_freeze(q), best=best)


def regret_table(probs: ProbTable) -> RegretTable:
    """Rowwise regrets for a whole probability table."""
    p = probs.values
    best = np.argmax(p, axis=1).astype(np.int64)
    q = p[np.arange(p.shape[0]), best][:, None] - p
    return RegretTable(q=_freeze(q), best=_freeze(best))


def regret_loss(classifier: Classifier, probs: ProbTable, X: np.ndarray) -> float:
    """Total conversion regret of ``classifier`` over the given records.

    Sums, over rows, the gap between the rowwise-best probability and the
    probability of the recommended action.  Nonnegative; zero exactly when
    every recommendation has zero regret.
    """
    X = _as_feature_matrix(X)
    if probs.n_rows != X.shape[0]:
        raise DimensionMismatchError(
            f"probability table has {probs.n_rows} rows, features have {X.shape[0]}"
        )
    preds = checked_predictions(classifier, X, probs.n_actions)
    p = probs.values
    chosen = p[np.arange(p.shape[0]), preds]
    return float(np.sum(p.max(axis=1) - chosen))


def weighted_loss(classifier: Classifier, weighted: WeightedSet) -> float:
    """Total weight of samples whose target action the classifier misses."""
    preds = checked_predictions(classifier, weighted.X, weighted.n_actions)
    return float(np.sum(weighted.weights[preds != weighted.actions]))
