"""Conversion-probability estimation from logged records.

Two model kinds share one prediction interface:

* ``per-action-logistic`` -- one L2-regularized logistic regression per
  action, fit on the records where that action was shown (outcome as the
  binary target).  Features are standardized internally; the optimizer is
  deterministic full-batch gradient descent with Armijo backtracking, so
  refitting on the same data is bit-reproducible.
* ``oracle`` -- a lookup of ground-truth probabilities by feature row,
  used by the synthetic experiments to isolate the quality of the weight
  transformation from estimation error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionMismatchError,
    History,
    InvalidInputError,
    MalformedDocumentError,
    MissingActionDataError,
    MissingRowError,
    ProbTable,
)

KIND_LOGISTIC = "per-action-logistic"
KIND_ORACLE = "oracle"

# Predictions are clipped into the open interval (0, 1); the sigmoid
# saturates to exactly 0.0/1.0 in float64 for |z| > ~37.
_PROB_EPS = 1e-12


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameters for the per-action logistic fits.

    ``l2`` penalizes coefficients only (never the intercept), so a heavily
    regularized model degrades to the action's empirical conversion rate.
    ``seed`` is reserved for stochastic variants; the current fit is
    deterministic and does not consume it.
    """

    l2: float = 1e-2
    max_iters: int = 10_000
    tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.l2 < 0:
            raise InvalidInputError(f"l2 must be >= 0, got {self.l2!r}")
        if self.max_iters < 1:
            raise InvalidInputError(f"max_iters must be >= 1, got {self.max_iters!r}")
        if not self.tolerance > 0:
            raise InvalidInputError(f"tolerance must be > 0, got {self.tolerance!r}")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exp(-logaddexp(0, -z)) is stable for large |z| in both directions.
    return np.exp(-np.logaddexp(0.0, -z))


def loss_and_gradient(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean logistic loss with an L2 coefficient penalty, and its gradient.

    ``params[0]`` is the intercept, ``params[1:]`` the coefficients for the
    (already standardized) feature columns.  The analytic gradient here is
    what the finite-difference checks in the test suite validate.
    """
    bias, coefs = params[0], params[1:]
    z = bias + X @ coefs
    n = X.shape[0]
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z) / n + 0.5 * l2 * np.dot(coefs, coefs))
    residual = _sigmoid(z) - y
    grad = np.empty_like(params)
    grad[0] = np.sum(residual) / n
    grad[1:] = X.T @ residual / n + l2 * coefs
    return loss, grad


def _minimize(X: np.ndarray, y: np.ndarray, cfg: FitConfig) -> np.ndarray:
    """Full-batch gradient descent with Armijo backtracking, zero init.

    Stops when the gradient max-norm drops below ``cfg.tolerance`` or the
    iteration budget runs out.  Accepted steps never increase the loss.
    """
    params = np.zeros(X.shape[1] + 1)
    loss, grad = loss_and_gradient(params, X, y, cfg.l2)
    step = 1.0
    for _ in range(cfg.max_iters):
        if np.max(np.abs(grad)) <= cfg.tolerance:
            break
        direction = -grad
        slope = float(grad @ direction)
        step = min(step * 2.0, 1e6)  # warm start from the last accepted step
        while step > 1e-20:
            trial = params + step * direction
            trial_loss, trial_grad = loss_and_gradient(trial, X, y, cfg.l2)
            if trial_loss <= loss + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            break  # no acceptable step; gradient is numerically flat
        params, loss, grad = trial, trial_loss, trial_grad
    return params


@dataclass(eq=False)
class LogisticModel:
    """Per-action logistic conversion model with stored standardization."""

    mean: np.ndarray
    scale: np.ndarray
    biases: np.ndarray
    coefs: np.ndarray  # (n_actions, n_features)

    @property
    def kind(self) -> str:
        return KIND_LOGISTIC

    @property
    def n_features(self) -> int:
        return self.coefs.shape[1]

    @property
    def n_actions(self) -> int:
        return self.coefs.shape[0]

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected feature matrix with {self.n_features} columns, got shape {X.shape}"
            )
        Xs = (X - self.mean) / self.scale
        z = Xs @ self.coefs.T + self.biases
        return np.clip(_sigmoid(z), _PROB_EPS, 1.0 - _PROB_EPS)

    def predict_row(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise DimensionMismatchError(
                f"expected feature vector of length {self.n_features}, got shape {x.shape}"
            )
        return self.predict(x[None, :])[0]

    def predict_table(self, X) -> ProbTable:
        return ProbTable(self.predict(X))


@dataclass(eq=False)
class OracleModel:
    """Returns stored ground-truth probabilities, matched by exact feature row."""

    X: np.ndarray
    probs: ProbTable

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != self.probs.n_rows:
            raise DimensionMismatchError(
                f"oracle features of shape {X.shape} do not match "
                f"{self.probs.n_rows} probability rows"
            )
        self.X = X
        self._index = {X[i].tobytes(): i for i in range(X.shape[0])}

    @property
    def kind(self) -> str:
        return KIND_ORACLE

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_actions(self) -> int:
        return self.probs.n_actions

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected feature matrix with {self.n_features} columns, got shape {X.shape}"
            )
        rows = np.empty(X.shape[0], dtype=np.int64)
        for i in range(X.shape[0]):
            key = X[i].tobytes()
            if key not in self._index:
                raise MissingRowError(f"feature row {i} is not in the oracle table")
            rows[i] = self._index[key]
        return self.probs.values[rows]

    def predict_row(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise DimensionMismatchError(
                f"expected feature vector of length {self.n_features}, got shape {x.shape}"
            )
        return self.predict(x[None, :])[0]

    def predict_table(self, X) -> ProbTable:
        return ProbTable(self.predict(X))


ConversionModel = LogisticModel | OracleModel


def fit(history: History, cfg: FitConfig = FitConfig()) -> LogisticModel:
    """Fit one logistic regression per action on that action's records."""
    X = history.X
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)  # constant columns pass through
    Xs = (X - mean) / scale

    n_actions = history.n_actions
    biases = np.empty(n_actions)
    coefs = np.empty((n_actions, history.n_features))
    for a in range(n_actions):
        rows = history.actions == a
        if not rows.any():
            raise MissingActionDataError(f"no logged records for action {a}")
        params = _minimize(Xs[rows], history.outcomes[rows].astype(np.float64), cfg)
        biases[a] = params[0]
        coefs[a] = params[1:]
    return LogisticModel(mean=mean, scale=scale, biases=biases, coefs=coefs)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def model_to_json(model: ConversionModel) -> str:
    """JSON document for a model; floats round-trip bit for bit."""
    if isinstance(model, LogisticModel):
        doc = {
            "kind": KIND_LOGISTIC,
            "n_features": model.n_features,
            "n_actions": model.n_actions,
            "standardize_mean": list(map(float, model.mean)),
            "standardize_scale": list(map(float, model.scale)),
            "actions": [
                {"bias": float(model.biases[a]), "coefs": list(map(float, model.coefs[a]))}
                for a in range(model.n_actions)
            ],
        }
    else:
        doc = {
            "kind": KIND_ORACLE,
            "n_features": model.n_features,
            "n_actions": model.n_actions,
            "features": [list(map(float, row)) for row in model.X],
            "probs": [list(map(float, row)) for row in model.probs.values],
        }
    return json.dumps(doc, indent=2) + "\n"


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise MalformedDocumentError(f"at {path}: missing key {key!r}")
    return doc[key]


def model_from_json(text: str) -> ConversionModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedDocumentError(
            f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    if not isinstance(doc, dict):
        raise MalformedDocumentError("top level must be an object")
    kind = _require(doc, "kind", "$")
    d = _require(doc, "n_features", "$")
    n_actions = _require(doc, "n_actions", "$")
    if not isinstance(d, int) or d < 1 or not isinstance(n_actions, int) or n_actions < 2:
        raise MalformedDocumentError("n_features must be >= 1 and n_actions >= 2")
    try:
        if kind == KIND_LOGISTIC:
            actions = _require(doc, "actions", "$")
            if len(actions) != n_actions:
                raise MalformedDocumentError(
                    f"expected {n_actions} per-action parameter sets, got {len(actions)}"
                )
            model = LogisticModel(
                mean=np.asarray(_require(doc, "standardize_mean", "$"), dtype=np.float64),
                scale=np.asarray(_require(doc, "standardize_scale", "$"), dtype=np.float64),
                biases=np.asarray([_require(a, "bias", "$.actions[]") for a in actions]),
                coefs=np.asarray(
                    [_require(a, "coefs", "$.actions[]") for a in actions], dtype=np.float64
                ),
            )
            if model.mean.shape != (d,) or model.scale.shape != (d,) or model.coefs.shape != (
                n_actions,
                d,
            ):
                raise MalformedDocumentError("parameter vector lengths do not match n_features")
            return model
        if kind == KIND_ORACLE:
            return OracleModel(
                X=np.asarray(_require(doc, "features", "$"), dtype=np.float64),
                probs=ProbTable(np.asarray(_require(doc, "probs", "$"), dtype=np.float64)),
            )
    except (TypeError, ValueError) as e:
        raise MalformedDocumentError(f"bad model document: {e}") from e
    raise MalformedDocumentError(f"unknown model kind {kind!r}")


__all__ = [
    "ConversionModel",
    "FitConfig",
    "KIND_LOGISTIC",
    "KIND_ORACLE",
    "LogisticModel",
    "OracleModel",
    "fit",
    "loss_and_gradient",
    "model_from_json",
    "model_to_json",
]
