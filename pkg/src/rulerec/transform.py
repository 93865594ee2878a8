"""Turn logged conversion data into weighted multi-class training sets.

Three strategies:

* ``naive`` -- keep converted records as (features, logged action) pairs
  and discard the rest.  Ignores any probability model; inherits every
  bias of the logging policy.
* ``benchmark`` -- relabel each record with its estimated-best action,
  unit weight.  Encodes the optimum but treats all records as equally
  important.
* ``proposed`` -- emit one weighted sample per (record, action), with
  weights chosen so that for every policy ``h`` the weighted 0/1 loss is
  an exact affine function of the conversion regret:

      weighted_loss(h) = scale * regret_loss(h) + n_rows * shift.

  The weights solve, for every record and every action ``a``,

      sum of the record's weights excluding ``a`` = scale * q[a] + shift,

  where ``q[a]`` is the record's regret of action ``a``.  The closed form
  is ``k[a] = (scale * (sum(q) - (A-1) * q[a]) + shift) / (A-1)`` with
  ``A`` the number of actions.  ``shift`` must be large enough that every
  weight is nonnegative; :func:`min_shift` computes the smallest such
  value, which is 0 whenever ``A == 2``.

Weights can also be realized as sample replication (``round`` or
``floor-bernoulli``), at the cost of a small rounding bias that shrinks
as ``scale`` grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    History,
    InvalidInputError,
    NegativeWeightError,
    ProbTable,
    RegretRow,
    RegretTable,
    WeightedSet,
    derive_seed,
    optimal_actions,
    regret_table,
)

MODES = ("proposed", "benchmark", "naive")
REPLICATION_SCHEMES = ("weights", "round", "floor-bernoulli")

AUTO_SHIFT = "auto"

# Scale defaults: in weights mode the affine identity makes the scale
# irrelevant, so 1 is fine; replication rounds weights to integers, so a
# large scale keeps the rounding bias small.
DEFAULT_SCALE_WEIGHTS = 1.0
DEFAULT_SCALE_REPLICATION = 100.0


@dataclass(frozen=True)
class TransformConfig:
    """Settings for the weight transformation.

    ``scale`` defaults to 1 in weights mode and 100 in replication modes
    when left as ``None``.  ``shift`` is either an explicit nonnegative
    value or ``"auto"``, which resolves to :func:`min_shift`.
    """

    scale: float | None = None
    shift: float | str = AUTO_SHIFT
    mode: str = "proposed"
    replication: str = "weights"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.replication not in REPLICATION_SCHEMES:
            raise InvalidInputError(
                f"unknown replication scheme {self.replication!r}, "
                f"expected one of {REPLICATION_SCHEMES}"
            )
        if self.scale is not None and not self.scale > 0:
            raise InvalidInputError(f"scale must be positive, got {self.scale!r}")
        if isinstance(self.shift, str):
            if self.shift != AUTO_SHIFT:
                raise InvalidInputError(f"shift must be a number or 'auto', got {self.shift!r}")
        elif not (np.isfinite(self.shift) and self.shift >= 0):
            raise InvalidInputError(f"explicit shift must be finite and >= 0, got {self.shift!r}")

    @property
    def resolved_scale(self) -> float:
        if self.scale is not None:
            return float(self.scale)
        if self.replication == "weights":
            return DEFAULT_SCALE_WEIGHTS
        return DEFAULT_SCALE_REPLICATION


def _regret_matrix(regrets) -> np.ndarray:
    if isinstance(regrets, RegretTable):
        return regrets.q
    if isinstance(regrets, RegretRow):
        return regrets.q[None, :]
    q = np.asarray(regrets, dtype=np.float64)
    if q.ndim == 1:
        q = q[None, :]
    if q.ndim != 2 or q.shape[1] < 2:
        raise InvalidInputError(f"regret rows must have at least 2 actions, got shape {q.shape}")
    if not np.all(np.isfinite(q)) or np.any(q < 0):
        raise InvalidInputError("regrets must be finite and nonnegative")
    return q


def _shift_gaps(q: np.ndarray) -> np.ndarray:
    # gap[n, a] = (A-1) * q[n, a] - sum(q[n]); weight is (shift - scale*gap)/(A-1).
    am1 = q.shape[1] - 1
    return am1 * q - q.sum(axis=1)[:, None]


def min_shift(regrets, scale: float) -> float:
    """Smallest nonnegative shift making every transformed weight >= 0.

    The binding constraint per row sits at the action with the largest
    regret; the result is 0 whenever there are only two actions.
    """
    if not scale > 0:
        raise InvalidInputError(f"scale must be positive, got {scale!r}")
    q = _regret_matrix(regrets)
    if q.shape[0] == 0:
        raise InvalidInputError("min_shift needs at least one regret row")
    return float(max(0.0, (scale * _shift_gaps(q)).max()))


def weight_table(regrets, scale: float, shift: float) -> np.ndarray:
    """Transformed weights for all rows: an (n_rows, n_actions) array.

    Raises :class:`NegativeWeightError` if ``shift`` is too small for some
    (row, action).  Weights within a relative rounding epsilon below zero
    are snapped to exactly 0.0, so a shift computed in real arithmetic
    (rather than float-for-float equal to :func:`min_shift`) still works;
    with ``shift = min_shift(...)`` the binding entry is exactly 0.0 by
    construction.
    """
    if not scale > 0:
        raise InvalidInputError(f"scale must be positive, got {scale!r}")
    if not (np.isfinite(shift) and shift >= 0):
        raise InvalidInputError(f"shift must be finite and >= 0, got {shift!r}")
    q = _regret_matrix(regrets)
    am1 = q.shape[1] - 1
    k = (shift - scale * _shift_gaps(q)) / am1
    rounding = 1e-12 * (1.0 + shift + scale * am1 * float(np.max(q, initial=0.0)))
    if k.size and k.min() < -rounding:
        n, a = np.unravel_index(np.argmin(k), k.shape)
        raise NegativeWeightError(
            f"weight for row {n}, action {a} is {k[n, a]!r} < 0; "
            f"shift {shift!r} is too small (need >= {min_shift(q, scale)!r})",
            row=int(n),
            action=int(a),
        )
    return np.clip(k, 0.0, None)


def weights_for_row(q_row, scale: float, shift: float) -> np.ndarray:
    """Transformed weights for a single regret row."""
    return weight_table(q_row, scale, shift)[0]


def resolve_shift(regrets, cfg: TransformConfig) -> float:
    """The shift the proposed transform will actually use under ``cfg``."""
    if cfg.shift == AUTO_SHIFT:
        return min_shift(regrets, cfg.resolved_scale)
    return float(cfg.shift)


def transform_proposed(X, probs: ProbTable, cfg: TransformConfig) -> WeightedSet:
    """Emit one weighted sample per (record, action) using the affine weights.

    In weights mode, zero-weight samples are kept so the defining linear
    identity can be checked row by row; replication modes drop them.
    Output order is source row, then action.
    """
    if cfg.mode != "proposed":
        raise InvalidInputError(f"config mode is {cfg.mode!r}, expected 'proposed'")
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != probs.n_rows:
        raise InvalidInputError(
            f"features have {X.shape[0]} rows, probability table has {probs.n_rows}"
        )
    regrets = regret_table(probs)
    scale = cfg.resolved_scale
    shift = resolve_shift(regrets, cfg)
    k = weight_table(regrets, scale, shift)

    n, a = k.shape
    features = np.repeat(X, a, axis=0)
    actions = np.tile(np.arange(a, dtype=np.int64), n)
    weighted = WeightedSet(features, actions, k.ravel(), probs.n_actions)
    if cfg.replication == "weights":
        return weighted
    return replicate(weighted, cfg.replication, cfg.seed)


def transform_benchmark(X, probs: ProbTable) -> WeightedSet:
    """One unit-weight sample per record, labeled with the estimated-best action."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != probs.n_rows:
        raise InvalidInputError(
            f"features have {X.shape[0]} rows, probability table has {probs.n_rows}"
        )
    best = optimal_actions(probs)
    return WeightedSet(X.copy(), best, np.ones(len(best)), probs.n_actions)


def transform_naive(history: History) -> WeightedSet:
    """Keep converted records with their logged actions; discard the rest."""
    keep = history.outcomes == 1
    return WeightedSet(
        history.X[keep],
        history.actions[keep],
        np.ones(int(keep.sum())),
        history.n_actions,
    )


def replicate(weighted: WeightedSet, scheme: str, seed: int = 0) -> WeightedSet:
    """Realize fractional weights as unit-weight sample copies.

    ``round`` emits ``floor(k + 0.5)`` copies (ties round up).
    ``floor-bernoulli`` emits ``floor(k)`` copies plus one more with
    probability ``k - floor(k)``; the Bernoulli draw for sample ``i`` is
    the ``i``-th variate of a stream seeded from (seed, "replicate"), so
    the output is a pure function of the input and the seed.
    """
    if scheme not in ("round", "floor-bernoulli"):
        raise InvalidInputError(f"unknown replication scheme {scheme!r}")
    k = weighted.weights
    if scheme == "round":
        counts = np.floor(k + 0.5).astype(np.int64)
    else:
        base = np.floor(k)
        rng = np.random.default_rng(derive_seed(seed, "replicate"))
        extra = rng.random(k.shape[0]) < (k - base)
        counts = (base + extra).astype(np.int64)
    return WeightedSet(
        np.repeat(weighted.X, counts, axis=0),
        np.repeat(weighted.actions, counts),
        np.ones(int(counts.sum())),
        weighted.n_actions,
    )


def apply_transform(history: History, probs: ProbTable | None, cfg: TransformConfig) -> WeightedSet:
    """Dispatch on ``cfg.mode``; the naive mode needs no probability table."""
    if cfg.mode == "naive":
        return transform_naive(history)
    if probs is None:
        raise InvalidInputError(f"mode {cfg.mode!r} requires a probability table")
    if cfg.mode == "benchmark":
        return transform_benchmark(history.X, probs)
    return transform_proposed(history.X, probs, cfg)


__all__ = [
    "AUTO_SHIFT",
    "MODES",
    "REPLICATION_SCHEMES",
    "TransformConfig",
    "apply_transform",
    "min_shift",
    "replicate",
    "resolve_shift",
    "transform_benchmark",
    "transform_naive",
    "transform_proposed",
    "weight_table",
    "weights_for_row",
]
