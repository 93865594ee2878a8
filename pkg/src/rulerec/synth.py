"""Synthetic logged-promotion data with known ground-truth probabilities.

Customers are uniform on the unit cube.  The ground truth is built from
latent axis-aligned segments: a grid over the first one or two feature
axes (with mildly uneven cell sizes) partitions feature space, each
segment gets a designated best action at a fixed high conversion rate,
and every other action gets a lower per-(segment, action) base rate plus
a smooth sinusoidal jitter.  With the default jitter amplitude the best
action never flips inside a segment, so a tree with at least as many
leaves as segments can represent the optimal policy exactly -- which is
what makes closing the gap to the upper bound a meaningful target.

Logged actions come from a uniform or single-action-skewed policy;
outcomes are Bernoulli draws from the ground truth.  Everything is a
pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import History, InvalidInputError, ProbTable

BEST_RATE = 0.30  # conversion probability of a segment's designated action
OTHER_RATE_RANGE = (0.05, 0.15)  # base-rate range for all other actions
PROB_FLOOR, PROB_CEIL = 0.02, 0.98
_CELL_DECAY = 0.8  # consecutive cells along an axis shrink by this factor
_NARROW_DECAY = 0.8  # cell-size decay inside the narrow column
_COLUMN_CUT = 0.6  # boundary between the wide and the narrow column

LOGGING_POLICIES = ("uniform", "skewed")


@dataclass(frozen=True)
class SynthConfig:
    """Shape and seed of one synthetic dataset."""

    n_samples: int
    n_features: int = 6
    n_actions: int = 8
    n_segments: int = 6
    logging_policy: str = "uniform"
    skew_action: int = 0
    skew_share: float = 0.5
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidInputError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.n_features < 1:
            raise InvalidInputError(f"n_features must be >= 1, got {self.n_features}")
        if self.n_actions < 2:
            raise InvalidInputError(f"n_actions must be >= 2, got {self.n_actions}")
        if self.n_segments < 1:
            raise InvalidInputError(f"n_segments must be >= 1, got {self.n_segments}")
        if self.logging_policy not in LOGGING_POLICIES:
            raise InvalidInputError(
                f"unknown logging policy {self.logging_policy!r}, "
                f"expected one of {LOGGING_POLICIES}"
            )
        if not 0 <= self.skew_action < self.n_actions:
            raise InvalidInputError(f"skew_action {self.skew_action} outside [0, {self.n_actions})")
        if not 0.0 <= self.skew_share <= 1.0:
            raise InvalidInputError(f"skew_share must be in [0, 1], got {self.skew_share!r}")
        if not 0.0 <= self.noise <= 0.2:
            raise InvalidInputError(f"noise must be in [0, 0.2], got {self.noise!r}")


def _cuts(bins: int, decay: float) -> np.ndarray:
    """Interior cut points for ``bins`` cells with geometrically shrinking sizes."""
    shares = decay ** np.arange(bins)
    edges = np.cumsum(shares) / shares.sum()
    return edges[:-1]


def _layout(cfg: SynthConfig):
    """Segment geometry: two columns on axis 0 with staggered row cuts on axis 1.

    The row cuts differ between the columns, so the partition is still
    expressible by a tree with ``n_segments`` leaves (cut the column
    boundary first, then the rows), but no single axis value separates
    more than one pair of segments -- a mild obstacle for greedy growth.
    Falls back to slabs on axis 0 when there is only one usable axis or
    fewer than four segments.
    """
    s = cfg.n_segments
    if cfg.n_features == 1 or s < 4:
        return None, _cuts(s, _CELL_DECAY), None
    rows0 = (s + 1) // 2
    cuts0 = _cuts(rows0, _CELL_DECAY)
    cuts1 = 1.0 - _cuts(s - rows0, _NARROW_DECAY)[::-1]  # staggered against the wide column
    return _COLUMN_CUT, cuts0, cuts1


def segment_index(cfg: SynthConfig, X) -> np.ndarray:
    """Which latent segment each feature row falls in."""
    X = np.asarray(X, dtype=np.float64)
    column_cut, cuts0, cuts1 = _layout(cfg)
    if column_cut is None:
        return np.searchsorted(cuts0, X[:, 0], side="right").astype(np.int64)
    in_narrow = X[:, 0] > column_cut
    rows_wide = np.searchsorted(cuts0, X[:, 1], side="right")
    rows_narrow = np.searchsorted(cuts1, X[:, 1], side="right")
    return np.where(in_narrow, len(cuts0) + 1 + rows_narrow, rows_wide).astype(np.int64)


def truth_for(cfg: SynthConfig, X) -> ProbTable:
    """Ground-truth conversion probabilities for arbitrary feature rows.

    Deterministic given ``cfg.seed``: the latent structure (best actions,
    base rates, jitter directions) is drawn from the same stream prefix
    that :func:`generate` uses.
    """
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    base, dirs, phases = _latent_structure(cfg, rng)
    return ProbTable(_truth_values(cfg, X, base, dirs, phases))


def _latent_structure(cfg: SynthConfig, rng: np.random.Generator):
    s, a = cfg.n_segments, cfg.n_actions
    if s <= a:
        best = rng.permutation(a)[:s]  # distinct best actions when possible
    else:
        best = rng.integers(0, a, size=s)
    base = rng.uniform(*OTHER_RATE_RANGE, size=(s, a))
    base[np.arange(s), best] = BEST_RATE
    dirs = rng.normal(size=(a, cfg.n_features))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=a)
    return base, dirs, phases


def _truth_values(cfg, X, base, dirs, phases) -> np.ndarray:
    seg = segment_index(cfg, X)
    jitter = cfg.noise * np.sin(2.0 * np.pi * (X @ dirs.T) + phases)
    return np.clip(base[seg] + jitter, PROB_FLOOR, PROB_CEIL)


def generate(cfg: SynthConfig) -> tuple[History, ProbTable]:
    """Draw a logged dataset and its ground-truth probability table.

    Draw order (one stream seeded from ``cfg.seed``): latent structure,
    feature rows, logged actions, outcomes.  Identical configs produce
    bitwise-identical outputs.
    """
    rng = np.random.default_rng(cfg.seed)
    base, dirs, phases = _latent_structure(cfg, rng)
    X = rng.random((cfg.n_samples, cfg.n_features))
    truth = _truth_values(cfg, X, base, dirs, phases)

    if cfg.logging_policy == "uniform":
        actions = rng.integers(0, cfg.n_actions, size=cfg.n_samples)
    else:
        pick_skewed = rng.random(cfg.n_samples) < cfg.skew_share
        others = rng.integers(0, cfg.n_actions - 1, size=cfg.n_samples)
        others[others >= cfg.skew_action] += 1  # skip the skewed action
        actions = np.where(pick_skewed, cfg.skew_action, others)

    outcomes = (rng.random(cfg.n_samples) < truth[np.arange(cfg.n_samples), actions]).astype(
        np.int64
    )
    history = History(X, actions.astype(np.int64), outcomes, cfg.n_actions)
    return history, ProbTable(truth)


def add_fictitious(probs: ProbTable, alpha: float) -> ProbTable:
    """Append a synthetic action interpolating between rowwise worst and best.

    The new column is ``max(rowwise min, alpha * rowwise max)``: never
    worse than the worst action, equal to the best at ``alpha == 1``.  It
    can never *exceed* the rowwise max, so upper and lower bounds are
    unchanged, and under lowest-index tie-breaking the appended column is
    never the argmax.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must be in [0, 1], got {alpha!r}")
    p = probs.values
    column = np.maximum(p.min(axis=1), alpha * p.max(axis=1))
    return ProbTable(np.column_stack([p, column]))


__all__ = [
    "BEST_RATE",
    "LOGGING_POLICIES",
    "OTHER_RATE_RANGE",
    "PROB_CEIL",
    "PROB_FLOOR",
    "SynthConfig",
    "add_fictitious",
    "generate",
    "segment_index",
    "truth_for",
]
