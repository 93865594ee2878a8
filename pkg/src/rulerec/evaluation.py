"""Conversion-rate evaluation, bounds, and the two synthetic experiments.

Evaluation treats the supplied probability table as the truth: the rate
of a policy is the mean probability of whatever it recommends, and the
upper/lower bounds are the rates of the always-best and always-worst
policies.  The experiments sweep the tree's leaf budget and the strength
of an appended fictitious action, comparing the regret-weighted training
set against the benchmark relabeling on held-out rows.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import prob_model, synth, tree
from .core import (
    Classifier,
    ConstantPolicy,
    History,
    InvalidInputError,
    ProbTable,
    RulerecError,
    WeightedSet,
    checked_predictions,
    derive_seed,
    regret_table,
    regret_loss,
    weighted_loss,
)
from .transform import (
    TransformConfig,
    resolve_shift,
    transform_benchmark,
    transform_proposed,
)

PROPOSED = "proposed"
BENCHMARK = "benchmark"


def conversion_rate(classifier: Classifier, probs: ProbTable, X) -> float:
    """Mean conversion probability of the classifier's recommendations."""
    X = np.asarray(X, dtype=np.float64)
    if probs.n_rows != X.shape[0]:
        raise InvalidInputError(
            f"probability table has {probs.n_rows} rows, features have {X.shape[0]}"
        )
    preds = checked_predictions(classifier, X, probs.n_actions)
    return float(np.mean(probs.values[np.arange(probs.n_rows), preds]))


def bounds(probs: ProbTable) -> tuple[float, float]:
    """(lower, upper): rates of the always-worst and always-best policies."""
    p = probs.values
    return float(p.min(axis=1).mean()), float(p.max(axis=1).mean())


# ---------------------------------------------------------------------------
# Affine-identity verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentityReport:
    """Result of checking weighted_loss == scale * regret_loss + n_rows * shift."""

    passed: bool
    max_gap: float
    tolerance: float
    scale: float
    shift: float
    n_rows: int
    trials: int

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}: max |weighted_loss - (scale*regret_loss + n*shift)| = "
            f"{self.max_gap:.3e} over {self.trials} classifiers "
            f"(tolerance {self.tolerance:.3e}, scale={self.scale:g}, shift={self.shift:g})"
        )


def _random_tree(rng: np.random.Generator, X: np.ndarray, n_actions: int, depth: int = 3):
    lo, hi = X.min(axis=0), X.max(axis=0)

    def build(level: int) -> tree.Node:
        if level >= depth or rng.random() < 0.35:
            action = int(rng.integers(n_actions))
            weights = np.zeros(n_actions)
            weights[action] = 1.0
            return tree.Node(action=action, class_weights=weights)
        f = int(rng.integers(X.shape[1]))
        t = float(rng.uniform(lo[f], hi[f]))
        return tree.Node(feature=f, threshold=t, left=build(level + 1), right=build(level + 1))

    root = build(0)
    if root.is_leaf:  # ensure at least one split so trees differ from constants
        f = int(rng.integers(X.shape[1]))
        root = tree.Node(
            feature=f,
            threshold=float(rng.uniform(lo[f], hi[f])),
            left=build(depth),
            right=build(depth),
        )
    return tree.RuleTree(root=root, n_features=X.shape[1], n_actions=n_actions)


def verify_loss_identity(
    X,
    probs: ProbTable,
    cfg: TransformConfig,
    trials: int = 100,
    seed: int = 0,
) -> IdentityReport:
    """Check the exact affine link between the two losses on random classifiers.

    Draws a mix of random trees and constant policies and reports the
    largest deviation of ``weighted_loss`` from
    ``scale * regret_loss + n_rows * shift``.  Requires a proposed-mode,
    weights-replication config; replication modes trade this exactness
    for integer counts.
    """
    if cfg.mode != "proposed" or cfg.replication != "weights":
        raise InvalidInputError("identity verification needs mode='proposed' in weights mode")
    X = np.asarray(X, dtype=np.float64)
    weighted = transform_proposed(X, probs, cfg)
    scale = cfg.resolved_scale
    shift = resolve_shift(regret_table(probs), cfg)
    n = probs.n_rows

    rng = np.random.default_rng(derive_seed(seed, "identity-trials"))
    max_gap = 0.0
    for t in range(trials):
        if t % 2 == 0:
            clf: Classifier = _random_tree(rng, X, probs.n_actions)
        else:
            clf = ConstantPolicy(int(rng.integers(probs.n_actions)))
        gap = abs(weighted_loss(clf, weighted) - (scale * regret_loss(clf, probs, X) + n * shift))
        max_gap = max(max_gap, gap)
    tolerance = 1e-9 * n
    return IdentityReport(
        passed=max_gap <= tolerance,
        max_gap=max_gap,
        tolerance=tolerance,
        scale=scale,
        shift=shift,
        n_rows=n,
        trials=trials,
    )


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ExperimentCurve:
    """Per-x conversion rates for each method, sandwiched by the bounds."""

    x_values: list
    rates: dict
    upper: list
    lower: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.x_values)
        if len(self.upper) != n or len(self.lower) != n:
            raise InvalidInputError("bounds must have one entry per x value")
        for method, series in self.rates.items():
            if len(series) != n:
                raise InvalidInputError(f"rate series {method!r} has wrong length")
            for x, rate, lo, hi in zip(self.x_values, series, self.lower, self.upper):
                if not (lo - 1e-12 <= rate <= hi + 1e-12):
                    raise RulerecError(
                        f"rate {rate!r} of {method!r} at x={x!r} escapes bounds "
                        f"[{lo!r}, {hi!r}]"
                    )


def config_digest(cfg) -> str:
    """Short stable digest of a config dataclass, for curve metadata."""
    payload = json.dumps(asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class RuleSweepConfig:
    """Leaf-budget sweep: train both methods at each budget, evaluate held out."""

    synth: synth.SynthConfig
    rule_counts: tuple = (1, 2, 3, 4, 6, 8, 12, 16)
    scale: float = 1.0
    shift: float | str = "auto"
    train_frac: float = 2.0 / 3.0
    estimated: bool = False

    def __post_init__(self):
        counts = tuple(self.rule_counts)
        if not counts or any(r < 1 for r in counts):
            raise InvalidInputError("rule counts must be >= 1")
        if list(counts) != sorted(counts):
            raise InvalidInputError("rule counts must be ascending")
        if not 0.0 < self.train_frac < 1.0:
            raise InvalidInputError(f"train_frac must be in (0, 1), got {self.train_frac!r}")


@dataclass(frozen=True)
class AlphaSweepConfig:
    """Fictitious-action sweep at a fixed leaf budget."""

    synth: synth.SynthConfig
    alphas: tuple = (0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0)
    leaves: int = 6
    scale: float = 1.0
    shift: float | str = "auto"
    train_frac: float = 2.0 / 3.0
    estimated: bool = False

    def __post_init__(self):
        if not self.alphas or any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise InvalidInputError("alphas must lie in [0, 1]")
        if self.leaves < 1:
            raise InvalidInputError(f"leaves must be >= 1, got {self.leaves}")
        if not 0.0 < self.train_frac < 1.0:
            raise InvalidInputError(f"train_frac must be in (0, 1), got {self.train_frac!r}")


def _split_indices(n: int, train_frac: float, seed: int):
    rng = np.random.default_rng(derive_seed(seed, "train-test-split"))
    order = rng.permutation(n)
    n_train = min(max(int(round(n * train_frac)), 1), n - 1)
    return order[:n_train], order[n_train:]


def _prepare(synth_cfg: synth.SynthConfig, train_frac: float, estimated: bool):
    """Generate, split, and pick the probability tables for train and test.

    In oracle mode the ground truth feeds both the transformation and the
    evaluation; in estimated mode a logistic model fit on the training
    split replaces it on both sides, mirroring evaluation under the
    assumption that the estimates are the truth.
    """
    history, truth = synth.generate(synth_cfg)
    train_idx, test_idx = _split_indices(len(history), train_frac, synth_cfg.seed)
    X_train, X_test = history.X[train_idx], history.X[test_idx]
    if estimated:
        model = prob_model.fit(history.subset(train_idx))
        probs_train = model.predict_table(X_train)
        probs_test = model.predict_table(X_test)
    else:
        probs_train = truth.subset(train_idx)
        probs_test = truth.subset(test_idx)
    return X_train, probs_train, X_test, probs_test, (len(train_idx), len(test_idx))


def _train_and_rate(weighted: WeightedSet, leaves: int, probs_test: ProbTable, X_test) -> float:
    model = tree.train(weighted, max_leaves=leaves)
    return conversion_rate(model, probs_test, X_test)


def experiment_rule_count(cfg: RuleSweepConfig) -> ExperimentCurve:
    """Sweep the leaf budget; emit test-set rates for both methods plus bounds."""
    X_train, probs_train, X_test, probs_test, (n_train, n_test) = _prepare(
        cfg.synth, cfg.train_frac, cfg.estimated
    )
    tcfg = TransformConfig(scale=cfg.scale, shift=cfg.shift, mode="proposed")
    shift = resolve_shift(regret_table(probs_train), tcfg)
    proposed_set = transform_proposed(X_train, probs_train, tcfg)
    benchmark_set = transform_benchmark(X_train, probs_train)
    lower, upper = bounds(probs_test)

    counts = [int(r) for r in cfg.rule_counts]
    rates = {PROPOSED: [], BENCHMARK: []}
    for r in counts:
        rates[PROPOSED].append(_train_and_rate(proposed_set, r, probs_test, X_test))
        rates[BENCHMARK].append(_train_and_rate(benchmark_set, r, probs_test, X_test))
    return ExperimentCurve(
        x_values=counts,
        rates=rates,
        upper=[upper] * len(counts),
        lower=[lower] * len(counts),
        metadata={
            "experiment": "rule-count",
            "seed": cfg.synth.seed,
            "digest": config_digest(cfg),
            "train_rows": n_train,
            "test_rows": n_test,
            "scale": cfg.scale,
            "shift": shift,
            "estimated": cfg.estimated,
        },
    )


def experiment_alpha(cfg: AlphaSweepConfig) -> ExperimentCurve:
    """Sweep the fictitious action's strength at a fixed leaf budget."""
    X_train, probs_train, X_test, probs_test, (n_train, n_test) = _prepare(
        cfg.synth, cfg.train_frac, cfg.estimated
    )
    alphas = [float(a) for a in cfg.alphas]
    rates = {PROPOSED: [], BENCHMARK: []}
    uppers, lowers, shifts = [], [], []
    for alpha in alphas:
        train_alpha = synth.add_fictitious(probs_train, alpha)
        test_alpha = synth.add_fictitious(probs_test, alpha)
        tcfg = TransformConfig(scale=cfg.scale, shift=cfg.shift, mode="proposed")
        shifts.append(resolve_shift(regret_table(train_alpha), tcfg))
        proposed_set = transform_proposed(X_train, train_alpha, tcfg)
        benchmark_set = transform_benchmark(X_train, train_alpha)
        lo, hi = bounds(test_alpha)
        lowers.append(lo)
        uppers.append(hi)
        rates[PROPOSED].append(_train_and_rate(proposed_set, cfg.leaves, test_alpha, X_test))
        rates[BENCHMARK].append(_train_and_rate(benchmark_set, cfg.leaves, test_alpha, X_test))
    return ExperimentCurve(
        x_values=alphas,
        rates=rates,
        upper=uppers,
        lower=lowers,
        metadata={
            "experiment": "alpha",
            "seed": cfg.synth.seed,
            "digest": config_digest(cfg),
            "train_rows": n_train,
            "test_rows": n_test,
            "scale": cfg.scale,
            "shifts": ";".join(repr(s) for s in shifts),
            "leaves": cfg.leaves,
            "estimated": cfg.estimated,
        },
    )


__all__ = [
    "AlphaSweepConfig",
    "BENCHMARK",
    "ExperimentCurve",
    "IdentityReport",
    "PROPOSED",
    "RuleSweepConfig",
    "bounds",
    "config_digest",
    "conversion_rate",
    "experiment_alpha",
    "experiment_rule_count",
    "verify_loss_identity",
]
