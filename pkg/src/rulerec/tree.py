"""Weighted multi-class decision tree with a hard leaf budget.

Growth is best-first: the frontier leaf whose best split removes the most
weighted Gini impurity is split next, until the leaf count hits the
budget or no leaf has a strictly improving split.  The leaf count equals
the number of IF-THEN rules the tree can be rendered as, which makes the
budget the single interpretability knob.  Trees grown at budget R are
refinements of the trees grown at budget R-1.

Split thresholds sit at midpoints between consecutive distinct feature
values; routing sends ``value <= threshold`` to the left child.  All tie
breaks are deterministic: between features by lower index, between
thresholds by smaller value, between equally good frontier leaves by
creation order, and leaf actions by lowest action index.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DimensionMismatchError,
    InvalidInputError,
    MalformedDocumentError,
    WeightedSet,
)


@dataclass(eq=False)
class Node:
    """One tree node; a leaf iff ``feature`` is None."""

    feature: int | None = None
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None
    action: int = 0
    class_weights: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    decrease: float  # weighted impurity decrease, always > 0 when offered


@dataclass(eq=False)
class RuleTree:
    """A trained tree plus the dimensions it was trained for."""

    root: Node
    n_features: int
    n_actions: int

    def n_leaves(self) -> int:
        return sum(1 for _ in self.leaves())

    def leaves(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            else:
                stack.append(node.right)
                stack.append(node.left)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected feature matrix with {self.n_features} columns, got shape {X.shape}"
            )
        out = np.empty(X.shape[0], dtype=np.int64)

        def route(node: Node, idx: np.ndarray):
            if node.is_leaf:
                out[idx] = node.action
                return
            go_left = X[idx, node.feature] <= node.threshold
            route(node.left, idx[go_left])
            route(node.right, idx[~go_left])

        route(self.root, np.arange(X.shape[0]))
        return out

    def predict_one(self, x) -> int:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise DimensionMismatchError(
                f"expected feature vector of length {self.n_features}, got shape {x.shape}"
            )
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.action


def weighted_gini(class_weights) -> float:
    """Gini impurity of a weighted class distribution; 0 for empty nodes."""
    w = np.asarray(class_weights, dtype=np.float64)
    total = w.sum()
    if total <= 0.0:
        return 0.0
    frac = w / total
    return float(1.0 - np.sum(frac * frac))


def best_split(X, actions, weights, n_actions: int, min_leaf_weight: float = 0.0):
    """Exhaustive scan for the split with the largest weighted impurity decrease.

    Candidates are midpoints between consecutive distinct values of each
    feature.  The decrease is measured in total weighted impurity,
    ``W*G(parent) - W_left*G(left) - W_right*G(right)``, computed in the
    algebraically equivalent form ``S_l/W_l + S_r/W_r - S_p/W_p`` with
    ``S`` the sum of squared class weights.  Returns None when no split
    strictly decreases impurity.
    """
    X = np.asarray(X, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    n = X.shape[0]
    if n < 2 or np.count_nonzero(weights > 0) < 2:
        return None

    class_totals = np.bincount(actions, weights=weights, minlength=n_actions)
    total = class_totals.sum()
    sq_total = float(np.sum(class_totals * class_totals))
    if total <= 0.0 or sq_total >= total * total:  # pure or empty node
        return None
    parent_score = sq_total / total

    best: SplitCandidate | None = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        distinct = xs[:-1] < xs[1:]
        if not distinct.any():
            continue
        cum = np.zeros((n, n_actions))
        cum[np.arange(n), actions[order]] = weights[order]
        np.cumsum(cum, axis=0, out=cum)

        left = cum[:-1]
        w_left = left.sum(axis=1)
        w_right = total - w_left
        sq_left = np.sum(left * left, axis=1)
        right = class_totals[None, :] - left
        sq_right = np.sum(right * right, axis=1)

        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(w_left > 0, sq_left / w_left, 0.0) + np.where(
                w_right > 0, sq_right / w_right, 0.0
            )
        usable = distinct & (w_left >= min_leaf_weight) & (w_right >= min_leaf_weight)
        if not usable.any():
            continue
        score = np.where(usable, score, -np.inf)
        i = int(np.argmax(score))  # first maximum -> smallest threshold
        decrease = float(score[i] - parent_score)
        if decrease > 0.0 and (best is None or decrease > best.decrease):
            best = SplitCandidate(
                feature=f, threshold=float((xs[i] + xs[i + 1]) / 2.0), decrease=decrease
            )
    return best


def _leaf_for(actions, weights, indices, n_actions: int) -> Node:
    cls = np.bincount(actions[indices], weights=weights[indices], minlength=n_actions)
    return Node(action=int(np.argmax(cls)), class_weights=cls)


def train(
    weighted: WeightedSet, max_leaves: int, min_leaf_weight: float = 0.0
) -> RuleTree:
    """Grow a tree best-first until ``max_leaves`` leaves or no useful split."""
    if max_leaves < 1:
        raise InvalidInputError(f"max_leaves must be >= 1, got {max_leaves}")
    if len(weighted) == 0 or weighted.total_weight <= 0.0:
        raise InvalidInputError("training needs a nonempty set with positive total weight")
    X, actions, weights = weighted.X, weighted.actions, weighted.weights
    n_actions = weighted.n_actions

    root = _leaf_for(actions, weights, np.arange(len(weighted)), n_actions)
    frontier: list = []
    counter = 0

    def offer(node: Node, indices: np.ndarray):
        nonlocal counter
        cand = best_split(X[indices], actions[indices], weights[indices], n_actions, min_leaf_weight)
        if cand is not None:
            heapq.heappush(frontier, (-cand.decrease, counter, cand, node, indices))
            counter += 1

    offer(root, np.arange(len(weighted)))
    n_leaves = 1
    while n_leaves < max_leaves and frontier:
        _, _, cand, node, indices = heapq.heappop(frontier)
        go_left = X[indices, cand.feature] <= cand.threshold
        left_idx, right_idx = indices[go_left], indices[~go_left]
        node.feature = cand.feature
        node.threshold = cand.threshold
        node.left = _leaf_for(actions, weights, left_idx, n_actions)
        node.right = _leaf_for(actions, weights, right_idx, n_actions)
        node.class_weights = None
        offer(node.left, left_idx)
        offer(node.right, right_idx)
        n_leaves += 1
    return RuleTree(root=root, n_features=weighted.n_features, n_actions=n_actions)


# ---------------------------------------------------------------------------
# Rule rendering
# ---------------------------------------------------------------------------


def _format_value(v: float) -> str:
    return f"{v:g}"


def extract_rules(tree: RuleTree, feature_names=None) -> list[str]:
    """Render one IF-THEN rule per leaf, left-to-right.

    Conditions on the same feature along a path are merged into a single
    interval, so a path through ``f0 <= 5`` and ``f0 <= 3`` renders as
    ``f0 <= 3``.
    """
    if feature_names is None:
        feature_names = [f"f{i}" for i in range(tree.n_features)]
    elif len(feature_names) != tree.n_features:
        raise InvalidInputError(
            f"expected {tree.n_features} feature names, got {len(feature_names)}"
        )
    rules: list[str] = []

    def walk(node: Node, lower: dict, upper: dict):
        if node.is_leaf:
            conds = []
            for f in sorted(set(lower) | set(upper)):
                if f in lower:
                    conds.append(f"{feature_names[f]} > {_format_value(lower[f])}")
                if f in upper:
                    conds.append(f"{feature_names[f]} <= {_format_value(upper[f])}")
            body = " AND ".join(conds) if conds else "TRUE"
            rules.append(f"IF {body} THEN action {node.action}")
            return
        f, t = node.feature, node.threshold
        tighter_upper = dict(upper)
        tighter_upper[f] = min(upper.get(f, np.inf), t)
        walk(node.left, lower, tighter_upper)
        tighter_lower = dict(lower)
        tighter_lower[f] = max(lower.get(f, -np.inf), t)
        walk(node.right, tighter_lower, upper)

    walk(tree.root, {}, {})
    return rules


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _node_to_dict(node: Node) -> dict:
    if node.is_leaf:
        return {"action": node.action, "weights": list(map(float, node.class_weights))}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(doc, path: str, n_features: int, n_actions: int) -> Node:
    if not isinstance(doc, dict):
        raise MalformedDocumentError(f"at {path}: expected an object, got {type(doc).__name__}")
    keys = set(doc)
    if keys == {"action", "weights"}:
        weights = doc["weights"]
        if not isinstance(weights, list) or len(weights) != n_actions:
            raise MalformedDocumentError(
                f"at {path}: leaf weights must be a list of length {n_actions}"
            )
        cls = np.asarray(weights, dtype=np.float64)
        if not np.all(np.isfinite(cls)) or np.any(cls < 0):
            raise MalformedDocumentError(f"at {path}: leaf weights must be finite and >= 0")
        action = doc["action"]
        if action != int(np.argmax(cls)):
            raise MalformedDocumentError(
                f"at {path}: leaf action {action} does not match the weight argmax"
            )
        return Node(action=int(action), class_weights=cls)
    if keys == {"feature", "threshold", "left", "right"}:
        feature = doc["feature"]
        threshold = doc["threshold"]
        if not isinstance(feature, int) or not 0 <= feature < n_features:
            raise MalformedDocumentError(
                f"at {path}: feature index {feature!r} outside [0, {n_features})"
            )
        if not isinstance(threshold, (int, float)) or not np.isfinite(threshold):
            raise MalformedDocumentError(f"at {path}: threshold {threshold!r} is not finite")
        return Node(
            feature=feature,
            threshold=float(threshold),
            left=_node_from_dict(doc["left"], path + ".left", n_features, n_actions),
            right=_node_from_dict(doc["right"], path + ".right", n_features, n_actions),
        )
    raise MalformedDocumentError(
        f"at {path}: node keys must be {{action, weights}} or "
        f"{{feature, threshold, left, right}}, got {sorted(keys)}"
    )


def serialize(tree: RuleTree) -> str:
    """Lossless JSON document for a trained tree."""
    doc = {
        "n_features": tree.n_features,
        "n_actions": tree.n_actions,
        "root": _node_to_dict(tree.root),
    }
    return json.dumps(doc, indent=2) + "\n"


def deserialize(text: str) -> RuleTree:
    """Parse :func:`serialize` output; errors carry document positions."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedDocumentError(
            f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    if not isinstance(doc, dict) or set(doc) != {"n_features", "n_actions", "root"}:
        raise MalformedDocumentError(
            "top level must be an object with keys {n_features, n_actions, root}"
        )
    n_features, n_actions = doc["n_features"], doc["n_actions"]
    if not isinstance(n_features, int) or n_features < 1:
        raise MalformedDocumentError(f"n_features must be a positive integer, got {n_features!r}")
    if not isinstance(n_actions, int) or n_actions < 2:
        raise MalformedDocumentError(f"n_actions must be an integer >= 2, got {n_actions!r}")
    root = _node_from_dict(doc["root"], "root", n_features, n_actions)
    return RuleTree(root=root, n_features=n_features, n_actions=n_actions)


__all__ = [
    "Node",
    "RuleTree",
    "SplitCandidate",
    "best_split",
    "deserialize",
    "extract_rules",
    "serialize",
    "train",
    "weighted_gini",
]
