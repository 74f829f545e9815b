"""Bagged CART classifier: Gini splits, sqrt-feature subsampling,
depth-capped trees, soft-vote probabilities, out-of-bag scoring.

Trees are grown with per-tree counter-based RNG streams, so the forest
is identical whatever order (or thread) builds each tree. Probabilities
are the mean over trees of leaf class frequencies.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import backend_name, kernels

FOREST_MAGIC = b"SMRF"
FOREST_VERSION = 1

_TREE_STREAM = 7000


@dataclass(frozen=True)
class RFConfig:
    n_trees: int = 253
    min_samples_split: int = 5
    max_depth: int = 16
    buffer_d: float = 50.0
    include_latlon: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.buffer_d < 0:
            raise ValueError("buffer_d must be >= 0")
        if self.max_depth < 1 or self.min_samples_split < 2:
            raise ValueError("bad tree growth limits")


class TreeArrays:
    """Flattened node arrays; feature == -1 marks a leaf."""

    def __init__(self, feature, threshold, left, right, counts):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.counts = np.asarray(counts, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return kernels.tree_apply(
            np.ascontiguousarray(X, dtype=np.float64),
            self.feature, self.threshold, self.left, self.right)

    def leaf_proba(self, X: np.ndarray) -> np.ndarray:
        leaves = self.apply(X)
        counts = self.counts[leaves]
        return counts / counts.sum(axis=1, keepdims=True)


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed, _TREE_STREAM + tree_index)))


def _grow_tree(X, y, n_classes, cfg: RFConfig, rng) -> tuple[TreeArrays, np.ndarray]:
    n = len(y)
    bootstrap = rng.integers(0, n, size=n)
    inbag = np.zeros(n, dtype=bool)
    inbag[bootstrap] = True
    n_features = X.shape[1]
    m_try = max(1, int(math.ceil(math.sqrt(n_features))))

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(None)
        return len(feature) - 1

    root = new_node()
    stack = [(root, bootstrap, 0)]
    while stack:
        node, idx, depth = stack.pop()
        node_counts = np.bincount(y[idx], minlength=n_classes).astype(np.float64)
        counts[node] = node_counts

        if depth >= cfg.max_depth or len(idx) < cfg.min_samples_split \
                or (node_counts > 0).sum() <= 1:
            continue

        cand = rng.choice(n_features, size=m_try, replace=False)
        best = (np.inf, -1, 0.0)
        for f in cand:
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            thr, score, ok = kernels.gini_sweep(
                np.ascontiguousarray(col[order]),
                np.ascontiguousarray(y[idx][order], dtype=np.int32),
                n_classes)
            if ok and score < best[0]:
                best = (score, int(f), thr)

        score, f, thr = best
        if f < 0:
            continue
        parent_gini = 1.0 - ((node_counts / len(idx)) ** 2).sum()
        if score >= parent_gini - 1e-12:
            continue

        mask = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left_node = new_node()
        right_node = new_node()
        left[node] = left_node
        right[node] = right_node
        stack.append((right_node, idx[~mask], depth + 1))
        stack.append((left_node, idx[mask], depth + 1))

    tree = TreeArrays(feature, threshold, left, right, np.vstack(counts))
    return tree, inbag


class RandomForest:
    """Ensemble over TreeArrays; deterministic in config.seed."""

    def __init__(self, config: RFConfig, n_classes: int, n_features: int,
                 trees: list[TreeArrays] | None = None):
        self.config = config
        self.n_classes = n_classes
        self.n_features = n_features
        self.trees = trees or []
        self.oob_accuracy_: float | None = None

    @property
    def backend(self) -> str:
        return backend_name()

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y)
        if len(X) != len(y) or len(X) == 0:
            raise ValueError("empty or mismatched training data")
        if len(X) < self.config.min_samples_split:
            raise ValueError("fewer samples than min_samples_split")
        y_enc = y.astype(np.int64)
        if y_enc.min() < 0 or y_enc.max() >= self.n_classes:
            raise ValueError("labels outside 0..n_classes-1")

        self.trees = []
        oob_votes = np.zeros((len(X), self.n_classes))
        for t in range(self.config.n_trees):
            tree, inbag = _grow_tree(X, y_enc, self.n_classes, self.config,
                                     _tree_rng(self.config.seed, t))
            self.trees.append(tree)
            out = ~inbag
            if out.any():
                oob_votes[out] += tree.leaf_proba(X[out])

        voted = oob_votes.sum(axis=1) > 0
        if voted.any():
            self.oob_accuracy_ = float(
                (oob_votes[voted].argmax(axis=1) == y_enc[voted]).mean())
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if not self.trees:
            raise ValueError("forest is not fitted")
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"feature arity {X.shape[1]} does not match training arity {self.n_features}")
        acc = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            acc += tree.leaf_proba(X)
        return acc / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


# ---------------------------------------------------------------------------
# Serialization: versioned binary of flattened node arrays


def save_forest(forest: RandomForest, path) -> None:
    header = {
        "version": FOREST_VERSION,
        "config": asdict(forest.config),
        "n_classes": forest.n_classes,
        "n_features": forest.n_features,
        "n_nodes": [t.n_nodes for t in forest.trees],
        "oob_accuracy": forest.oob_accuracy_,
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FOREST_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for t in forest.trees:
            fh.write(t.feature.astype("<i4").tobytes())
            fh.write(t.threshold.astype("<f8").tobytes())
            fh.write(t.left.astype("<i4").tobytes())
            fh.write(t.right.astype("<i4").tobytes())
            fh.write(t.counts.astype("<f8").tobytes())


def load_forest(path) -> RandomForest:
    with open(path, "rb") as fh:
        if fh.read(4) != FOREST_MAGIC:
            raise ValueError("not a forest file")
        size = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(size).decode("utf-8"))
        if header["version"] != FOREST_VERSION:
            raise ValueError(f"unsupported forest version {header['version']}")
        cfg = RFConfig(**header["config"])
        k = header["n_classes"]
        trees = []
        for n_nodes in header["n_nodes"]:
            feature = np.frombuffer(fh.read(4 * n_nodes), dtype="<i4")
            threshold = np.frombuffer(fh.read(8 * n_nodes), dtype="<f8")
            left = np.frombuffer(fh.read(4 * n_nodes), dtype="<i4")
            right = np.frombuffer(fh.read(4 * n_nodes), dtype="<i4")
            counts = np.frombuffer(fh.read(8 * n_nodes * k), dtype="<f8").reshape(n_nodes, k)
            trees.append(TreeArrays(feature, threshold, left, right, counts))
    forest = RandomForest(cfg, k, header["n_features"], trees)
    forest.oob_accuracy_ = header.get("oob_accuracy")
    return forest


# ---------------------------------------------------------------------------
# Hyperparameter search (the defaults above are the known-good values)


def random_search(X, y, n_classes, n_iter: int = 100, seed: int = 0,
                  base: RFConfig | None = None):
    """OOB-scored random search over trees/depth/min-split.

    Space: n_trees in [50, 500], max_depth in [4, 32],
    min_samples_split in [2, 10].
    """
    rng = np.random.Generator(np.random.Philox(key=(seed, 9000)))
    base = base or RFConfig()
    best_cfg, best_score, trials = None, -np.inf, []
    for _ in range(n_iter):
        cfg = RFConfig(
            n_trees=int(rng.integers(50, 501)),
            max_depth=int(rng.integers(4, 33)),
            min_samples_split=int(rng.integers(2, 11)),
            buffer_d=base.buffer_d,
            include_latlon=base.include_latlon,
            seed=base.seed,
        )
        forest = RandomForest(cfg, n_classes, X.shape[1]).fit(X, y)
        score = forest.oob_accuracy_ if forest.oob_accuracy_ is not None else -np.inf
        trials.append((cfg, score))
        if score > best_score:
            best_cfg, best_score = cfg, score
    return best_cfg, best_score, trials
