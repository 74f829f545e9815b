"""Cross-validation designs: random and spatial-holdout fold assignment.

Spatial holdout clusters points with density-based clustering at radius
eps and minimum cluster size 1, which reduces to connected components of
the <= eps proximity graph. Whole clusters are then assigned to folds, so
any two points in different folds are strictly farther apart than eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

N_FOLDS = 5

SCHEME_RANDOM = "Random"
SCHEME_SH1KM = "SH-1km"
SCHEME_SH10KM = "SH-10km"
SCHEME_EPS = {SCHEME_RANDOM: 0.0, SCHEME_SH1KM: 1000.0, SCHEME_SH10KM: 10000.0}


@dataclass
class FoldAssignment:
    scheme: str
    eps: float
    seed: int
    fold_of: np.ndarray              # (n,) int, values in 0..4
    cluster_of: np.ndarray | None    # (n,) int for spatial schemes, else None

    def __post_init__(self):
        folds = np.unique(self.fold_of)
        if folds.min() < 0 or folds.max() >= N_FOLDS or len(folds) != N_FOLDS:
            raise ValueError("assignment must use all folds 0..4")

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# scheme={self.scheme} eps={self.eps!r} seed={self.seed}\n")
            fh.write("index,cluster,fold\n")
            cluster = self.cluster_of if self.cluster_of is not None \
                else np.full(len(self.fold_of), -1)
            for i, (c, f) in enumerate(zip(cluster, self.fold_of)):
                fh.write(f"{i},{c},{f}\n")

    @classmethod
    def load(cls, path) -> "FoldAssignment":
        with open(path) as fh:
            header = fh.readline().strip()
            if not header.startswith("#"):
                raise ValueError("missing scheme header comment")
            kv = dict(part.split("=", 1) for part in header[1:].split())
            fh.readline()  # column header
            rows = [line.strip().split(",") for line in fh if line.strip()]
        cluster = np.array([int(r[1]) for r in rows])
        folds = np.array([int(r[2]) for r in rows])
        scheme = kv["scheme"]
        return cls(scheme=scheme, eps=float(kv["eps"]), seed=int(kv["seed"]),
                   fold_of=folds,
                   cluster_of=None if scheme == SCHEME_RANDOM else cluster)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed, 101)))


def random_split(points_xy: np.ndarray, seed: int) -> FoldAssignment:
    """Location-blind split; fold sizes within one of n/5."""
    n = len(points_xy)
    if n < N_FOLDS:
        raise ValueError(f"need at least {N_FOLDS} points, got {n}")
    order = _rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % N_FOLDS
    return FoldAssignment(scheme=SCHEME_RANDOM, eps=0.0, seed=seed,
                          fold_of=fold_of, cluster_of=None)


def spatial_cluster(points_xy: np.ndarray, eps: float) -> np.ndarray:
    """Connected components of the <= eps proximity graph.

    Returns contiguous cluster ids ordered by first point occurrence, so
    ids are deterministic for a given point order.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    points_xy = np.asarray(points_xy, dtype=np.float64)
    n = len(points_xy)
    if n == 0:
        return np.empty(0, dtype=np.int64)

    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    tree = cKDTree(points_xy)
    for i, j in tree.query_pairs(eps, output_type="ndarray"):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    roots = np.array([find(i) for i in range(n)])
    _, ids = np.unique(roots, return_inverse=True)
    # renumber by first occurrence
    order = np.full(ids.max() + 1, -1, dtype=np.int64)
    nxt = 0
    out = np.empty(n, dtype=np.int64)
    for k, cid in enumerate(ids):
        if order[cid] < 0:
            order[cid] = nxt
            nxt += 1
        out[k] = order[cid]
    return out


def spatial_split(points_xy: np.ndarray, eps: float, seed: int,
                  scheme: str | None = None) -> FoldAssignment:
    """Cluster at eps, then deal whole clusters into five folds.

    Clusters are shuffled (seeded), stably ordered largest-first, and each
    goes to the currently smallest fold by point count; ties break toward
    the lowest fold index. Guarantees min cross-fold distance > eps.
    """
    cluster_of = spatial_cluster(points_xy, eps)
    n_clusters = int(cluster_of.max()) + 1 if len(cluster_of) else 0
    if n_clusters < N_FOLDS:
        raise ValueError(
            f"need at least {N_FOLDS} clusters for a spatial split, got {n_clusters}")

    sizes = np.bincount(cluster_of, minlength=n_clusters)
    shuffled = _rng(seed).permutation(n_clusters)
    order = shuffled[np.argsort(-sizes[shuffled], kind="stable")]

    fold_totals = np.zeros(N_FOLDS, dtype=np.int64)
    cluster_fold = np.empty(n_clusters, dtype=np.int64)
    for c in order:
        f = int(np.argmin(fold_totals))
        cluster_fold[c] = f
        fold_totals[f] += sizes[c]

    if scheme is None:
        scheme = SCHEME_SH1KM if eps <= 1000.0 else SCHEME_SH10KM
    return FoldAssignment(scheme=scheme, eps=float(eps), seed=seed,
                          fold_of=cluster_fold[cluster_of], cluster_of=cluster_of)


def make_split(points_xy: np.ndarray, scheme: str, seed: int) -> FoldAssignment:
    if scheme == SCHEME_RANDOM:
        return random_split(points_xy, seed)
    if scheme in (SCHEME_SH1KM, SCHEME_SH10KM):
        return spatial_split(points_xy, SCHEME_EPS[scheme], seed, scheme=scheme)
    raise ValueError(f"unknown scheme {scheme!r}")
