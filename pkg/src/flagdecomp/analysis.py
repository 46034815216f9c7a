"""Collection-level analytics: distance matrices, classical MDS, kNN.

A collection of same-shaped matrices (sharing one hierarchy and flag type)
is turned into flag representatives, pairwise distances are assembled into
a symmetric matrix, and downstream consumers embed (MDS) or classify (kNN
on the precomputed distances).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decompose import (
    ROBUST_CONFIG,
    SolverConfig,
    flag_bmgs,
    irls_svd_flag,
    svd_flag,
)
from .flags import (
    FlagType,
    StiefelFlag,
    flag_chordal,
    grassmann_product_sum,
)
from .hierarchy import ColumnHierarchy

FLAG_METRICS = ("flag_chordal", "grassmann_product_sum")
METRIC_NAMES = FLAG_METRICS + ("euclidean_flat",)
EXTRACTION_METHODS = ("fd", "rfd", "svd", "irls_svd")


@dataclass(frozen=True, eq=False)
class LabeledCollection:
    """Items (matrices or precomputed flags) with optional class labels."""

    items: tuple
    labels: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise ValueError("collection is empty")
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            if labels.shape != (len(self.items),):
                raise ValueError(
                    f"{labels.size} labels for {len(self.items)} items"
                )
            object.__setattr__(self, "labels", labels)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric nonnegative pairwise distances with a zero diagonal."""

    values: np.ndarray
    metric: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"distance matrix must be square, got {v.shape}")
        if np.any(np.diag(v) != 0.0):
            raise ValueError("distance matrix diagonal must be exactly zero")
        if np.linalg.norm(v - v.T) > 1e-12 * max(1.0, np.linalg.norm(v)):
            raise ValueError("distance matrix is not symmetric")
        if np.any(v < 0.0):
            raise ValueError("distances must be nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.shape[0]


def _dist_values(dist) -> np.ndarray:
    if isinstance(dist, DistanceMatrix):
        return dist.values
    return DistanceMatrix(np.asarray(dist, dtype=float), "precomputed").values


def flags_from_matrices(
    items: Sequence[np.ndarray],
    hierarchy: ColumnHierarchy,
    flag_type: FlagType,
    method: str = "fd",
    config: SolverConfig | None = None,
) -> list[StiefelFlag]:
    """Extract one flag per matrix.

    method: "fd" hierarchy-aware decomposition, "rfd" its robust variant,
    "svd" plain truncated SVD, "irls_svd" flat robust basis.
    """
    if method not in EXTRACTION_METHODS:
        raise ValueError(f"unknown extraction method {method!r}")
    if method == "fd":
        cfg = config or SolverConfig()
        return [flag_bmgs(d, hierarchy, flag_type, cfg).flag for d in items]
    if method == "rfd":
        cfg = config or ROBUST_CONFIG
        return [flag_bmgs(d, hierarchy, flag_type, cfg).flag for d in items]
    if method == "svd":
        return [svd_flag(d, flag_type) for d in items]
    cfg = config or ROBUST_CONFIG
    return [irls_svd_flag(d, flag_type, cfg) for d in items]


def distance_matrix(
    collection,
    metric: str = "flag_chordal",
    *,
    hierarchy: ColumnHierarchy | None = None,
    flag_type: FlagType | None = None,
    method: str = "fd",
    config: SolverConfig | None = None,
) -> DistanceMatrix:
    """Pairwise distances over a collection.

    For the flag metrics the items may be precomputed StiefelFlag objects,
    or raw matrices together with ``hierarchy``/``flag_type`` (then
    ``method`` picks the extraction). The euclidean_flat baseline measures
    plain L2 distance between flattened matrices.
    """
    items = collection.items if isinstance(collection, LabeledCollection) else tuple(collection)
    if not items:
        raise ValueError("collection is empty")
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRIC_NAMES}")

    if metric == "euclidean_flat":
        mats = [np.asarray(d, dtype=float) for d in items]
        shape = mats[0].shape
        if any(m.shape != shape for m in mats):
            raise ValueError("collection items must share one shape")
        flat = np.stack([m.ravel() for m in mats])
        gram = flat @ flat.T
        sq = np.diag(gram)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
        values = np.sqrt(d2)
        values[np.diag_indices_from(values)] = 0.0
        values = 0.5 * (values + values.T)
        return DistanceMatrix(values, metric)

    if all(isinstance(it, StiefelFlag) for it in items):
        flags = list(items)
        first = flags[0].flag_type
        if any(f.flag_type != first for f in flags):
            raise ValueError("all flags must share one flag type")
    else:
        if hierarchy is None or flag_type is None:
            raise ValueError(
                "raw matrices need hierarchy and flag_type for flag metrics"
            )
        shape = np.asarray(items[0]).shape
        if any(np.asarray(d).shape != shape for d in items):
            raise ValueError("collection items must share one shape")
        flags = flags_from_matrices(items, hierarchy, flag_type, method, config)

    pair = flag_chordal if metric == "flag_chordal" else grassmann_product_sum
    n = len(flags)
    values = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            values[a, b] = values[b, a] = pair(flags[a], flags[b])
    return DistanceMatrix(values, metric)


def classical_mds(dist, dim: int) -> np.ndarray:
    """Classical (Torgerson) MDS embedding of a distance matrix.

    Double-centers the squared distances, eigendecomposes, clamps negative
    eigenvalues at zero, and returns N x dim coordinates scaled by the root
    eigenvalues. The embedding is centered; an all-zero distance matrix
    embeds to all zeros.
    """
    values = _dist_values(dist)
    n = values.shape[0]
    if not 1 <= dim < n:
        raise ValueError(f"dim must be in [1, {n - 1}], got {dim}")
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * centering @ (values**2) @ centering
    gram = 0.5 * (gram + gram.T)
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1][:dim]
    top = np.maximum(evals[order], 0.0)
    return evecs[:, order] * np.sqrt(top)


@dataclass(frozen=True, eq=False)
class KnnResult:
    predicted: np.ndarray     # one label per test item
    test_indices: np.ndarray
    accuracy: float


def knn_classify(dist, labels, k: int, train_mask) -> KnnResult:
    """k-nearest-neighbor vote over precomputed distances.

    Items where ``train_mask`` is False are classified by majority vote
    among their k nearest training items. Vote ties go to the tied class
    that contains the single nearest neighbor. Deterministic: equal
    distances are broken by training-item index order.
    """
    values = _dist_values(dist)
    labels = np.asarray(labels, dtype=int)
    mask = np.asarray(train_mask, dtype=bool)
    n = values.shape[0]
    if labels.shape != (n,) or mask.shape != (n,):
        raise ValueError("labels and train_mask must have one entry per item")
    train_ix = np.flatnonzero(mask)
    test_ix = np.flatnonzero(~mask)
    if train_ix.size == 0:
        raise ValueError("training set is empty")
    if not 1 <= k <= train_ix.size:
        raise ValueError(f"k must be in [1, {train_ix.size}], got {k}")

    predicted = np.empty(test_ix.size, dtype=int)
    for pos, t in enumerate(test_ix):
        order = np.argsort(values[t, train_ix], kind="stable")
        neighbor_labels = labels[train_ix[order[:k]]]
        classes, counts = np.unique(neighbor_labels, return_counts=True)
        tied = classes[counts == counts.max()]
        if tied.size == 1:
            predicted[pos] = tied[0]
        else:
            tied_set = set(tied.tolist())
            for lab in neighbor_labels:
                if lab in tied_set:
                    predicted[pos] = lab
                    break
    accuracy = float(np.mean(predicted == labels[test_ix])) if test_ix.size else 0.0
    return KnnResult(predicted, test_ix, accuracy)


def stratified_split(labels, train_fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean train mask with per-class proportions near ``train_fraction``.

    Every class keeps at least one training and one test item.
    """
    labels = np.asarray(labels, dtype=int)
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    mask = np.zeros(labels.size, dtype=bool)
    for cls in np.unique(labels):
        ix = np.flatnonzero(labels == cls)
        if ix.size < 2:
            raise ValueError(f"class {cls} has fewer than 2 items")
        n_train = int(round(train_fraction * ix.size))
        n_train = min(max(n_train, 1), ix.size - 1)
        chosen = rng.permutation(ix)[:n_train]
        mask[chosen] = True
    return mask
