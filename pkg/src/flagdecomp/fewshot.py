"""Few-shot classification with flag prototypes over two-level features.

Each support class provides two feature matrices extracted at different
depths of a frozen encoder: F1 (n x s, intermediate) and F (n x s, final).
Stacking them column-wise gives a 2s-column matrix whose natural hierarchy
is {first s columns} inside {all 2s}; the class prototype is the flag of
type (s-1, 2(s-1); n) decomposed from it. A query supplies its own
(f1, f) pair and is scored by squared residuals against the prototype's
two blocks. Euclidean-mean and SVD-subspace prototypes are the baselines,
fed the stacked (f1; f) features by default for a fair comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .decompose import SolverConfig, flag_bmgs
from .errors import FlagTypeError
from .flags import FlagType, StiefelFlag
from .hierarchy import feature_hierarchy
from .linalg import as_matrix, load_matrix_csv, svd

METHODS = ("flag", "euclidean", "subspace")


@dataclass(frozen=True, eq=False)
class FeatureEpisode:
    """One evaluation task: per-class support features plus queries.

    support: per class, a pair (F1, F) of n x s matrices.
    queries: triples (f1, f, class_position) where class_position indexes
    the support list.
    """

    ways: int
    shots: int
    support: tuple
    queries: tuple

    def __post_init__(self):
        if self.ways < 1:
            raise ValueError("an episode needs at least one class")
        if len(self.support) != self.ways:
            raise ValueError(f"{len(self.support)} support classes for {self.ways} ways")
        dims = set()
        for f1, f in self.support:
            if f1.shape != (f1.shape[0], self.shots) or f.shape != f1.shape:
                raise ValueError("support matrices must be n x shots, consistent")
            dims.add(f1.shape[0])
        if len(dims) != 1:
            raise ValueError("inconsistent feature dimension across classes")
        for f1, f, label in self.queries:
            if f1.shape != (next(iter(dims)),) or f.shape != f1.shape:
                raise ValueError("query vectors must match the feature dimension")
            if not 0 <= label < self.ways:
                raise ValueError(f"query label {label} out of range")


@dataclass(frozen=True, eq=False)
class FlagPrototype:
    """Class representative: a (s-1, 2(s-1); n) flag plus its class id."""

    flag: StiefelFlag
    class_id: int | None = None


def flag_prototype(
    f1,
    f,
    shots: int,
    class_id: int | None = None,
    config: SolverConfig | None = None,
) -> FlagPrototype:
    """Flag prototype from the stacked support [F1 | F].

    Needs shots >= 2 so both blocks have width s-1 >= 1. Degenerate support
    whose levels cannot supply s-1 directions each raises DegenerateBlock.
    """
    s = int(shots)
    if s < 2:
        raise FlagTypeError(f"flag prototypes need shots >= 2, got {s}")
    f1 = as_matrix(f1, "F1")
    f = as_matrix(f, "F")
    if f1.shape != f.shape or f1.shape[1] != s:
        raise ValueError(
            f"support must be two n x {s} matrices, got {f1.shape} and {f.shape}"
        )
    stacked = np.hstack([f1, f])
    flag_type = FlagType((s - 1, 2 * (s - 1)), f1.shape[0])
    result = flag_bmgs(stacked, feature_hierarchy(s), flag_type, config or SolverConfig())
    return FlagPrototype(result.flag, class_id)


def flag_query_distance(proto: FlagPrototype, f1, f) -> float:
    """Squared residuals of the query levels against the prototype blocks.

    ||f1 - Q1 Q1^T f1||^2 + ||f - Q2 Q2^T f||^2, with Q1, Q2 the two
    coordinate blocks. Zero exactly when f1 lies in span(Q1) and f in
    span(Q2).
    """
    q1 = proto.flag.block(0)
    q2 = proto.flag.block(1)
    v1 = np.asarray(f1, dtype=float)
    v2 = np.asarray(f, dtype=float)
    if v1.shape != (q1.shape[0],) or v2.shape != (q2.shape[0],):
        raise ValueError(
            f"query vectors must have length {q1.shape[0]}, got {v1.shape} and {v2.shape}"
        )
    r1 = v1 - q1 @ (q1.T @ v1)
    r2 = v2 - q2 @ (q2.T @ v2)
    return float(r1 @ r1 + r2 @ r2)


def euclidean_prototype_distance(support, query) -> float:
    """Squared distance between the query and the support column mean."""
    s = as_matrix(support, "support")
    q = np.asarray(query, dtype=float)
    if q.shape != (s.shape[0],):
        raise ValueError(f"query length {q.shape} does not match support rows {s.shape[0]}")
    diff = q - s.mean(axis=1)
    return float(diff @ diff)


def subspace_prototype_distance(support, query, shots: int) -> float:
    """Squared residual of the query against the top s-1 singular directions.

    No mean subtraction: the subspace is fit to the raw support columns.
    """
    s = int(shots)
    if s < 2:
        raise ValueError(f"subspace prototypes need shots >= 2, got {s}")
    mat = as_matrix(support, "support")
    q = np.asarray(query, dtype=float)
    if q.shape != (mat.shape[0],):
        raise ValueError(f"query length {q.shape} does not match support rows {mat.shape[0]}")
    basis = svd(mat).left_vectors[:, : s - 1]
    resid = q - basis @ (basis.T @ q)
    return float(resid @ resid)


def _normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def classify_episode(
    episode: FeatureEpisode,
    method: str,
    *,
    stacked: bool = True,
    normalize_queries: bool = False,
    config: SolverConfig | None = None,
) -> float:
    """Accuracy of argmin-distance classification on one episode.

    stacked: baselines see the concatenated (f1; f) features (fair mode);
    with stacked=False they see only the final-level features.
    normalize_queries: unit-normalize query levels before the flag distance
    (the Stiefel-coordinate comparison mode); off by default.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    s = episode.shots

    if method == "flag":
        protos = [
            flag_prototype(f1, f, s, class_id=c, config=config)
            for c, (f1, f) in enumerate(episode.support)
        ]
    elif stacked:
        reps = [np.vstack([f1, f]) for f1, f in episode.support]
    else:
        reps = [f for _, f in episode.support]

    correct = 0
    for f1, f, label in episode.queries:
        if method == "flag":
            q1 = _normalize(f1) if normalize_queries else f1
            q2 = _normalize(f) if normalize_queries else f
            dists = [flag_query_distance(pr, q1, q2) for pr in protos]
        else:
            query = np.concatenate([f1, f]) if stacked else f
            if method == "euclidean":
                dists = [euclidean_prototype_distance(rep, query) for rep in reps]
            else:
                dists = [subspace_prototype_distance(rep, query, s) for rep in reps]
        if int(np.argmin(dists)) == label:
            correct += 1
    return correct / len(episode.queries) if episode.queries else 0.0


@dataclass(frozen=True)
class FewShotStats:
    mean: float
    std: float
    per_trial: tuple[float, ...]


def evaluate_episodes(
    trials: Sequence[Sequence[FeatureEpisode]],
    method: str,
    *,
    stacked: bool = True,
    normalize_queries: bool = False,
    config: SolverConfig | None = None,
) -> FewShotStats:
    """Accuracy aggregated per trial, then averaged across trials."""
    per_trial = []
    for episodes in trials:
        accs = [
            classify_episode(
                ep,
                method,
                stacked=stacked,
                normalize_queries=normalize_queries,
                config=config,
            )
            for ep in episodes
        ]
        per_trial.append(float(np.mean(accs)))
    values = np.asarray(per_trial)
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return FewShotStats(float(values.mean()), std, tuple(per_trial))


def sample_episodes(
    pools: Sequence[tuple[np.ndarray, np.ndarray]],
    ways: int,
    shots: int,
    queries_per_task: int,
    tasks: int,
    rng: np.random.Generator,
) -> list[FeatureEpisode]:
    """Draw evaluation tasks from per-class feature pools.

    pools: per class a pair (F1_pool, F_pool) of n x N matrices with
    matching columns. Each task picks ``ways`` classes, ``shots`` support
    columns per class, and queries from the leftover columns.
    """
    if len(pools) < ways:
        raise ValueError(f"need at least {ways} classes, got {len(pools)}")
    episodes = []
    for _ in range(tasks):
        class_ix = rng.choice(len(pools), size=ways, replace=False)
        support = []
        leftovers = []
        for c in class_ix:
            f1_pool, f_pool = pools[c]
            count = f1_pool.shape[1]
            if count < shots + 1:
                raise ValueError(
                    f"class {c} pool has {count} columns; needs > {shots}"
                )
            perm = rng.permutation(count)
            support.append((f1_pool[:, perm[:shots]], f_pool[:, perm[:shots]]))
            leftovers.append((f1_pool, f_pool, perm[shots:]))
        queries = []
        for _ in range(queries_per_task):
            pos = int(rng.integers(ways))
            f1_pool, f_pool, free = leftovers[pos]
            col = int(free[rng.integers(free.size)])
            queries.append((f1_pool[:, col], f_pool[:, col], pos))
        episodes.append(
            FeatureEpisode(ways, shots, tuple(support), tuple(queries))
        )
    return episodes


def load_feature_manifest(path):
    """Load a feature-pool manifest.

    JSON schema (paths relative to the manifest file)::

        {"schema": 1, "ways": 5, "shots": 3,
         "queries_per_task": 10, "tasks_per_trial": 100,
         "classes": [{"name": "...", "level1": "c0_l1.csv", "final": "c0_f.csv"}, ...]}

    Returns (pools, manifest_dict).
    """
    src = Path(path)
    with open(src) as fh:
        manifest = json.load(fh)
    if manifest.get("schema") != 1:
        raise ValueError(f"{path}: unsupported manifest schema {manifest.get('schema')!r}")
    for key in ("ways", "shots", "classes"):
        if key not in manifest:
            raise ValueError(f"{path}: manifest missing {key!r}")
    pools = []
    dim = None
    for entry in manifest["classes"]:
        f1 = load_matrix_csv(src.parent / entry["level1"])
        f = load_matrix_csv(src.parent / entry["final"])
        if f1.shape != f.shape:
            raise ValueError(
                f"{entry.get('name', '?')}: level feature shapes differ "
                f"({f1.shape} vs {f.shape})"
            )
        if dim is None:
            dim = f1.shape[0]
        elif f1.shape[0] != dim:
            raise ValueError("feature dimension differs across classes")
        pools.append((f1, f))
    return pools, manifest
