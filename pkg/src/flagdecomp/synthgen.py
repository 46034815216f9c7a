"""Seeded generators for the synthetic experiment models.

Three corruption models over planted flags, plus a patch-collection
generator for classification runs:

* additive noise: every column lives in the flag subspace of its block,
  observed = clean + mean-zero noise (gaussian, centered exponential, or
  centered uniform);
* outlier contamination: a random subset of columns is replaced by vectors
  in the orthogonal complement of the planted span;
* cluster simulation: several planted center flags, a batch of noisy
  matrices around each, labeled by center;
* patch collection: per-class planted flags over small square pixel
  patches with a center-pixel-first neighborhood hierarchy.

Determinism: every generator consumes named Philox streams derived from
(seed, stream) pairs, so identical seeds give bit-identical instances and
trial harnesses can derive independent sub-seeds with :func:`derive_seed`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flags import FlagType, StiefelFlag, random_stiefel_flag
from .hierarchy import ColumnHierarchy, band_hierarchy, neighborhood_hierarchy

_MASK64 = (1 << 64) - 1

DEFAULT_FLAG_TYPE = FlagType((2, 4), 10)
DEFAULT_BLOCK_SIZES = (20, 20)


def subseed_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for (seed, stream): Philox keyed on the pair."""
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(base: int, *indices: int) -> int:
    """Stable 64-bit sub-seed for trial harnesses (seed + index splitting)."""
    ss = np.random.SeedSequence(int(base) & _MASK64, spawn_key=tuple(int(i) for i in indices))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class NoiseSpec:
    """Additive corruption: distribution family, scale (std dev), seed.

    Exponential and uniform draws are shifted/scaled to mean zero with
    standard deviation ``scale``, matching the gaussian parameterization.
    """

    distribution: str = "gaussian"
    scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.distribution not in ("gaussian", "exponential", "uniform"):
            raise ValueError(f"unknown noise distribution {self.distribution!r}")
        if self.scale < 0:
            raise ValueError("noise scale must be >= 0")


def draw_noise(spec: NoiseSpec, shape, rng: np.random.Generator) -> np.ndarray:
    """Mean-zero noise of standard deviation ``spec.scale``."""
    if spec.scale == 0.0:
        return np.zeros(shape)
    if spec.distribution == "gaussian":
        return rng.normal(0.0, spec.scale, shape)
    if spec.distribution == "exponential":
        # Exp(scale) has mean = std = scale; recenter to mean zero.
        return rng.exponential(spec.scale, shape) - spec.scale
    half_width = spec.scale * np.sqrt(3.0)
    return rng.uniform(-half_width, half_width, shape)


@dataclass(frozen=True, eq=False)
class PlantedInstance:
    """A synthetic matrix with known ground truth.

    clean admits an exact flag decomposition with ``truth_flag``'s type;
    observed is the corrupted version handed to recovery methods. For the
    outlier model, ``outlier_indices`` lists the replaced columns (which are
    orthogonal to the planted span by construction).
    """

    truth_flag: StiefelFlag
    clean: np.ndarray
    observed: np.ndarray
    hierarchy: ColumnHierarchy
    outlier_indices: tuple[int, ...] | None = None

    def inlier_indices(self) -> tuple[int, ...]:
        p = self.clean.shape[1]
        bad = set(self.outlier_indices or ())
        return tuple(i for i in range(p) if i not in bad)


def _planted_matrix(
    flag: StiefelFlag, hierarchy: ColumnHierarchy, rng: np.random.Generator
) -> np.ndarray:
    """Columns of block i are random combinations of the i-th flag subspace."""
    n = flag.flag_type.ambient
    p = hierarchy.width
    d = np.zeros((n, p))
    for i, block_ix in enumerate(hierarchy.difference_sets()):
        basis = flag.prefix(i)
        coeffs = rng.standard_normal((basis.shape[1], len(block_ix)))
        d[:, list(block_ix)] = basis @ coeffs
    return d


def _prefix_hierarchy(block_sizes) -> ColumnHierarchy:
    cutoffs = np.cumsum(block_sizes)
    return band_hierarchy(cutoffs, int(cutoffs[-1]))


def _check_block_sizes(flag_type: FlagType, block_sizes) -> tuple[int, ...]:
    sizes = tuple(int(b) for b in block_sizes)
    if len(sizes) != flag_type.k:
        raise ValueError(
            f"{len(sizes)} block sizes for a {flag_type.k}-level flag type"
        )
    for i, (b, m) in enumerate(zip(sizes, flag_type.block_widths)):
        if b < m:
            raise ValueError(
                f"block {i} has {b} columns but must contribute {m} directions"
            )
    return sizes


def gen_noise_instance(
    flag_type: FlagType = DEFAULT_FLAG_TYPE,
    block_sizes=DEFAULT_BLOCK_SIZES,
    noise: NoiseSpec = NoiseSpec(),
) -> PlantedInstance:
    """Additive-noise model: block-i columns in the i-th planted subspace."""
    sizes = _check_block_sizes(flag_type, block_sizes)
    hierarchy = _prefix_hierarchy(sizes)
    truth = random_stiefel_flag(flag_type, subseed_rng(noise.seed, 0))
    clean = _planted_matrix(truth, hierarchy, subseed_rng(noise.seed, 1))
    eps = draw_noise(noise, clean.shape, subseed_rng(noise.seed, 2))
    return PlantedInstance(truth, clean, clean + eps, hierarchy)


def gen_outlier_instance(
    flag_type: FlagType = DEFAULT_FLAG_TYPE,
    block_sizes=DEFAULT_BLOCK_SIZES,
    outlier_count: int = 0,
    seed: int = 0,
) -> PlantedInstance:
    """Outlier model: chosen columns replaced by null-space vectors.

    Outlier positions are sampled uniformly without replacement across all
    columns; each block must keep at least m_i inlier columns.
    """
    sizes = _check_block_sizes(flag_type, block_sizes)
    p = int(sum(sizes))
    if not 0 <= outlier_count < p:
        raise ValueError(f"outlier_count must be in [0, {p}), got {outlier_count}")
    hierarchy = _prefix_hierarchy(sizes)
    truth = random_stiefel_flag(flag_type, subseed_rng(seed, 0))
    clean = _planted_matrix(truth, hierarchy, subseed_rng(seed, 1))
    chooser = subseed_rng(seed, 2)
    outliers = tuple(sorted(chooser.choice(p, size=outlier_count, replace=False).tolist()))
    outlier_set = set(outliers)
    for i, block_ix in enumerate(hierarchy.difference_sets()):
        inliers_left = sum(1 for ix in block_ix if ix not in outlier_set)
        if inliers_left < flag_type.block_widths[i]:
            raise ValueError(
                f"outlier draw leaves block {i} with {inliers_left} inliers, "
                f"fewer than the {flag_type.block_widths[i]} required directions"
            )
    observed = clean.copy()
    x = truth.coordinates
    value_rng = subseed_rng(seed, 3)
    for ix in outliers:
        o = value_rng.standard_normal(flag_type.ambient)
        observed[:, ix] = o - x @ (x.T @ o)
    return PlantedInstance(truth, clean, observed, hierarchy, outliers)


def gen_cluster_sim(
    centers: int = 3,
    per_cluster: int = 20,
    noise_sigma: float = 0.95,
    seed: int = 0,
    flag_type: FlagType = DEFAULT_FLAG_TYPE,
    block_sizes=DEFAULT_BLOCK_SIZES,
):
    """Labeled noisy matrices around planted center flags.

    Defaults reproduce the 3-cluster setup: 3 centers, 20 matrices per
    cluster, gaussian noise with sigma 0.95 on a (2,4;10)-flag model with
    20+20 columns. Returns (instances, labels).
    """
    if centers < 1 or per_cluster < 1:
        raise ValueError("centers and per_cluster must be positive")
    sizes = _check_block_sizes(flag_type, block_sizes)
    hierarchy = _prefix_hierarchy(sizes)
    spec = NoiseSpec("gaussian", noise_sigma, seed)
    instances: list[PlantedInstance] = []
    labels: list[int] = []
    for c in range(centers):
        truth = random_stiefel_flag(flag_type, subseed_rng(seed, 1 + c))
        for i in range(per_cluster):
            rng = subseed_rng(seed, 1000 + c * per_cluster + i)
            clean = _planted_matrix(truth, hierarchy, rng)
            eps = draw_noise(spec, clean.shape, rng)
            instances.append(PlantedInstance(truth, clean, clean + eps, hierarchy))
            labels.append(c)
    return instances, np.array(labels, dtype=int)


def gen_patch_collection(
    n_classes: int = 5,
    per_class: int = 60,
    bands: int = 20,
    patch_sizes=(1, 3),
    signature=(1, 8),
    noise_sigma: float = 0.5,
    seed: int = 0,
):
    """Square pixel patches with per-class planted spectral flags.

    Each patch is a (bands x pixels) matrix under the concentric-patch
    hierarchy; the center pixel spans the class's first subspace and the
    surrounding ring fills out the rest of the class flag. Returns
    (instances, labels, hierarchy, flag_type).
    """
    if n_classes < 1 or per_class < 1:
        raise ValueError("n_classes and per_class must be positive")
    hierarchy = neighborhood_hierarchy(patch_sizes)
    flag_type = FlagType(tuple(signature), bands)
    _check_block_sizes(flag_type, [len(b) for b in hierarchy.difference_sets()])
    spec = NoiseSpec("gaussian", noise_sigma, seed)
    instances: list[PlantedInstance] = []
    labels: list[int] = []
    for c in range(n_classes):
        truth = random_stiefel_flag(flag_type, subseed_rng(seed, 1 + c))
        for i in range(per_class):
            rng = subseed_rng(seed, 5000 + c * per_class + i)
            clean = _planted_matrix(truth, hierarchy, rng)
            eps = draw_noise(spec, clean.shape, rng)
            instances.append(PlantedInstance(truth, clean, clean + eps, hierarchy))
            labels.append(c)
    return instances, np.array(labels, dtype=int), hierarchy, flag_type
