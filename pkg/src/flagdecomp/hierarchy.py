"""Column hierarchies: nested index sets over the columns of a data matrix.

A hierarchy is a chain of strictly growing column-index sets
A_1 c A_2 c ... c A_k whose last level covers every column. All indices are
0-based, in code and in the JSON format (``{"levels": [[...], ...]}``).
The difference sets B_i = A_i \\ A_{i-1} and the permutation that sorts
columns into block order are derived, never stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import HierarchyViolation
from .linalg import as_matrix, numerical_rank, svd


@dataclass(frozen=True)
class ColumnHierarchy:
    """Ordered levels A_1 c ... c A_k of sorted 0-based column indices."""

    levels: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.levels:
            raise ValueError("hierarchy needs at least one level")
        previous: frozenset[int] = frozenset()
        for i, level in enumerate(self.levels):
            if len(level) == 0:
                raise ValueError(f"level {i} is empty")
            if any(ix < 0 for ix in level):
                raise ValueError(f"level {i} has negative indices")
            if any(b <= a for a, b in zip(level, level[1:])):
                raise ValueError(f"level {i} must be sorted without duplicates")
            current = frozenset(level)
            if not (previous < current):
                raise ValueError(
                    f"level {i} must strictly contain level {i - 1}"
                )
            previous = current

    @classmethod
    def from_levels(cls, levels) -> "ColumnHierarchy":
        """Build from any iterable of index iterables, sorting each level."""
        normalized = tuple(tuple(sorted(int(ix) for ix in level)) for level in levels)
        return cls(normalized)

    @property
    def k(self) -> int:
        return len(self.levels)

    @property
    def width(self) -> int:
        """Number of columns the hierarchy addresses (size of the last level)."""
        return len(self.levels[-1])

    def require_width(self, p: int) -> None:
        """Check the last level is exactly {0, ..., p-1}."""
        if self.levels[-1] != tuple(range(p)):
            raise ValueError(
                f"hierarchy does not cover all {p} columns: "
                f"last level has {len(self.levels[-1])} indices"
            )

    def difference_sets(self) -> tuple[tuple[int, ...], ...]:
        """B_i = A_i \\ A_{i-1}, each sorted ascending."""
        out = []
        previous: frozenset[int] = frozenset()
        for level in self.levels:
            current = frozenset(level)
            out.append(tuple(sorted(current - previous)))
            previous = current
        return tuple(out)


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """Difference sets B_1..B_k plus the permutation P with D P = [B_1|...|B_k]."""

    difference_sets: tuple[tuple[int, ...], ...]
    permutation: np.ndarray

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.difference_sets)

    def column_order(self) -> np.ndarray:
        """Original column index for each permuted position."""
        return np.concatenate([np.asarray(b, dtype=int) for b in self.difference_sets])


def build_permutation(hierarchy: ColumnHierarchy) -> BlockPartition:
    """Permutation sorting columns into hierarchy blocks.

    Column j of P is the standard basis vector for the j-th entry of the
    concatenated difference sets, so ``D @ P`` lists B_1 through B_k with
    each block's columns in ascending original order. P^T P = I exactly.
    """
    diffs = hierarchy.difference_sets()
    order = [ix for block in diffs for ix in block]
    p = len(order)
    perm = np.zeros((p, p))
    for pos, ix in enumerate(order):
        perm[ix, pos] = 1.0
    return BlockPartition(diffs, perm)


def validate_hierarchy(data, hierarchy: ColumnHierarchy) -> tuple[int, ...]:
    """Ranks (n_1, ..., n_k) of the nested column submatrices.

    Succeeds iff the ranks strictly increase level to level; otherwise
    raises HierarchyViolation naming the first offending level.
    """
    d = as_matrix(data, "data")
    hierarchy.require_width(d.shape[1])
    ranks: list[int] = []
    previous = 0
    for i, level in enumerate(hierarchy.levels):
        sub = d[:, list(level)]
        rank = numerical_rank(svd(sub).singular_values, *sub.shape)
        if rank <= previous:
            raise HierarchyViolation(
                f"rank does not increase at level {i}: "
                f"rank(A_{i}) = {rank} vs rank(A_{i - 1}) = {previous}",
                level=i,
            )
        ranks.append(rank)
        previous = rank
    return tuple(ranks)


def neighborhood_hierarchy(patch_sizes) -> ColumnHierarchy:
    """Concentric square patches: level i covers the centered s_i x s_i patch.

    Columns are indexed row-major over the largest patch. Sizes must be odd
    and strictly increasing, e.g. (1, 3) gives A_1 = {4}, A_2 = {0..8}.
    """
    sizes = tuple(int(s) for s in patch_sizes)
    if not sizes:
        raise ValueError("need at least one patch size")
    if any(s % 2 == 0 or s < 1 for s in sizes):
        raise ValueError(f"patch sizes must be odd and positive, got {sizes}")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"patch sizes must be strictly increasing, got {sizes}")
    full = sizes[-1]
    levels = []
    for s in sizes:
        off = (full - s) // 2
        level = [
            r * full + c
            for r in range(off, off + s)
            for c in range(off, off + s)
        ]
        levels.append(level)
    return ColumnHierarchy.from_levels(levels)


def band_hierarchy(cutoffs, total_bands: int) -> ColumnHierarchy:
    """Prefix hierarchy over spectral bands: A_i = {0, ..., cutoff_i - 1}."""
    cuts = tuple(int(c) for c in cutoffs)
    if not cuts:
        raise ValueError("need at least one cutoff")
    if any(c < 1 for c in cuts) or any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise ValueError(f"cutoffs must be positive and strictly increasing, got {cuts}")
    if cuts[-1] != total_bands:
        raise ValueError(
            f"last cutoff {cuts[-1]} must equal the number of bands {total_bands}"
        )
    return ColumnHierarchy.from_levels([range(c) for c in cuts])


def feature_hierarchy(shots: int) -> ColumnHierarchy:
    """Two-level hierarchy for stacked feature matrices: {0..s-1} c {0..2s-1}."""
    s = int(shots)
    if s < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    return ColumnHierarchy.from_levels([range(s), range(2 * s)])


def save_hierarchy_json(path, hierarchy: ColumnHierarchy) -> None:
    with open(path, "w") as fh:
        json.dump({"levels": [list(level) for level in hierarchy.levels]}, fh)
        fh.write("\n")


def load_hierarchy_json(path) -> ColumnHierarchy:
    """Read ``{"levels": [[...], ...]}``; nesting is enforced on load."""
    with open(path) as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or "levels" not in payload:
        raise ValueError(f"{path}: expected an object with a 'levels' key")
    return ColumnHierarchy.from_levels(payload["levels"])
