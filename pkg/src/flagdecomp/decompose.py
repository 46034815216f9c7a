"""Hierarchy-preserving flag decomposition D = Q R P^T.

The engine is a block Gram-Schmidt sweep over the hierarchy's difference
blocks: extract an orthonormal basis for the current block (by SVD, or by an
iteratively reweighted SVD when robustness to outlier columns is wanted),
record the weights R, and deflate every later block against the new basis.
The result is a flag whose i-th nested subspace equals the span of the
columns indexed by the i-th hierarchy level, a block upper-triangular R
whose below-diagonal blocks are structurally zero, and the permutation P
sorting columns into block order.

Baselines that ignore the hierarchy (plain truncated SVD, flat IRLS-SVD)
are provided for comparisons; they chop the same number of left singular
vectors into blocks of the requested widths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateBlock, FlagTypeError
from .flags import FlagType, StiefelFlag
from .hierarchy import (
    BlockPartition,
    ColumnHierarchy,
    build_permutation,
    load_hierarchy_json,
    save_hierarchy_json,
    validate_hierarchy,
)
from .linalg import (
    as_matrix,
    load_matrix_csv,
    numerical_rank,
    save_matrix_csv,
    svd,
)

SVD_MODE = "svd"
IRLS_MODE = "irls_svd"


@dataclass(frozen=True)
class SolverConfig:
    """Controls the per-block basis extraction.

    mode: "svd" solves the least-squares (q=2) objective; "irls_svd" targets
    the robust q=1 column-norm objective via iterative reweighting.
    weight_floor: residual floor inside the reweighting, w_j =
    max(residual_j, weight_floor)^(-1/2).
    """

    mode: str = SVD_MODE
    max_iterations: int = 100
    relative_tolerance: float = 1e-8
    weight_floor: float = 1e-8

    def __post_init__(self):
        if self.mode not in (SVD_MODE, IRLS_MODE):
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.relative_tolerance <= 0 or self.weight_floor <= 0:
            raise ValueError("tolerances must be positive")


DEFAULT_CONFIG = SolverConfig()
ROBUST_CONFIG = SolverConfig(mode=IRLS_MODE)


@dataclass(frozen=True)
class BlockDiagnostics:
    """Per-block extraction record."""

    rank: int          # numerical rank of the (deflated) block
    basis_size: int    # columns extracted
    iterations: int    # reweighting iterations (0 in plain SVD mode)
    padded: bool       # basis wider than the numerical rank


@dataclass(frozen=True, eq=False)
class FlagDecompositionResult:
    """Bundle (Q, R, P) plus provenance and diagnostics.

    weights R is n_k x p in permuted column order; its below-block-diagonal
    entries are exactly zero by construction. residual is the Frobenius norm
    of D - Q R P^T.
    """

    flag: StiefelFlag
    weights: np.ndarray
    partition: BlockPartition
    hierarchy: ColumnHierarchy
    residual: float
    mode: str
    diagnostics: tuple[BlockDiagnostics, ...]

    @property
    def flag_type(self) -> FlagType:
        return self.flag.flag_type


def _column_residual_sum(c: np.ndarray, q: np.ndarray) -> float:
    """Sum over columns of ||c_j - Q Q^T c_j||_2 (the q=1 objective)."""
    resid = c - q @ (q.T @ c)
    return float(np.linalg.norm(resid, axis=0).sum())


def _svd_basis(c: np.ndarray, m: int | None):
    """Leading left singular vectors of c; m defaults to the numerical rank."""
    res = svd(c)
    rank = numerical_rank(res.singular_values, *c.shape)
    if m is None:
        if rank == 0:
            raise DegenerateBlock(
                "cannot infer a basis size for a numerically zero block"
            )
        m = rank
    if not 1 <= m <= min(c.shape):
        raise ValueError(
            f"basis size {m} out of range for a {c.shape[0]}x{c.shape[1]} block"
        )
    return res.left_vectors[:, :m], rank, m


def _irls_basis(c: np.ndarray, m: int | None, config: SolverConfig):
    """Reweighted-SVD basis for the q=1 objective.

    Starts from the plain SVD solution, reweights columns by
    max(residual, floor)^(-1/2), re-extracts from the weighted block, and
    keeps the best iterate seen (so the returned objective never exceeds the
    initial one). Stops on relative objective change below tolerance.
    """
    q, rank, m = _svd_basis(c, m)
    objective = _column_residual_sum(c, q)
    best_q, best_objective = q, objective
    iterations = 0
    tiny = np.finfo(float).tiny
    for iterations in range(1, config.max_iterations + 1):
        residuals = np.linalg.norm(c - q @ (q.T @ c), axis=0)
        weights = np.maximum(residuals, config.weight_floor) ** -0.5
        res = svd(c * weights[np.newaxis, :])
        q = res.left_vectors[:, :m]
        new_objective = _column_residual_sum(c, q)
        if new_objective < best_objective:
            best_q, best_objective = q, new_objective
        change = abs(new_objective - objective) / max(objective, tiny)
        objective = new_objective
        if change < config.relative_tolerance:
            break
    return best_q, rank, m, iterations


def _extract_basis(c: np.ndarray, m: int | None, config: SolverConfig):
    if config.mode == IRLS_MODE:
        q, rank, m, iterations = _irls_basis(c, m, config)
    else:
        q, rank, m = _svd_basis(c, m)
        iterations = 0
    info = BlockDiagnostics(
        rank=rank, basis_size=m, iterations=iterations, padded=m > rank
    )
    return q, info


def get_basis(c, m: int | None = None, config: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Orthonormal basis (n x m) approximating the column space of ``c``.

    In SVD mode this is the leading left singular vectors; when ``m`` is
    omitted it defaults to the numerical rank (a numerically zero block with
    no ``m`` raises DegenerateBlock). In IRLS mode the basis minimizes the
    sum of column residual norms instead of their squares, which resists
    outlier columns. Asking for ``m`` beyond the numerical rank pads the
    basis from the remaining singular vectors.
    """
    mat = as_matrix(c, "block")
    q, _ = _extract_basis(mat, m, config)
    return q


def flag_bmgs(
    data,
    hierarchy: ColumnHierarchy,
    flag_type: FlagType,
    config: SolverConfig = DEFAULT_CONFIG,
    validate_ranks: bool = False,
) -> FlagDecompositionResult:
    """Decompose ``data`` into Q R P^T along a column hierarchy.

    Block modified Gram-Schmidt over the difference blocks B_1..B_k: each
    block contributes m_i = n_i - n_{i-1} new basis directions, then every
    later block is deflated against them, so lower R blocks vanish by
    construction and the flag preserves the hierarchy's nested spans.

    validate_ranks runs the strict rank-increase check first; leave it off
    for noisy data, where the requested flag type is authoritative and exact
    ranks are routinely violated.

    Raises DegenerateBlock when a deflated block's numerical rank falls
    below m_i: the block cannot contribute the requested directions, which
    signals a mis-specified flag type.
    """
    d = as_matrix(data, "data")
    n, p = d.shape
    hierarchy.require_width(p)
    if flag_type.ambient != n:
        raise FlagTypeError(
            f"flag ambient dimension {flag_type.ambient} != data rows {n}"
        )
    if flag_type.k != hierarchy.k:
        raise FlagTypeError(
            f"flag type has {flag_type.k} levels, hierarchy has {hierarchy.k}"
        )
    if flag_type.dim > p:
        raise FlagTypeError(f"flag dimension n_k = {flag_type.dim} exceeds p = {p}")
    partition = build_permutation(hierarchy)
    widths = flag_type.block_widths
    for i, (m_i, b_i) in enumerate(zip(widths, partition.block_sizes)):
        if m_i > min(n, b_i):
            raise FlagTypeError(
                f"level {i} asks for {m_i} directions from a block of "
                f"{b_i} columns in R^{n}"
            )
    if validate_ranks:
        validate_hierarchy(d, hierarchy)

    blocks = [d[:, list(ix)].copy() for ix in partition.difference_sets]
    sizes = partition.block_sizes
    col_offsets = np.concatenate(([0], np.cumsum(sizes)))
    row_offsets = np.concatenate(([0], np.asarray(flag_type.signature)))

    r_mat = np.zeros((flag_type.dim, p))
    q_blocks: list[np.ndarray] = []
    diagnostics: list[BlockDiagnostics] = []
    for i in range(flag_type.k):
        q_i, info = _extract_basis(blocks[i], widths[i], config)
        if info.rank < widths[i]:
            raise DegenerateBlock(
                f"block {i} has numerical rank {info.rank} after deflation "
                f"but the flag type needs {widths[i]} directions",
                level=i,
            )
        rows = slice(row_offsets[i], row_offsets[i + 1])
        r_mat[rows, col_offsets[i] : col_offsets[i + 1]] = q_i.T @ blocks[i]
        for j in range(i + 1, flag_type.k):
            r_ij = q_i.T @ blocks[j]
            r_mat[rows, col_offsets[j] : col_offsets[j + 1]] = r_ij
            blocks[j] -= q_i @ r_ij
        q_blocks.append(q_i)
        diagnostics.append(info)

    q = np.hstack(q_blocks)
    residual = float(np.linalg.norm(d @ partition.permutation - q @ r_mat))
    return FlagDecompositionResult(
        flag=StiefelFlag(q, flag_type),
        weights=r_mat,
        partition=partition,
        hierarchy=hierarchy,
        residual=residual,
        mode=config.mode,
        diagnostics=tuple(diagnostics),
    )


def reconstruct(result: FlagDecompositionResult) -> np.ndarray:
    """Q R P^T, the (low-rank when n_k < rank) reconstruction of the input."""
    return result.flag.coordinates @ result.weights @ result.partition.permutation.T


def recovery_objective(flag: StiefelFlag, data, hierarchy: ColumnHierarchy, q: int = 2) -> float:
    """Residual objective sum_i sum_{j in B_i} ||P_i ... P_1 d_j||_2^q.

    P_l is the projector complementary to the l-th flag block; the value is
    zero exactly when every block column is explained by the flag up to its
    level, and is invariant under per-block rotations of ``flag``.
    """
    if q not in (1, 2):
        raise ValueError(f"q must be 1 or 2, got {q}")
    d = as_matrix(data, "data")
    hierarchy.require_width(d.shape[1])
    if flag.flag_type.k != hierarchy.k:
        raise FlagTypeError(
            f"flag type has {flag.flag_type.k} levels, hierarchy has {hierarchy.k}"
        )
    total = 0.0
    for i, block_ix in enumerate(hierarchy.difference_sets()):
        resid = d[:, list(block_ix)].copy()
        for l in range(i + 1):
            q_l = flag.block(l)
            resid -= q_l @ (q_l.T @ resid)
        norms = np.linalg.norm(resid, axis=0)
        total += float((norms**q).sum())
    return total


def svd_flag(data, flag_type: FlagType) -> StiefelFlag:
    """Baseline: top n_k left singular vectors chopped into flag blocks."""
    d = as_matrix(data, "data")
    if flag_type.ambient != d.shape[0]:
        raise FlagTypeError(
            f"flag ambient dimension {flag_type.ambient} != data rows {d.shape[0]}"
        )
    if flag_type.dim > min(d.shape):
        raise FlagTypeError(
            f"flag dimension {flag_type.dim} exceeds min(data shape) {min(d.shape)}"
        )
    u = svd(d).left_vectors[:, : flag_type.dim]
    return StiefelFlag(u, flag_type)


def irls_svd_flag(
    data, flag_type: FlagType, config: SolverConfig = ROBUST_CONFIG
) -> StiefelFlag:
    """Baseline: flat (hierarchy-blind) IRLS-SVD basis chopped into blocks."""
    d = as_matrix(data, "data")
    if flag_type.ambient != d.shape[0]:
        raise FlagTypeError(
            f"flag ambient dimension {flag_type.ambient} != data rows {d.shape[0]}"
        )
    cfg = config if config.mode == IRLS_MODE else replace(config, mode=IRLS_MODE)
    basis = get_basis(d, flag_type.dim, cfg)
    return StiefelFlag(basis, flag_type)


def projection_reconstruction(flag: StiefelFlag, data) -> np.ndarray:
    """Project data columns onto the flag's total span (baseline denoiser)."""
    d = as_matrix(data, "data")
    q = flag.coordinates
    return q @ (q.T @ d)


# Decomposition bundle on disk: Q.csv, R.csv, P.csv + meta.json.

def save_decomposition(result: FlagDecompositionResult, outdir) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix_csv(out / "Q.csv", result.flag.coordinates)
    save_matrix_csv(out / "R.csv", result.weights)
    save_matrix_csv(out / "P.csv", result.partition.permutation)
    save_hierarchy_json(out / "hierarchy.json", result.hierarchy)
    meta = {
        "flag_type": {
            "signature": list(result.flag_type.signature),
            "ambient": result.flag_type.ambient,
        },
        "hierarchy": {"levels": [list(l) for l in result.hierarchy.levels]},
        "residual": result.residual,
        "mode": result.mode,
        "iterations_per_block": [d.iterations for d in result.diagnostics],
        "block_ranks": [d.rank for d in result.diagnostics],
    }
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_decomposition(indir) -> FlagDecompositionResult:
    src = Path(indir)
    with open(src / "meta.json") as fh:
        meta = json.load(fh)
    flag_type = FlagType(
        tuple(meta["flag_type"]["signature"]), int(meta["flag_type"]["ambient"])
    )
    hierarchy = load_hierarchy_json(src / "hierarchy.json")
    q = load_matrix_csv(src / "Q.csv")
    r = load_matrix_csv(src / "R.csv")
    p = load_matrix_csv(src / "P.csv")
    partition = BlockPartition(hierarchy.difference_sets(), p)
    diagnostics = tuple(
        BlockDiagnostics(rank=rank, basis_size=width, iterations=iters, padded=False)
        for rank, width, iters in zip(
            meta.get("block_ranks", [0] * flag_type.k),
            flag_type.block_widths,
            meta.get("iterations_per_block", [0] * flag_type.k),
        )
    )
    return FlagDecompositionResult(
        flag=StiefelFlag(q, flag_type),
        weights=r,
        partition=partition,
        hierarchy=hierarchy,
        residual=float(meta["residual"]),
        mode=meta.get("mode", SVD_MODE),
        diagnostics=diagnostics,
    )
