"""Flag types, Stiefel-coordinate flag representatives, and distances.

A flag of signature (n_1, ..., n_k; n) is a nested chain of subspaces of
dimensions n_1 < ... < n_k inside R^n. It is represented by an n x n_k
matrix with orthonormal columns, partitioned into blocks of widths
m_i = n_i - n_{i-1}; the span of the first i blocks is the i-th subspace.

Distances come in two algebraically equal forms: a projector form
(Frobenius norms of per-block projector differences) and a trace form that
never builds n x n projectors. The trace form is the production path; the
projector form stays available as the oracle the tests check against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlagTypeError
from .linalg import ORTHONORMAL_TOL, as_matrix, orthonormality_defect


@dataclass(frozen=True)
class FlagType:
    """Signature (n_1, ..., n_k) of nested dimensions inside R^ambient."""

    signature: tuple[int, ...]
    ambient: int

    def __post_init__(self):
        object.__setattr__(self, "signature", tuple(int(v) for v in self.signature))
        sig = self.signature
        if not sig:
            raise FlagTypeError("flag signature must be nonempty")
        if sig[0] < 1 or any(b <= a for a, b in zip(sig, sig[1:])):
            raise FlagTypeError(
                f"signature must be strictly increasing positive, got {sig}"
            )
        if sig[-1] > self.ambient:
            raise FlagTypeError(
                f"largest subspace dimension {sig[-1]} exceeds ambient {self.ambient}"
            )

    @classmethod
    def parse(cls, text: str, ambient: int) -> "FlagType":
        """Parse a comma-separated signature like ``"2,4"``."""
        try:
            sig = tuple(int(tok) for tok in text.split(","))
        except ValueError as exc:
            raise FlagTypeError(f"cannot parse flag type {text!r}") from exc
        return cls(sig, ambient)

    @property
    def k(self) -> int:
        return len(self.signature)

    @property
    def dim(self) -> int:
        """Total number of columns n_k of a Stiefel representative."""
        return self.signature[-1]

    @property
    def block_widths(self) -> tuple[int, ...]:
        return tuple(
            b - a for a, b in zip((0,) + self.signature[:-1], self.signature)
        )

    def block_slices(self) -> tuple[slice, ...]:
        bounds = (0,) + self.signature
        return tuple(slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]))


@dataclass(frozen=True, eq=False)
class StiefelFlag:
    """Orthonormal n x n_k coordinates for a flag of the given type."""

    coordinates: np.ndarray
    flag_type: FlagType

    def __post_init__(self):
        coords = as_matrix(self.coordinates, "coordinates")
        object.__setattr__(self, "coordinates", coords)
        expected = (self.flag_type.ambient, self.flag_type.dim)
        if coords.shape != expected:
            raise FlagTypeError(
                f"coordinates shape {coords.shape} does not match flag type "
                f"{self.flag_type.signature};{self.flag_type.ambient} "
                f"(expected {expected})"
            )
        defect = orthonormality_defect(coords)
        if defect > ORTHONORMAL_TOL:
            raise ValueError(
                f"coordinates are not orthonormal (defect {defect:.3e})"
            )

    def block(self, i: int) -> np.ndarray:
        """Columns of the i-th block (0-based), width m_i."""
        return self.coordinates[:, self.flag_type.block_slices()[i]]

    def prefix(self, i: int) -> np.ndarray:
        """First n_{i+1} columns: a basis for the (i+1)-th nested subspace."""
        return self.coordinates[:, : self.flag_type.signature[i]]

    def blocks(self) -> tuple[np.ndarray, ...]:
        return tuple(self.coordinates[:, s] for s in self.flag_type.block_slices())


def _require_same_type(x: StiefelFlag, y: StiefelFlag) -> None:
    if x.flag_type != y.flag_type:
        raise FlagTypeError(
            f"flag types differ: {x.flag_type.signature};{x.flag_type.ambient} "
            f"vs {y.flag_type.signature};{y.flag_type.ambient}"
        )


def stiefel_chordal(x: StiefelFlag, y: StiefelFlag) -> float:
    """Chordal distance between Stiefel representatives: ||X - Y||_F."""
    if x.coordinates.shape != y.coordinates.shape:
        raise ValueError(
            f"shape mismatch: {x.coordinates.shape} vs {y.coordinates.shape}"
        )
    return float(np.linalg.norm(x.coordinates - y.coordinates))


def _squared_subspace_gap(xm: np.ndarray, ym: np.ndarray) -> float:
    """m - tr(X^T Y Y^T X), evaluated as ||X - Y (Y^T X)||_F^2.

    The residual form is algebraically identical to the trace form but does
    not cancel catastrophically when the subspaces (nearly) coincide, and it
    never builds an n x n projector.
    """
    resid = xm - ym @ (ym.T @ xm)
    return float(np.linalg.norm(resid) ** 2)


def grassmann_chordal(x, y) -> float:
    """Chordal distance between subspaces spanned by orthonormal X and Y.

    Equals (1/sqrt(2)) ||X X^T - Y Y^T||_F, computed without projectors.
    """
    xm = np.asarray(x, dtype=float)
    ym = np.asarray(y, dtype=float)
    if xm.shape != ym.shape:
        raise ValueError(f"shape mismatch: {xm.shape} vs {ym.shape}")
    return float(np.sqrt(_squared_subspace_gap(xm, ym)))


def _block_squared_distances(x: StiefelFlag, y: StiefelFlag) -> np.ndarray:
    """Per-block squared Grassmann chordal distances m_i - ||X_i^T Y_i||_F^2."""
    return np.array(
        [_squared_subspace_gap(xi, yi) for xi, yi in zip(x.blocks(), y.blocks())]
    )


def flag_chordal(x: StiefelFlag, y: StiefelFlag) -> float:
    """Chordal distance between flags of the same type.

    Trace form: sqrt(sum_i (m_i - tr(X_i^T Y_i Y_i^T X_i))). Invariant under
    per-block right rotation of either argument; zero iff all corresponding
    blocks span identical subspaces.
    """
    _require_same_type(x, y)
    return float(np.sqrt(_block_squared_distances(x, y).sum()))


def flag_chordal_projector_form(x: StiefelFlag, y: StiefelFlag) -> float:
    """Projector form sqrt(0.5 * sum_i ||X_i X_i^T - Y_i Y_i^T||_F^2).

    Algebraically equal to :func:`flag_chordal`; kept as the reference
    implementation (it forms n x n projectors, so avoid it for large n).
    """
    _require_same_type(x, y)
    total = 0.0
    for xi, yi in zip(x.blocks(), y.blocks()):
        diff = xi @ xi.T - yi @ yi.T
        total += 0.5 * float(np.linalg.norm(diff) ** 2)
    return float(np.sqrt(total))


def grassmann_product_sum(x: StiefelFlag, y: StiefelFlag) -> float:
    """Sum over blocks of Grassmann chordal distances.

    Treats the flag as a point on the product of the per-block Grassmannians
    and adds the block distances (an L1 combination, versus the L2
    combination of :func:`flag_chordal`).
    """
    _require_same_type(x, y)
    return float(np.sqrt(_block_squared_distances(x, y)).sum())


def as_rng(seed) -> np.random.Generator:
    """Accept an int seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_stiefel_flag(flag_type: FlagType, seed) -> StiefelFlag:
    """Haar-ish random flag: QR of a seeded Gaussian matrix, signs fixed.

    Deterministic for a given integer seed.
    """
    rng = as_rng(seed)
    gauss = rng.standard_normal((flag_type.ambient, flag_type.dim))
    q, r = np.linalg.qr(gauss)
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return StiefelFlag(q * signs, flag_type)
