"""
Dense real matrix primitives: validated matrices, SPD checks, norms and
log-determinants.

Matrices are plain float64 numpy arrays. ``real_matrix`` validates and
normalises shape (scalars become 1x1, vectors become columns); ``SpdMatrix``
wraps a symmetric positive definite array together with its lower Cholesky
factor so that determinants and inverses never need a second factorisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from multimatrix.errors import DomainError, NotPositiveDefinite

SYMMETRY_TOL = 1e-10
PIVOT_TOL = 1e-12


def real_matrix(entries) -> np.ndarray:
    """Return ``entries`` as a finite 2-D float array, rejecting NaN/Inf"""
    arr = np.array(entries, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise DomainError(f"expected a matrix, got an array with {arr.ndim} dimensions")
    if arr.size == 0:
        raise DomainError("matrix must have at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise DomainError("matrix entries must be finite")
    return arr


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric positive definite matrix with its lower Cholesky factor"""

    entries: np.ndarray
    chol: np.ndarray = field(repr=False)

    @classmethod
    def from_array(cls, entries, symmetrize: bool = False) -> SpdMatrix:
        arr = real_matrix(entries)
        if arr.shape[0] != arr.shape[1]:
            raise NotPositiveDefinite(f"matrix is {arr.shape[0]}x{arr.shape[1]}, not square")

        scale = float(np.max(np.abs(arr)))
        if symmetrize:
            arr = 0.5 * (arr + arr.T)
        elif np.max(np.abs(arr - arr.T)) > SYMMETRY_TOL * scale:
            raise NotPositiveDefinite("matrix is not symmetric")
        else:
            arr = 0.5 * (arr + arr.T)

        try:
            chol = linalg.cholesky(arr, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from exc

        eigenvalues = np.linalg.eigvalsh(arr)
        if eigenvalues[0] <= PIVOT_TOL * eigenvalues[-1]:
            raise NotPositiveDefinite(
                f"smallest eigenvalue {eigenvalues[0]:.3e} is below tolerance "
                f"relative to largest {eigenvalues[-1]:.3e}"
            )

        arr.setflags(write=False)
        chol.setflags(write=False)
        return cls(entries=arr, chol=chol)

    @classmethod
    def identity(cls, order: int) -> SpdMatrix:
        return cls.from_array(np.eye(order))

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    def to_list(self) -> list:
        return self.entries.tolist()


def as_spd(value) -> SpdMatrix:
    if isinstance(value, SpdMatrix):
        return value
    return SpdMatrix.from_array(value)


def frobenius_sq(x) -> float:
    """tr(X'X), the squared Frobenius norm"""
    arr = np.asarray(x, dtype=float)
    return float(np.sum(arr * arr))


def trace(w) -> float:
    return float(np.trace(as_spd(w).entries))


def log_det(w) -> float:
    """Natural log of the determinant, from the Cholesky diagonal"""
    return float(2.0 * np.sum(np.log(np.diag(as_spd(w).chol))))


def spd_inverse(w) -> SpdMatrix:
    spd = as_spd(w)
    inv = linalg.cho_solve((spd.chol, True), np.eye(spd.order), check_finite=False)
    return SpdMatrix.from_array(inv, symmetrize=True)


@dataclass(frozen=True)
class BlockStructure:
    """Row counts n0..nk of the stacked blocks and the shared column count m"""

    block_rows: tuple[int, ...]
    cols: int

    def __post_init__(self):
        rows = tuple(int(n) for n in self.block_rows)
        object.__setattr__(self, "block_rows", rows)
        if not rows:
            raise DomainError("a block structure needs at least block 0")
        if int(self.cols) < 1:
            raise DomainError(f"column count must be positive, got {self.cols}")
        for i, n in enumerate(rows):
            if n < self.cols:
                raise DomainError(f"block {i} has {n} rows, fewer than m={self.cols}")

    @property
    def k(self) -> int:
        return len(self.block_rows) - 1

    @property
    def total_rows(self) -> int:
        return sum(self.block_rows)

    @property
    def dim(self) -> int:
        """Total dimension N*m of the stacked matrix"""
        return self.total_rows * self.cols

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        """Cut an N x m matrix into its k+1 row blocks"""
        offsets = np.cumsum(self.block_rows)[:-1]
        return [np.ascontiguousarray(b) for b in np.split(x, offsets, axis=0)]

    def to_dict(self) -> dict:
        return {"block_rows": list(self.block_rows), "cols": self.cols}

    @classmethod
    def from_dict(cls, data: dict) -> BlockStructure:
        return cls(block_rows=tuple(data["block_rows"]), cols=int(data["cols"]))
