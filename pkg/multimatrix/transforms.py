"""
Change-of-variable maps between the unit Frobenius ball and R^{n x m}, and the
derived statistics (V, T, R, F, B, W and the inverses A, U) of a stacked
spherical matrix.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from multimatrix.errors import DegenerateBlock, DomainError, NotPositiveDefinite
from multimatrix.matcore import BlockStructure, SpdMatrix, frobenius_sq, real_matrix, spd_inverse
from multimatrix.models import DerivedSample, Role, parse_roles

MIXED_PAIRS = {
    (Role.T, Role.R),
    (Role.F, Role.B),
    (Role.A, Role.U),
}


def compress(y) -> tuple[np.ndarray, float]:
    """X = (1 + tr Y'Y)^(-1/2) Y, with log |dX/dY| = -(nm/2 + 1) ln(1 + tr Y'Y)"""
    y = real_matrix(y)
    s = frobenius_sq(y)
    x = y / math.sqrt(1.0 + s)
    return x, -(0.5 * y.size + 1.0) * math.log1p(s)


def expand(x) -> tuple[np.ndarray, float]:
    """Y = (1 - tr X'X)^(-1/2) X, with log |dY/dX| = -(nm/2 + 1) ln(1 - tr X'X)"""
    x = real_matrix(x)
    s = frobenius_sq(x)
    if not s < 1.0:
        raise DomainError(f"expand needs tr X'X < 1, got {s}")
    y = x / math.sqrt(1.0 - s)
    return y, -(0.5 * x.size + 1.0) * math.log1p(-s)


def _gram(x: np.ndarray, block: int) -> SpdMatrix:
    try:
        return SpdMatrix.from_array(x.T @ x, symmetrize=True)
    except NotPositiveDefinite as exc:
        raise DegenerateBlock(f"Gram matrix of block {block} is not positive definite: {exc}") from exc


def _check_blocks(x_blocks: Sequence, structure: BlockStructure) -> list[np.ndarray]:
    blocks = [real_matrix(x) for x in x_blocks]
    if len(blocks) != structure.k + 1:
        raise DomainError(f"expected {structure.k + 1} blocks, got {len(blocks)}")
    for i, (x, n) in enumerate(zip(blocks, structure.block_rows)):
        if x.shape != (n, structure.cols):
            raise DomainError(f"block {i} has shape {x.shape}, expected {(n, structure.cols)}")
    return blocks


def derive(x_blocks: Sequence, structure: BlockStructure, roles: Sequence) -> DerivedSample:
    """Map raw blocks X0..Xk to the statistic named by each role.

    With k roles the scalar is v = ||X0||^2. The three-block pairs (T, R),
    (F, B) and (A, U) report v0 = v + ||X2||^2 instead (w = 1/v0 for A, U);
    R = v0^(-1/2) X2 either way. k+1 roles that are all W give the all-Gram
    form with no scalar.
    """
    blocks = _check_blocks(x_blocks, structure)
    roles = parse_roles(roles)

    if len(roles) == structure.k + 1:
        if not all(r is Role.W for r in roles):
            raise DomainError("only the all-W form may assign a role to block 0")
        grams = tuple(_gram(x, i) for i, x in enumerate(blocks))
        return DerivedSample(v=None, roles=roles, blocks=grams)
    if len(roles) != structure.k:
        raise DomainError(f"expected {structure.k} roles, got {len(roles)}")

    mixed = structure.k == 2 and tuple(roles) in MIXED_PAIRS
    if (Role.A in roles or Role.U in roles) and not mixed:
        raise DomainError("roles A and U are only defined as the three-block (A, U) pair")

    v = frobenius_sq(blocks[0])
    if v == 0.0:
        raise DegenerateBlock("block 0 is zero, so V = ||X0||^2 = 0")

    derived = []
    for i, (role, x) in enumerate(zip(roles, blocks[1:]), start=1):
        norm_sq = frobenius_sq(x)
        if role is Role.X:
            derived.append(x)
        elif role is Role.V:
            derived.append(np.array([[norm_sq]]))
        elif role is Role.T:
            derived.append(x / math.sqrt(v))
        elif role is Role.R:
            derived.append(x / math.sqrt(v + norm_sq))
        elif role is Role.F:
            derived.append(_gram(x / math.sqrt(v), i))
        elif role in (Role.B, Role.U):
            b = _gram(x / math.sqrt(v + norm_sq), i)
            derived.append(spd_inverse(b) if role is Role.U else b)
        elif role is Role.A:
            derived.append(spd_inverse(_gram(x / math.sqrt(v), i)))
        elif role is Role.W:
            derived.append(_gram(x, i))

    scalar = v
    if mixed:
        scalar = v + frobenius_sq(blocks[2])
        if roles[0] is Role.A:
            scalar = 1.0 / scalar
    return DerivedSample(v=scalar, roles=roles, blocks=tuple(derived))
