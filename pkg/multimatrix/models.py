"""Domain records shared by the services: shapes, derived samples, fit results."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from multimatrix.errors import DomainError
from multimatrix.kernels import KernelSpec
from multimatrix.matcore import BlockStructure, SpdMatrix, as_spd, real_matrix


class Role(str, enum.Enum):
    """What a block of a derived sample holds"""

    X = "X"  # raw block
    V = "V"  # squared norm, stored as 1x1
    T = "T"
    R = "R"
    F = "F"
    B = "B"
    W = "W"
    A = "A"  # inverse of F
    U = "U"  # inverse of B

    @property
    def is_gram(self) -> bool:
        return self in GRAM_ROLES


GRAM_ROLES = frozenset({Role.F, Role.B, Role.W, Role.A, Role.U})


def parse_roles(roles: Sequence) -> tuple[Role, ...]:
    try:
        return tuple(Role(r) for r in roles)
    except ValueError as exc:
        raise DomainError(f"unknown role tag: {exc}") from None


class Family(str, enum.Enum):
    """Distribution families, named as on the command line"""

    GG = "gg"
    GAMMA_ELLIPTICAL = "gamma-elliptical"
    PEARSON7 = "pearson7"
    PEARSON2 = "pearson2"
    BETA2 = "beta2"
    BETA1 = "beta1"
    WISHART = "wishart"
    TRI_P7_P2 = "tri-p7-p2"
    BI_P7_P2 = "bi-p7-p2"
    TRI_B2_B1 = "tri-b2-b1"
    BI_B2_B1 = "bi-b2-b1"
    INV_B2_B1 = "inv-b2-b1"
    LOCATED_P7 = "located-p7"

    @classmethod
    def parse(cls, name: str) -> Family:
        key = str(name).strip().lower()
        if key in FAMILY_ALIASES:
            return FAMILY_ALIASES[key]
        try:
            return cls(key)
        except ValueError:
            raise DomainError(f"unknown family {name!r}") from None

    @property
    def three_block(self) -> bool:
        return self in (
            Family.TRI_P7_P2,
            Family.BI_P7_P2,
            Family.TRI_B2_B1,
            Family.BI_B2_B1,
            Family.INV_B2_B1,
        )

    @property
    def needs_kernel(self) -> bool:
        """Joint-only families: the density depends on h"""
        return self in (
            Family.GG,
            Family.GAMMA_ELLIPTICAL,
            Family.WISHART,
            Family.TRI_P7_P2,
            Family.TRI_B2_B1,
        )

    @property
    def marginal_only(self) -> bool:
        return self in (Family.BI_P7_P2, Family.BI_B2_B1, Family.LOCATED_P7)

    def default_roles(self, k: int) -> tuple[Role, ...]:
        if self.three_block:
            if k != 2:
                raise DomainError(f"family {self.value} needs exactly k=2 blocks, got k={k}")
            return PAIR_ROLES[self]
        return (SINGLE_ROLES[self],) * k

    def check_roles(self, roles: Sequence[Role], k: int) -> None:
        """Reject role tags this family cannot evaluate; Wishart also takes k+1 W tags."""
        roles = tuple(roles)
        if self is Family.WISHART and roles == (Role.W,) * (k + 1):
            return
        if roles != self.default_roles(k):
            expected = "".join(r.value for r in self.default_roles(k))
            got = "".join(r.value for r in roles)
            raise DomainError(f"family {self.value} expects roles {expected}, got {got}")


FAMILY_ALIASES = {
    "mgge": Family.GAMMA_ELLIPTICAL,
    "mggp7": Family.PEARSON7,
    "mp7": Family.PEARSON7,
    "ggp2": Family.PEARSON2,
    "mp2": Family.PEARSON2,
    "ggb2": Family.BETA2,
    "mb2": Family.BETA2,
    "ggb1": Family.BETA1,
    "b1": Family.BETA1,
    "mggw": Family.WISHART,
    "mgw": Family.WISHART,
    "ggtp2": Family.TRI_P7_P2,
    "tp2": Family.BI_P7_P2,
    "ggfb2": Family.TRI_B2_B1,
    "fb2": Family.BI_B2_B1,
    "iggfb2": Family.INV_B2_B1,
    "ifb2": Family.INV_B2_B1,
    "mmp2": Family.LOCATED_P7,
}

SINGLE_ROLES = {
    Family.GG: Role.V,
    Family.GAMMA_ELLIPTICAL: Role.X,
    Family.PEARSON7: Role.T,
    Family.PEARSON2: Role.R,
    Family.BETA2: Role.F,
    Family.BETA1: Role.B,
    Family.WISHART: Role.W,
    Family.LOCATED_P7: Role.X,
}

PAIR_ROLES = {
    Family.TRI_P7_P2: (Role.T, Role.R),
    Family.BI_P7_P2: (Role.T, Role.R),
    Family.TRI_B2_B1: (Role.F, Role.B),
    Family.BI_B2_B1: (Role.F, Role.B),
    Family.INV_B2_B1: (Role.A, Role.U),
}


@dataclass(frozen=True)
class ShapeParams:
    """Real shapes standing in for n0/2 (a0) and ni/2 (a[i]).

    a0 * m therefore plays the part of n0 m / 2 in every formula.
    """

    a0: float
    a: tuple[float, ...]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        if not self.a0 > 0:
            raise DomainError(f"a0 must be positive, got {self.a0}")
        floor = 0.5 * (self.m - 1)
        for i, ai in enumerate(self.a, start=1):
            if not ai > floor:
                raise DomainError(f"a[{i}] = {ai} must exceed (m-1)/2 = {floor}")

    @classmethod
    def from_structure(cls, structure: BlockStructure) -> ShapeParams:
        rows = structure.block_rows
        return cls(a0=0.5 * rows[0], a=tuple(0.5 * n for n in rows[1:]), m=structure.cols)

    @classmethod
    def common(cls, a0: float, a: float, k: int, m: int) -> ShapeParams:
        return cls(a0=a0, a=(a,) * k, m=m)

    @property
    def k(self) -> int:
        return len(self.a)

    @property
    def total(self) -> float:
        """A = a0 + sum(a); A*m stands for N m / 2"""
        return self.a0 + sum(self.a)

    def to_dict(self) -> dict:
        return {"a0": self.a0, "a": list(self.a), "m": self.m}


@dataclass(frozen=True)
class LocationScale:
    """Per-block location mu_i, row scale Sigma_i, column scale Theta_i and r_i"""

    mu: tuple[np.ndarray, ...]
    sigma: tuple[SpdMatrix, ...]
    theta: tuple[SpdMatrix, ...]
    r: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(real_matrix(x) for x in self.mu))
        object.__setattr__(self, "sigma", tuple(as_spd(s) for s in self.sigma))
        object.__setattr__(self, "theta", tuple(as_spd(t) for t in self.theta))
        object.__setattr__(self, "r", tuple(float(x) for x in self.r))
        if not len(self.mu) == len(self.sigma) == len(self.theta) == len(self.r):
            raise DomainError("location-scale parts must all have one entry per block")
        for i, ri in enumerate(self.r, start=1):
            if not ri > 0:
                raise DomainError(f"r[{i}] must be positive, got {ri}")

    def check(self, structure: BlockStructure) -> None:
        if len(self.mu) != structure.k:
            raise DomainError(f"location-scale has {len(self.mu)} blocks, structure has k={structure.k}")
        m = structure.cols
        for i, n in enumerate(structure.block_rows[1:]):
            if self.mu[i].shape != (n, m):
                raise DomainError(f"mu[{i + 1}] has shape {self.mu[i].shape}, expected {(n, m)}")
            if self.sigma[i].order != n or self.theta[i].order != m:
                raise DomainError(f"scale matrices of block {i + 1} do not match {(n, m)}")

    @classmethod
    def standard(cls, structure: BlockStructure) -> LocationScale:
        m = structure.cols
        rows = structure.block_rows[1:]
        return cls(
            mu=tuple(np.zeros((n, m)) for n in rows),
            sigma=tuple(np.eye(n) for n in rows),
            theta=tuple(np.eye(m) for _ in rows),
            r=tuple(1.0 for _ in rows),
        )

    @classmethod
    def from_dict(cls, data: dict) -> LocationScale:
        missing = {"mu", "sigma", "theta", "r"} - set(data)
        if missing:
            raise DomainError(f"location_scale is missing {sorted(missing)}")
        try:
            return cls(mu=data["mu"], sigma=data["sigma"], theta=data["theta"], r=data["r"])
        except DomainError:
            raise
        except (TypeError, ValueError) as exc:
            raise DomainError(f"malformed location_scale: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "mu": [x.tolist() for x in self.mu],
            "sigma": [s.to_list() for s in self.sigma],
            "theta": [t.to_list() for t in self.theta],
            "r": list(self.r),
        }


@dataclass(frozen=True)
class DerivedSample:
    """One observation: a scalar (v, v0 or w depending on roles) plus tagged blocks.

    ``v`` is None only for the all-Gram Wishart form.
    """

    v: Optional[float]
    roles: tuple[Role, ...]
    blocks: tuple

    def payload(self, i: int) -> np.ndarray:
        block = self.blocks[i]
        return block.entries if isinstance(block, SpdMatrix) else block

    def arrays(self) -> list[np.ndarray]:
        return [self.payload(i) for i in range(len(self.blocks))]

    def to_dict(self) -> dict:
        blocks = [b.tolist() for b in self.arrays()]
        if self.v is None:
            return {"blocks": blocks}
        return {"v": self.v, "blocks": blocks}


@dataclass(frozen=True)
class SampleSet:
    family: str
    structure: BlockStructure
    kernel: KernelSpec
    roles: tuple[Role, ...]
    draws: tuple[DerivedSample, ...]
    seed: Optional[int] = None


@dataclass(frozen=True)
class FitConfig:
    init_a0: float = 1.0
    init_a: Optional[float] = None
    max_iterations: int = 2000
    tolerance: float = 1e-8
    restarts: int = 3

    def start(self, m: int) -> tuple[float, float]:
        """Initial (a0, a); a defaults to (m+1)/2, inside a > (m-1)/2 for every m"""
        return self.init_a0, 0.5 * (m + 1) if self.init_a is None else self.init_a

    def check(self, m: int) -> None:
        a0, a = self.start(m)
        if not a0 > 0:
            raise DomainError(f"initial a0 must be positive, got {a0}")
        if not a > 0.5 * (m - 1):
            raise DomainError(f"initial a must exceed (m-1)/2 = {0.5 * (m - 1)}, got {a}")
        if self.max_iterations < 1 or not self.tolerance > 0 or self.restarts < 0:
            raise DomainError("max_iterations, tolerance and restarts must be positive")

    def to_dict(self) -> dict:
        return {
            "init_a0": self.init_a0,
            "init_a": self.init_a,
            "max_iterations": self.max_iterations,
            "tolerance": self.tolerance,
            "restarts": self.restarts,
        }


@dataclass(frozen=True)
class FitReport:
    a0_hat: float
    a_hat: float
    log_likelihood: float
    converged: bool
    iterations: int
    optimizer_trace: tuple[tuple[int, float], ...] = field(default_factory=tuple)
    standard_errors: Optional[tuple[float, float]] = None
    gradient_norm: Optional[float] = None
    restart_index: int = 0

    def to_dict(self) -> dict:
        return {
            "a0_hat": self.a0_hat,
            "a_hat": self.a_hat,
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
            "optimizer_trace": [[i, v] for i, v in self.optimizer_trace],
            "standard_errors": list(self.standard_errors) if self.standard_errors else None,
            "gradient_norm": self.gradient_norm,
            "restart_index": self.restart_index,
        }
