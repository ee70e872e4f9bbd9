"""
Seeded simulation of spherical matrix ensembles and their derived statistics.

Every draw is direction x radius: a standard normal vector in R^(Nm)
normalised to the unit sphere, scaled by the square root of a squared radius
drawn from the kernel, then cut into blocks and passed through
``transforms.derive``. Blocks within one draw are dependent; draws are
independent replicates.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from multimatrix.errors import DegenerateBlock, DomainError, UnsupportedConfiguration
from multimatrix.kernels import KernelSpec, sample_radius_sq
from multimatrix.matcore import BlockStructure
from multimatrix.models import DerivedSample, Family, SampleSet, parse_roles
from multimatrix.transforms import derive

logger = logging.getLogger(__name__)

# Shape of the docking-like trajectory: 56 dependent 21 x 3 coordinate blocks.
TRAJECTORY_BLOCKS = 56
TRAJECTORY_ROWS = 21
TRAJECTORY_COLS = 3
TRAJECTORY_N0 = 4


class RngStream:
    """Reproducible random stream on numpy's Philox counter-based generator.

    The stream for ``seed`` is ``Philox(SeedSequence(seed))``; child stream
    ``i`` is ``Philox(SeedSequence(seed, spawn_key=(i,)))``, so streams handed
    to workers depend only on the master seed and their index.
    """

    def __init__(self, seed: int, spawn_key: tuple[int, ...] = ()):
        if int(seed) < 0 or int(seed) >= 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self._seed = int(seed)
        self._spawn_key = tuple(spawn_key)
        sequence = np.random.SeedSequence(self._seed, spawn_key=self._spawn_key)
        self._generator = np.random.Generator(np.random.Philox(sequence))

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def spawn_key(self) -> tuple[int, ...]:
        return self._spawn_key

    def fork(self, index: int) -> RngStream:
        """Independent child stream number ``index``"""
        return RngStream(self._seed, self._spawn_key + (int(index),))

    def standard_normal(self, size=None):
        return self._generator.standard_normal(size)

    def chisquare(self, df: float, size=None):
        return self._generator.chisquare(df, size)


def _check_kernel(structure: BlockStructure, kernel: KernelSpec) -> None:
    if kernel.dim != structure.dim:
        raise DomainError(f"kernel dimension {kernel.dim} does not match N*m = {structure.dim}")


def sample_spherical(structure: BlockStructure, kernel: KernelSpec, rng: RngStream) -> list[np.ndarray]:
    """One N x m spherical matrix with generator h, split into blocks X0..Xk"""
    _check_kernel(structure, kernel)
    z = rng.standard_normal(structure.dim)
    direction = z / np.linalg.norm(z)
    radius = np.sqrt(float(sample_radius_sq(kernel, rng)))
    x = (radius * direction).reshape(structure.total_rows, structure.cols)
    return structure.split(x)


def _draw(structure: BlockStructure, kernel: KernelSpec, roles, rng: RngStream) -> DerivedSample:
    try:
        return derive(sample_spherical(structure, kernel, rng), structure, roles)
    except DegenerateBlock as exc:
        logger.warning(f"Degenerate draw ({exc}), retrying once")
        return derive(sample_spherical(structure, kernel, rng), structure, roles)


def sample_family(
    family: Family,
    structure: BlockStructure,
    kernel: KernelSpec,
    roles: Optional[Sequence] = None,
    count: int = 1,
    rng: Optional[RngStream] = None,
) -> SampleSet:
    """``count`` independent draws of the statistic ``family`` is defined on"""
    if family is Family.LOCATED_P7:
        raise UnsupportedConfiguration(
            "located-p7 is not sampled directly; transform pearson7 draws affinely instead"
        )
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    roles = parse_roles(roles) if roles is not None else family.default_roles(structure.k)
    family.check_roles(roles, structure.k)
    _check_kernel(structure, kernel)
    if rng is None:
        rng = RngStream(0)

    draws = tuple(_draw(structure, kernel, roles, rng) for _ in range(count))
    logger.info(
        f"Sampled {count} draws of {family.value} (k={structure.k}, m={structure.cols}, "
        f"kernel={kernel.family.value}, seed={rng.seed})"
    )
    return SampleSet(
        family=family.value,
        structure=structure,
        kernel=kernel,
        roles=roles,
        draws=draws,
        seed=rng.seed,
    )


def sample_dependent_trajectory(
    structure: BlockStructure,
    kernel: KernelSpec,
    roles: Optional[Sequence] = None,
    rng: Optional[RngStream] = None,
    family: Family = Family.BETA2,
) -> SampleSet:
    """A single draw whose k blocks form one dependent sample of matrices"""
    if structure.k < 1:
        raise DomainError("a trajectory needs at least one block besides block 0")
    return sample_family(family, structure, kernel, roles, count=1, rng=rng)


def docking_like_trajectory(seed: int, kernel: Optional[KernelSpec] = None) -> SampleSet:
    """The 56-block, 21 x 3 beta-II trajectory used for workflow regression"""
    structure = BlockStructure(
        (TRAJECTORY_N0,) + (TRAJECTORY_ROWS,) * TRAJECTORY_BLOCKS, TRAJECTORY_COLS
    )
    kernel = kernel.with_dim(structure.dim) if kernel else KernelSpec.normal(structure.dim)
    return sample_dependent_trajectory(structure, kernel, rng=RngStream(seed))
