"""
Spherical density generators h(u) bound to a total dimension d = N*m.

A kernel defines the spherical law with density h(||X||^2) on R^d. Only the
log of h is ever evaluated by the density code; the radial integral and the
squared-radius sampler exist for normalisation checks and simulation.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from multimatrix.errors import DomainError, NegativeArgument, QuadratureFailure

LOG_2PI = math.log(2.0 * math.pi)
QUAD_TOLERANCE = 1e-8


class KernelFamily(str, enum.Enum):
    NORMAL = "normal"
    PEARSON7 = "pearson7"


@dataclass(frozen=True)
class KernelSpec:
    """Density generator h with the dimension it normalises over.

    Normal:     h(u) = (2 pi)^(-d/2) exp(-u/2)
    Pearson VII: h(u) = Gamma(q) / ((pi r)^(d/2) Gamma(q - d/2)) (1 + u/r)^(-q)
    """

    family: KernelFamily
    dim: int
    q: Optional[float] = None
    r: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if int(self.dim) < 1:
            raise DomainError(f"kernel dimension must be positive, got {self.dim}")
        if self.family is KernelFamily.PEARSON7:
            if self.q is None or self.r is None:
                raise DomainError("pearson7 kernel needs both q and r")
            if not self.q > 0.5 * self.dim:
                raise DomainError(f"pearson7 needs q > d/2 = {0.5 * self.dim}, got q={self.q}")
            if not self.r > 0:
                raise DomainError(f"pearson7 needs r > 0, got r={self.r}")

    @classmethod
    def normal(cls, dim: int) -> KernelSpec:
        return cls(KernelFamily.NORMAL, dim)

    @classmethod
    def pearson7(cls, dim: int, q: float, r: float) -> KernelSpec:
        return cls(KernelFamily.PEARSON7, dim, float(q), float(r))

    @classmethod
    def student(cls, dim: int, nu: float) -> KernelSpec:
        """Matrix t generator with nu degrees of freedom"""
        return cls.pearson7(dim, 0.5 * (dim + nu), nu)

    @classmethod
    def from_json(cls, data: dict, dim: int) -> KernelSpec:
        """Build from {"family": "normal"} or {"family": "pearson7", "q": .., "r": ..}.

        The dimension always comes from the block structure.
        """
        if not isinstance(data, dict) or "family" not in data:
            raise DomainError("kernel must be an object with a 'family' key")
        unknown = set(data) - {"family", "q", "r"}
        if unknown:
            raise DomainError(f"unknown kernel keys: {sorted(unknown)}")
        try:
            family = KernelFamily(data["family"])
        except ValueError:
            raise DomainError(f"unknown kernel family {data['family']!r}") from None
        if family is KernelFamily.NORMAL:
            return cls.normal(dim)
        for key in ("q", "r"):
            value = data.get(key)
            if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
                raise DomainError(f"kernel {key} must be a number, got {value!r}")
        return cls(family, dim, data.get("q"), data.get("r"))

    def to_json(self) -> dict:
        if self.family is KernelFamily.NORMAL:
            return {"family": self.family.value}
        return {"family": self.family.value, "q": self.q, "r": self.r}

    def with_dim(self, dim: int) -> KernelSpec:
        return KernelSpec(self.family, dim, self.q, self.r)

    @property
    def log_norm(self) -> float:
        if self.family is KernelFamily.NORMAL:
            return -0.5 * self.dim * LOG_2PI
        half_d = 0.5 * self.dim
        return float(
            gammaln(self.q) - half_d * math.log(math.pi * self.r) - gammaln(self.q - half_d)
        )


def log_h(kernel: KernelSpec, u: float) -> float:
    if u < 0:
        raise NegativeArgument(f"kernel argument must be nonnegative, got {u}")
    if kernel.family is KernelFamily.NORMAL:
        return kernel.log_norm - 0.5 * u
    return kernel.log_norm - kernel.q * math.log1p(u / kernel.r)


def radial_integral_check(kernel: KernelSpec, a: float, tol: float = QUAD_TOLERANCE) -> float:
    """Numerically evaluate int_0^inf v^(d/2-1) h(a v) dv.

    The substitution v = s^2 removes the endpoint singularity at d = 1, so
    the integrand is 2 s^(d-1) h(a s^2) on (0, inf). Analytic value is
    a^(-d/2) Gamma(d/2) / pi^(d/2).
    """
    if not a > 0:
        raise DomainError(f"scale a must be positive, got {a}")
    d = kernel.dim

    def integrand(s: float) -> float:
        if s == 0.0:
            return 2.0 * math.exp(log_h(kernel, 0.0)) if d == 1 else 0.0
        return 2.0 * math.exp((d - 1) * math.log(s) + log_h(kernel, a * s * s))

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-14, epsrel=tol, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"radial integral did not converge: {exc}") from exc
    if abserr > max(tol * abs(value), 1e-14) * 100:
        raise QuadratureFailure(f"radial integral error estimate {abserr:.2e} too large")
    return value


def sample_radius_sq(kernel: KernelSpec, rng_stream, size: Optional[int] = None):
    """Draw V = ||X||^2 for X spherical with generator h.

    Normal gives chi-square(d). Pearson VII gives r * chi2(d) / chi2(2q - d),
    i.e. V / r is beta-prime(d/2, q - d/2).
    """
    d = kernel.dim
    numerator = rng_stream.chisquare(d, size)
    if kernel.family is KernelFamily.NORMAL:
        return numerator
    nu = 2.0 * kernel.q - d
    return kernel.r * numerator / rng_stream.chisquare(nu, size)
