"""Log-space special functions: log-gamma, multivariate gamma and Stiefel volume."""

import math

import numpy as np
from scipy.special import gammaln

from multimatrix.errors import DomainError

LOG_PI = math.log(math.pi)


def log_gamma(a: float) -> float:
    if not a > 0:
        raise DomainError(f"log_gamma needs a > 0, got {a}")
    return float(gammaln(a))


def log_multigamma(m: int, a: float) -> float:
    """ln Gamma_m[a] = m(m-1)/4 ln(pi) + sum_{i=1..m} ln Gamma(a - (i-1)/2)"""
    if m < 1:
        raise DomainError(f"dimension m must be a positive integer, got {m}")
    if not a > 0.5 * (m - 1):
        raise DomainError(f"log_multigamma needs a > (m-1)/2 = {0.5 * (m - 1)}, got {a}")
    res = 0.25 * m * (m - 1) * LOG_PI
    res += float(np.sum(gammaln(a - 0.5 * np.arange(m))))
    return res


def log_stiefel_volume(n: int, m: int) -> float:
    """ln of the invariant-measure volume 2^m pi^(mn/2) / Gamma_m[n/2] of V_{m,n}"""
    if m < 1 or n < m:
        raise DomainError(f"Stiefel manifold needs n >= m >= 1, got n={n}, m={m}")
    return m * math.log(2.0) + 0.5 * m * n * LOG_PI - log_multigamma(m, 0.5 * n)
