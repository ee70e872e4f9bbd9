"""
Invariant suites run by ``multimatrix check``: quadrature normalisation,
joint-vs-marginal integration over the scalar, closed-form reductions to
textbook laws, and Monte Carlo Kolmogorov-Smirnov tests.

Quadrature is only attempted for scalar-tractable configurations (m = 1,
one row in every rectangular block, at most two free variables). Each free
variable is mapped onto a bounded angle so heavy tails and endpoint
singularities of the arcsine/beta laws become smooth integrands.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, stats

from multimatrix.errors import DomainError, QuadratureFailure, UnsupportedConfiguration
from multimatrix.kernels import KernelFamily, KernelSpec
from multimatrix.matcore import BlockStructure, frobenius_sq
from multimatrix.models import DerivedSample, Family, LocationScale, Role, ShapeParams
from multimatrix.services import densities
from multimatrix.services.sampling import RngStream, sample_family, sample_spherical

logger = logging.getLogger(__name__)

QUAD_TOLERANCE = 1e-8
NORMALIZATION_TOL = 1e-3
CONSISTENCY_TOL = 1e-5
REDUCTION_TOL = 1e-12
WISHART_TOL = 1e-10
KS_ALPHA = 0.01
HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    @classmethod
    def within(cls, name: str, value: float, tolerance: float) -> CheckResult:
        return cls(name, bool(value <= tolerance), float(value), tolerance)

    @classmethod
    def ks(cls, name: str, p_value: float) -> CheckResult:
        return cls(name, bool(p_value > KS_ALPHA), float(p_value), KS_ALPHA)

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "value": self.value, "tolerance": self.tolerance}


@dataclass(frozen=True)
class Substitution:
    """x = value(phi) on (lower, upper), with log |dx/dphi|, and the support bounds of x"""

    lower: float
    upper: float
    value: Callable[[float], float]
    log_jacobian: Callable[[float], float]
    support: tuple[float, float]


LINE = Substitution(
    -HALF_PI, HALF_PI, math.tan, lambda p: -2.0 * math.log(math.cos(p)), (-np.inf, np.inf)
)
CHORD = Substitution(-HALF_PI, HALF_PI, math.sin, lambda p: math.log(math.cos(p)), (-1.0, 1.0))
HALF_LINE = Substitution(
    0.0,
    HALF_PI,
    lambda p: math.tan(p) ** 2,
    lambda p: math.log(2.0 * math.tan(p)) - 2.0 * math.log(math.cos(p)),
    (0.0, np.inf),
)
UNIT = Substitution(
    0.0, HALF_PI, lambda p: math.sin(p) ** 2, lambda p: math.log(math.sin(2.0 * p)), (0.0, 1.0)
)
BEYOND_ONE = Substitution(
    0.0,
    HALF_PI,
    lambda p: 1.0 / math.sin(p) ** 2,
    lambda p: math.log(2.0 * math.cos(p)) - 3.0 * math.log(math.sin(p)),
    (1.0, np.inf),
)

ROLE_SUBSTITUTIONS = {
    Role.X: LINE,
    Role.T: LINE,
    Role.R: CHORD,
    Role.V: HALF_LINE,
    Role.F: HALF_LINE,
    Role.W: HALF_LINE,
    Role.A: HALF_LINE,
    Role.B: UNIT,
    Role.U: BEYOND_ONE,
}

# joint family -> family whose marginal form is obtained by integrating out the scalar
JOINT_TO_MARGINAL = {
    Family.PEARSON7: Family.PEARSON7,
    Family.PEARSON2: Family.PEARSON2,
    Family.BETA2: Family.BETA2,
    Family.BETA1: Family.BETA1,
    Family.TRI_P7_P2: Family.BI_P7_P2,
    Family.TRI_B2_B1: Family.BI_B2_B1,
    Family.INV_B2_B1: Family.INV_B2_B1,
}

RECT_ROLES = frozenset({Role.X, Role.T, Role.R})


@dataclass(frozen=True)
class Layout:
    """Free variables of one density form: the optional scalar plus one per role"""

    family: Family
    roles: tuple[Role, ...]
    scalar: bool

    @property
    def count(self) -> int:
        return len(self.roles) + int(self.scalar)

    def describe(self) -> str:
        return f"{self.family.value}/{'joint' if self.scalar else 'marginal'}"


def _layouts(family: Family, structure: BlockStructure, kernel: Optional[KernelSpec]) -> list[Layout]:
    k = structure.k
    layouts = []
    if family is Family.WISHART:
        layouts.append(Layout(family, (Role.W,) * (k + 1), False))
        layouts.append(Layout(family, (Role.W,) * k, True))
    elif family in (Family.TRI_P7_P2, Family.TRI_B2_B1):
        marginal = JOINT_TO_MARGINAL[family]
        layouts.append(Layout(marginal, marginal.default_roles(k), False))
        layouts.append(Layout(family, family.default_roles(k), True))
    elif family.needs_kernel:
        layouts.append(Layout(family, family.default_roles(k), True))
    else:
        layouts.append(Layout(family, family.default_roles(k), False))
    if kernel is None:
        layouts = [lay for lay in layouts if not lay.scalar and lay.family is not Family.WISHART]
    return layouts


def _tractable(layout: Layout, structure: BlockStructure) -> bool:
    if structure.cols != 1 or layout.count > 2:
        return False
    rows = structure.block_rows if len(layout.roles) == structure.k + 1 else structure.block_rows[1:]
    return all(n == 1 for role, n in zip(layout.roles, rows) if role in RECT_ROLES)


def scalar_tractable(family: Family, structure: BlockStructure, kernel: Optional[KernelSpec] = None) -> bool:
    return any(_tractable(lay, structure) for lay in _layouts(family, structure, kernel))


def _quad_nd(func, bounds: Sequence[tuple[float, float]], tol: float) -> float:
    """quad or dblquad; QUADPACK warnings are logged and the tolerance checks decide"""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        if len(bounds) == 1:
            value, _ = integrate.quad(func, *bounds[0], epsabs=1e-10, epsrel=tol, limit=200)
        else:
            (a, b), (c, d) = bounds
            value, _ = integrate.dblquad(lambda y, x: func(x, y), a, b, c, d, epsabs=1e-10, epsrel=tol)
    for w in caught:
        logger.warning(f"Quadrature: {w.message}")
    if not math.isfinite(value):
        raise QuadratureFailure(f"quadrature returned {value}")
    return value


def normalization(
    layout: Layout,
    structure: BlockStructure,
    params: Optional[ShapeParams] = None,
    kernel: Optional[KernelSpec] = None,
    location_scale: Optional[LocationScale] = None,
    tol: float = QUAD_TOLERANCE,
) -> float:
    """Integral of exp(log density) over the whole support of a scalar-tractable form"""
    if not _tractable(layout, structure):
        raise UnsupportedConfiguration(
            f"{layout.describe()} is not scalar-tractable for quadrature; use --level full"
        )
    subs = ([HALF_LINE] if layout.scalar else []) + [ROLE_SUBSTITUTIONS[r] for r in layout.roles]
    shift, scale = 0.0, 1.0
    if layout.family is Family.LOCATED_P7 and location_scale is not None:
        ls = location_scale
        shift = float(ls.mu[0][0, 0])
        scale = math.sqrt(ls.r[0] * float(ls.sigma[0].entries[0, 0]) * float(ls.theta[0].entries[0, 0]))
    form_kernel = kernel if layout.scalar or layout.family.needs_kernel else None

    def integrand(*phis):
        try:
            values = [s.value(p) for s, p in zip(subs, phis)]
            log_jac = sum(s.log_jacobian(p) for s, p in zip(subs, phis))
            scalar = values.pop(0) if layout.scalar else None
            blocks = tuple(np.array([[shift + scale * x]]) for x in values)
            if layout.family is Family.LOCATED_P7:
                log_jac += len(blocks) * math.log(scale)
            sample = DerivedSample(scalar, layout.roles, blocks)
            logp = densities.log_density(
                layout.family, sample, structure, params, form_kernel, location_scale
            )
        except (DomainError, ValueError, OverflowError):
            return 0.0
        total = logp + log_jac
        return math.exp(total) if total < 700.0 else math.inf

    return _quad_nd(integrand, [(s.lower, s.upper) for s in subs], tol)


def joint_marginal_gap(
    family: Family,
    structure: BlockStructure,
    kernel: KernelSpec,
    points: Sequence[DerivedSample],
    tol: float = QUAD_TOLERANCE,
) -> float:
    """max |int joint ds / marginal - 1| over the support points, s the scalar (v, v0 or w)"""
    if family not in JOINT_TO_MARGINAL:
        raise UnsupportedConfiguration(f"{family.value} has no joint/marginal pair")
    marginal = JOINT_TO_MARGINAL[family]
    worst = 0.0
    for point in points:
        log_marginal = densities.log_density(marginal, replace(point, v=None), structure)

        def integrand(y: float) -> float:
            try:
                logp = densities.log_density(family, replace(point, v=math.exp(y)), structure, kernel=kernel)
            except (DomainError, OverflowError):
                return 0.0
            return math.exp(min(logp + y - log_marginal, 700.0))

        value = _quad_nd(integrand, [(-np.inf, np.inf)], tol)
        worst = max(worst, abs(value - 1.0))
    return worst


# -- closed-form reductions --------------------------------------------------


def cauchy_reduction() -> float:
    structure = BlockStructure((1, 1), 1)
    grid = np.linspace(-10.0, 10.0, 101)
    ours = [densities.log_pearson7([[t]], structure) for t in grid]
    return float(np.max(np.abs(np.array(ours) - stats.cauchy.logpdf(grid))))


def student_reduction(n0: int) -> float:
    """T sqrt(n0) is Student t with n0 degrees of freedom"""
    structure = BlockStructure((n0, 1), 1)
    grid = np.linspace(-10.0, 10.0, 101)
    ours = np.array([densities.log_pearson7([[t]], structure) for t in grid])
    reference = 0.5 * math.log(n0) + stats.t(n0).logpdf(math.sqrt(n0) * grid)
    return float(np.max(np.abs(ours - reference)))


def arcsine_reduction() -> float:
    structure = BlockStructure((1, 1), 1)
    grid = np.linspace(-0.99, 0.99, 101)
    ours = np.array([densities.log_pearson2([[r]], structure) for r in grid])
    reference = -math.log(math.pi) - 0.5 * np.log1p(-grid * grid)
    return float(np.max(np.abs(ours - reference)))


def beta1_reduction() -> float:
    structure = BlockStructure((1, 1), 1)
    grid = np.linspace(0.01, 0.99, 99)
    ours = np.array([densities.log_beta1([[b]], structure) for b in grid])
    return float(np.max(np.abs(ours - stats.beta(0.5, 0.5).logpdf(grid))))


def beta2_reduction(n0: int, n1: int) -> float:
    """F with k = m = 1 is beta-prime(n1/2, n0/2)"""
    structure = BlockStructure((n0, n1), 1)
    grid = np.linspace(0.05, 10.0, 100)
    ours = np.array([densities.log_beta2([[f]], structure) for f in grid])
    return float(np.max(np.abs(ours - stats.betaprime(0.5 * n1, 0.5 * n0).logpdf(grid))))


def random_spd(m: int, rng: RngStream) -> np.ndarray:
    a = rng.standard_normal((m, m))
    return a @ a.T + m * np.eye(m)


def wishart_factorization(m: int, count: int = 50, seed: int = 0) -> float:
    """All-Gram form under the Normal kernel against independent Wishart(ni, I) laws"""
    rows = (m, m + 1, m + 2)
    structure = BlockStructure(rows, m)
    kernel = KernelSpec.normal(structure.dim)
    rng = RngStream(seed)
    worst = 0.0
    for _ in range(count):
        ws = [random_spd(m, rng) for _ in rows]
        ours = densities.log_wishart(ws, structure, kernel)
        reference = sum(
            float(stats.wishart(df=n, scale=np.eye(m)).logpdf(w)) for n, w in zip(rows, ws)
        )
        worst = max(worst, abs(ours - reference))
    return worst


def reduction_checks(family: Family) -> list[CheckResult]:
    if family is Family.PEARSON7:
        res = [CheckResult.within("reduction/cauchy", cauchy_reduction(), REDUCTION_TOL)]
        return res + [
            CheckResult.within(f"reduction/student-t{n0}", student_reduction(n0), REDUCTION_TOL)
            for n0 in (2, 3, 5)
        ]
    if family is Family.PEARSON2:
        return [CheckResult.within("reduction/arcsine", arcsine_reduction(), REDUCTION_TOL)]
    if family is Family.BETA1:
        return [CheckResult.within("reduction/beta", beta1_reduction(), REDUCTION_TOL)]
    if family is Family.BETA2:
        return [
            CheckResult.within(f"reduction/betaprime-{n0}-{n1}", beta2_reduction(n0, n1), REDUCTION_TOL)
            for n0 in (1, 2, 3)
            for n1 in (1, 2, 3)
        ]
    if family is Family.WISHART:
        return [
            CheckResult.within(f"reduction/wishart-m{m}", wishart_factorization(m), WISHART_TOL)
            for m in (1, 2, 3)
        ]
    return []


# -- Monte Carlo --------------------------------------------------------------


def quadrature_cdf(logpdf: Callable[[float], float], lower: float, points: Sequence[float]) -> np.ndarray:
    """CDF at sorted ``points`` by integrating exp(logpdf) segment by segment from ``lower``"""
    points = np.asarray(points, dtype=float)
    if np.any(np.diff(points) < 0):
        raise DomainError("quadrature_cdf needs sorted points")

    def density(x: float) -> float:
        try:
            return math.exp(logpdf(x))
        except (DomainError, OverflowError):
            return 0.0

    cdf = np.empty(len(points))
    running, left = 0.0, lower
    for i, x in enumerate(points):
        if x > left:
            running += integrate.quad(density, left, x, limit=200)[0]
        cdf[i] = running
        left = x
    return np.clip(cdf, 0.0, 1.0)


def ks_marginal(
    family: Family, structure: BlockStructure, kernel: KernelSpec, count: int, rng: RngStream
) -> float:
    """KS p-value of sampled scalar statistics against the quadrature CDF of the marginal form"""
    roles = family.default_roles(structure.k)
    if structure.k != 1 or structure.cols != 1 or (roles[0] in RECT_ROLES and structure.block_rows[1] != 1):
        raise UnsupportedConfiguration("KS on the marginal needs one scalar statistic (k = m = 1)")
    draws = sample_family(family, structure, kernel, roles, count, rng).draws
    values = np.sort([float(d.arrays()[0][0, 0]) for d in draws])

    def logpdf(x: float) -> float:
        return densities.log_density(family, DerivedSample(None, roles, (np.array([[x]]),)), structure)

    lower = ROLE_SUBSTITUTIONS[roles[0]].support[0]
    cdf = quadrature_cdf(logpdf, lower, values)
    return float(stats.kstest(values, lambda x: np.interp(x, values, cdf)).pvalue)


def ks_radial(structure: BlockStructure, kernel: KernelSpec, count: int, rng: RngStream) -> float:
    """V = ||X0||^2 is chi-square(n0 m) under Normal, r * beta-prime(n0 m/2, q - d/2) under Pearson VII"""
    half = 0.5 * structure.block_rows[0] * structure.cols
    v = np.array([frobenius_sq(sample_spherical(structure, kernel, rng)[0]) for _ in range(count)])
    if kernel.family is KernelFamily.NORMAL:
        reference = stats.chi2(2.0 * half)
    else:
        reference = stats.betaprime(half, kernel.q - 0.5 * kernel.dim, scale=kernel.r)
    return float(stats.kstest(v, reference.cdf).pvalue)


def run_checks(
    family: Family,
    structure: BlockStructure,
    kernel: Optional[KernelSpec] = None,
    level: str = "fast",
    count: int = 2000,
    seed: int = 0,
    tol: float = QUAD_TOLERANCE,
) -> list[CheckResult]:
    """All checks that apply to ``family`` on ``structure`` at the given level"""
    if level not in ("fast", "full"):
        raise DomainError(f"level must be 'fast' or 'full', got {level!r}")
    tractable = scalar_tractable(family, structure, kernel)
    if level == "fast" and not tractable:
        raise UnsupportedConfiguration(
            f"{family.value} with block_rows={list(structure.block_rows)}, m={structure.cols} "
            "is not scalar-tractable for quadrature; run --level full for Monte Carlo checks"
        )

    results = []
    for layout in _layouts(family, structure, kernel):
        if not _tractable(layout, structure):
            continue
        value = normalization(layout, structure, kernel=kernel, tol=tol)
        results.append(CheckResult.within(f"normalization/{layout.describe()}", abs(value - 1.0), NORMALIZATION_TOL))

    rng = RngStream(seed)
    if kernel is not None and family in JOINT_TO_MARGINAL:
        points = sample_family(family, structure, kernel, count=10, rng=rng.fork(0)).draws
        gap = joint_marginal_gap(family, structure, kernel, points, tol=tol)
        results.append(CheckResult.within("joint-vs-marginal", gap, CONSISTENCY_TOL))

    results.extend(reduction_checks(family))

    if level == "full" and kernel is not None:
        results.append(CheckResult.ks("ks/radial", ks_radial(structure, kernel, count, rng.fork(1))))
        if family not in (Family.LOCATED_P7, Family.GG, Family.GAMMA_ELLIPTICAL, Family.WISHART) and not family.three_block:
            try:
                p = ks_marginal(family, structure, kernel, count, rng.fork(2))
            except UnsupportedConfiguration as exc:
                logger.info(f"Skipping marginal KS: {exc}")
            else:
                results.append(CheckResult.ks("ks/marginal", p))

    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning(f"{len(failed)} of {len(results)} checks failed for {family.value}: {failed}")
    else:
        logger.info(f"All {len(results)} checks passed for {family.value}")
    return results
