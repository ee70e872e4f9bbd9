"""
Log-density evaluators for every multimatrix family.

Joint forms (those taking a scalar v and a kernel) use the integer block
structure; marginal forms are parameterised by ``ShapeParams`` and reduce to
the integer formulas at a0 = n0/2, ai = ni/2. Nothing is exponentiated.
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from multimatrix.errors import DomainError
from multimatrix.kernels import KernelSpec, log_h
from multimatrix.matcore import BlockStructure, SpdMatrix, as_spd, frobenius_sq, log_det, real_matrix, spd_inverse
from multimatrix.models import DerivedSample, Family, LocationScale, ShapeParams
from multimatrix.special import LOG_PI, log_gamma, log_multigamma

logger = logging.getLogger(__name__)


# -- argument checks ---------------------------------------------------------


def _kernel_for(structure: BlockStructure, kernel: Optional[KernelSpec]) -> KernelSpec:
    if kernel is None:
        raise DomainError("this form needs a kernel")
    if kernel.dim != structure.dim:
        raise DomainError(f"kernel dimension {kernel.dim} does not match N*m = {structure.dim}")
    return kernel


def _params_for(structure: BlockStructure, params: Optional[ShapeParams]) -> ShapeParams:
    if params is None:
        return ShapeParams.from_structure(structure)
    if params.k != structure.k or params.m != structure.cols:
        raise DomainError(
            f"shape params (k={params.k}, m={params.m}) do not match structure "
            f"(k={structure.k}, m={structure.cols})"
        )
    return params


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value}")
    return value


def _rect_blocks(blocks: Sequence, structure: BlockStructure) -> list[np.ndarray]:
    mats = [real_matrix(b) for b in blocks]
    if len(mats) != structure.k:
        raise DomainError(f"expected {structure.k} blocks, got {len(mats)}")
    for i, (x, n) in enumerate(zip(mats, structure.block_rows[1:]), start=1):
        if x.shape != (n, structure.cols):
            raise DomainError(f"block {i} has shape {x.shape}, expected {(n, structure.cols)}")
    return mats


def _gram_blocks(blocks: Sequence, m: int, count: int) -> list[SpdMatrix]:
    mats = [as_spd(b) for b in blocks]
    if len(mats) != count:
        raise DomainError(f"expected {count} matrices, got {len(mats)}")
    for i, w in enumerate(mats):
        if w.order != m:
            raise DomainError(f"matrix {i} has order {w.order}, expected m={m}")
    return mats


def _three_blocks(structure: BlockStructure) -> None:
    if structure.k != 2:
        raise DomainError(f"three-block families need k=2, got k={structure.k}")


def _ball(name: str, value: float) -> float:
    if not value < 1.0:
        raise DomainError(f"{name} = {value} is outside the open unit interval")
    return value


# -- shared coefficients -----------------------------------------------------


def _marginal_coef(params: ShapeParams) -> float:
    """ln[ Gamma(Am) / (pi^((A-a0)m) Gamma(a0 m)) ]"""
    m = params.m
    big_a = params.total
    return log_gamma(big_a * m) - (big_a - params.a0) * m * LOG_PI - log_gamma(params.a0 * m)


def _matrix_coef(params: ShapeParams) -> float:
    """ln[ Gamma(Am) / (Gamma(a0 m) prod Gamma_m(ai)) ]"""
    m = params.m
    res = log_gamma(params.total * m) - log_gamma(params.a0 * m)
    return res - sum(log_multigamma(m, ai) for ai in params.a)


def _joint_front(structure: BlockStructure, v: float, gram: bool) -> float:
    """Common leading terms of the joint forms with v^(Nm/2 - 1).

    Gram forms absorb the Stiefel volumes, so pi carries the full Nm/2.
    """
    m = structure.cols
    half_n0m = 0.5 * structure.block_rows[0] * m
    pi_power = 0.5 * structure.dim if gram else half_n0m
    return pi_power * LOG_PI - log_gamma(half_n0m) + (0.5 * structure.dim - 1.0) * math.log(v)


def _gram_terms(grams: Sequence[SpdMatrix], shapes: Sequence[float], m: int) -> float:
    """sum (ai - (m+1)/2) ln|G_i| - ln Gamma_m(ai)"""
    return sum(
        (ai - 0.5 * (m + 1)) * log_det(g) - log_multigamma(m, ai) for g, ai in zip(grams, shapes)
    )


# -- families ----------------------------------------------------------------


def log_gg(v: Sequence[float], structure: BlockStructure, kernel: KernelSpec) -> float:
    """Multivariate generalised gamma law of the squared block norms"""
    kernel = _kernel_for(structure, kernel)
    values = [_positive(f"v[{i}]", x) for i, x in enumerate(v)]
    if len(values) != structure.k + 1:
        raise DomainError(f"expected {structure.k + 1} squared norms, got {len(values)}")
    m = structure.cols
    res = 0.5 * structure.dim * LOG_PI + log_h(kernel, sum(values))
    for n, vi in zip(structure.block_rows, values):
        half = 0.5 * n * m
        res += (half - 1.0) * math.log(vi) - log_gamma(half)
    return res


def log_gamma_elliptical(
    v: float, x: Sequence, structure: BlockStructure, kernel: KernelSpec
) -> float:
    kernel = _kernel_for(structure, kernel)
    v = _positive("v", v)
    mats = _rect_blocks(x, structure)
    half_n0m = 0.5 * structure.block_rows[0] * structure.cols
    res = half_n0m * LOG_PI - log_gamma(half_n0m) + (half_n0m - 1.0) * math.log(v)
    return res + log_h(kernel, v + sum(frobenius_sq(b) for b in mats))


def log_pearson7(
    t: Sequence,
    structure: BlockStructure,
    params: Optional[ShapeParams] = None,
    joint_v: Optional[float] = None,
    kernel: Optional[KernelSpec] = None,
) -> float:
    mats = _rect_blocks(t, structure)
    s = sum(frobenius_sq(b) for b in mats)
    if joint_v is not None:
        kernel = _kernel_for(structure, kernel)
        v = _positive("v", joint_v)
        return _joint_front(structure, v, gram=False) + log_h(kernel, v * (1.0 + s))
    params = _params_for(structure, params)
    return _marginal_coef(params) - params.total * params.m * math.log1p(s)


def log_pearson2(
    r: Sequence,
    structure: BlockStructure,
    params: Optional[ShapeParams] = None,
    joint_v: Optional[float] = None,
    kernel: Optional[KernelSpec] = None,
) -> float:
    mats = _rect_blocks(r, structure)
    rho = [_ball(f"||R{i}||^2", frobenius_sq(b)) for i, b in enumerate(mats, start=1)]
    odds = sum(p / (1.0 - p) for p in rho)
    m = structure.cols
    if joint_v is not None:
        kernel = _kernel_for(structure, kernel)
        v = _positive("v", joint_v)
        res = _joint_front(structure, v, gram=False) + log_h(kernel, v * (1.0 + odds))
        for n, p in zip(structure.block_rows[1:], rho):
            res -= (0.5 * n * m + 1.0) * math.log1p(-p)
        return res
    params = _params_for(structure, params)
    res = _marginal_coef(params) - params.total * m * math.log1p(odds)
    for ai, p in zip(params.a, rho):
        res -= (ai * m + 1.0) * math.log1p(-p)
    return res


def log_beta2(
    f: Sequence,
    structure: BlockStructure,
    params: Optional[ShapeParams] = None,
    joint_v: Optional[float] = None,
    kernel: Optional[KernelSpec] = None,
) -> float:
    m = structure.cols
    grams = _gram_blocks(f, m, structure.k)
    s = sum(float(np.trace(g.entries)) for g in grams)
    if joint_v is not None:
        kernel = _kernel_for(structure, kernel)
        v = _positive("v", joint_v)
        halves = [0.5 * n for n in structure.block_rows[1:]]
        res = _joint_front(structure, v, gram=True) + _gram_terms(grams, halves, m)
        return res + log_h(kernel, v * (1.0 + s))
    params = _params_for(structure, params)
    res = log_gamma(params.total * m) - log_gamma(params.a0 * m)
    res += _gram_terms(grams, params.a, m)
    return res - params.total * m * math.log1p(s)


def log_beta1(
    b: Sequence,
    structure: BlockStructure,
    params: Optional[ShapeParams] = None,
    joint_v: Optional[float] = None,
    kernel: Optional[KernelSpec] = None,
) -> float:
    m = structure.cols
    grams = _gram_blocks(b, m, structure.k)
    traces = [_ball(f"tr B{i}", float(np.trace(g.entries))) for i, g in enumerate(grams, start=1)]
    odds = sum(t / (1.0 - t) for t in traces)
    if joint_v is not None:
        kernel = _kernel_for(structure, kernel)
        v = _positive("v", joint_v)
        halves = [0.5 * n for n in structure.block_rows[1:]]
        res = _joint_front(structure, v, gram=True) + _gram_terms(grams, halves, m)
        res += log_h(kernel, v * (1.0 + odds))
        for half, t in zip(halves, traces):
            res -= (half * m + 1.0) * math.log1p(-t)
        return res
    params = _params_for(structure, params)
    res = log_gamma(params.total * m) - log_gamma(params.a0 * m)
    res += _gram_terms(grams, params.a, m) - params.total * m * math.log1p(odds)
    for ai, t in zip(params.a, traces):
        res -= (ai * m + 1.0) * math.log1p(-t)
    return res


def log_wishart(
    w: Sequence,
    structure: BlockStructure,
    kernel: KernelSpec,
    joint_v: Optional[float] = None,
) -> float:
    """Generalised Wishart forms.

    With ``joint_v``: law of (V, W1..Wk), v carries the exponent n0 m/2 - 1.
    Without: all-Gram law of (W0..Wk), h evaluated at sum_{i=0..k} tr Wi.
    """
    kernel = _kernel_for(structure, kernel)
    m = structure.cols
    res = 0.5 * structure.dim * LOG_PI
    if joint_v is not None:
        v = _positive("v", joint_v)
        grams = _gram_blocks(w, m, structure.k)
        half_n0m = 0.5 * structure.block_rows[0] * m
        res += (half_n0m - 1.0) * math.log(v) - log_gamma(half_n0m)
        res += _gram_terms(grams, [0.5 * n for n in structure.block_rows[1:]], m)
        return res + log_h(kernel, v + sum(float(np.trace(g.entries)) for g in grams))
    grams = _gram_blocks(w, m, structure.k + 1)
    res += _gram_terms(grams, [0.5 * n for n in structure.block_rows], m)
    return res + log_h(kernel, sum(float(np.trace(g.entries)) for g in grams))


def log_tri_p7_p2(
    v0: float, t, r, structure: BlockStructure, kernel: KernelSpec
) -> float:
    """Joint law of (V0, T, R) with V0 = ||X0||^2 + ||X2||^2"""
    _three_blocks(structure)
    kernel = _kernel_for(structure, kernel)
    v0 = _positive("v0", v0)
    t, r = _rect_blocks([t, r], structure)
    rho = _ball("||R||^2", frobenius_sq(r))
    m = structure.cols
    n0, n1, _ = structure.block_rows
    res = _joint_front(structure, v0, gram=False)
    res += log_h(kernel, v0 * (1.0 + (1.0 - rho) * frobenius_sq(t)))
    return res + (0.5 * (n0 + n1) * m - 1.0) * math.log1p(-rho)


def log_bi_p7_p2(t, r, structure: BlockStructure, params: Optional[ShapeParams] = None) -> float:
    _three_blocks(structure)
    params = _params_for(structure, params)
    t, r = _rect_blocks([t, r], structure)
    rho = _ball("||R||^2", frobenius_sq(r))
    m = params.m
    res = _marginal_coef(params)
    res -= params.total * m * math.log1p((1.0 - rho) * frobenius_sq(t))
    return res + ((params.a0 + params.a[0]) * m - 1.0) * math.log1p(-rho)


def log_tri_b2_b1(v: float, f, b, structure: BlockStructure, kernel: KernelSpec) -> float:
    _three_blocks(structure)
    kernel = _kernel_for(structure, kernel)
    v = _positive("v", v)
    m = structure.cols
    f, b = _gram_blocks([f, b], m, 2)
    tr_b = _ball("tr B", float(np.trace(b.entries)))
    tr_f = float(np.trace(f.entries))
    n0, n1, n2 = structure.block_rows
    res = _joint_front(structure, v, gram=True) + _gram_terms([f, b], [0.5 * n1, 0.5 * n2], m)
    res += log_h(kernel, v * (1.0 + (1.0 - tr_b) * tr_f))
    return res + (0.5 * (n0 + n1) * m - 1.0) * math.log1p(-tr_b)


def log_bi_b2_b1(f, b, structure: BlockStructure, params: Optional[ShapeParams] = None) -> float:
    _three_blocks(structure)
    params = _params_for(structure, params)
    m = params.m
    f, b = _gram_blocks([f, b], m, 2)
    tr_b = _ball("tr B", float(np.trace(b.entries)))
    tr_f = float(np.trace(f.entries))
    res = log_gamma(params.total * m) - log_gamma(params.a0 * m)
    res += _gram_terms([f, b], params.a, m)
    res -= params.total * m * math.log1p((1.0 - tr_b) * tr_f)
    return res + ((params.a0 + params.a[0]) * m - 1.0) * math.log1p(-tr_b)


def log_inv_b2_b1(
    a,
    u,
    structure: BlockStructure,
    params: Optional[ShapeParams] = None,
    joint_w: Optional[float] = None,
    kernel: Optional[KernelSpec] = None,
) -> float:
    """Law of A = F^-1, U = B^-1 (and W = 1/V0 when ``joint_w`` is given).

    Obtained from the beta II - beta I forms by the inversion Jacobian
    |A|^-(m+1) |U|^-(m+1), and w^-2 for the scalar.
    """
    _three_blocks(structure)
    m = structure.cols
    a, u = _gram_blocks([a, u], m, 2)

    f = spd_inverse(a)
    b = spd_inverse(u)
    _ball("tr U^-1", float(np.trace(b.entries)))
    jacobian = -(m + 1) * (log_det(a) + log_det(u))
    if joint_w is not None:
        w = _positive("w", joint_w)
        return log_tri_b2_b1(1.0 / w, f, b, structure, kernel) - 2.0 * math.log(w) + jacobian
    return log_bi_b2_b1(f, b, structure, params) + jacobian


def log_located_p7(
    s: Sequence,
    structure: BlockStructure,
    params: Optional[ShapeParams],
    ls: LocationScale,
) -> float:
    """Pearson VII in location-scale form: T_i = A_i^-1 (S_i - mu_i) B_i^-1 / sqrt(r_i)"""
    params = _params_for(structure, params)
    mats = _rect_blocks(s, structure)
    ls.check(structure)
    m = structure.cols
    res = _marginal_coef(params)
    quad = 0.0
    for i, n in enumerate(structure.block_rows[1:]):
        sigma, theta, ri = ls.sigma[i], ls.theta[i], ls.r[i]
        res -= 0.5 * n * m * math.log(ri) + 0.5 * m * log_det(sigma) + 0.5 * n * log_det(theta)
        dev = mats[i] - ls.mu[i]
        left = linalg.cho_solve((sigma.chol, True), dev, check_finite=False)
        both = linalg.cho_solve((theta.chol, True), left.T, check_finite=False).T
        quad += float(np.sum(dev * both)) / ri
    return res - params.total * m * math.log1p(quad)


# -- dispatch ----------------------------------------------------------------


def log_density(
    family: Family,
    sample: DerivedSample,
    structure: BlockStructure,
    params: Optional[ShapeParams] = None,
    kernel: Optional[KernelSpec] = None,
    location_scale: Optional[LocationScale] = None,
) -> float:
    """Evaluate one observation under ``family``.

    Joint forms are used when the sample carries a scalar and a kernel is
    supplied; otherwise the kernel-free marginal form.
    """
    blocks = sample.arrays()
    joint = sample.v is not None and kernel is not None and not family.marginal_only

    if family is Family.GG:
        if sample.v is None:
            raise DomainError("gg needs the block-0 squared norm v")
        return log_gg([sample.v] + [float(b[0, 0]) for b in blocks], structure, kernel)
    if family is Family.GAMMA_ELLIPTICAL:
        return log_gamma_elliptical(_required_v(sample), blocks, structure, kernel)
    if family is Family.WISHART:
        return log_wishart(blocks, structure, kernel, joint_v=sample.v)

    simple = {
        Family.PEARSON7: log_pearson7,
        Family.PEARSON2: log_pearson2,
        Family.BETA2: log_beta2,
        Family.BETA1: log_beta1,
    }
    if family in simple:
        if joint:
            return simple[family](blocks, structure, None, joint_v=sample.v, kernel=kernel)
        return simple[family](blocks, structure, params)

    if len(blocks) != 2 and family.three_block:
        raise DomainError(f"family {family.value} needs exactly two blocks, got {len(blocks)}")
    if family is Family.TRI_P7_P2:
        return log_tri_p7_p2(_required_v(sample), blocks[0], blocks[1], structure, kernel)
    if family is Family.BI_P7_P2:
        return log_bi_p7_p2(blocks[0], blocks[1], structure, params)
    if family is Family.TRI_B2_B1:
        return log_tri_b2_b1(_required_v(sample), blocks[0], blocks[1], structure, kernel)
    if family is Family.BI_B2_B1:
        return log_bi_b2_b1(blocks[0], blocks[1], structure, params)
    if family is Family.INV_B2_B1:
        if joint:
            return log_inv_b2_b1(blocks[0], blocks[1], structure, joint_w=sample.v, kernel=kernel)
        return log_inv_b2_b1(blocks[0], blocks[1], structure, params)
    if family is Family.LOCATED_P7:
        ls = location_scale or LocationScale.standard(structure)
        return log_located_p7(blocks, structure, params, ls)
    raise DomainError(f"no evaluator for family {family.value}")


def _required_v(sample: DerivedSample) -> float:
    if sample.v is None:
        raise DomainError("this joint form needs the scalar v on every replicate")
    return sample.v


def evaluate_replicates(
    family: Family,
    samples: Sequence[DerivedSample],
    structure: BlockStructure,
    params: Optional[ShapeParams] = None,
    kernel: Optional[KernelSpec] = None,
    location_scale: Optional[LocationScale] = None,
) -> tuple[list[float], float]:
    """Per-replicate log-densities and their sum, accumulated in input order.

    Domain errors are re-raised with the offending replicate index attached.
    """
    values = []
    for index, sample in enumerate(samples):
        try:
            values.append(log_density(family, sample, structure, params, kernel, location_scale))
        except DomainError as exc:
            logger.error(f"Replicate {index} is outside the support of {family.value}: {exc}")
            raise type(exc)(f"replicate {index}: {exc}") from exc
    total = math.fsum(values)
    logger.info(f"Evaluated {len(values)} replicates of {family.value}, sum {total:.6f}")
    return values, total
