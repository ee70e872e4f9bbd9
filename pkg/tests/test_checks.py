import numpy as np
import pytest
from scipy import stats

from multimatrix.errors import DomainError, UnsupportedConfiguration
from multimatrix.kernels import KernelSpec
from multimatrix.matcore import BlockStructure
from multimatrix.models import Family
from multimatrix.services.checks import (
    CheckResult,
    ks_radial,
    quadrature_cdf,
    run_checks,
    scalar_tractable,
)
from multimatrix.services.sampling import RngStream


@pytest.mark.parametrize("family", [Family.PEARSON2, Family.BETA2, Family.BETA1, Family.PEARSON7])
def test_fast_checks_pass(family):
    structure = BlockStructure((1, 1), 1)
    results = run_checks(family, structure, KernelSpec.normal(structure.dim), level="fast")
    assert results
    assert all(r.passed for r in results), [r.to_dict() for r in results if not r.passed]
    names = {r.name for r in results}
    assert f"normalization/{family.value}/marginal" in names
    assert "joint-vs-marginal" in names


def test_fast_checks_without_kernel():
    results = run_checks(Family.BI_B2_B1, BlockStructure((1, 1, 1), 1))
    assert [r.name for r in results] == ["normalization/bi-b2-b1/marginal"]
    assert results[0].passed


def test_fast_level_needs_scalar_tractable_configuration():
    structure = BlockStructure((3, 2), 2)
    assert not scalar_tractable(Family.BETA2, structure)
    with pytest.raises(UnsupportedConfiguration):
        run_checks(Family.BETA2, structure, KernelSpec.normal(structure.dim), level="fast")


def test_unknown_level():
    with pytest.raises(DomainError):
        run_checks(Family.BETA2, BlockStructure((1, 1), 1), level="thorough")


def test_check_result_serialisation():
    result = CheckResult.within("normalization/beta2/marginal", 2e-4, 1e-3)
    assert result.to_dict() == {
        "name": "normalization/beta2/marginal",
        "pass": True,
        "value": 2e-4,
        "tolerance": 1e-3,
    }
    assert not CheckResult.ks("ks/radial", 0.001).passed


def test_quadrature_cdf_matches_normal():
    points = np.linspace(-3.0, 3.0, 13)
    cdf = quadrature_cdf(stats.norm.logpdf, -np.inf, points)
    np.testing.assert_allclose(cdf, stats.norm.cdf(points), atol=1e-8)
    with pytest.raises(DomainError):
        quadrature_cdf(stats.norm.logpdf, -np.inf, [1.0, 0.0])


@pytest.mark.slow
@pytest.mark.parametrize(
    "kernel_args",
    [None, (7.0, 2.0)],
)
def test_radial_distribution(kernel_args):
    structure = BlockStructure((3, 2), 2)
    d = structure.dim
    kernel = KernelSpec.normal(d) if kernel_args is None else KernelSpec.pearson7(d, *kernel_args)
    assert ks_radial(structure, kernel, 100000, RngStream(31)) > 0.01


@pytest.mark.slow
def test_full_checks_pass():
    structure = BlockStructure((2, 1), 1)
    results = run_checks(Family.PEARSON7, structure, KernelSpec.normal(structure.dim), level="full", count=3000, seed=5)
    names = {r.name for r in results}
    assert {"ks/radial", "ks/marginal"} <= names
    assert all(r.passed for r in results)
