import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import gammaln

from multimatrix.errors import DomainError, NegativeArgument
from multimatrix.kernels import KernelFamily, KernelSpec, log_h, radial_integral_check, sample_radius_sq
from multimatrix.services.sampling import RngStream


def analytic_radial(d, a):
    return math.exp(-0.5 * d * math.log(a) + gammaln(0.5 * d) - 0.5 * d * math.log(math.pi))


def test_normal_log_h():
    kernel = KernelSpec.normal(3)
    assert log_h(kernel, 0.0) == pytest.approx(-1.5 * math.log(2 * math.pi))
    assert log_h(kernel, 2.0) - log_h(kernel, 0.0) == pytest.approx(-1.0)


def test_pearson7_log_h():
    kernel = KernelSpec.pearson7(1, 1.0, 1.0)
    # q = 1, r = 1, d = 1 is the standard Cauchy generator
    assert log_h(kernel, 4.0) == pytest.approx(-math.log(math.pi) - math.log(5.0))


def test_student_constructor():
    kernel = KernelSpec.student(4, 3.0)
    assert kernel.family is KernelFamily.PEARSON7
    assert kernel.q == 3.5
    assert kernel.r == 3.0


@pytest.mark.parametrize("q, r", [(0.5, 1.0), (2.0, 0.0), (None, 1.0)])
def test_pearson7_validation(q, r):
    with pytest.raises(DomainError):
        KernelSpec(KernelFamily.PEARSON7, 1, q, r)


def test_negative_argument():
    with pytest.raises(NegativeArgument):
        log_h(KernelSpec.normal(2), -1e-3)


@pytest.mark.parametrize(
    "kernel",
    [
        KernelSpec.normal(1),
        KernelSpec.normal(2),
        KernelSpec.normal(5),
        KernelSpec.pearson7(1, 2.0, 1.0),
        KernelSpec.pearson7(3, 4.0, 2.5),
    ],
)
@pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
def test_radial_integral(kernel, a):
    value = radial_integral_check(kernel, a)
    assert value == pytest.approx(analytic_radial(kernel.dim, a), rel=1e-6)


def test_json_round_trip_and_strict_keys():
    kernel = KernelSpec.pearson7(6, 4.0, 2.0)
    assert KernelSpec.from_json(kernel.to_json(), 6) == kernel
    assert KernelSpec.from_json({"family": "normal"}, 2) == KernelSpec.normal(2)
    with pytest.raises(DomainError):
        KernelSpec.from_json({"family": "normal", "sigma": 1.0}, 2)
    with pytest.raises(DomainError):
        KernelSpec.from_json({"family": "laplace"}, 2)


def test_radius_median_cauchy_generator():
    # V = chi2(1) / chi2(1) is F(1, 1), whose median is 1
    draws = sample_radius_sq(KernelSpec.pearson7(1, 1.0, 1.0), RngStream(7), 20001)
    assert np.median(draws) == pytest.approx(1.0, abs=0.08)


def test_radius_mean_normal():
    draws = sample_radius_sq(KernelSpec.normal(6), RngStream(8), 50000)
    assert np.mean(draws) == pytest.approx(6.0, abs=0.1)


@pytest.mark.parametrize("kernel", [KernelSpec.normal(3), KernelSpec.pearson7(3, 2.5, 1.0)], ids=["normal", "pearson7"])
def test_log_h_non_increasing(kernel):
    values = [log_h(kernel, u) for u in np.linspace(0.0, 50.0, 201)]
    assert np.all(np.diff(values) <= 0.0)


@pytest.mark.parametrize("d", range(1, 7))
@pytest.mark.parametrize("family", ["normal", "pearson7"])
def test_generator_integrates_to_one(d, family):
    kernel = KernelSpec.normal(d) if family == "normal" else KernelSpec.pearson7(d, 0.5 * d + 2.0, 1.0)
    total = radial_integral_check(kernel, 1.0) * math.pi ** (0.5 * d) / math.gamma(0.5 * d)
    assert total == pytest.approx(1.0, rel=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("d", [1, 4, 9])
def test_normal_radius_is_chi_square(d):
    v = sample_radius_sq(KernelSpec.normal(d), RngStream(50 + d), 100000)
    assert stats.kstest(v, stats.chi2(d).cdf).pvalue > 0.01
