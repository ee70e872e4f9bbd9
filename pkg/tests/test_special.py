import math

import pytest
from scipy.special import gammaln, multigammaln

from multimatrix.errors import DomainError
from multimatrix.special import log_gamma, log_multigamma, log_stiefel_volume


@pytest.mark.parametrize("a", [0.5, 1.0, 3.7, 150.0])
def test_log_multigamma_order_one_is_log_gamma(a):
    assert log_multigamma(1, a) == pytest.approx(float(gammaln(a)), abs=1e-14)


@pytest.mark.parametrize("m, a", [(2, 0.75), (2, 3.0), (3, 1.25), (5, 10.5)])
def test_log_multigamma_matches_scipy(m, a):
    assert log_multigamma(m, a) == pytest.approx(multigammaln(a, m), abs=1e-12)


def test_log_multigamma_boundary():
    with pytest.raises(DomainError):
        log_multigamma(3, 1.0)
    with pytest.raises(DomainError):
        log_multigamma(0, 2.0)


def test_log_gamma_rejects_nonpositive():
    with pytest.raises(DomainError):
        log_gamma(0.0)


def test_stiefel_volume():
    # V_{1,1} = {-1, 1}, V_{1,2} is the unit circle
    assert log_stiefel_volume(1, 1) == pytest.approx(math.log(2.0), abs=1e-14)
    assert log_stiefel_volume(2, 1) == pytest.approx(math.log(2.0 * math.pi), abs=1e-14)
    with pytest.raises(DomainError):
        log_stiefel_volume(1, 2)
