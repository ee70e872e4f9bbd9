import math

import numpy as np
import pytest

from multimatrix.errors import DomainError, NotPositiveDefinite
from multimatrix.matcore import (
    BlockStructure,
    SpdMatrix,
    frobenius_sq,
    log_det,
    real_matrix,
    spd_inverse,
    trace,
)


def test_real_matrix_shapes():
    assert real_matrix(2.5).shape == (1, 1)
    assert real_matrix([1.0, 2.0, 3.0]).shape == (3, 1)
    assert real_matrix([[1.0, 2.0]]).shape == (1, 2)


@pytest.mark.parametrize("bad", [[[1.0, np.nan]], [[np.inf]], [], np.zeros((2, 2, 2))])
def test_real_matrix_rejects(bad):
    with pytest.raises(DomainError):
        real_matrix(bad)


def test_spd_accepts_and_factors():
    w = SpdMatrix.from_array([[4.0, 2.0], [2.0, 3.0]])
    np.testing.assert_allclose(w.chol @ w.chol.T, w.entries)
    assert w.order == 2
    assert math.isclose(log_det(w), math.log(8.0), rel_tol=1e-14)
    assert trace(w) == 7.0


@pytest.mark.parametrize(
    "entries",
    [
        [[1.0, 2.0], [2.0, 1.0]],  # indefinite
        [[1.0, 0.5], [0.0, 1.0]],  # not symmetric
        [[1.0, 0.0, 0.0]],  # not square
        [[1.0, 0.0], [0.0, 0.0]],  # singular
    ],
)
def test_spd_rejects(entries):
    with pytest.raises(NotPositiveDefinite):
        SpdMatrix.from_array(entries)


def test_spd_is_read_only():
    w = SpdMatrix.identity(3)
    with pytest.raises(ValueError):
        w.entries[0, 0] = 2.0


def test_spd_inverse(spd):
    w = spd(3)
    np.testing.assert_allclose(spd_inverse(w).entries @ w, np.eye(3), atol=1e-12)


def test_log_det_matches_numpy(spd):
    w = spd(4)
    sign, expected = np.linalg.slogdet(w)
    assert sign > 0
    assert math.isclose(log_det(w), expected, rel_tol=1e-12)


def test_frobenius_sq():
    assert frobenius_sq([[1.0, 2.0], [3.0, 4.0]]) == 30.0


def test_block_structure():
    structure = BlockStructure((3, 2, 4), 2)
    assert structure.k == 2
    assert structure.total_rows == 9
    assert structure.dim == 18
    x = np.arange(18.0).reshape(9, 2)
    blocks = structure.split(x)
    assert [b.shape for b in blocks] == [(3, 2), (2, 2), (4, 2)]
    np.testing.assert_array_equal(np.vstack(blocks), x)
    assert BlockStructure.from_dict(structure.to_dict()) == structure


def test_block_structure_needs_rows_at_least_cols():
    with pytest.raises(DomainError):
        BlockStructure((3, 1), 2)
    with pytest.raises(DomainError):
        BlockStructure((), 1)


@pytest.mark.parametrize("order", range(1, 6))
def test_log_det_of_inverse_cancels(spd, order):
    w = spd(order)
    assert log_det(w) + log_det(spd_inverse(w)) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("order", range(1, 11))
def test_identity_every_order(order):
    eye = SpdMatrix.identity(order)
    assert eye.order == order
    assert log_det(eye) == 0.0
