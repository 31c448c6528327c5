import math

import numpy as np
import pytest

from nodal_lab.eigen import rayleigh_quotient, residual_norm, smallest_eigenpairs
from nodal_lab.errors import NonConvergence
from nodal_lab.grid import assemble_laplacian, build_domain


def discrete_square(res, count):
    h = 1 / (res - 1)
    f = [4 / h**2 * math.sin(j * math.pi * h / 2) ** 2 for j in range(1, res - 1)]
    return sorted(a + b for a in f for b in f)[:count]


def test_square_matches_discrete_closed_form():
    pairs = smallest_eigenpairs(assemble_laplacian(build_domain("square", 65)), 8)
    assert [p.lam for p in pairs] == pytest.approx(discrete_square(65, 8), rel=1e-9)


def test_subspace_agrees_with_lanczos():
    op = assemble_laplacian(build_domain("lshape", 33))
    a = smallest_eigenpairs(op, 6)
    b = smallest_eigenpairs(op, 6, method="subspace")
    assert [p.lam for p in a] == pytest.approx([p.lam for p in b], rel=1e-8)


def test_residual_certificate_and_normalization():
    op = assemble_laplacian(build_domain("disk_mask", 41))
    for p in smallest_eigenpairs(op, 5, tol=1e-9):
        assert op.norm(p.phi) == pytest.approx(1.0)
        assert p.residual == pytest.approx(residual_norm(op, p.lam, p.phi))
        assert p.residual <= 1e-9 * max(p.lam, 1)
        assert rayleigh_quotient(op, p.phi) == pytest.approx(p.lam, rel=1e-10)


def test_first_mode_is_positive():
    p = smallest_eigenpairs(assemble_laplacian(build_domain("disk_mask", 41)), 1)[0]
    assert np.all(p.phi > 0)


def test_torus_zero_mode():
    p = smallest_eigenpairs(assemble_laplacian(build_domain("torus", 16)), 1)[0]
    assert p.lam == pytest.approx(0.0, abs=1e-10)
    assert np.ptp(p.phi) < 1e-8


def test_small_problem_dense_path():
    op = assemble_laplacian(build_domain("square", 9))
    pairs = smallest_eigenpairs(op, op.n_active)
    assert len(pairs) == 49
    assert pairs[0].lam == pytest.approx(discrete_square(9, 1)[0])


def test_deterministic_per_seed():
    op = assemble_laplacian(build_domain("square", 41))
    a = smallest_eigenpairs(op, 4, seed=3)
    b = smallest_eigenpairs(op, 4, seed=3)
    assert all(np.array_equal(x.phi, y.phi) for x, y in zip(a, b))


@pytest.mark.parametrize("k", [0, 10**6])
def test_bad_k(k):
    with pytest.raises(ValueError):
        smallest_eigenpairs(assemble_laplacian(build_domain("square", 9)), k)


def test_impossible_tolerance_raises():
    op = assemble_laplacian(build_domain("square", 65))
    with pytest.raises(NonConvergence):
        smallest_eigenpairs(op, 2, tol=1e-30)


def test_unknown_method():
    with pytest.raises(ValueError):
        smallest_eigenpairs(assemble_laplacian(build_domain("square", 9)), 1, method="qr")
