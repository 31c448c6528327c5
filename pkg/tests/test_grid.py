import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nodal_lab.errors import InvalidDomain
from nodal_lab.grid import (
    GridDomain,
    assemble_laplacian,
    build_domain,
    dirichlet_energy,
    edge_energy,
)
from nodal_lab.eigen import smallest_eigenpairs

ALL_KINDS = [("square", 1.0), ("rectangle", (2.0, 1.0)), ("box", 1.0), ("disk_mask", 1.0),
             ("lshape", 1.0), ("slit_square", 1.0), ("torus", 1.0)]


def test_square_strips_boundary():
    d = build_domain("square", 9)
    assert d.n_active == 49
    assert not d.mask[0].any() and not d.mask[:, -1].any()


def test_torus_has_no_boundary():
    d = build_domain("torus", 16)
    assert d.n_active == 256 and d.periodic


def test_disk_node_count_tracks_area():
    d = build_domain("disk_mask", 65)
    expected = math.pi / 4 * 65**2
    assert abs(d.n_active - expected) / expected < 0.03


def test_lshape_and_slit_remove_nodes():
    sq = build_domain("square", 33).n_active
    assert build_domain("lshape", 33).n_active < 0.8 * sq
    slit = build_domain("slit_square", 33)
    assert sq - slit.n_active == 16  # half a grid line, boundary node already inactive


@pytest.mark.parametrize("kwargs", [dict(kind="square", resolution=7), dict(kind="hexagon", resolution=9)])
def test_build_domain_rejects(kwargs):
    with pytest.raises(InvalidDomain):
        build_domain(**kwargs)


def test_empty_mask_rejected():
    with pytest.raises(InvalidDomain):
        GridDomain(2, (4, 4), 0.1, np.zeros((4, 4), bool))


def test_conformal_requires_q():
    with pytest.raises(InvalidDomain):
        build_domain("conformal", 9)


def test_single_node_stencil():
    mask = np.zeros((3, 3), bool)
    mask[1, 1] = True
    op = assemble_laplacian(GridDomain(2, (3, 3), 0.5, mask))
    assert op.dense().shape == (1, 1)
    assert op.dense()[0, 0] == pytest.approx(4 / 0.25)


def test_constant_on_torus_is_harmonic():
    op = assemble_laplacian(build_domain("torus", 16))
    assert np.abs(op.matvec(np.ones(op.n_active))).max() < 1e-12


def test_stencil_on_product_mode():
    d = build_domain("square", 129)
    u = d.sample(lambda x, y: np.sin(math.pi * x) * np.sin(math.pi * y))
    Au = assemble_laplacian(d).matvec(u)
    assert np.abs(Au - 2 * math.pi**2 * u).max() < 10 * d.spacing**2 * 2 * math.pi**2


def test_energy_of_zero_and_constant():
    op = assemble_laplacian(build_domain("torus", 12))
    assert dirichlet_energy(op, np.zeros(op.n_active)) == 0.0
    assert dirichlet_energy(op, np.full(op.n_active, 3.0)) == pytest.approx(0.0, abs=1e-12)


def test_energy_of_ramp_approaches_area():
    # interior edges only: the zero boundary values are left out
    d = build_domain("square", 257)
    op = assemble_laplacian(d)
    e = edge_energy(op, d.sample(lambda x, y: x), include_boundary=False)
    assert e == pytest.approx(1.0, rel=0.02)


def test_energy_size_mismatch():
    op = assemble_laplacian(build_domain("square", 9))
    with pytest.raises(ValueError):
        dirichlet_energy(op, np.ones(3))


@pytest.mark.parametrize("kind,size", ALL_KINDS)
@given(seed=st.integers(0, 2**32 - 1))
def test_symmetry_and_psd(kind, size, seed):
    d = build_domain(kind, 12, size)
    op = assemble_laplacian(d)
    r = np.random.default_rng(seed)
    u, v = r.standard_normal((2, op.n_active))
    lhs = op.inner(op.matvec(u), v)
    rhs = op.inner(u, op.matvec(v))
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)
    assert dirichlet_energy(op, u) >= 0
    assert edge_energy(op, u) == pytest.approx(dirichlet_energy(op, u), rel=1e-12)


def test_second_order_convergence():
    errs = []
    for res in (17, 33, 65):
        lam = smallest_eigenpairs(assemble_laplacian(build_domain("square", res)), 1)[0].lam
        errs.append(abs(lam - 2 * math.pi**2))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_constant_conformal_factor_scales_spectrum():
    e = build_domain("square", 33)
    c = build_domain("conformal", 33, q=lambda x, y: 2.5 + 0 * x)
    le = [p.lam for p in smallest_eigenpairs(assemble_laplacian(e), 4)]
    lc = [p.lam for p in smallest_eigenpairs(assemble_laplacian(c), 4)]
    assert np.allclose(np.array(lc), np.array(le) / 2.5, rtol=1e-10)
    assert c.q_min == c.q_max == 2.5


def test_serialization_roundtrip():
    d = build_domain("conformal", 11, q=lambda x, y: 1 + x * y)
    back = GridDomain.from_dict(d.to_dict())
    assert back.hash() == d.hash()
    assert np.array_equal(back.mask, d.mask) and np.array_equal(back.q, d.q)


def test_mask_is_read_only():
    d = build_domain("square", 9)
    with pytest.raises(ValueError):
        d.mask[1, 1] = False
