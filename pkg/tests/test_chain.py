import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nodal_lab.chain import (
    FABER_KRAHN_2D,
    J01,
    beta_of_gamma,
    build_cover,
    courant_envelope,
    cube_poincare_terms,
    exponents,
    faber_krahn_check,
    find_holes,
    inrad_upper_check,
    projection_extent,
    verify_global_chain,
    verify_local_poincare,
)
from nodal_lab.eigen import smallest_eigenpairs
from nodal_lab.errors import ResolutionTooCoarse
from nodal_lab.grid import assemble_laplacian, build_domain
from nodal_lab.nodal import extract_nodal_domains, inner_radius


def test_exponents_exact():
    assert exponents(2) == {"k": Fraction(1, 2), "alpha": Fraction(17, 2)}
    assert exponents(3) == {"k": Fraction(29, 8), "alpha": Fraction(75, 4)}
    with pytest.raises(ValueError):
        exponents(1)


def test_beta_of_gamma():
    assert beta_of_gamma(0.5, 2, c2d=2.0) == pytest.approx(2 * math.log(2))
    assert beta_of_gamma(1 / 8, 3) == pytest.approx(2.0)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            beta_of_gamma(bad, 2)


@given(g1=st.floats(1e-6, 0.99), g2=st.floats(1e-6, 0.99), n=st.integers(2, 5))
def test_beta_decreases_in_gamma(g1, g2, n):
    lo, hi = sorted((g1, g2))
    assert beta_of_gamma(lo, n) >= beta_of_gamma(hi, n)


def test_courant_envelope():
    assert courant_envelope(100.0, 2) == pytest.approx(1 / (100**8.5 * math.log(100) ** 8))


def test_cover_spacing_is_grid_aligned():
    d = build_domain("square", 129)
    cover = build_cover(d, 0.13)
    assert cover.m == 17 and cover.h == pytest.approx(17 / 128)
    assert 0.13 < cover.h < 0.26
    assert cover.counts == (2, 2)
    assert sum(c.clipped for c in cover.cubes) == 3


def test_cover_too_coarse():
    with pytest.raises(ResolutionTooCoarse):
        build_cover(build_domain("square", 9), 0.1)


def first_mode(res=65):
    d = build_domain("square", res)
    p = smallest_eigenpairs(assemble_laplacian(d), 1)[0]
    return d, p, extract_nodal_domains(p.phi, d, p.lam)


def test_holes_and_step2_on_first_mode():
    d, p, dec = first_mode()
    r = inner_radius(dec, 0, d)
    cover = find_holes(build_cover(d, r.euclidean_distance), dec, 0, d)
    assert all(c.step2 != "violation" for c in cover.cubes)
    for c in cover.cubes:
        if c.hole is not None:
            assert 0 < c.hole.ratio <= 1
            assert projection_extent(c.hole) == max(c.hole.extents)


def test_cutoff_energy_reproduces_eigenvalue():
    d = build_domain("square", 65)
    pairs = smallest_eigenpairs(assemble_laplacian(d), 6)
    for p in pairs:
        dec = extract_nodal_domains(p.phi, d, p.lam, zero_tol=1e-10 * np.abs(p.phi).max())
        for j in range(dec.domain_count):
            rep = verify_global_chain(p, dec, j, d)
            assert rep.lam_tilde == pytest.approx(p.lam, rel=1e-8)


def test_cube_terms_sum_to_totals():
    d, p, dec = first_mode()
    cover = build_cover(d, 0.2)
    in_u = dec.domain_mask(0)
    mq, eq = cube_poincare_terms(cover, dec.phi, in_u, d)
    assert mq.sum() == pytest.approx(1.0)  # mass-normalized eigenfunction
    assert eq.sum() == pytest.approx(p.lam, rel=1e-8)
    betas = [verify_local_poincare(c, cover, dec.phi, in_u, d) for c in cover.cubes]
    assert all(b >= 0 for b in betas)


def test_global_chain_square_modes():
    d = build_domain("square", 129)
    pairs = smallest_eigenpairs(assemble_laplacian(d), 8)
    for p in pairs:
        dec = extract_nodal_domains(p.phi, d, p.lam, zero_tol=1e-10 * np.abs(p.phi).max())
        for j in range(dec.domain_count):
            rep = verify_global_chain(p, dec, j, d)
            assert rep.step2_violations == 0
            assert rep.global_ok and rep.final_ok and rep.all_ok
            assert rep.r_measured >= rep.r_bound
            # the global inequality forced by summing per-cube bounds
            assert rep.mass_total <= 16 * rep.beta_max * rep.r_measured**2 * rep.energy_total * (1 + 1e-10)
            s = rep.summary()
            assert "cubes" not in s and s["all_ok"]


def test_upper_bound_square():
    d = build_domain("square", 65)
    out = inrad_upper_check(d)
    assert out["inrad"] == pytest.approx(0.5)
    assert out["product"] == pytest.approx(math.pi**2 / 2, rel=0.01)


def test_faber_krahn_closed_forms():
    # the area counts active nodes, which misses a half-cell strip along the boundary
    sq = faber_krahn_check(build_domain("square", 129))
    assert sq == pytest.approx(2 * math.pi**2, rel=0.02)
    rect = faber_krahn_check(build_domain("rectangle", 129, (4.0, 1.0)))
    assert rect == pytest.approx(math.pi**2 * (1 + 1 / 16) * 4, rel=0.02)
    disk = faber_krahn_check(build_domain("disk_mask", 129))
    assert disk == pytest.approx(FABER_KRAHN_2D, rel=0.02)
    assert min(sq, rect) >= FABER_KRAHN_2D
    assert FABER_KRAHN_2D == pytest.approx(math.pi * J01**2)


def test_faber_krahn_rejects_periodic():
    with pytest.raises(ValueError):
        faber_krahn_check(build_domain("torus", 16))
