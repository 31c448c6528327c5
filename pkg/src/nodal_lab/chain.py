"""The cube-cover lower-bound argument for the inner radius, run on data.

Given an eigenfunction and one of its nodal domains ``U``, the pipeline

1. tiles the grid box by cubes ``Q`` of edge ``4h`` with ``r_e < h < 2 r_e``,
2. finds in every concentric cube ``Q'`` (edge ``2h``) a node outside ``U``,
3. takes the hole: the component of ``Q \\ U`` through that node,
4. measures the local Poincare constant of the cut-off ``phi~ = phi * 1_U`` on
   every cube,
5-7. sums the local inequalities and compares the measured inner radius with
   ``1 / (4 sqrt(lam * beta_max))``.

Everything is recorded in a :class:`ChainReport`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import ndimage

from .eigen import EigenPair, smallest_eigenpairs
from .errors import ResolutionTooCoarse
from .grid import GridDomain, assemble_laplacian, neighbor_pairs
from .nodal import NodalDecomposition, inner_radius, mask_inner_radius

J01 = 2.404825557695773  # first zero of the Bessel function J_0
FABER_KRAHN_2D = math.pi * J01**2


def exponents(n: int) -> dict:
    """Exact exponents ``k(n) = n^2 - 15n/8 + 1/4`` and ``alpha(n) = 2n^2 + n/4``."""
    if n < 2:
        raise ValueError("dimension must be at least 2")
    n = Fraction(n)
    return {"k": n * n - Fraction(15, 8) * n + Fraction(1, 4), "alpha": 2 * n * n + n / 4}


def beta_of_gamma(gamma: float, n: int, c2d: float = 1.0, cnd: float = 1.0) -> float:
    """Poincare constant for functions vanishing on a fraction ``gamma`` of a cube.

    ``c2d * log(1/gamma)`` in 2D, ``cnd / gamma^((n-2)/n)`` for ``n >= 3``.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if c2d <= 0 or cnd <= 0:
        raise ValueError("constants must be positive")
    if n == 2:
        return c2d * math.log(1.0 / gamma)
    if n < 2:
        raise ValueError("dimension must be at least 2")
    return cnd / gamma ** ((n - 2) / n)


def courant_envelope(lam: float, n: int, c: float = 1.0) -> float:
    """``c / (lam^alpha(n) (log lam)^(4n))``, the local Courant volume-fraction floor."""
    alpha = float(exponents(n)["alpha"])
    return c / (lam**alpha * math.log(lam) ** (4 * n))


# -- cover -----------------------------------------------------------------

@dataclass
class HoleRecord:
    p: tuple  # grid index of the seed node in Q'
    nodes: np.ndarray  # (count, dim) grid indices
    volume: float  # Euclidean
    ratio: float  # Vol_e(hole) / Vol_e(Q)
    extents: tuple  # per-axis projection extent, physical length
    touches_boundary: bool


@dataclass
class Cube:
    index: tuple  # position in the tiling
    lo: tuple  # clipped node range [lo, hi)
    hi: tuple
    inner_lo: tuple
    inner_hi: tuple
    clipped: bool
    inner_clipped: bool
    hole: Optional[HoleRecord] = None
    step2: str = ""  # ok | violation | clipped | empty

    @property
    def slices(self):
        return tuple(slice(a, b) for a, b in zip(self.lo, self.hi))

    @property
    def inner_slices(self):
        return tuple(slice(a, b) for a, b in zip(self.inner_lo, self.inner_hi))

    @property
    def n_nodes(self) -> int:
        return int(np.prod([b - a for a, b in zip(self.lo, self.hi)]))


@dataclass
class CubeCover:
    h: float  # physical; cubes have edge 4h
    m: int  # h / spacing
    spacing: float
    dim: int
    counts: tuple  # cubes per axis
    cubes: list = field(default_factory=list)


def _snap(x: float) -> float:
    r = round(x)
    return float(r) if abs(x - r) < 1e-9 else x


def build_cover(d: GridDomain, r_e: float) -> CubeCover:
    """Tile the grid box by cubes of edge ``4h``, ``h`` a multiple of the spacing.

    ``h`` is the smallest grid-aligned length above ``r_e``; if that is not
    below ``2 r_e`` it snaps down to the largest grid-aligned length below
    ``2 r_e``.  Cubes sticking out of the grid are clipped and flagged.
    """
    s = d.spacing
    if not r_e > s:
        raise ResolutionTooCoarse(f"r_e={r_e:.4g} does not exceed the spacing {s:.4g}")
    x = _snap(r_e / s)
    m = int(math.floor(x)) + 1
    if m >= 2 * x:
        m = int(math.ceil(_snap(2 * x))) - 1
        if m <= x:
            raise ResolutionTooCoarse("no grid-aligned h in (r_e, 2 r_e)")
    edge = 4 * m
    counts = tuple(-(-n // edge) for n in d.shape)
    cover = CubeCover(m * s, m, s, d.dim, counts)
    for index in itertools.product(*(range(c) for c in counts)):
        lo = tuple(i * edge for i in index)
        full_hi = tuple(a + edge for a in lo)
        hi = tuple(min(b, n) for b, n in zip(full_hi, d.shape))
        ilo = tuple(min(a + m, n) for a, n in zip(lo, d.shape))
        ihi = tuple(min(a + 3 * m, n) for a, n in zip(lo, d.shape))
        cover.cubes.append(
            Cube(
                index,
                lo,
                hi,
                ilo,
                ihi,
                clipped=hi != full_hi,
                inner_clipped=any(a + 3 * m > n for a, n in zip(lo, d.shape)),
            )
        )
    return cover


def find_holes(cover: CubeCover, dec: NodalDecomposition, domain_id: int, d: GridDomain) -> CubeCover:
    """Attach a hole record to every cube (in place; returns the cover).

    Nodes outside ``U`` include zeros, other nodal domains and inactive nodes,
    on which the cut-off function vanishes.  A fully in-grid ``Q'`` without such
    a node is recorded as a ``violation``: the cover spacing is meant to rule this out.
    """
    in_u = dec.domain_mask(domain_id)
    structure = ndimage.generate_binary_structure(d.dim, 1)
    cell = d.spacing**d.dim
    for cube in cover.cubes:
        inner = ~in_u[cube.inner_slices]
        if inner.size == 0:
            cube.step2 = "empty"
            continue
        cand = np.argwhere(inner)
        if cand.size == 0:
            cube.step2 = "clipped" if cube.inner_clipped else "violation"
            continue
        cube.step2 = "ok"
        p_local = tuple(int(c + a - b) for c, a, b in zip(cand[0], cube.inner_lo, cube.lo))
        outside = ~in_u[cube.slices]
        lab, _ = ndimage.label(outside, structure=structure)
        comp = lab == lab[p_local]
        nodes = np.argwhere(comp) + np.asarray(cube.lo)
        extents = tuple(len(np.unique(nodes[:, ax])) * d.spacing for ax in range(d.dim))
        touches = any(comp.take(0, axis=ax).any() or comp.take(-1, axis=ax).any() for ax in range(d.dim))
        cube.hole = HoleRecord(
            p=tuple(int(a + b) for a, b in zip(p_local, cube.lo)),
            nodes=nodes,
            volume=float(len(nodes) * cell),
            ratio=float(len(nodes) / cube.n_nodes),
            extents=extents,
            touches_boundary=bool(touches),
        )
    return cover


def projection_extent(hole: HoleRecord, axis: Optional[int] = None) -> float:
    """Projection length of a hole on one axis, or the largest over axes."""
    if hole is None or len(hole.nodes) == 0:
        raise ValueError("empty hole")
    if axis is None:
        return max(hole.extents)
    return hole.extents[axis]


# -- per-cube Poincare constants ---------------------------------------------

def _cutoff_terms(phi: np.ndarray, in_u: np.ndarray, d: GridDomain):
    """Node mass terms and edge energy terms of the cut-off ``phi * 1_U``.

    Between two nodes of ``U`` the energy is the usual squared difference.  On
    an edge leaving ``U`` the cut-off is linear from ``phi_i`` down to zero at
    the interpolated zero crossing (or at the far node when that is a zero or
    inactive node), which contributes ``w * phi_i * (phi_i - phi_j)``.  Returns
    ``(mass, edges)`` with ``edges = (lower_node, energy)`` in flat indices.
    """
    w = d.spacing ** (d.dim - 2)
    f = phi.ravel()
    u = in_u.ravel()
    mass = np.where(u, d.node_volumes().ravel() * f * f, 0.0)
    lows, energies = [], []

    def leaving(fi, fj):
        opposite = fi * fj < 0
        return w * np.where(opposite, fi * (fi - fj), fi * fi)

    for _, a, b in neighbor_pairs(d):
        ua, ub = u[a], u[b]
        sel = ua | ub
        a, b, ua, ub = a[sel], b[sel], ua[sel], ub[sel]
        fa, fb = f[a], f[b]
        e = np.where(ua & ub, w * (fa - fb) ** 2, np.where(ua, leaving(fa, fb), leaving(fb, fa)))
        lows.append(np.minimum(a, b))
        energies.append(e)
    if not d.periodic:
        # couplings to the zero values beyond the grid edge
        idx = np.arange(f.size).reshape(d.shape)
        for ax in range(d.dim):
            for end in (0, -1):
                nodes = np.take(idx, end, axis=ax).ravel()
                nodes = nodes[u[nodes]]
                lows.append(nodes)
                energies.append(w * f[nodes] ** 2)
    return mass, (np.concatenate(lows), np.concatenate(energies))


def _cube_ids(cover: CubeCover, d: GridDomain) -> np.ndarray:
    edge = 4 * cover.m
    idx = np.indices(d.shape) // edge
    return np.ravel_multi_index(tuple(idx), cover.counts).ravel()


def cube_poincare_terms(cover: CubeCover, phi: np.ndarray, in_u: np.ndarray, d: GridDomain):
    """Per-cube ``(int_Q phi~^2, int_Q |grad phi~|^2)``.

    Edges that cross a cube face count for the cube of their lower-indexed
    node, so the per-cube sums add up to the global integrals exactly.
    """
    ids = _cube_ids(cover, d)
    mass, (low, energy) = _cutoff_terms(np.asarray(phi, float), in_u, d)
    n = int(np.prod(cover.counts))
    mq = np.bincount(ids, weights=mass, minlength=n)
    eq = np.bincount(ids[low], weights=energy, minlength=n)
    return mq, eq


def _beta(mq: float, eq: float, h: float) -> float:
    if mq == 0.0:
        return 0.0
    if eq == 0.0:
        return math.inf
    return mq / (h * h * eq)


def verify_local_poincare(cube: Cube, cover: CubeCover, phi: np.ndarray, in_u: np.ndarray, d: GridDomain) -> float:
    """Smallest ``beta`` with ``int_Q phi~^2 <= beta h^2 int_Q |grad phi~|^2``.

    ``phi`` is the grid-shaped eigenfunction (its values outside ``U`` locate
    the zero crossings); ``in_u`` selects the nodal domain.  Returns 0 for a
    vanishing cut-off and ``inf`` when only the mass term is nonzero.
    """
    mq, eq = cube_poincare_terms(cover, phi, in_u, d)
    k = int(np.ravel_multi_index(cube.index, cover.counts))
    return _beta(mq[k], eq[k], cover.h)


# -- global chain --------------------------------------------------------------

@dataclass
class ChainReport:
    lam: float
    domain_id: int
    dim: int
    r_measured: float
    r_euclidean: float  # node-distance inner radius used for the cover
    h: float
    n_cubes: int
    beta_max: float
    gamma_min: float
    r_bound: float
    lam_tilde: float  # Rayleigh quotient of the cut-off
    mass_total: float
    energy_total: float
    step2_violations: int
    local_ok: bool
    global_ok: bool
    final_ok: bool
    projection_ok: bool
    h_window_ok: bool
    courant_implied_c: float
    fk_hole_products: list
    cubes: list
    all_ok: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> dict:
        out = self.to_dict()
        out.pop("cubes")
        return out


def verify_global_chain(
    pair: EigenPair, dec: NodalDecomposition, domain_id: int, d: GridDomain
) -> ChainReport:
    """Run the whole cube-cover argument for one nodal domain."""
    lam = float(pair.lam)
    in_u = dec.domain_mask(domain_id)
    ir = inner_radius(dec, domain_id, d)
    r_meas = ir.radius
    r_e = ir.euclidean_distance
    cover = build_cover(d, r_e)
    find_holes(cover, dec, domain_id, d)
    h = cover.h

    mq, eq = cube_poincare_terms(cover, dec.phi, in_u, d)
    betas = np.array([_beta(a, b, h) for a, b in zip(mq, eq)])
    beta_max = float(betas.max())
    mass_total = float(mq.sum())
    energy_total = float(eq.sum())

    records = []
    projection_ok = True
    gammas, fk = [], []
    for k, cube in enumerate(cover.cubes):
        rec = {
            "index": list(cube.index),
            "clipped": cube.clipped,
            "step2": cube.step2,
            "mass": float(mq[k]),
            "energy": float(eq[k]),
            "beta": float(betas[k]),
        }
        hole = cube.hole
        if hole is not None:
            ext = projection_extent(hole)
            if d.dim == 2:
                if hole.touches_boundary:
                    ok = ext >= h - 1e-12
                else:
                    ok = ext >= math.sqrt(hole.volume) - 1e-12
                    fk.append(lam * hole.volume)
                projection_ok &= bool(ok)
                rec["projection_ok"] = bool(ok)
            rec.update(
                hole_ratio=hole.ratio,
                hole_volume=hole.volume,
                projection=ext,
                touches_boundary=hole.touches_boundary,
            )
            if mq[k] > 0:
                gammas.append(hole.ratio)
        records.append(rec)

    violations = sum(c.step2 == "violation" for c in cover.cubes)
    local_ok = bool(np.all(np.isfinite(betas)))
    h_window_ok = bool(r_e < h < 2 * r_e + 1e-12 and h < 4 * r_e)
    tol = 1e-10
    global_ok = bool(
        local_ok
        and mass_total <= beta_max * h * h * energy_total * (1 + tol)
        and h <= 4 * r_meas
        and mass_total <= 16 * beta_max * r_meas**2 * energy_total * (1 + tol)
    )
    r_bound = 1.0 / (4.0 * math.sqrt(lam * beta_max)) if beta_max > 0 and lam > 0 else 0.0
    final_ok = bool(r_meas >= r_bound)
    gamma_min = float(min(gammas)) if gammas else 1.0
    implied = gamma_min * lam ** float(exponents(d.dim)["alpha"]) * math.log(lam) ** (4 * d.dim) if lam > 1 else math.nan
    all_ok = bool(violations == 0 and local_ok and global_ok and final_ok and projection_ok)
    return ChainReport(
        lam=lam,
        domain_id=domain_id,
        dim=d.dim,
        r_measured=r_meas,
        r_euclidean=r_e,
        h=h,
        n_cubes=len(cover.cubes),
        beta_max=beta_max,
        gamma_min=gamma_min,
        r_bound=r_bound,
        lam_tilde=energy_total / mass_total if mass_total > 0 else math.nan,
        mass_total=mass_total,
        energy_total=energy_total,
        step2_violations=int(violations),
        local_ok=local_ok,
        global_ok=global_ok,
        final_ok=final_ok,
        projection_ok=bool(projection_ok),
        h_window_ok=h_window_ok,
        courant_implied_c=float(implied),
        fk_hole_products=[float(x) for x in fk],
        cubes=records,
        all_ok=all_ok,
    )


# -- global bounds ---------------------------------------------------------------

def _first_eigenvalue(d: GridDomain) -> float:
    return smallest_eigenpairs(assemble_laplacian(d), 1)[0].lam


def inrad_upper_check(d: GridDomain, lam1: Optional[float] = None) -> dict:
    """``lam_1 * inrad^2`` for a Dirichlet domain.

    The inner radius is the largest distance from an active node to an
    inactive (boundary) node.
    """
    if d.periodic:
        raise ValueError("inrad_upper_check needs a Dirichlet domain")
    lam1 = _first_eigenvalue(d) if lam1 is None else lam1
    inrad = mask_inner_radius(d.mask, d).raw_distance
    return {"lambda1": lam1, "inrad": inrad, "product": lam1 * inrad**2}


def faber_krahn_check(d: GridDomain, lam1: Optional[float] = None) -> float:
    """``lam_1 * Vol^(2/n)`` with the volume counted as active nodes times ``h^n``."""
    if d.periodic or d.q is not None:
        raise ValueError("faber_krahn_check needs a Euclidean Dirichlet domain")
    lam1 = _first_eigenvalue(d) if lam1 is None else lam1
    vol = d.n_active * d.cell_volume
    return lam1 * vol ** (2.0 / d.dim)
