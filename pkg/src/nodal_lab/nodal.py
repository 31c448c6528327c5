"""Nodal domains of grid eigenfunctions and their geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import EmptyDecomposition, NotApplicable
from .grid import GridDomain

NONE = -1


@dataclass(frozen=True, eq=False)
class NodalDecomposition:
    labels: np.ndarray  # grid-shaped, NONE off the nonzero set
    domain_count: int
    signs: np.ndarray  # +1 / -1 per domain
    volumes: np.ndarray
    sizes: np.ndarray  # node count per domain
    phi: np.ndarray  # grid-shaped eigenfunction values (0 on inactive nodes)
    lam: Optional[float] = None

    def domain_mask(self, domain_id: int) -> np.ndarray:
        if not 0 <= domain_id < self.domain_count:
            raise IndexError(f"no nodal domain {domain_id}")
        return self.labels == domain_id

    def phi_tilde(self, domain_id: int) -> np.ndarray:
        """``phi`` cut off to one nodal domain."""
        return np.where(self.domain_mask(domain_id), self.phi, 0.0)


@dataclass(frozen=True)
class InnerRadiusResult:
    radius: float  # conservative inscribed radius
    center: tuple  # grid index
    raw_distance: float  # distance from center to the nearest non-domain node
    euclidean_distance: float = 0.0  # raw_distance without the conformal scaling


def _connectivity(dim):
    return ndimage.generate_binary_structure(dim, 1)


def _label_periodic(mask: np.ndarray):
    """``ndimage.label`` with wrap-around adjacency on every axis."""
    lab, n = ndimage.label(mask, structure=_connectivity(mask.ndim))
    parent = np.arange(n + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for ax in range(mask.ndim):
        first = np.take(lab, 0, axis=ax).ravel()
        last = np.take(lab, -1, axis=ax).ravel()
        for a, b in zip(first, last):
            if a and b:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(n + 1)])
    return roots[lab], n


def extract_nodal_domains(
    phi: np.ndarray, d: GridDomain, lam: Optional[float] = None, zero_tol: float = 0.0
) -> NodalDecomposition:
    """Connected components of ``{phi != 0}`` under 4/6-neighbour adjacency.

    ``phi`` lives on the active nodes.  Values with ``|phi| <= zero_tol`` are
    treated as zeros and stay unlabeled; the default keeps only exact zeros.
    Domain ids follow the row-major order of each domain's first node.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (d.n_active,):
        raise ValueError(f"expected {d.n_active} values, got shape {phi.shape}")
    grid = d.to_grid(np.where(np.abs(phi) > zero_tol, phi, 0.0))
    if not np.any(grid):
        raise EmptyDecomposition("eigenfunction vanishes identically")

    raw = np.zeros(d.shape, dtype=np.int64)
    offset = 0
    for sgn in (1, -1):
        m = grid * sgn > 0
        if d.periodic:
            lab, _ = _label_periodic(m)
        else:
            lab, _ = ndimage.label(m, structure=_connectivity(d.dim))
        raw[m] = lab[m] + offset
        offset += int(lab.max()) + 1

    flat = raw.ravel()
    keys, first = np.unique(flat, return_index=True)
    keep = keys != 0
    keys, first = keys[keep], first[keep]
    order = np.argsort(first)
    remap = np.full(offset + 1, NONE, dtype=np.int64)
    remap[keys[order]] = np.arange(keys.size)
    labels = remap[raw]
    labels[raw == 0] = NONE

    count = keys.size
    lab_flat = labels.ravel()
    on = lab_flat >= 0
    sizes = np.bincount(lab_flat[on], minlength=count)
    volumes = np.bincount(lab_flat[on], weights=d.node_volumes().ravel()[on], minlength=count)
    first_nodes = first[order]
    signs = np.sign(grid.ravel()[first_nodes]).astype(int)
    labels.setflags(write=False)
    grid.setflags(write=False)
    return NodalDecomposition(labels, count, signs, volumes, sizes, grid, lam)


def _domain_edt(mask: np.ndarray, d: GridDomain):
    """Distance from each node of ``mask`` to the nearest node outside it."""
    if d.periodic:
        if mask.all():
            return None, None
        reps = (3,) * d.dim
        big = np.tile(mask, reps)
        dist = ndimage.distance_transform_edt(big, sampling=d.spacing)
        center = tuple(slice(s, 2 * s) for s in d.shape)
        return dist[center], (0,) * d.dim
    idx = np.argwhere(mask)
    lo = idx.min(axis=0)
    hi = idx.max(axis=0) + 1
    crop = mask[tuple(slice(a, b) for a, b in zip(lo, hi))]
    # off-array positions count as outside the domain
    padded = np.pad(crop, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded, sampling=d.spacing)
    return dist[(slice(1, -1),) * d.dim], tuple(lo)


def inner_radius(dec: NodalDecomposition, domain_id: int, d: GridDomain) -> InnerRadiusResult:
    """Largest inscribed ball of a nodal domain.

    The radius is the largest exact Euclidean distance from a domain node to a
    node outside the domain, minus ``spacing / 2``.  With a conformal factor the
    length is scaled by ``sqrt(q)`` at the centre.
    """
    return mask_inner_radius(dec.domain_mask(domain_id), d)


def mask_inner_radius(mask: np.ndarray, d: GridDomain) -> InnerRadiusResult:
    dist, lo = _domain_edt(mask, d)
    if dist is None:
        return InnerRadiusResult(math.inf, (0,) * d.dim, math.inf, math.inf)
    flat = int(np.argmax(dist))
    local = np.unravel_index(flat, dist.shape)
    center = tuple(int(a + b) for a, b in zip(local, lo))
    raw = float(dist[local])
    scale = 1.0 if d.q is None else math.sqrt(float(d.q[center]))
    return InnerRadiusResult(max(0.0, raw - d.spacing / 2.0) * scale, center, raw * scale, raw)


def distance_to_complement(mask: np.ndarray, d: GridDomain, node: tuple) -> float:
    """Conservative distance from ``node`` to the complement of ``mask``."""
    dist, lo = _domain_edt(mask, d)
    if dist is None:
        return math.inf
    raw = float(dist[tuple(a - b for a, b in zip(node, lo))])
    scale = 1.0 if d.q is None else math.sqrt(float(d.q[node]))
    return max(0.0, raw - d.spacing / 2.0) * scale


# -- nodal set length -----------------------------------------------------

def _cells(arr, periodic):
    if periodic:
        return (arr, np.roll(arr, -1, 0), np.roll(np.roll(arr, -1, 0), -1, 1), np.roll(arr, -1, 1))
    return (arr[:-1, :-1], arr[1:, :-1], arr[1:, 1:], arr[:-1, 1:])


def nodal_set_length(dec: NodalDecomposition, d: GridDomain) -> float:
    """Marching-squares estimate of the length of the zero set (2D).

    Only cells whose four corners are active are used, so the domain boundary
    never counts.  A corner belongs to the positive class iff ``phi > 0``;
    crossings are placed by linear interpolation along cell edges and saddle
    cells are resolved by the sign of the corner average.
    """
    if d.dim != 2:
        raise ValueError("nodal_set_length is defined for 2D domains only")
    h = d.spacing
    # corners in counter-clockwise order: (0,0) (1,0) (1,1) (0,1)
    v = [c.astype(float) for c in _cells(np.asarray(dec.phi), d.periodic)]
    act = np.logical_and.reduce(_cells(d.mask, d.periodic))
    v = [c[act] for c in v]
    pos = [c > 0 for c in v]
    corner_xy = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)

    # crossing point on edge k (corner k -> corner k+1), NaN where none
    pts = []
    for k in range(4):
        a, b = v[k], v[(k + 1) % 4]
        cross = pos[k] != pos[(k + 1) % 4]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(cross, a / (a - b), np.nan)
        p = corner_xy[k] + t[:, None] * (corner_xy[(k + 1) % 4] - corner_xy[k])
        pts.append(p)
    has = np.stack([~np.isnan(p[:, 0]) for p in pts], axis=1)
    ncross = has.sum(axis=1)

    total = 0.0
    two = ncross == 2
    if two.any():
        sel = [p[two] for p in pts]
        hs = has[two]
        stacked = np.stack(sel, axis=1)  # (cells, 4 edges, 2)
        idx = np.argsort(~hs, axis=1, kind="stable")[:, :2]
        p0 = np.take_along_axis(stacked, idx[:, 0, None, None], axis=1)[:, 0]
        p1 = np.take_along_axis(stacked, idx[:, 1, None, None], axis=1)[:, 0]
        total += float(np.sum(np.hypot(*(p0 - p1).T)))
    four = ncross == 4
    if four.any():
        sel = [p[four] for p in pts]
        center_pos = (sum(c[four] for c in v) / 4.0) > 0
        corner0_pos = pos[0][four]
        # isolate the two corners whose class differs from the centre:
        # corner k is cut off by the segment joining edges k-1 and k
        iso_even = corner0_pos != center_pos  # corners 0 and 2 isolated
        seg_a = np.where(iso_even[:, None], np.hypot(*(sel[3] - sel[0]).T)[:, None], np.hypot(*(sel[0] - sel[1]).T)[:, None])[:, 0]
        seg_b = np.where(iso_even, np.hypot(*(sel[1] - sel[2]).T), np.hypot(*(sel[2] - sel[3]).T))
        total += float(np.sum(seg_a + seg_b))
    return total * h


# -- local Courant ratio ----------------------------------------------------

def local_courant_ratio(
    dec: NodalDecomposition, domain_id: int, ball_center, ball_radius: float, d: GridDomain
) -> float:
    """Smallest volume fraction ``Vol(B_lam) / Vol(B)`` over components of ``U ∩ B``.

    Volumes are lattice-point counts, so the whole ball is measured even where
    it leaves the grid.  Requires the domain to meet the concentric ball of half
    the radius.
    """
    h = d.spacing
    c = np.asarray(ball_center, dtype=float)
    rel = (c - np.asarray(d.origin)) / h
    r = ball_radius / h
    lo = np.floor(rel - r).astype(int)
    hi = np.ceil(rel + r).astype(int) + 1
    axes = [np.arange(a, b) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    dist2 = sum((g - x) ** 2 for g, x in zip(grids, rel))
    in_ball = dist2 <= r * r
    in_half = dist2 <= (r / 2.0) ** 2
    vol_ball = int(in_ball.sum())

    inside = np.ones(in_ball.shape, bool)
    take = []
    for ax, g in enumerate(grids):
        if d.periodic:
            take.append(np.mod(g, d.shape[ax]))
        else:
            inside &= (g >= 0) & (g < d.shape[ax])
            take.append(np.clip(g, 0, d.shape[ax] - 1))
    dom = np.zeros(in_ball.shape, bool)
    dom[inside] = dec.labels[tuple(t[inside] for t in take)] == domain_id
    if not np.any(dom & in_half):
        raise NotApplicable("nodal domain does not meet the half-radius ball")
    lab, n = ndimage.label(dom & in_ball, structure=_connectivity(d.dim))
    counts = np.bincount(lab.ravel(), minlength=n + 1)[1:]
    return float(counts.min() / vol_ball)
