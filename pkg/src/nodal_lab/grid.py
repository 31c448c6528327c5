"""Structured-grid domains and the discrete Laplace-Beltrami operator.

A :class:`GridDomain` is a box of nodes with uniform spacing, a boolean mask of
active (interior) nodes and, in 2D, an optional conformal factor ``q`` so that
the metric is ``q |dz|^2``.  Arrays are indexed ``[ix, iy(, iz)]`` and flattened
in row-major (C) order, which is the canonical node ordering everywhere in the
package.

The operator is stored in weak form: a symmetric stiffness matrix ``K`` and a
diagonal mass vector ``m`` with ``A = diag(m)^-1 K`` approximating ``-Delta_g``.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import InvalidDomain

DIRICHLET = "dirichlet"
PERIODIC = "periodic"

KINDS = ("square", "rectangle", "box", "disk_mask", "lshape", "slit_square", "torus", "conformal")


@dataclass(frozen=True, eq=False)
class GridDomain:
    dim: int
    shape: tuple
    spacing: float
    mask: np.ndarray
    origin: tuple = None
    q: Optional[np.ndarray] = None
    bc: str = DIRICHLET
    q_min: float = 1.0
    q_max: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.dim not in (2, 3) or len(self.shape) != self.dim:
            raise InvalidDomain(f"unsupported dim/shape {self.dim} {self.shape}")
        if not self.spacing > 0:
            raise InvalidDomain("spacing must be positive")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != tuple(self.shape):
            raise InvalidDomain("mask shape does not match grid shape")
        if not mask.any():
            raise InvalidDomain("domain has no active nodes")
        if self.bc not in (DIRICHLET, PERIODIC):
            raise InvalidDomain(f"unknown boundary condition {self.bc!r}")
        if self.bc == PERIODIC and not mask.all():
            raise InvalidDomain("periodic domains must have an all-true mask")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if self.origin is None:
            object.__setattr__(self, "origin", (0.0,) * self.dim)
        if self.q is not None:
            if self.dim != 2:
                raise InvalidDomain("conformal factor is supported in 2D only")
            q = np.asarray(self.q, dtype=float)
            if q.shape != mask.shape or not np.all(q > 0):
                raise InvalidDomain("conformal factor must be positive on every node")
            q.setflags(write=False)
            object.__setattr__(self, "q", q)
            object.__setattr__(self, "q_min", float(q[mask].min()))
            object.__setattr__(self, "q_max", float(q[mask].max()))

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())

    @property
    def periodic(self) -> bool:
        return self.bc == PERIODIC

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def coords(self) -> list:
        """Physical coordinate arrays, one per axis, broadcast to ``shape``."""
        axes = [self.origin[k] + self.spacing * np.arange(n) for k, n in enumerate(self.shape)]
        return np.meshgrid(*axes, indexing="ij")

    def node_volumes(self) -> np.ndarray:
        """Volume element per grid node (``q h^2`` when conformal)."""
        vol = np.full(self.shape, self.cell_volume)
        if self.q is not None:
            vol = vol * self.q
        return vol

    def sample(self, func: Callable) -> np.ndarray:
        """Evaluate ``func(*coords)`` on the active nodes (row-major order)."""
        vals = np.broadcast_to(func(*self.coords()), self.shape)
        return np.asarray(vals, dtype=float)[self.mask]

    def to_grid(self, u: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Scatter an active-node vector onto the full grid."""
        out = np.full(self.shape, fill, dtype=float)
        out[self.mask] = u
        return out

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        bits = np.packbits(self.mask.ravel().astype(np.uint8))
        return {
            "dim": self.dim,
            "shape": list(self.shape),
            "spacing": self.spacing,
            "origin": list(self.origin),
            "mask": base64.b64encode(bits.tobytes()).decode("ascii"),
            "q": None if self.q is None else self.q.ravel().tolist(),
            "bc": self.bc,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridDomain":
        shape = tuple(data["shape"])
        n = int(np.prod(shape))
        bits = np.frombuffer(base64.b64decode(data["mask"]), dtype=np.uint8)
        mask = np.unpackbits(bits)[:n].astype(bool).reshape(shape)
        q = data.get("q")
        if q is not None:
            q = np.asarray(q, dtype=float).reshape(shape)
        return cls(
            dim=int(data["dim"]),
            shape=shape,
            spacing=float(data["spacing"]),
            mask=mask,
            origin=tuple(data.get("origin") or (0.0,) * len(shape)),
            q=q,
            bc=data.get("bc", DIRICHLET),
            name=data.get("name", ""),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _sizes(physical_size, dim):
    if np.isscalar(physical_size):
        return (float(physical_size),) * dim
    sizes = tuple(float(s) for s in physical_size)
    if len(sizes) != dim:
        raise InvalidDomain(f"expected {dim} side lengths, got {len(sizes)}")
    return sizes


def build_domain(
    kind: str,
    resolution: int,
    physical_size: Union[float, Sequence[float]] = 1.0,
    q: Union[Callable, np.ndarray, None] = None,
) -> GridDomain:
    """Build a named domain.

    ``resolution`` is the number of nodes per axis including the Dirichlet
    boundary nodes (for rectangles and boxes: along the shortest side).  For
    ``disk_mask`` it is the number of nodes across a diameter, ``physical_size``
    is the diameter and the disk is centred at the origin.  ``torus`` has
    ``resolution`` nodes per period.  ``conformal`` is the square carrying the
    metric ``q(x, y) |dz|^2``; ``q`` may be a callable or a node array.
    """
    if resolution < 8:
        raise InvalidDomain("resolution must be at least 8 nodes per axis")
    if kind not in KINDS:
        raise InvalidDomain(f"unknown domain kind {kind!r}")
    dim = 3 if kind == "box" else 2
    sizes = _sizes(physical_size, dim)
    if min(sizes) <= 0:
        raise InvalidDomain("physical size must be positive")

    if kind == "torus":
        h = sizes[0] / resolution
        shape = tuple(int(round(s / h)) for s in sizes)
        return GridDomain(2, shape, h, np.ones(shape, bool), bc=PERIODIC, name=kind)

    if kind == "disk_mask":
        diameter = sizes[0]
        h = diameter / resolution
        n = resolution + 2
        axis = (np.arange(n) - (n - 1) / 2.0) * h
        x, y = np.meshgrid(axis, axis, indexing="ij")
        mask = np.hypot(x, y) < diameter / 2.0
        return GridDomain(2, (n, n), h, mask, origin=(axis[0], axis[0]), name=kind)

    h = min(sizes) / (resolution - 1)
    shape = tuple(int(round(s / h)) + 1 for s in sizes)
    mask = np.zeros(shape, bool)
    mask[(slice(1, -1),) * dim] = True
    x = np.meshgrid(*[h * np.arange(n) for n in shape], indexing="ij")
    tol = 1e-9 * h
    if kind == "lshape":
        cx, cy = sizes[0] / 2.0, sizes[1] / 2.0
        mask &= ~((x[0] >= cx - tol) & (x[1] >= cy - tol))
    elif kind == "slit_square":
        cx, cy = sizes[0] / 2.0, sizes[1] / 2.0
        mask &= ~((np.abs(x[1] - cy) < tol) & (x[0] <= cx + tol))
    qarr = None
    if kind == "conformal":
        if q is None:
            raise InvalidDomain("conformal domain needs a conformal factor q")
        qarr = np.asarray(q(*x) if callable(q) else q, dtype=float)
        qarr = np.broadcast_to(qarr, shape).copy()
    return GridDomain(dim, shape, h, mask, q=qarr, name=kind)


def neighbor_pairs(d: GridDomain):
    """Yield ``(axis, a, b)`` flat-index arrays of lattice edges ``a -> a + e_axis``.

    Periodic grids include the wrap-around edges.  Edges leaving the array are
    not listed; they are implicit couplings to a zero boundary value.
    """
    idx = np.arange(int(np.prod(d.shape))).reshape(d.shape)
    for ax in range(d.dim):
        if d.periodic:
            a = idx.ravel()
            b = np.roll(idx, -1, axis=ax).ravel()
        else:
            n = d.shape[ax]
            a = np.take(idx, np.arange(n - 1), axis=ax).ravel()
            b = np.take(idx, np.arange(1, n), axis=ax).ravel()
        yield ax, a, b


@dataclass(frozen=True, eq=False)
class SparseSymOp:
    """Discrete ``-Delta_g`` as stiffness ``K`` and diagonal ``mass``."""

    n_active: int
    stiffness: sp.csr_matrix
    mass: np.ndarray
    active: np.ndarray  # flat grid index of each active node
    edge_a: np.ndarray = field(repr=False)  # active-active edges (active indices)
    edge_b: np.ndarray = field(repr=False)
    boundary_deg: np.ndarray = field(repr=False)  # couplings to zero boundary values
    weight: float = 1.0

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return (self.stiffness @ u) / self.mass

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.dot(u * self.mass, v))

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.inner(u, u)))

    def dense(self) -> np.ndarray:
        return (self.stiffness.toarray().T / self.mass).T


def assemble_laplacian(d: GridDomain) -> SparseSymOp:
    """5-point (2D) / 7-point (3D) stencil with Dirichlet couplings dropped.

    Every active node carries the full stencil degree ``2 dim``; couplings to
    inactive or off-grid nodes contribute only to the diagonal.  The stiffness
    weight ``h^(dim-2)`` makes ``u^T K u`` the discrete Dirichlet energy, which
    is conformally invariant in 2D, so ``q`` enters only through the mass.
    """
    flat_mask = d.mask.ravel()
    active = np.flatnonzero(flat_mask)
    pos = np.full(flat_mask.size, -1, dtype=np.int64)
    pos[active] = np.arange(active.size)
    w = d.spacing ** (d.dim - 2)

    ea, eb = [], []
    for _, a, b in neighbor_pairs(d):
        keep = flat_mask[a] & flat_mask[b] & (a != b)
        ea.append(pos[a[keep]])
        eb.append(pos[b[keep]])
    ea = np.concatenate(ea)
    eb = np.concatenate(eb)
    n = active.size
    deg_active = np.bincount(ea, minlength=n) + np.bincount(eb, minlength=n)
    boundary_deg = 2 * d.dim - deg_active

    rows = np.concatenate([ea, eb, np.arange(n)])
    cols = np.concatenate([eb, ea, np.arange(n)])
    vals = np.concatenate([-np.ones(2 * ea.size), np.full(n, 2.0 * d.dim)]) * w
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    K.sum_duplicates()
    mass = d.node_volumes().ravel()[active]
    return SparseSymOp(n, K, mass, active, ea, eb, boundary_deg, w)


def dirichlet_energy(op: SparseSymOp, u: np.ndarray) -> float:
    """``<A u, u>_mass = u^T K u``, the discrete integral of ``|grad u|^2``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (op.n_active,):
        raise ValueError(f"expected a vector of length {op.n_active}, got shape {u.shape}")
    return float(u @ (op.stiffness @ u))


def edge_energy(op: SparseSymOp, u: np.ndarray, include_boundary: bool = True) -> float:
    """Dirichlet energy as an explicit sum over lattice edges.

    With ``include_boundary`` the couplings to the zero boundary values are
    added, and the result equals :func:`dirichlet_energy`.
    """
    u = np.asarray(u, dtype=float)
    e = np.sum((u[op.edge_a] - u[op.edge_b]) ** 2)
    if include_boundary:
        e += np.sum(op.boundary_deg * u**2)
    return float(op.weight * e)
