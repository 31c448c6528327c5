"""Discrete capacity and Poincare-type inequalities on lattice cubes.

Functions on a cube ``Q`` are arrays of shape ``(n,) * dim`` sampled at node
spacing ``h``; the cube edge is ``a = n h``.  Integrals are node sums
(``sum u^2 h^dim``) and gradients are forward differences between nodes of
the array (``sum (u_i - u_j)^2 h^(dim-2)``).  With these conventions the
one-dimensional lemma and the projection inequality hold exactly, not only up
to discretization error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy import ndimage

from .errors import NonConvergence, PreconditionViolation


def _edges(shape):
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    for ax in range(len(shape)):
        n = shape[ax]
        yield np.take(idx, np.arange(n - 1), axis=ax).ravel(), np.take(idx, np.arange(1, n), axis=ax).ravel()


def grad_energy(u: np.ndarray, h: float) -> float:
    """``sum over lattice edges of (u_i - u_j)^2 h^(dim-2)`` inside the array."""
    u = np.asarray(u, float)
    return float(sum(np.sum(np.diff(u, axis=ax) ** 2) for ax in range(u.ndim)) * h ** (u.ndim - 2))


def l2_mass(u: np.ndarray, h: float) -> float:
    u = np.asarray(u, float)
    return float(np.sum(u * u) * h**u.ndim)


# -- capacity ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CapacityProblem:
    """Obstacle ``F`` inside ``omega`` on a lattice of spacing ``spacing``.

    Nodes outside ``omega`` (and beyond the array) carry the value 0.
    """

    F: np.ndarray
    omega: np.ndarray
    spacing: float

    def __post_init__(self):
        F = np.asarray(self.F, bool)
        om = np.asarray(self.omega, bool)
        if F.shape != om.shape:
            raise ValueError("F and omega must share a shape")
        if not F.any():
            raise ValueError("F must be nonempty")
        if np.any(F & ~om):
            raise ValueError("F must lie inside omega")
        # no F node may touch the zero boundary
        outside = np.pad(~om, 1, constant_values=True)
        near = ndimage.binary_dilation(outside, structure=ndimage.generate_binary_structure(F.ndim, 1))
        if np.any(near[(slice(1, -1),) * F.ndim] & F):
            raise ValueError("F must lie strictly inside omega")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "omega", om)

    @property
    def dim(self) -> int:
        return self.F.ndim


def _dirichlet_stiffness(nodes: np.ndarray, shape, w: float):
    """Graph Laplacian on ``nodes`` with full stencil degree on the diagonal."""
    flat = nodes.ravel()
    sel = np.flatnonzero(flat)
    pos = np.full(flat.size, -1)
    pos[sel] = np.arange(sel.size)
    rows, cols = [], []
    for a, b in _edges(shape):
        keep = flat[a] & flat[b]
        rows.append(pos[a[keep]])
        cols.append(pos[b[keep]])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    n = sel.size
    K = sp.csr_matrix(
        (np.concatenate([-np.ones(2 * r.size), np.full(n, 2.0 * len(shape))]) * w,
         (np.concatenate([r, c, np.arange(n)]), np.concatenate([c, r, np.arange(n)]))),
        shape=(n, n),
    )
    return K, sel


def capacity_solution(p: CapacityProblem, tol: float = 1e-10):
    """Solve for the discrete capacitary potential; returns ``(cap, u_grid)``."""
    shape = p.F.shape
    w = p.spacing ** (p.dim - 2)
    free = p.omega & ~p.F
    u = p.F.astype(float)
    if free.any():
        K, sel = _dirichlet_stiffness(free, shape, 1.0)
        # right-hand side: couplings of free nodes to the F nodes (value 1)
        flat_f = p.F.ravel()
        b = np.zeros(free.size)
        for a_, b_ in _edges(shape):
            b[a_] += flat_f[b_]
            b[b_] += flat_f[a_]
        rhs = b[sel]
        x, info = sla.cg(K, rhs, rtol=tol, atol=0.0, maxiter=20 * sel.size)
        if info != 0:
            raise NonConvergence(f"capacity CG stopped with info={info}")
        u.ravel()[sel] = x
    slack = 1e-6
    if u.min() < -slack or u.max() > 1 + slack:
        raise NonConvergence("capacitary potential violates the discrete maximum principle")
    # energy over all lattice edges, with zero values beyond the array
    energy = grad_energy(np.pad(u, 1), 1.0)
    return energy * w, u


def capacity(p: CapacityProblem, tol: float = 1e-10) -> float:
    """``min sum w (u_i - u_j)^2`` over grid functions with ``u = 1`` on F, 0 off omega."""
    return capacity_solution(p, tol)[0]


def ball_problem(dim: int, resolution: int, r: float, R: float, side: float = 1.0) -> CapacityProblem:
    """Concentric balls ``|x| <= r`` inside ``|x| < R`` on a centred cube of edge ``side``."""
    h = side / (resolution - 1)
    axis = (np.arange(resolution) - (resolution - 1) / 2.0) * h
    dist = np.sqrt(sum(g**2 for g in np.meshgrid(*(axis,) * dim, indexing="ij")))
    return CapacityProblem(dist <= r, dist < R, h)


def square_problem(resolution: int, s: float, S: float, side: float = 1.0) -> CapacityProblem:
    """Concentric squares of half-widths ``s < S`` (2D)."""
    h = side / (resolution - 1)
    axis = (np.arange(resolution) - (resolution - 1) / 2.0) * h
    x, y = np.meshgrid(axis, axis, indexing="ij")
    cheb = np.maximum(np.abs(x), np.abs(y))
    return CapacityProblem(cheb <= s, cheb < S, h)


def annulus_capacity(r: float, R: float) -> float:
    return 2.0 * math.pi / math.log(R / r)


def ball_shell_capacity(r: float, R: float) -> float:
    return 4.0 * math.pi / (1.0 / r - 1.0 / R)


def capacity_volume_lower(p: CapacityProblem, tol: float = 1e-10) -> dict:
    """Measured capacity next to the capacity-volume lower bound (constant 1).

    2D: ``1 / log(Area(omega) / Area(F))``.  ``n >= 3``:
    ``1 / (Vol(F)^(-(n-2)/n) - Vol(omega)^(-(n-2)/n))`` and its weaker form
    ``Vol(F)^((n-2)/n)``.  ``ratio`` is the implied constant.
    """
    n = p.dim
    cell = p.spacing**n
    vf = p.F.sum() * cell
    vo = p.omega.sum() * cell
    cap = capacity(p, tol)
    if n == 2:
        lower = 1.0 / math.log(vo / vf)
        simple = None
    else:
        e = (n - 2) / n
        lower = 1.0 / (vf**-e - vo**-e)
        simple = vf**e
    out = {"cap_measured": cap, "lower_bound": lower, "ratio": cap / lower}
    if simple is not None:
        out["lower_simple"] = simple
        out["ratio_simple"] = cap / simple
    return out


# -- Poincare with capacity --------------------------------------------------

def doubled_cube_problem(F: np.ndarray, h: float) -> CapacityProblem:
    """``F`` (an obstacle on ``Q``) inside the concentric cube ``2Q``."""
    F = np.asarray(F, bool)
    n = F.shape[0]
    if any(s != n for s in F.shape) or n % 2:
        raise ValueError("Q must be a cube with an even number of nodes per side")
    big = np.zeros((2 * n,) * F.ndim, bool)
    big[(slice(n // 2, n // 2 + n),) * F.ndim] = F
    return CapacityProblem(big, np.ones_like(big), h)


def mazya_bound(F: np.ndarray, u: np.ndarray, h: float, cap: Optional[float] = None, tol: float = 1e-10) -> dict:
    """Both sides of ``int_Q u^2 <= C a^n / cap(F, 2Q) int_Q |grad u|^2`` with ``C = 1``.

    ``C_required`` is the smallest constant that makes the inequality hold.
    ``cap`` may be passed in to reuse one capacity solve for several ``u``.
    """
    u = np.asarray(u, float)
    F = np.asarray(F, bool)
    scale = np.abs(u).max()
    if scale > 0 and np.abs(u[F]).max(initial=0.0) > 1e-12 * scale:
        raise PreconditionViolation("u does not vanish on F")
    n = u.ndim
    a = u.shape[0] * h
    if cap is None:
        cap = capacity(doubled_cube_problem(F, h), tol)
    lhs = l2_mass(u, h)
    grad = grad_energy(u, h)
    rhs = a**n / cap * grad
    if lhs == 0.0:
        c_req = 0.0
    elif rhs == 0.0:
        c_req = math.inf
    else:
        c_req = lhs / rhs
    return {"lhs": lhs, "rhs": rhs, "C_required": c_req, "cap": cap}


def _neumann_stiffness(free: np.ndarray, w: float):
    """Graph Laplacian of the cube with free (Neumann) outer faces.

    Only nodes in ``free`` are unknowns; edges to the excluded (Dirichlet) nodes
    still count on the diagonal.
    """
    shape = free.shape
    flat = free.ravel()
    sel = np.flatnonzero(flat)
    pos = np.full(flat.size, -1)
    pos[sel] = np.arange(sel.size)
    deg = np.zeros(flat.size)
    rows, cols = [], []
    for a, b in _edges(shape):
        deg[a] += 1
        deg[b] += 1
        keep = flat[a] & flat[b]
        rows.append(pos[a[keep]])
        cols.append(pos[b[keep]])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    n = sel.size
    K = sp.csr_matrix(
        (np.concatenate([-np.ones(2 * r.size), deg[sel]]) * w,
         (np.concatenate([r, c, np.arange(n)]), np.concatenate([c, r, np.arange(n)]))),
        shape=(n, n),
    )
    return K, sel


def sharp_poincare_constant(F: np.ndarray, h: float, seed: int = 0) -> dict:
    """Best ``beta`` in ``int_Q u^2 <= beta a^2 int_Q |grad u|^2`` for ``u = 0`` on F.

    The supremum of the ratio is ``1 / (a^2 mu_1)`` where ``mu_1`` is the first
    eigenvalue of the Laplacian on ``Q`` with free faces and ``u = 0`` on F.
    Also returns the extremal function (zero on F).
    """
    F = np.asarray(F, bool)
    if not F.any():
        raise ValueError("F must be nonempty")
    dim = F.ndim
    a = F.shape[0] * h
    K, sel = _neumann_stiffness(~F, h ** (dim - 2))
    m = h**dim
    if dim == 2 and sel.size <= 200_000:
        v0 = np.random.default_rng(seed).standard_normal(sel.size)
        w, v = sla.eigsh(K.tocsc(), k=1, sigma=-1e-3 * float(K.diagonal().mean()), which="LM", v0=v0)
    else:
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(K.tocsr())
        X = np.random.default_rng(seed).standard_normal((sel.size, 1))
        w, v = sla.lobpcg(K, X, M=ml.aspreconditioner(), largest=False, tol=1e-10, maxiter=1000)
    mu = float(w[0]) / m
    u = np.zeros(F.size)
    u[sel] = v[:, 0]
    return {"beta": 1.0 / (a * a * mu), "mu": mu, "u": u.reshape(F.shape)}


def centered_ball(n: int, dim: int, gamma: float) -> np.ndarray:
    """Nodes of an ``n^dim`` cube within the centred ball of volume fraction ``gamma``."""
    unit = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    rho = (gamma / unit) ** (1.0 / dim)
    c = (np.indices((n,) * dim) + 0.5) / n - 0.5
    return (c**2).sum(axis=0) < rho * rho


def beta_growth_theory(dim: int) -> float:
    """Asymptotic growth coefficient of the sharp ``beta`` for a small centred ball.

    2D: ``beta ~ log(1/gamma) / (4 pi)``; 3D: ``beta ~ (4 pi / 3)^(1/3) / (4 pi) * gamma^(-1/3)``,
    from the capacity of a small disk (ball) relative to the cube.
    """
    if dim == 2:
        return 1.0 / (4.0 * math.pi)
    if dim == 3:
        return (4.0 * math.pi / 3.0) ** (1.0 / 3.0) / (4.0 * math.pi)
    raise ValueError("dim must be 2 or 3")


def beta_growth(dim: int, n: int, gammas) -> dict:
    """Sharp ``beta`` for centred balls of volume fraction ``gamma`` and its growth slope.

    The slope is the least-squares coefficient of ``beta`` against
    ``log(1/gamma)`` (2D) or ``gamma^(-1/3)`` (3D), using the realized node
    fractions.
    """
    h = 1.0 / n
    rows = []
    for g in gammas:
        F = centered_ball(n, dim, g)
        rows.append((float(F.mean()), sharp_poincare_constant(F, h)["beta"]))
    frac = np.array([r[0] for r in rows])
    beta = np.array([r[1] for r in rows])
    x = np.log(1.0 / frac) if dim == 2 else frac ** (-1.0 / 3.0)
    slope, intercept = np.polyfit(x, beta, 1)
    theory = beta_growth_theory(dim)
    return {
        "gamma": list(map(float, gammas)),
        "fraction": frac.tolist(),
        "beta": beta.tolist(),
        "slope": float(slope),
        "intercept": float(intercept),
        "theory_slope": theory,
        "rel_error": float(abs(slope - theory) / theory),
    }


# -- Poincare inequality in dimension two (projection version) -----------------

def poincare_2d_projection(u: np.ndarray, vanish: np.ndarray, gamma: float, h: float, axis: Optional[int] = None) -> dict:
    """Check the projection Poincare inequality and its three intermediate steps.

    ``u`` vanishes on ``vanish`` whose projection on the edge orthogonal to
    ``axis`` covers at least ``gamma * a``.  Returns both sides of every step,
    the minimal constant ``C_required = int u^2 / (a^2 int |grad u|^2)`` and
    the tracked constant ``2/gamma + 2``.
    """
    u = np.asarray(u, float)
    vanish = np.asarray(vanish, bool)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or vanish.shape != u.shape:
        raise ValueError("u and the vanishing set must live on one square grid")
    N = u.shape[0]
    scale = np.abs(u).max()
    if scale > 0 and np.abs(u[vanish]).max(initial=0.0) > 1e-12 * scale:
        raise PreconditionViolation("u does not vanish on the given set")

    def rows_hit(ax):
        return np.flatnonzero(vanish.any(axis=ax))

    if axis is None:
        axis = 0 if len(rows_hit(0)) >= len(rows_hit(1)) else 1
    if axis == 1:
        u, vanish = u.T, vanish.T
    # now u[i, j]: i runs along the lines E_t, j indexes the projection
    rows = np.flatnonzero(vanish.any(axis=0))
    frac = len(rows) / N
    if frac < gamma - 1e-12:
        raise PreconditionViolation(f"projection covers {frac:.3f} of the edge, need {gamma}")
    a = N * h
    l2 = float(np.sum(u * u) * h * h)
    d1 = float(np.sum(np.diff(u, axis=0) ** 2))
    d2 = float(np.sum(np.diff(u, axis=1) ** 2))
    grad = d1 + d2
    e_int = float(np.sum(u[:, rows] ** 2) * h * h)
    row_ints = np.sum(u[:, rows] ** 2, axis=0) * h
    t0 = int(rows[np.argmin(row_ints)])
    row_min = float(row_ints.min())
    c_track = 2.0 / gamma + 2.0
    eps = 1e-12
    steps = {
        "E_Q": (e_int, a * a * grad),
        "avg": (row_min, e_int / (gamma * a)),
        "mid": (l2, 2 * a * row_min + 2 * a * a * d2),
        "final": (l2, c_track * a * a * grad),
    }
    holds = {k: bool(lhs <= rhs * (1 + eps) + eps * scale**2 * h * h) for k, (lhs, rhs) in steps.items()}
    c_req = 0.0 if l2 == 0 else (math.inf if grad == 0 else l2 / (a * a * grad))
    return {
        "lhs": l2,
        "rhs": c_track * a * a * grad,
        "C_required": c_req,
        "C_tracked": c_track,
        "gamma_actual": frac,
        "t0": t0,
        "axis": int(axis),
        "steps": {k: {"lhs": v[0], "rhs": v[1]} for k, v in steps.items()},
        "holds": holds,
        "all_hold": all(holds.values()),
    }


# -- Poincare inequality in dimension one ---------------------------------------

def poincare_1d(x: np.ndarray, u: np.ndarray, zero_point: float, rtol: float = 1e-6) -> dict:
    """``int_a^b u^2 <= (b - a)^2 int_a^b u'^2`` for sampled ``u`` with ``u(zero_point) = 0``.

    Trapezoid rule for the left side; the right side uses the derivative of the
    piecewise-linear interpolant, which is exact for piecewise-linear ``u``.
    """
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    if x.shape != u.shape or x.size < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("x must be increasing and match u")
    if not x[0] <= zero_point <= x[-1]:
        raise PreconditionViolation("zero point outside the interval")
    scale = max(np.abs(u).max(), 1e-300)
    if abs(np.interp(zero_point, x, u)) > 1e-9 * scale:
        raise PreconditionViolation("u does not vanish at the zero point")
    lhs = float(np.trapezoid(u * u, x))
    rhs = float((x[-1] - x[0]) ** 2 * np.sum(np.diff(u) ** 2 / np.diff(x)))
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs * (1 + rtol))}


# -- random test functions --------------------------------------------------------

def random_piecewise_linear(rng: np.random.Generator, n_samples: int = 1024, n_knots: Optional[int] = None):
    """A random piecewise-linear function on a random interval, forced to vanish at one point.

    Few knots and a zero at an endpoint happen often, since those come
    closest to equality.
    """
    if n_knots is None:
        n_knots = int(rng.integers(2, 16))
    a = rng.uniform(-2, 2)
    b = a + rng.uniform(0.1, 4)
    knots = np.sort(np.concatenate([[a, b], rng.uniform(a, b, n_knots - 2)]))
    vals = rng.normal(size=n_knots) * rng.uniform(0.1, 10)
    x = np.linspace(a, b, n_samples)
    x0 = float(rng.choice([a, b])) if rng.random() < 0.25 else float(rng.uniform(a, b))
    x = np.union1d(x, np.concatenate([knots, [x0]]))
    u = np.interp(x, knots, vals)
    u = u - np.interp(x0, knots, vals)
    return x, u, x0


def random_bilinear(rng: np.random.Generator, n: int, coarse: int = 5) -> np.ndarray:
    """Bilinear interpolation of random values on a coarse ``coarse x coarse`` lattice."""
    vals = rng.normal(size=(coarse,) * 2)
    t = np.linspace(0, coarse - 1, n)
    i = np.minimum(t.astype(int), coarse - 2)
    f = t - i
    out = (
        vals[np.ix_(i, i)] * np.outer(1 - f, 1 - f)
        + vals[np.ix_(i + 1, i)] * np.outer(f, 1 - f)
        + vals[np.ix_(i, i + 1)] * np.outer(1 - f, f)
        + vals[np.ix_(i + 1, i + 1)] * np.outer(f, f)
    )
    return out


def vanishing_cutoff(vanish: np.ndarray, width: float) -> np.ndarray:
    """Lipschitz ramp ``min(1, dist(x, vanish) / width)`` in node units."""
    dist = ndimage.distance_transform_edt(~vanish)
    return np.minimum(1.0, dist / width)


def random_staircase(rng: np.random.Generator, n: int, gamma: float) -> np.ndarray:
    """Random monotone lattice staircase whose projection covers ``>= gamma n`` rows."""
    need = int(math.ceil(gamma * n))
    mask = np.zeros((n, n), bool)
    j = int(rng.integers(0, n - need + 1))
    i = int(rng.integers(0, n))
    mask[i, j] = True
    top = j + need - 1
    while j < top:
        if rng.random() < 0.5 and i + 1 < n:
            i += 1
        else:
            j += 1
        mask[i, j] = True
    return mask


def random_obstacle(rng: np.random.Generator, n: int, min_fraction: float = 0.05) -> np.ndarray:
    """Union of random rectangles and disks covering at least ``min_fraction`` of the cube."""
    F = np.zeros((n, n), bool)
    ii, jj = np.indices((n, n))
    while F.mean() < min_fraction:
        if rng.random() < 0.5:
            ci, cj = rng.uniform(0, n, 2)
            r = rng.uniform(1.5, n / 6)
            F |= (ii - ci) ** 2 + (jj - cj) ** 2 <= r * r
        else:
            i0, j0 = rng.integers(0, n - 2, 2)
            F[i0 : i0 + rng.integers(2, n // 3), j0 : j0 + rng.integers(2, n // 3)] = True
    return F
