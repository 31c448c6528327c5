"""Smallest eigenpairs of the discrete Laplacian with residual certificates."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import NonConvergence
from .grid import SparseSymOp, dirichlet_energy

log = logging.getLogger(__name__)

MAX_OUTER = 5000


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    phi: np.ndarray  # mass-normalized, active nodes
    residual: float  # ||A phi - lam phi||_mass


def residual_norm(op: SparseSymOp, lam: float, phi: np.ndarray) -> float:
    r = op.stiffness @ phi - lam * op.mass * phi
    return float(np.sqrt(np.sum(r * r / op.mass)))


def _fix_sign(phi: np.ndarray, mass: np.ndarray) -> np.ndarray:
    s = float(np.dot(mass, phi))
    if abs(s) <= 1e-8 * np.sqrt(mass.sum()):
        big = np.flatnonzero(np.abs(phi) > 1e-3 * np.abs(phi).max())
        s = phi[big[0]]
    return phi if s >= 0 else -phi


def _symmetrized(op: SparseSymOp):
    dm = 1.0 / np.sqrt(op.mass)
    D = sp.diags(dm)
    return (D @ op.stiffness @ D).tocsc(), dm


def _arpack(op, k, seed):
    S, dm = _symmetrized(op)
    n = op.n_active
    if n <= 200 or k >= n - 1:
        w, y = np.linalg.eigh(S.toarray())
        w, y = w[:k], y[:, :k]
    else:
        v0 = np.random.default_rng(seed).standard_normal(n)
        # shift-invert about a point left of the spectrum: picks the smallest
        # eigenvalues and tolerates the zero mode of periodic domains
        sigma = -min(1.0, 1e-3 * float(S.diagonal().mean()))
        try:
            w, y = sla.eigsh(S, k=k, sigma=sigma, which="LM", v0=v0, tol=0.0, maxiter=MAX_OUTER * k)
        except sla.ArpackNoConvergence as exc:
            raise NonConvergence(str(exc)) from exc
    order = np.argsort(w, kind="stable")
    return w[order], (y[:, order].T * dm).T


def _subspace(op, k, tol, seed):
    """Block inverse iteration with Rayleigh-Ritz on the pencil ``(K, M)``.

    Inner solves use one sparse LU factorization of the shifted stiffness.
    Guard vectors beyond ``k`` speed up convergence of the wanted pairs.
    """
    n = op.n_active
    p = min(n, k + max(5, k // 2))
    K = op.stiffness.tocsc()
    shift = min(1.0, 1e-3 * float((K.diagonal() / op.mass).mean()))
    lu = sla.splu((K + shift * sp.diags(op.mass)).tocsc())
    X = np.random.default_rng(seed).standard_normal((n, p))
    for it in range(MAX_OUTER):
        X = lu.solve(op.mass[:, None] * X)
        # M-orthonormalize, then Rayleigh-Ritz
        G = X.T @ (op.mass[:, None] * X)
        L = np.linalg.cholesky(G)
        X = np.linalg.solve(L, X.T).T
        H = X.T @ (K @ X)
        w, c = np.linalg.eigh(0.5 * (H + H.T))
        X = X @ c
        R = K @ X[:, :k] - (op.mass[:, None] * X[:, :k]) * w[:k]
        res = np.sqrt(np.sum(R * R / op.mass[:, None], axis=0))
        if np.all(res <= 0.1 * tol * np.maximum(w[:k], 1.0)):
            log.debug("subspace iteration converged after %d steps", it + 1)
            return w[:k], X[:, :k]
    raise NonConvergence(f"subspace iteration did not converge in {MAX_OUTER} steps")


def smallest_eigenpairs(
    op: SparseSymOp, k: int, tol: float = 1e-8, seed: int = 0, method: str = "arpack"
) -> list:
    """The ``k`` smallest eigenpairs of ``K phi = lam M phi``, ascending.

    ``method="arpack"`` runs shift-invert Lanczos; ``method="subspace"`` is a
    self-contained block inverse iteration used as a cross-check.  Every pair
    is certified: ``residual <= tol * max(lam, 1)`` or :class:`NonConvergence`.
    """
    if not 1 <= k <= op.n_active:
        raise ValueError(f"k must be in [1, {op.n_active}], got {k}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if method == "arpack":
        w, V = _arpack(op, k, seed)
    elif method == "subspace":
        w, V = _subspace(op, k, tol, seed)
    else:
        raise ValueError(f"unknown method {method!r}")

    pairs = []
    for j in range(k):
        phi = V[:, j] / op.norm(V[:, j])
        phi = _fix_sign(phi, op.mass)
        lam = max(float(w[j]), 0.0)
        res = residual_norm(op, lam, phi)
        if res > tol * max(lam, 1.0):
            raise NonConvergence(f"pair {j}: residual {res:.3e} exceeds {tol:g} * max(lam, 1)")
        pairs.append(EigenPair(lam, phi, res))
    return pairs


def rayleigh_quotient(op: SparseSymOp, u: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    m = op.inner(u, u)
    if m == 0.0:
        raise ValueError("Rayleigh quotient of the zero vector")
    return dirichlet_energy(op, u) / m
