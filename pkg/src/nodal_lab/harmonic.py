"""Walk-on-spheres harmonic measure in the unit disk and related inequalities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .errors import PreconditionViolation
from .grid import GridDomain
from .nodal import NodalDecomposition, distance_to_complement

CHUNK = 1 << 16
EPS = 1e-4
MAX_STEPS = 10_000


@dataclass(frozen=True, eq=False)
class ObstacleSet:
    """Closed obstacle ``E`` inside the closed unit disk.

    kinds: ``empty``; ``radial_slit`` (segment ``[r0, 1]`` of the positive real
    axis); ``circle`` (``|z| = r0``); ``union_of_disks`` (``disks`` is a list of
    ``(cx, cy, radius)``); ``mask`` (boolean ``grid`` on ``[-1, 1]^2``, axis 0 = x).
    ``r0 = inf |z|`` over ``E`` is recomputed from the geometry.
    """

    kind: str
    param: float = 0.0
    disks: tuple = ()
    grid: Optional[np.ndarray] = None
    r0: float = field(init=False)

    def __post_init__(self):
        k = self.kind
        if k == "empty":
            r0 = math.inf
        elif k in ("radial_slit", "circle"):
            if not 0.0 <= self.param <= 1.0:
                raise ValueError("r0 must lie in [0, 1]")
            r0 = float(self.param)
        elif k == "union_of_disks":
            disks = tuple((float(a), float(b), float(c)) for a, b, c in self.disks)
            if not disks:
                raise ValueError("union_of_disks needs at least one disk")
            for cx, cy, r in disks:
                if r < 0 or math.hypot(cx, cy) + r > 1.0 + 1e-12:
                    raise ValueError("every disk must lie in the closed unit disk")
            object.__setattr__(self, "disks", disks)
            r0 = max(0.0, min(math.hypot(cx, cy) - r for cx, cy, r in disks))
        elif k == "mask":
            g = np.asarray(self.grid, bool)
            if g.ndim != 2 or g.shape[0] != g.shape[1] or not g.any():
                raise ValueError("mask obstacle needs a nonempty square boolean grid")
            x = np.linspace(-1.0, 1.0, g.shape[0])
            X, Y = np.meshgrid(x, x, indexing="ij")
            rad = np.hypot(X, Y)
            if np.any(g & (rad > 1.0 + 1e-12)):
                raise ValueError("mask obstacle leaves the unit disk")
            object.__setattr__(self, "grid", g)
            r0 = float(rad[g].min())
            dist = ndimage.distance_transform_edt(~g, sampling=x[1] - x[0])
            object.__setattr__(self, "_interp", RegularGridInterpolator((x, x), dist))
        else:
            raise ValueError(f"unknown obstacle kind {k!r}")
        object.__setattr__(self, "r0", r0)

    @classmethod
    def empty(cls):
        return cls("empty")

    @classmethod
    def radial_slit(cls, r0: float):
        return cls("radial_slit", r0)

    @classmethod
    def circle(cls, r0: float):
        return cls("circle", r0)

    @classmethod
    def union_of_disks(cls, disks: Sequence):
        return cls("union_of_disks", disks=tuple(disks))

    @classmethod
    def mask(cls, grid: np.ndarray):
        return cls("mask", grid=grid)

    def distance(self, z: np.ndarray) -> np.ndarray:
        """Distance from complex points ``z`` to ``E`` (``inf`` for the empty set)."""
        k = self.kind
        if k == "empty":
            return np.full(z.shape, np.inf)
        if k == "radial_slit":
            x, y = z.real, z.imag
            return np.where(x < self.param, np.abs(z - self.param), np.abs(y))
        if k == "circle":
            return np.abs(np.abs(z) - self.param)
        if k == "union_of_disks":
            out = np.full(z.shape, np.inf)
            for cx, cy, r in self.disks:
                out = np.minimum(out, np.maximum(np.abs(z - complex(cx, cy)) - r, 0.0))
            return out
        pts = np.column_stack([np.clip(z.real, -1, 1), np.clip(z.imag, -1, 1)])
        return self._interp(pts)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "r0": self.r0}
        if self.kind in ("radial_slit", "circle"):
            out["param"] = self.param
        if self.kind == "union_of_disks":
            out["disks"] = [list(d) for d in self.disks]
        return out


@dataclass(frozen=True)
class MeasureEstimate:
    omega0: float
    stderr: float
    n_samples: int
    seed: int
    eps: float = EPS
    n_resampled: int = 0  # walks restarted after hitting the step cap

    def to_dict(self) -> dict:
        return {
            "omega0": self.omega0,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "eps": self.eps,
            "n_resampled": self.n_resampled,
        }


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    # counter-based stream keyed by (seed, chunk): any chunk schedule gives the same draws
    return np.random.Generator(np.random.Philox(key=np.array([seed, chunk], dtype=np.uint64)))


def _walk_chunk(E: ObstacleSet, n: int, rng: np.random.Generator, eps: float, max_steps: int):
    """Walk-on-spheres from 0 for ``n`` walkers.

    Returns ``(hit, exit_point, resampled)``: ``hit`` marks absorption on E,
    ``exit_point`` the point of absorption on the unit circle (NaN for E).
    """
    hit = np.zeros(n, bool)
    exit_pt = np.full(n, np.nan + 0j)
    z = np.zeros(n, complex)
    steps = np.zeros(n, np.int64)
    live = np.arange(n)
    resampled = 0
    while live.size:
        zl = z[live]
        dE = E.distance(zl)
        dB = 1.0 - np.abs(zl)
        on_e = dE < eps
        on_b = ~on_e & (dB < eps)
        hit[live[on_e]] = True
        done_b = live[on_b]
        exit_pt[done_b] = zl[on_b] / np.abs(zl[on_b])
        stuck = ~(on_e | on_b) & (steps[live] >= max_steps)
        if stuck.any():
            near = stuck & (dE < math.sqrt(eps))
            hit[live[near]] = True
            restart = live[stuck & ~near]
            resampled += restart.size
            z[restart] = 0.0
            steps[restart] = 0
            stuck = near
        move = ~(on_e | on_b | stuck)
        live = live[move]
        r = np.minimum(dE[move], dB[move])
        theta = rng.uniform(0.0, 2.0 * math.pi, live.size)
        z[live] = zl[move] + r * np.exp(1j * theta)
        steps[live] += 1
    return hit, exit_pt, resampled


def _walk(E: ObstacleSet, n_samples: int, seed: int, eps: float, max_steps: int):
    hits, exits, resampled = [], [], 0
    for c, start in enumerate(range(0, n_samples, CHUNK)):
        m = min(CHUNK, n_samples - start)
        h, x, r = _walk_chunk(E, m, _chunk_rng(seed, c), eps, max_steps)
        hits.append(h)
        exits.append(x)
        resampled += r
    return np.concatenate(hits), np.concatenate(exits), resampled


def harmonic_measure_at_zero(
    E: ObstacleSet, n_samples: int, seed: int = 0, eps: float = EPS, max_steps: int = MAX_STEPS
) -> MeasureEstimate:
    """Monte Carlo estimate of ``omega(0)``, the harmonic measure of ``E`` seen from 0."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if E.kind == "empty":
        return MeasureEstimate(0.0, 0.0, n_samples, seed, eps, 0)
    hit, _, resampled = _walk(E, n_samples, seed, eps, max_steps)
    w = float(hit.mean())
    return MeasureEstimate(w, math.sqrt(w * (1.0 - w) / n_samples), n_samples, seed, eps, resampled)


def slit_omega_exact(r0: float) -> float:
    """``omega(0)`` for the radial slit ``[r0, 1]``: ``1 - (4/pi) arctan(sqrt(r0))``.

    Obtained from the Koebe map ``z / (1 + z)^2``.
    """
    return 1.0 - 4.0 / math.pi * math.atan(math.sqrt(r0))


def beurling_nevanlinna_check(
    r0_list: Sequence[float] = (0.4, 0.2, 0.1, 0.05, 0.025), n_samples: int = 200_000, seed: int = 0
) -> dict:
    """Slit family table ``{r0, omega0, stderr, implied_C, exact}``.

    ``implied_C = (1 - omega0) / sqrt(r0)``.  ``variation`` is ``max/min - 1``
    of the implied constants; ``monotone`` requires ``omega0`` to drop with
    increasing ``r0`` by more than three combined standard errors per step.
    """
    rows = []
    for r0 in r0_list:
        est = harmonic_measure_at_zero(ObstacleSet.radial_slit(r0), n_samples, seed)
        rows.append(
            {
                "r0": float(r0),
                "omega0": est.omega0,
                "stderr": est.stderr,
                "implied_C": (1.0 - est.omega0) / math.sqrt(r0),
                "exact": slit_omega_exact(r0),
            }
        )
    rows.sort(key=lambda r: r["r0"])
    cs = [r["implied_C"] for r in rows]
    monotone = all(
        a["omega0"] - b["omega0"] > 3.0 * math.hypot(a["stderr"], b["stderr"]) for a, b in zip(rows, rows[1:])
    )
    variation = max(cs) / min(cs) - 1.0
    return {"rows": rows, "variation": variation, "monotone": monotone, "ok": bool(variation < 0.3 and monotone)}


@dataclass(frozen=True)
class PoissonMixture:
    """``h(z) = constant + sum_k w_k (|p_k|^2 - |z|^2) / |p_k - z|^2`` with poles ``|p_k| > 1``.

    Positive and harmonic on the closed disk whenever the weights are
    nonnegative and not all zero.
    """

    weights: tuple = ()
    poles: tuple = ()
    constant: float = 0.0

    def __post_init__(self):
        if len(self.weights) != len(self.poles):
            raise ValueError("weights and poles differ in length")
        if any(abs(complex(p)) <= 1.0 for p in self.poles):
            raise ValueError("poles must lie outside the closed unit disk")
        if self.constant < 0 or any(w < 0 for w in self.weights) or (self.constant == 0 and not any(self.weights)):
            raise PreconditionViolation("u is not positive")

    def __call__(self, z):
        z = np.asarray(z, complex)
        out = np.full(z.shape, float(self.constant))
        for w, p in zip(self.weights, self.poles):
            p = complex(p)
            out += w * (abs(p) ** 2 - np.abs(z) ** 2) / np.abs(p - z) ** 2
        return out


def majorization_check(u: PoissonMixture, E: ObstacleSet, n_samples: int, seed: int = 0, eps: float = EPS) -> dict:
    """``u(0) / max u <= 1 - omega(0)`` for ``u`` harmonic off ``E``, zero on ``E``, equal to ``h`` on the circle.

    Both sides come from one set of walks, so the per-walk difference is
    nonpositive and the check is exact up to the boundary maximum.
    """
    theta = np.linspace(0.0, 2.0 * math.pi, 4096, endpoint=False)
    if E.kind == "empty":
        hit = np.zeros(n_samples, bool)
        vals = np.full(n_samples, float(u(np.zeros(1))[0]))
    else:
        hit, exits, _ = _walk(E, n_samples, seed, eps, MAX_STEPS)
        vals = np.where(hit, 0.0, u(np.where(hit, 1.0, exits)))
    if np.any(vals < 0):
        raise PreconditionViolation("u is not positive on the sampled component")
    big = float(max(u(np.exp(1j * theta)).max(), vals.max(initial=0.0)))
    lhs_samples = vals / big
    rhs_samples = (~hit).astype(float)
    lhs = float(lhs_samples.mean())
    rhs = float(rhs_samples.mean())
    stderr = float(np.std(lhs_samples - rhs_samples) / math.sqrt(n_samples))
    return {"lhs": lhs, "rhs": rhs, "stderr": stderr, "max_u": big, "holds": bool(lhs <= rhs + 3.0 * stderr)}


def center_maximality_gap(dec: NodalDecomposition, domain_id: int, d: GridDomain) -> dict:
    """Distance from the argmax of ``|phi|`` in a nodal domain to its boundary, times ``sqrt(lam)``."""
    if dec.lam is None:
        raise ValueError("decomposition carries no eigenvalue")
    mask = dec.domain_mask(domain_id)
    vals = np.where(mask, np.abs(dec.phi), -1.0)
    node = tuple(int(i) for i in np.unravel_index(int(np.argmax(vals)), vals.shape))
    dist = distance_to_complement(mask, d, node)
    return {"center": node, "distance": dist, "dist_sqrt_lambda": dist * math.sqrt(dec.lam)}
