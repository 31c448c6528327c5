"""Reproducible experiment suites shared by the CLI and the acceptance tests.

Each ``criterion_*`` function returns an :class:`Outcome` with a one-line
verdict and the numbers behind it.
"""

from __future__ import annotations

import contextlib
import functools
import io as _io
import itertools
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import harmonic as hm
from . import poincare as pc
from .chain import (
    FABER_KRAHN_2D,
    J01,
    exponents,
    faber_krahn_check,
    inrad_upper_check,
    verify_global_chain,
)
from .constants import load_constants
from .eigen import smallest_eigenpairs
from .grid import assemble_laplacian, build_domain
from .nodal import extract_nodal_domains, inner_radius

LAMBDA_MAX = 5000.0


@dataclass
class Outcome:
    number: int
    name: str
    ok: bool
    detail: str
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


# -- shared computations --------------------------------------------------------

@functools.lru_cache(maxsize=None)
def domain(kind: str, resolution: int, size=1.0):
    return build_domain(kind, resolution, size)


@functools.lru_cache(maxsize=None)
def eigenpairs(kind: str, resolution: int, k: int, size=1.0):
    d = domain(kind, resolution, size)
    return smallest_eigenpairs(assemble_laplacian(d), k)


def decompose(pair, d):
    """Nodal decomposition with a relative noise threshold of ``1e-10``."""
    return extract_nodal_domains(pair.phi, d, pair.lam, zero_tol=1e-10 * float(np.abs(pair.phi).max()))


def scaling_row(index: int, pair, d, with_bound: bool = True) -> dict:
    """``{index, lambda, n_domains, r_min, r_min_sqrt_lambda, r_bound}`` for one eigenpair.

    ``r_bound`` is the chain lower bound for the domain realizing ``r_min``.
    """
    dec = decompose(pair, d)
    radii = [inner_radius(dec, j, d).radius for j in range(dec.domain_count)]
    jmin = int(np.argmin(radii))
    r_min = float(radii[jmin])
    r_bound = verify_global_chain(pair, dec, jmin, d).r_bound if with_bound else math.nan
    return {
        "index": index,
        "lambda": pair.lam,
        "n_domains": dec.domain_count,
        "r_min": r_min,
        "r_min_sqrt_lambda": r_min * math.sqrt(pair.lam),
        "r_bound": r_bound,
    }


def loglog_fit(lams, radii):
    """Least-squares ``log r = intercept + slope log lam``."""
    slope, intercept = np.polyfit(np.log(lams), np.log(radii), 1)
    return float(slope), float(intercept)


def square_modes(resolution: int, count: int):
    """Labels ``(j, k)`` of the ``count`` smallest discrete square eigenvalues, ascending."""
    h = 1.0 / (resolution - 1)
    jmax = int(math.ceil(math.sqrt(2 * count))) + 2
    f = {j: 4.0 / h**2 * math.sin(j * math.pi * h / 2) ** 2 for j in range(1, jmax + 1)}
    pairs = sorted(itertools.product(f, f), key=lambda jk: (f[jk[0]] + f[jk[1]], jk))
    return pairs[:count]


def square_mode_value(j: int, k: int) -> float:
    """Closed-form ``r sqrt(lam)`` for the product mode ``sin(j pi x) sin(k pi y)``."""
    return math.pi * math.hypot(j, k) / (2 * max(j, k))


# -- criteria -------------------------------------------------------------------

def criterion_eigen(resolution: int = 257, k: int = 20) -> Outcome:
    t0 = time.perf_counter()
    d = domain("square", resolution)
    pairs = smallest_eigenpairs(assemble_laplacian(d), k)
    elapsed = time.perf_counter() - t0
    exact = sorted(math.pi**2 * (j * j + i * i) for j in range(1, k + 1) for i in range(1, k + 1))[:k]
    rel = [abs(p.lam - e) / e for p, e in zip(pairs, exact)]
    ok = max(rel) < 0.01 and elapsed < 60.0
    return Outcome(1, "eigensolver accuracy", ok, f"max rel err {max(rel):.2e} (<1e-2), {elapsed:.1f}s (<60s)",
                   {"lambdas": [p.lam for p in pairs], "exact": exact, "seconds": elapsed})


def scaling_suite(resolution: int = 257, k: int = 60, with_bound: bool = True) -> dict:
    rows = {}
    for kind in ("square", "disk_mask"):
        d = domain(kind, resolution)
        rows[kind] = [
            scaling_row(i, p, d, with_bound) for i, p in enumerate(eigenpairs(kind, resolution, k)) if p.lam <= LAMBDA_MAX
        ]
    return rows


def criterion_scaling(resolution: int = 257, k: int = 60) -> Outcome:
    rows = scaling_suite(resolution, k, with_bound=False)
    allrows = rows["square"] + rows["disk_mask"]
    lams = np.array([r["lambda"] for r in allrows])
    rmin = np.array([r["r_min"] for r in allrows])
    slope, _ = loglog_fit(lams, rmin)
    floor = float(min(r["r_min_sqrt_lambda"] for r in allrows))
    # pure (simple) square modes: j == k
    errs = []
    for (j, i), row in zip(square_modes(resolution, len(rows["square"])), rows["square"]):
        if j == i:
            exact = square_mode_value(j, i)
            errs.append(abs(row["r_min_sqrt_lambda"] - exact) / exact)
    ok = len(allrows) >= 100 and abs(slope + 0.5) <= 0.1 and floor >= 0.5 and max(errs) <= 0.1
    return Outcome(
        2, "scaling law", ok,
        f"n={len(allrows)} (>=100), slope {slope:.3f} (-0.5+-0.1), floor {floor:.3f} (>=0.5), "
        f"pure-mode err {max(errs):.3f} (<=0.1, {len(errs)} modes)",
        {"slope": slope, "floor": floor, "pure_mode_errors": errs, "n": len(allrows)},
    )


UPPER_FAMILY = (("square", 1.0), ("disk_mask", 1.0), ("rectangle", (10.0, 1.0)), ("lshape", 1.0), ("slit_square", 1.0))


def upper_bound_products(resolution: int = 257) -> dict:
    out = {}
    for kind, size in UPPER_FAMILY:
        d = domain(kind, resolution, size)
        lam1 = eigenpairs(kind, resolution, 1, size)[0].lam
        out[kind] = inrad_upper_check(d, lam1)["product"]
    return out


def criterion_upper_bound(resolution: int = 257, constants=None) -> Outcome:
    prods = upper_bound_products(resolution)
    top = max(prods.values())
    consts = load_constants() if constants is None else constants
    frozen = consts.get("upper_bound_c", {}).get("value")
    ok = top <= 7.0 and frozen is not None and abs(top - frozen) <= 0.05 * frozen
    return Outcome(3, "inner-radius upper bound", ok,
                   f"max lam1*inrad^2 {top:.4f} (<=7), frozen {frozen} (+-5%)", {"products": prods})


def criterion_faber_krahn(resolution: int = 257) -> Outcome:
    prods = {}
    for kind, size in UPPER_FAMILY:
        lam1 = eigenpairs(kind, resolution, 1, size)[0].lam
        prods[kind] = faber_krahn_check(domain(kind, resolution, size), lam1)
    low = min(prods.values())
    disk_err = abs(prods["disk_mask"] - FABER_KRAHN_2D) / FABER_KRAHN_2D
    ok = low >= FABER_KRAHN_2D * 0.98 and disk_err <= 0.02
    return Outcome(4, "Faber-Krahn", ok,
                   f"min lam1*Area {low:.3f} (>={FABER_KRAHN_2D * 0.98:.3f}), disk err {disk_err:.4f} (<=0.02)",
                   {"products": prods})


def chain_suite(resolution: int = 257, modes=(("square", 20), ("disk_mask", 10))) -> list:
    """One summary per eigenfunction: every nodal domain run through the chain."""
    out = []
    for kind, k in modes:
        d = domain(kind, resolution)
        for i, pair in enumerate(eigenpairs(kind, resolution, k)):
            t0 = time.perf_counter()
            dec = decompose(pair, d)
            reps = [verify_global_chain(pair, dec, j, d) for j in range(dec.domain_count)]
            out.append({
                "domain": kind,
                "index": i,
                "lambda": pair.lam,
                "n_domains": dec.domain_count,
                "seconds": time.perf_counter() - t0,
                "violations": sum(r.step2_violations for r in reps),
                "final_ok": all(r.final_ok for r in reps),
                "all_ok": all(r.all_ok for r in reps),
                "min_margin": min(r.r_measured / r.r_bound for r in reps),
            })
    return out


def criterion_chain(resolution: int = 257) -> Outcome:
    rows = chain_suite(resolution)
    viol = sum(r["violations"] for r in rows)
    final = sum(r["final_ok"] for r in rows)
    slow = max(r["seconds"] for r in rows)
    ok = viol == 0 and final == len(rows) and all(r["all_ok"] for r in rows) and slow < 10.0
    return Outcome(5, "chain pipeline", ok,
                   f"{len(rows)} eigenfunctions, step-2 violations {viol}, final bound {final}/{len(rows)}, "
                   f"slowest {slow:.2f}s (<10s)", {"rows": rows})


def criterion_capacity() -> Outcome:
    c2 = pc.capacity(pc.ball_problem(2, 257, 0.25, 0.5))
    e2 = abs(c2 - pc.annulus_capacity(0.25, 0.5)) / pc.annulus_capacity(0.25, 0.5)
    c3 = pc.capacity(pc.ball_problem(3, 97, 0.25, 0.5))
    e3 = abs(c3 - pc.ball_shell_capacity(0.25, 0.5)) / pc.ball_shell_capacity(0.25, 0.5)
    ok = e2 <= 0.05 and e3 <= 0.07
    return Outcome(6, "capacity", ok, f"annulus {c2:.4f} err {e2:.4f} (<=0.05), balls {c3:.4f} err {e3:.4f} (<=0.07)",
                   {"cap2": c2, "cap3": c3})


GAMMAS = tuple(2.0**-k for k in range(2, 9))


def criterion_beta_shape(n2: int = 128, n3: int = 48) -> Outcome:
    g2 = pc.beta_growth(2, n2, GAMMAS)
    g3 = pc.beta_growth(3, n3, GAMMAS)
    ok = g2["rel_error"] <= 0.2 and g3["rel_error"] <= 0.2
    return Outcome(7, "beta(gamma) shape", ok,
                   f"2D slope {g2['slope']:.4f} vs {g2['theory_slope']:.4f} ({g2['rel_error']:.1%}), "
                   f"3D slope {g3['slope']:.4f} vs {g3['theory_slope']:.4f} ({g3['rel_error']:.1%}), limit 20%",
                   {"2d": g2, "3d": g3})


def projection_trials(trials: int = 100, n: int = 64, gamma: float = 0.25, seed: int = 8) -> list:
    """Random functions vanishing on random staircases; three generator families."""
    out = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        V = pc.random_staircase(rng, n, gamma)
        family = t % 3
        if family == 0:
            u = pc.vanishing_cutoff(V, rng.uniform(2, n))
        elif family == 1:
            u = pc.random_bilinear(rng, n, int(rng.integers(2, 9))) * pc.vanishing_cutoff(V, rng.uniform(1, 12))
        else:
            u = np.sin(rng.uniform(0.5, 6) * np.indices((n, n))[0] / n + rng.uniform(0, 6)) * pc.vanishing_cutoff(V, 1.0)
        out.append(pc.poincare_2d_projection(u, V, gamma, 1.0 / n))
    return out


def criterion_projection(trials: int = 100) -> Outcome:
    res = projection_trials(trials)
    bad = sum(not r["all_hold"] for r in res)
    worst = max(r["C_required"] for r in res)
    return Outcome(8, "2D projection Poincare", bad == 0,
                   f"{trials} trials, falsifications {bad}, max C_required {worst:.4f} (<= {2 / 0.25 + 2:g})",
                   {"max_C_required": worst})


def criterion_poincare_1d(trials: int = 1000, seed: int = 9) -> Outcome:
    bad = 0
    worst = 0.0
    for t in range(trials):
        x, u, x0 = pc.random_piecewise_linear(np.random.default_rng([seed, t]))
        r = pc.poincare_1d(x, u, x0)
        bad += not r["holds"]
        worst = max(worst, r["lhs"] / r["rhs"])
    return Outcome(9, "1D Poincare lemma", bad == 0, f"{trials} trials, falsifications {bad}, max lhs/rhs {worst:.4f}",
                   {"max_ratio": worst})


def criterion_harmonic(samples: int = 10**6, table_samples: int = 200_000) -> Outcome:
    empty = hm.harmonic_measure_at_zero(hm.ObstacleSet.empty(), samples, 0)
    circ = hm.harmonic_measure_at_zero(hm.ObstacleSet.circle(0.3), 100_000, 0)
    t0 = time.perf_counter()
    slit = hm.harmonic_measure_at_zero(hm.ObstacleSet.radial_slit(0.1), samples, 0)
    elapsed = time.perf_counter() - t0
    z = abs(slit.omega0 - hm.slit_omega_exact(0.1)) / slit.stderr
    table = hm.beurling_nevanlinna_check(n_samples=table_samples)
    ok = (
        empty.omega0 == 0.0
        and circ.omega0 >= 1 - 3 * circ.stderr
        and table["ok"]
        and elapsed < 30.0
        and z <= 3.0
    )
    return Outcome(
        10, "harmonic measure", ok,
        f"empty {empty.omega0:g}, circle {circ.omega0:.4f}, BN variation {table['variation']:.1%} (<30%), "
        f"monotone {table['monotone']}, 1e6 slit samples {elapsed:.1f}s (<30s) at {z:.2f} stderr from exact",
        {"table": table["rows"], "seconds": elapsed},
    )


def criterion_exponents() -> Outcome:
    e2, e3 = exponents(2), exponents(3)
    got = (e2["k"], e3["k"], e2["alpha"], e3["alpha"])
    want = (0.5, 3.625, 8.5, 18.75)
    ok = all(g == w for g, w in zip(got, want))
    return Outcome(11, "exponent formulas", ok, "k(2), k(3), alpha(2), alpha(3) = " + ", ".join(str(float(g)) for g in got))


DETERMINISM_RUNS = (
    ["spectrum", "--domain", "square", "--resolution", "33", "--k", "6", "--out", "{dir}/eig.json"],
    ["scaling", "--bundle", "{dir}/eig.json", "--out-dir", "{dir}"],
    ["nodal", "--bundle", "{dir}/eig.json", "--index", "4", "--svg", "{dir}/n.svg", "--csv", "{dir}/n.csv"],
    ["chain", "--bundle", "{dir}/eig.json", "--index", "4", "--out", "{dir}/chain.json"],
    ["capacity", "--shape", "annulus", "--r", "0.25", "--R", "0.5", "--resolution", "65"],
    ["harmonic", "--obstacle", "slit", "--r0", "0.1", "--samples", "20000", "--seed", "3"],
)


def _run_commands(workdir: Path) -> dict:
    from .cli import main

    outputs = {}
    for k, argv in enumerate(DETERMINISM_RUNS):
        buf = _io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = main([a.format(dir=workdir) for a in argv])
        outputs[f"stdout{k}"] = (code, buf.getvalue().replace(str(workdir), "<dir>"))
    for f in sorted(workdir.iterdir()):
        outputs[f.name] = f.read_bytes()
    return outputs


def criterion_determinism() -> Outcome:
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        first = _run_commands(Path(a))
        second = _run_commands(Path(b))
    diff = sorted(k for k in first.keys() | second.keys() if first.get(k) != second.get(k))
    codes = [v[0] for k, v in first.items() if k.startswith("stdout")]
    ok = not diff and all(c == 0 for c in codes)
    return Outcome(12, "determinism", ok,
                   f"{len(first)} outputs compared, differing {diff or 'none'}, exit codes {codes}")


CRITERIA = (
    criterion_eigen,
    criterion_scaling,
    criterion_upper_bound,
    criterion_faber_krahn,
    criterion_chain,
    criterion_capacity,
    criterion_beta_shape,
    criterion_projection,
    criterion_poincare_1d,
    criterion_harmonic,
    criterion_exponents,
    criterion_determinism,
)


def run_all(constants=None, echo=print) -> list:
    out = []
    for fn in CRITERIA:
        res = fn(constants=constants) if fn is criterion_upper_bound else fn()
        echo(res.line())
        out.append(res)
    return out


# -- constant fitting -------------------------------------------------------------

def mazya_trials(trials: int = 100, n: int = 32, seed: int = 4) -> list:
    """Random obstacles (>= 5% of the cube) with test functions vanishing on them."""
    h = 1.0 / n
    out = []
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        F = pc.random_obstacle(rng, n, 0.05)
        cap = pc.capacity(pc.doubled_cube_problem(F, h))
        family = t % 3
        if family == 0:
            u = pc.vanishing_cutoff(F, rng.uniform(1, n))
        elif family == 1:
            u = pc.random_bilinear(rng, n, int(rng.integers(2, 7))) * pc.vanishing_cutoff(F, rng.uniform(1, 8))
        else:
            u = pc.sharp_poincare_constant(F, h)["u"]
        res = pc.mazya_bound(F, u, h, cap=cap)
        res["fraction"] = float(F.mean())
        out.append(res)
    return out


def capacity_volume_family(resolution: int = 129) -> dict:
    """Implied 2D capacity-volume constants for disks, squares and L-shaped obstacles."""
    out = {}
    for r in (0.05, 0.1, 0.2, 0.3):
        out[f"disk r={r}"] = pc.capacity_volume_lower(pc.ball_problem(2, resolution, r, 0.45))["ratio"]
        out[f"square s={r}"] = pc.capacity_volume_lower(pc.square_problem(resolution, r, 0.45))["ratio"]
        p = pc.square_problem(resolution, r, 0.45)
        c = (resolution - 1) // 2
        F = p.F.copy()
        F[c + 1:, c + 1:] = False
        out[f"lshape s={r}"] = pc.capacity_volume_lower(pc.CapacityProblem(F, p.omega, p.spacing))["ratio"]
    return out


def capacity_volume_family_3d(resolution: int = 65) -> dict:
    return {
        f"ball r={r}": pc.capacity_volume_lower(pc.ball_problem(3, resolution, r, 0.5))["ratio_simple"]
        for r in (0.1, 0.2, 0.3, 0.4)
    }


def fit_constants() -> dict:
    """Fit every frozen constant; values are extremal observations over fixed suites."""
    ub = upper_bound_products(257)
    rows = scaling_suite(257, 60, with_bound=False)
    floor = min(r["r_min_sqrt_lambda"] for rs in rows.values() for r in rs)
    maz = mazya_trials()
    cv2 = capacity_volume_family()
    cv3 = capacity_volume_family_3d()
    return {
        "upper_bound_c": {
            "value": max(ub.values()),
            "note": "max lam1*inrad^2 over square, disk, 10x1 rectangle, L-shape, slit square at resolution 257",
        },
        "scaling_floor": {
            "value": floor,
            "note": "min over domains of r_min*sqrt(lam), square and disk, 60 modes each, resolution 257, lam <= 5000",
        },
        "mazya_c1": {
            "value": max(r["C_required"] for r in maz),
            "note": "max C_required over 100 random obstacles (>=5% of Q, 32^2 nodes), seeds (4, t)",
        },
        "capacity_volume_c2": {
            "value": min(cv2.values()),
            "note": "min cap*log(Area(omega)/Area(F)) over disks, squares, L-shapes at resolution 129",
        },
        "capacity_volume_c3": {
            "value": min(cv3.values()),
            "note": "min cap/Vol(F)^(1/3) over concentric balls r in 0.1..0.4, R = 0.5, resolution 65",
        },
    }
