"""Command-line entry point: ``nodal-lab <command> [options]``.

Exit codes: 0 success, 1 bad input, 2 numerical failure, 3 an asserted
inequality was falsified.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_FALSIFIED = 0, 1, 2, 3

log = logging.getLogger("nodal_lab")

DOMAIN_ALIASES = {"disk": "disk_mask"}
DOMAINS = ("square", "rectangle", "box", "disk", "disk_mask", "lshape", "slit_square", "torus")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    constants: str = None
    threads: int = 1


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _emit(obj) -> None:
    from .io import dumps

    sys.stdout.write(dumps(obj))


# -- commands -------------------------------------------------------------------

def cmd_spectrum(cfg: ExperimentConfig) -> int:
    from .eigen import smallest_eigenpairs
    from .grid import assemble_laplacian, build_domain
    from .io import save_bundle

    p = cfg.params
    size = p["size"][0] if len(p["size"]) == 1 else tuple(p["size"])
    d = build_domain(DOMAIN_ALIASES.get(p["domain"], p["domain"]), p["resolution"], size)
    pairs = smallest_eigenpairs(assemble_laplacian(d), p["k"], tol=p["tol"], seed=p["seed"], method=p["method"])
    save_bundle(p["out"], d, pairs)
    print("index,lambda,residual")
    for j, e in enumerate(pairs):
        print(f"{j},{e.lam!r},{e.residual!r}")
    return EXIT_OK


SCALING_HEADER = ("index", "lambda", "n_domains", "r_min", "r_min_sqrt_lambda", "r_bound")


def _load_pairs(p):
    from .eigen import smallest_eigenpairs
    from .grid import assemble_laplacian, build_domain
    from .io import load_bundle

    if p.get("bundle"):
        return load_bundle(p["bundle"])
    d = build_domain(DOMAIN_ALIASES.get(p["domain"], p["domain"]), p["resolution"])
    return d, smallest_eigenpairs(assemble_laplacian(d), p["k"])


def cmd_scaling(cfg: ExperimentConfig) -> int:
    from .experiments import loglog_fit, scaling_row
    from .io import write_csv
    from .plotting import scaling_figure

    p = cfg.params
    d, pairs = _load_pairs(p)
    rows = [scaling_row(i, pair, d) for i, pair in enumerate(pairs) if pair.lam > 0]
    out = Path(p["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "scaling.csv", SCALING_HEADER, [[r[c] for c in SCALING_HEADER] for r in rows])
    lams = [r["lambda"] for r in rows]
    radii = [r["r_min"] for r in rows]
    slope, intercept = loglog_fit(lams, radii) if len(set(lams)) > 1 else (math.nan, math.log(radii[0]) + 0.5 * math.log(lams[0]))
    scaling_figure(lams, radii, -0.5 if math.isnan(slope) else slope, intercept, out / "scaling.svg")
    falsified = [r["index"] for r in rows if r["r_min"] < r["r_bound"]]
    _emit({
        "n": len(rows),
        "slope": slope,
        "floor": min(r["r_min_sqrt_lambda"] for r in rows),
        "csv": "scaling.csv",
        "svg": "scaling.svg",
        "below_bound": falsified,
    })
    return EXIT_FALSIFIED if falsified else EXIT_OK


def _pick(pairs, index):
    if not 0 <= index < len(pairs):
        raise UsageError(f"--index must be in [0, {len(pairs) - 1}]")
    return pairs[index]


CHAIN_HEADER = ("lambda", "n_domains", "r_min", "r_bound", "beta_max", "gamma_min", "all_ok")


def cmd_chain(cfg: ExperimentConfig) -> int:
    from .chain import verify_global_chain
    from .experiments import decompose
    from .io import dumps, write_csv
    from .nodal import inner_radius

    p = cfg.params
    d, pairs = _load_pairs(p)
    pair = _pick(pairs, p["index"])
    dec = decompose(pair, d)
    if p["domain_id"] is None:
        radii = [inner_radius(dec, j, d).radius for j in range(dec.domain_count)]
        did = min(range(dec.domain_count), key=radii.__getitem__)
    else:
        did = p["domain_id"]
        if not 0 <= did < dec.domain_count:
            raise UsageError(f"--domain-id must be in [0, {dec.domain_count - 1}]")
    rep = verify_global_chain(pair, dec, did, d)
    text = dumps(rep.to_dict())
    if p["out"]:
        Path(p["out"]).write_text(text)
        _emit(rep.summary())
    else:
        sys.stdout.write(text)
    if p["csv"]:
        write_csv(p["csv"], CHAIN_HEADER, [[rep.lam, dec.domain_count, rep.r_measured, rep.r_bound,
                                            rep.beta_max, rep.gamma_min, rep.all_ok]])
    return EXIT_OK if rep.all_ok else EXIT_FALSIFIED


def cmd_capacity(cfg: ExperimentConfig) -> int:
    import numpy as np

    from . import poincare as pc

    p = cfg.params
    closed = None
    if p["shape"] == "annulus":
        if not 0 < p["r"] < p["R"] <= 0.5:
            raise UsageError("need 0 < r < R <= 0.5")
        prob = pc.ball_problem(p["dim"], p["resolution"], p["r"], p["R"])
        closed = pc.annulus_capacity(p["r"], p["R"]) if p["dim"] == 2 else pc.ball_shell_capacity(p["r"], p["R"])
    elif p["shape"] == "square-in-square":
        if not 0 < p["r"] < p["R"] < 0.5:
            raise UsageError("need 0 < r < R < 0.5")
        prob = pc.square_problem(p["resolution"], p["r"], p["R"])
    else:
        if not p["mask_file"]:
            raise UsageError("custom-mask-file needs --mask-file")
        with np.load(p["mask_file"]) as z:
            prob = pc.CapacityProblem(z["F"], z["omega"], float(z["spacing"]))
    cap = pc.capacity(prob, p["tol"])
    out = {"capacity": cap, "closed_form": closed, "rel_error": None if closed is None else abs(cap - closed) / closed}
    _emit(out)
    return EXIT_OK


def cmd_harmonic(cfg: ExperimentConfig) -> int:
    from . import harmonic as hm

    p = cfg.params
    if p["obstacle"] != "empty" and not 0 <= p["r0"] <= 1:
        raise UsageError("--r0 must lie in [0, 1]")
    E = {
        "slit": lambda: hm.ObstacleSet.radial_slit(p["r0"]),
        "circle": lambda: hm.ObstacleSet.circle(p["r0"]),
        "empty": hm.ObstacleSet.empty,
    }[p["obstacle"]]()
    est = hm.harmonic_measure_at_zero(E, p["samples"], p["seed"], eps=p["eps"])
    exact = {"slit": lambda: hm.slit_omega_exact(p["r0"]), "circle": lambda: 1.0 if p["r0"] > 0 else 0.0,
             "empty": lambda: 0.0}[p["obstacle"]]()
    implied = (1.0 - est.omega0) / math.sqrt(E.r0) if 0 < E.r0 < math.inf else None
    out = dict(est.to_dict(), implied_C=implied, exact=exact, r0=None if math.isinf(E.r0) else E.r0)
    _emit(out)
    # 5 standard errors plus a Bernoulli floor of one sample
    ok = abs(est.omega0 - exact) <= 5 * est.stderr + 1.0 / p["samples"]
    return EXIT_OK if ok else EXIT_FALSIFIED


NODAL_HEADER2 = ("domain_id", "sign", "volume", "inner_radius", "center_i", "center_j")


def cmd_nodal(cfg: ExperimentConfig) -> int:
    from .experiments import decompose
    from .io import write_csv
    from .nodal import inner_radius, nodal_set_length
    from .plotting import nodal_figure

    p = cfg.params
    d, pairs = _load_pairs(p)
    pair = _pick(pairs, p["index"])
    dec = decompose(pair, d)
    radii = [inner_radius(dec, j, d) for j in range(dec.domain_count)]
    header = NODAL_HEADER2 + (("center_k",) if d.dim == 3 else ())
    if p["csv"]:
        rows = [[j, int(dec.signs[j]), float(dec.volumes[j]), r.radius, *r.center] for j, r in enumerate(radii)]
        write_csv(p["csv"], header, rows)
    if p["svg"]:
        nodal_figure(dec, d, [(r.center, r.radius) for r in radii], p["svg"], title=f"lambda = {pair.lam:.4g}")
    rmin = min(r.radius for r in radii)
    _emit({
        "lambda": pair.lam,
        "n_domains": dec.domain_count,
        "r_min": rmin,
        "r_min_sqrt_lambda": rmin * math.sqrt(pair.lam),
        "nodal_length": nodal_set_length(dec, d) if d.dim == 2 else None,
    })
    return EXIT_OK


def cmd_verify_all(cfg: ExperimentConfig) -> int:
    from .constants import load_constants
    from .experiments import run_all

    results = run_all(constants=load_constants(cfg.constants), echo=lambda s: print(s, flush=True))
    failed = [r.number for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_FALSIFIED if failed else EXIT_OK


def cmd_fit_constants(cfg: ExperimentConfig) -> int:
    from .constants import constants_path
    from .experiments import fit_constants
    from .io import write_json

    path = Path(cfg.params["out"]) if cfg.params["out"] else constants_path(cfg.constants)
    fitted = fit_constants()
    path.parent.mkdir(parents=True, exist_ok=True)
    write_json(path, fitted)
    _emit({k: v["value"] for k, v in fitted.items()})
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "scaling": cmd_scaling,
    "chain": cmd_chain,
    "capacity": cmd_capacity,
    "harmonic": cmd_harmonic,
    "nodal": cmd_nodal,
    "verify-all": cmd_verify_all,
    "fit-constants": cmd_fit_constants,
}


def build_parser() -> Parser:
    ap = Parser(prog="nodal-lab", description="Nodal-domain inner radius experiments.")
    ap.add_argument("--constants", help="frozen constants JSON (default: $NODAL_LAB_CONSTANTS or the packaged file)")
    ap.add_argument("--threads", type=_positive_int, default=1, help="BLAS/OpenMP threads (default 1)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=Parser)

    def source(sp, with_domain=True):
        sp.add_argument("--bundle", help="eigenpair bundle JSON written by 'spectrum'")
        if with_domain:
            sp.add_argument("--domain", choices=DOMAINS, default="square")
            sp.add_argument("--resolution", type=_positive_int, default=65)
            sp.add_argument("--k", type=_positive_int, default=10)

    s = sub.add_parser("spectrum", help="smallest eigenpairs, written as a bundle")
    s.add_argument("--domain", choices=DOMAINS, default="square")
    s.add_argument("--resolution", type=_positive_int, default=65)
    s.add_argument("--size", type=float, nargs="+", default=[1.0], help="side length(s) or disk diameter")
    s.add_argument("--k", type=_positive_int, default=10)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--method", choices=("arpack", "subspace"), default="arpack")
    s.add_argument("--out", default="eig.json")

    s = sub.add_parser("scaling", help="min inner radius per eigenpair: scaling.csv + scaling.svg")
    source(s)
    s.add_argument("--out-dir", default=".")

    s = sub.add_parser("chain", help="cube-cover report for one nodal domain")
    source(s)
    s.add_argument("--index", type=int, default=0, help="0-based eigenpair index")
    s.add_argument("--domain-id", type=int, default=None, help="default: the domain with the smallest inner radius")
    s.add_argument("--out", help="write the full report here and print the summary")
    s.add_argument("--csv", help="one-row summary CSV")

    s = sub.add_parser("capacity", help="discrete capacity of an obstacle")
    s.add_argument("--shape", choices=("annulus", "square-in-square", "custom-mask-file"), default="annulus")
    s.add_argument("--r", type=float, default=0.25)
    s.add_argument("--R", type=float, default=0.5)
    s.add_argument("--dim", type=int, choices=(2, 3), default=2)
    s.add_argument("--resolution", type=_positive_int, default=129)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--mask-file", help=".npz with boolean arrays F, omega and scalar spacing")

    s = sub.add_parser("harmonic", help="walk-on-spheres harmonic measure at 0")
    s.add_argument("--obstacle", choices=("slit", "circle", "empty"), default="slit")
    s.add_argument("--r0", type=float, default=0.1)
    s.add_argument("--samples", type=_positive_int, default=100_000)
    s.add_argument("--eps", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("nodal", help="nodal domains of one eigenpair: CSV table and SVG picture")
    source(s)
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--svg")
    s.add_argument("--csv")

    sub.add_parser("verify-all", help="run the acceptance suite against the frozen constants")
    s = sub.add_parser("fit-constants", help="refit and freeze the suite constants")
    s.add_argument("--out", help="destination (default: the active constants file)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except UsageError as exc:
        print(f"nodal-lab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(args.threads))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    params = {k: v for k, v in vars(args).items() if k not in ("command", "constants", "threads", "verbose")}
    cfg = ExperimentConfig(args.command, params, args.constants, args.threads)

    from .errors import NonConvergence

    try:
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"nodal-lab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonConvergence as exc:
        print(f"nodal-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"nodal-lab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ArithmeticError as exc:
        print(f"nodal-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
