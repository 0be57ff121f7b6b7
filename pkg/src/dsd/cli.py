"""Command line interface: ``dsd kernel|sample|dist|estimate|optimize|simulate|validate``.

Exit codes: 0 success, 2 invalid input or failed validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import constructions as C
from .errors import DesignValidationError, NumericalFailure
from .estimation import Population, estimate
from .harness import Scenario, rows_to_csv, rows_to_long, run_scenario, validate_kernel_mc
from .io import (
    read_kernel, read_pi, read_points, read_population, read_samples,
    write_distribution, write_kernel, write_samples,
)
from .optimizer import greedy_rotations, ordered_projection, rank1_optimal, unpermute
from .sampler import exact_distribution, sample_general_many

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

SYMBOLS = {
    "const": lambda a: (lambda t: np.full_like(t, a.c)),
    "cosine": lambda a: (lambda t: 0.5 * (1 + np.cos(t))),
    "indicator": lambda a: (lambda t: (t < 2 * np.pi * a.n / a.N).astype(float)),
}


def _out(path):
    return open(path, "w", newline="") if path and path != "-" else sys.stdout


def cmd_kernel(a):
    meta = {"family": a.family}
    if a.family == "poisson":
        K = C.poisson_kernel(read_pi(a.pi_file))
    elif a.family == "roots":
        K = C.toeplitz_root_kernel(C.ToeplitzRootSpec(a.N, a.n, a.r))
    elif a.family == "averaged":
        K = C.averaged_kernel(a.N, a.n)
    elif a.family == "laplacian":
        x = read_points(a.points_file)
        beta = a.beta if a.beta is not None else C.min_beta(x, a.alpha)
        meta["beta"] = beta
        K = C.laplacian_kernel(x, a.alpha, beta)
    elif a.family == "toeplitz":
        K = C.toeplitz_symbol_kernel(SYMBOLS[a.symbol](a), a.N, a.quad_points)
    elif a.family == "etf63":
        K = C.etf63_kernel()
    else:
        K, state = C.schur_horn_projection(read_pi(a.pi_file))
        meta["pivots"] = [int(p) for p in state.pivots]
    write_kernel(K, a.out, meta)
    return EXIT_OK


def cmd_sample(a):
    K = read_kernel(a.kernel)
    masks = sample_general_many(K, a.draws, a.seed)
    write_samples(masks, a.out)
    return EXIT_OK


def cmd_dist(a):
    write_distribution(exact_distribution(read_kernel(a.kernel)), a.out)
    return EXIT_OK


def cmd_estimate(a):
    K = read_kernel(a.kernel)
    pop = read_population(a.pop)
    if a.weights == "ht":
        w = None
    elif a.weights == "pop":
        w = pop.weights
    else:
        w = read_pi(a.weights, "w")
    fh = _out(a.out)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["draw", "estimate", "exact_variance", "exact_bias", "var_ht", "var_syg"])
    for i, s in enumerate(read_samples(a.sample)):
        r = estimate(s, pop, K, w)
        fmt = lambda v: "" if v is None else repr(float(v))
        writer.writerow([i, fmt(r.estimate), fmt(r.exact_variance), fmt(r.exact_bias),
                         fmt(r.plugin_variance_ht), fmt(r.plugin_variance_syg)])
    if fh is not sys.stdout:
        fh.close()
    return EXIT_OK


def cmd_optimize(a):
    pop = read_population(a.pop)
    if a.pi_col == "pi":
        if pop.target_pi is None:
            raise DesignValidationError(f"{a.pop}: no 'pi' column")
        pi = pop.target_pi
    else:
        pi = read_pi(a.pop, a.pi_col)
    q = pop.aux_names.index(a.aux)
    w = pop.weights if a.weights == "pop" else 1.0 / pi
    meta = {"method": a.method, "aux": a.aux}
    if a.method == "rank1":
        K = rank1_optimal(pi, pop)
    else:
        Ks, sigma = ordered_projection(pi, pop, q, w)
        if a.method == "rotations":
            sub = Population(pop.y[sigma], pop.aux[:, sigma], w[sigma])
            Ks = greedy_rotations(Ks, sub, w[sigma], a.max_sweeps)
        K = unpermute(Ks, sigma)
        meta["sigma"] = [int(s) + 1 for s in sigma]
    write_kernel(K, a.out, meta)
    return EXIT_OK


def cmd_simulate(a):
    rows = run_scenario(Scenario.from_json(a.scenario))
    with _out(a.out) as fh:
        fh.write(rows_to_csv(rows))
    if a.long:
        with open(a.long, "w") as fh:
            fh.write(rows_to_long(rows))
    return EXIT_OK


def cmd_validate(a):
    K = read_kernel(a.kernel)
    rep = validate_kernel_mc(K, a.draws, a.seed)
    text = json.dumps(rep, indent=2, default=float)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK if rep["ok"] else EXIT_INVALID


def build_parser():
    p = argparse.ArgumentParser(prog="dsd", description="Determinantal sampling designs")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="build a kernel and write it as JSON")
    k.add_argument("family", choices=["poisson", "roots", "averaged", "laplacian", "toeplitz", "etf63", "schurhorn"])
    k.add_argument("--N", type=int)
    k.add_argument("--n", type=int)
    k.add_argument("--r", type=int, default=1)
    k.add_argument("--pi-file")
    k.add_argument("--alpha", type=float, default=0.5)
    k.add_argument("--beta", type=float)
    k.add_argument("--points-file")
    k.add_argument("--symbol", choices=sorted(SYMBOLS), default="indicator")
    k.add_argument("--c", type=float, default=0.5, help="level of the constant symbol")
    k.add_argument("--quad-points", type=int, default=1024)
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_kernel)

    s = sub.add_parser("sample", help="draw samples from a kernel")
    s.add_argument("--kernel", required=True)
    s.add_argument("--draws", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    d = sub.add_parser("dist", help="exact law of the sample (small N)")
    d.add_argument("--kernel", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dist)

    e = sub.add_parser("estimate", help="estimate a total from drawn samples")
    e.add_argument("--kernel", required=True)
    e.add_argument("--pop", required=True)
    e.add_argument("--sample", required=True)
    e.add_argument("--weights", default="ht", help="'ht', 'pop' (w column) or a CSV file with a 'w' column")
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    o = sub.add_parser("optimize", help="build a balanced design for one auxiliary variable")
    o.add_argument("--pop", required=True)
    o.add_argument("--pi-col", default="pi")
    o.add_argument("--aux", default="x1")
    o.add_argument("--method", choices=["rank1", "ordered", "rotations"], default="ordered")
    o.add_argument("--weights", choices=["ht", "pop"], default="ht")
    o.add_argument("--max-sweeps", type=int, default=10)
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_optimize)

    m = sub.add_parser("simulate", help="run a design comparison scenario")
    m.add_argument("--scenario", required=True)
    m.add_argument("--out")
    m.add_argument("--long", help="also write a gnuplot-ready long format file")
    m.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="Monte Carlo check of a kernel against its exact law")
    v.add_argument("--kernel", required=True)
    v.add_argument("--draws", type=int, default=100_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DesignValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
