"""Monte Carlo validation and design comparison campaigns.

``run_scenario`` compares, on one population, the coefficient of variation of
the Horvitz-Thompson estimator under several designs: exact values for the
determinantal ones, Monte Carlo estimates for systematic sampling.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .constructions import poisson_kernel, schur_horn_projection
from .errors import OutOfRange, SumNotInteger
from .estimation import Population, concentration_bound, mse_exact
from .kernel import Kernel, inclusion_probs, is_projection
from .optimizer import greedy_rotations, ordered_projection, unpermute
from .sampler import derive_seed, exact_distribution, empirical_tv, make_rng, sample_general_many, size_law

log = logging.getLogger(__name__)


def baseline_systematic(pi, ordering=None, seed=None) -> np.ndarray:
    """Systematic PPS sample (0-based units, sorted).

    Units are laid out in ``ordering`` with lengths ``pi``; a uniform start
    ``u`` selects the units whose cumulative interval contains ``u + j``.
    """
    return baseline_systematic_many(pi, 1, ordering, seed)[0]


def baseline_systematic_many(pi, draws, ordering=None, seed=None):
    p = np.asarray(pi, dtype=float)
    if np.any(p <= 0) or np.any(p > 1):
        raise OutOfRange("systematic sampling needs probabilities in (0, 1]")
    n = round(p.sum())
    if abs(p.sum() - n) > 1e-9:
        raise SumNotInteger(f"probabilities sum to {p.sum()!r}")
    order = np.arange(p.size) if ordering is None else np.asarray(ordering)
    cum = np.cumsum(p[order])
    cum[-1] = n
    rng = make_rng(seed)
    u = rng.random(int(draws))
    points = u[:, None] + np.arange(n)[None, :]
    pos = np.searchsorted(cum, points, side="right")
    pos = np.minimum(pos, p.size - 1)
    return [np.sort(order[row]) for row in pos]


def systematic_masks(pi, draws, ordering=None, seed=None) -> np.ndarray:
    samples = baseline_systematic_many(pi, draws, ordering, seed)
    masks = np.zeros((len(samples), len(pi)), dtype=bool)
    for i, s in enumerate(samples):
        masks[i, s] = True
    return masks


# ----------------------------------------------------------------------------
# populations and probability schemes


def synthetic_population(spec: dict, seed) -> Population:
    """Log-normal ``x1`` plus linear-model auxiliaries ``x2..xQ`` (all positive).

    ``spec``: ``{"N": 500, "sigma": 0.5, "models": [{"slope": 0.8, "noise": 0.3}, ...]}``.
    Each model ``x = exp(slope * log(x1) + noise * eps)``, i.e. linear on the log scale.
    """
    rng = make_rng(seed)
    N = int(spec["N"])
    sigma = float(spec.get("sigma", 0.5))
    log_x1 = rng.normal(0.0, sigma, N)
    xs = [np.exp(log_x1)]
    for m in spec.get("models", [{"slope": 0.8, "noise": 0.3}, {"slope": 0.5, "noise": 0.5}]):
        eps = rng.normal(0.0, 1.0, N)
        xs.append(np.exp(float(m["slope"]) * log_x1 + float(m["noise"]) * sigma * eps))
    aux = np.vstack(xs)
    return Population(aux[0].copy(), aux, aux_names=[f"x{q + 1}" for q in range(aux.shape[0])])


def inclusion_scheme(pop: Population, n: int, scheme: str) -> np.ndarray:
    """``"equal"``: n/N; ``"proportional"``: n x1_k / t_x1 (error if any reaches 1)."""
    N = pop.n_units
    if scheme == "equal":
        return np.full(N, n / N)
    if scheme == "proportional":
        x1 = pop.aux[0]
        p = np.clip(n * x1 / x1.sum(), 1e-12, None)
        p = p * (n / p.sum())
        if np.any(p >= 1):
            raise OutOfRange(f"proportional scheme gives pi >= 1 for n={n}")
        return p
    raise OutOfRange(f"unknown probability scheme {scheme!r}")


@dataclass
class Scenario:
    name: str = "scenario"
    population: dict = field(default_factory=lambda: {"N": 500})
    population_file: str | None = None
    sizes: list = field(default_factory=lambda: [10, 25, 50])
    schemes: list = field(default_factory=lambda: ["equal", "proportional"])
    variables: list = field(default_factory=lambda: ["x2", "x3"])
    designs: list = field(default_factory=lambda: ["dsd_ordered", "dsd_unordered", "poisson", "systematic"])
    draws: int = 10_000
    base_seed: int = 0
    mc_dsd: bool = False
    max_sweeps: int = 3
    timings: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise OutOfRange(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


DSD_DESIGNS = {"dsd_ordered", "dsd_unordered", "dsd_rotations", "poisson"}
REPORT_COLUMNS = ["scenario", "design", "variable", "n", "scheme", "cv", "cv_se", "runtime_ms"]


def _design_kernel(design, pi, pop, var_idx, weights, max_sweeps):
    if design == "poisson":
        return poisson_kernel(pi)
    if design == "dsd_unordered":
        return schur_horn_projection(pi)[0]
    if design in ("dsd_ordered", "dsd_rotations"):
        Ks, sigma = ordered_projection(pi, pop, var_idx, weights)
        if design == "dsd_rotations":
            sorted_pop = Population(pop.y[sigma], pop.aux[:, sigma], pop.weights[sigma])
            Ks = greedy_rotations(Ks, sorted_pop, weights[sigma], max_sweeps)
        return unpermute(Ks, sigma)
    raise OutOfRange(f"unknown design {design!r}")


def _mc_cv(masks, z, total):
    est = masks.astype(float) @ z
    err2 = (est - total) ** 2
    mse = float(err2.mean())
    se_mse = float(err2.std(ddof=1) / math.sqrt(err2.size)) if err2.size > 1 else float("nan")
    cv = math.sqrt(mse) / abs(total)
    cv_se = se_mse / (2 * math.sqrt(mse) * abs(total)) if mse > 0 else 0.0
    return cv, cv_se


def run_scenario(s: Scenario, pop: Population | None = None) -> list[dict]:
    """One row per (variable, size, scheme, design), in that nesting order."""
    if pop is None:
        if s.population_file:
            from .io import read_population

            pop = read_population(s.population_file)
        else:
            pop = synthetic_population(s.population, derive_seed(s.base_seed, 0))
    names = list(pop.aux_names)
    rows = []
    cell = 0
    for var in s.variables:
        q = names.index(var)
        x = pop.aux[q]
        total = float(x.sum())
        for n in s.sizes:
            for scheme in s.schemes:
                pi = inclusion_scheme(pop, n, scheme)
                w = 1.0 / pi
                z = w * x
                for design in s.designs:
                    cell += 1
                    t0 = time.perf_counter()
                    seed = derive_seed(s.base_seed, cell)
                    if design in DSD_DESIGNS:
                        K = _design_kernel(design, pi, pop, q, w, s.max_sweeps)
                        mse, _, _ = mse_exact(K, pop.with_y(x), w)
                        cv, cv_se = math.sqrt(max(mse, 0.0)) / abs(total), 0.0
                        if s.mc_dsd:
                            masks = sample_general_many(K, s.draws, seed)
                            cv_mc, se_mc = _mc_cv(masks, z, total)
                            rows.append(_row(s, design + "_mc", var, n, scheme, cv_mc, se_mc, t0))
                    elif design == "systematic":
                        order = np.argsort(x, kind="stable")
                        cv, cv_se = _mc_cv(systematic_masks(pi, s.draws, order, seed), z, total)
                    elif design == "systematic_w":
                        order = np.argsort(z, kind="stable")
                        cv, cv_se = _mc_cv(systematic_masks(pi, s.draws, order, seed), z, total)
                    else:
                        raise OutOfRange(f"unknown design {design!r}")
                    rows.append(_row(s, design, var, n, scheme, cv, cv_se, t0))
    return rows


def _row(s, design, var, n, scheme, cv, cv_se, t0):
    runtime = f"{(time.perf_counter() - t0) * 1e3:.1f}" if s.timings else ""
    return {
        "scenario": s.name, "design": design, "variable": var, "n": n, "scheme": scheme,
        "cv": f"{cv:.12g}", "cv_se": f"{cv_se:.6g}", "runtime_ms": runtime,
    }


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def rows_to_long(rows) -> str:
    """Whitespace-separated long format, one block per (scenario, variable, scheme, design)."""
    out = []
    key = None
    for r in sorted(rows, key=lambda r: (r["variable"], r["scheme"], r["design"], int(r["n"]))):
        k = (r["variable"], r["scheme"], r["design"])
        if k != key:
            if key is not None:
                out.append("\n\n")
            out.append(f"# {r['scenario']} {' '.join(k)}\n")
            key = k
        out.append(f"{r['n']} {r['cv']} {r['cv_se']}\n")
    return "".join(out)


# ----------------------------------------------------------------------------
# kernel validation by simulation


def validate_kernel_mc(K: Kernel, draws: int = 100_000, seed=0, y=None, z_threshold: float = 4.0) -> dict:
    """Compare sampled frequencies with the exact law of ``DSD(K)``.

    Reports z-scores of first and second order frequencies, a chi-square test
    of the size law, TV distance to the exact law (N <= 10), an empirical tail
    check of the concentration bounds and, for fixed-size kernels with trace
    >= 50, skewness and excess kurtosis of the standardised HT estimator.
    """
    N = K.n_units
    masks = sample_general_many(K, draws, seed)
    M = masks.shape[0]
    ip = inclusion_probs(K)
    rep = {"N": N, "draws": M, "kernel_id": K.kernel_id}

    f1 = masks.mean(axis=0)
    se1 = np.sqrt(ip.first_order * (1 - ip.first_order) / M)
    z1 = np.where(se1 > 0, (f1 - ip.first_order) / np.where(se1 > 0, se1, 1), np.where(f1 != ip.first_order, np.inf, 0))
    rep["max_abs_z_first"] = float(np.max(np.abs(z1)))

    mf = masks.astype(float)
    f2 = (mf.T @ mf) / M
    p2 = np.clip(ip.second_order, 0, 1)
    se2 = np.sqrt(p2 * (1 - p2) / M)
    off = ~np.eye(N, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        z2 = np.where(se2 > 1e-15, (f2 - p2) / se2, np.where(np.abs(f2 - p2) > 0, np.inf, 0.0))
    rep["max_abs_z_pair"] = float(np.max(np.abs(z2[off]))) if N > 1 else 0.0

    sizes = masks.sum(axis=1)
    pmf = size_law(K)
    observed = np.bincount(sizes, minlength=N + 1)
    support = pmf > 1e-12
    rep["size_outside_support"] = int(observed[~support].sum())
    if support.sum() > 1:
        exp_counts = pmf[support] * M
        chi2 = float(np.sum((observed[support] - exp_counts) ** 2 / exp_counts))
        rep["size_chi2"] = chi2
        rep["size_chi2_p"] = float(stats.chi2.sf(chi2, support.sum() - 1))
    else:
        rep["size_chi2"] = 0.0
        rep["size_chi2_p"] = 1.0

    if N <= 10:
        rep["tv"] = empirical_tv(masks, exact_distribution(K))

    yv = np.ones(N) if y is None else np.asarray(y, dtype=float)
    pos = ip.first_order > 0
    w = np.where(pos, 1.0 / np.where(pos, ip.first_order, 1.0), 0.0)
    pop = Population(yv, weights=np.where(pos, w, 1.0))
    z = w * yv
    est = mf @ z
    mean = float(np.sum(ip.first_order * z))
    var = float(z @ ip.delta @ z)
    sigma = math.sqrt(max(var, 0.0))
    tails = []
    if sigma > 0:
        for mult in (1, 2, 4):
            a = mult * sigma
            one, two = concentration_bound(K, pop, np.where(pos, w, 0.0), a)
            dev = est - mean
            tails.append({
                "a": a, "one_sided_freq": float(np.mean(dev > a)), "one_sided_bound": one,
                "two_sided_freq": float(np.mean(np.abs(dev) > a)), "two_sided_bound": two,
            })
    rep["tails"] = tails
    rep["tails_ok"] = all(t["one_sided_freq"] <= t["one_sided_bound"] and t["two_sided_freq"] <= t["two_sided_bound"] for t in tails)

    trace = float(ip.first_order.sum())
    if is_projection(K) and trace >= 50 and sigma > 0:
        std = (est - mean) / sigma
        rep["clt_skewness"] = float(stats.skew(std))
        rep["clt_excess_kurtosis"] = float(stats.kurtosis(std))

    rep["ok"] = bool(
        rep["max_abs_z_first"] <= z_threshold
        and rep["max_abs_z_pair"] <= z_threshold
        and rep["size_outside_support"] == 0
        and rep["size_chi2_p"] > 1e-3
        and rep["tails_ok"]
    )
    return rep
