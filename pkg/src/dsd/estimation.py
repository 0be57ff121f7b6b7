"""Linear estimators of a total under a determinantal design.

Exact variance and bias come straight from the kernel: with ``z = w * y``,
``var = z^T Delta z`` and ``bias = sum_k (w_k pi_k - 1) y_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotFixedSize, OutOfRange, ZeroInclusion, ZeroJointInclusion
from .kernel import Kernel, inclusion_probs, is_projection, restrict

JOINT_TOL = 1e-12


@dataclass
class Population:
    """Finite population: variable of interest, auxiliaries, weights.

    ``aux`` has shape (Q, N).  ``weights`` defaults to ones; ``target_pi`` is
    optional and only carried along.
    """

    y: np.ndarray
    aux: np.ndarray = None
    weights: np.ndarray = None
    target_pi: np.ndarray = None
    aux_names: list = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        N = self.y.size
        if self.aux is None:
            self.aux = np.zeros((0, N))
        self.aux = np.atleast_2d(np.asarray(self.aux, dtype=float))
        if self.aux.size == 0:
            self.aux = self.aux.reshape(0, N)
        if self.weights is None:
            self.weights = np.ones(N)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.target_pi is not None:
            self.target_pi = np.asarray(self.target_pi, dtype=float)
        if self.aux.shape[1] != N or self.weights.size != N:
            raise OutOfRange("population vectors must all have length N")
        if self.target_pi is not None and self.target_pi.size != N:
            raise OutOfRange("target_pi must have length N")
        if np.any(self.weights <= 0):
            raise OutOfRange("weights must be positive")
        if not self.aux_names:
            self.aux_names = [f"x{q + 1}" for q in range(self.aux.shape[0])]

    @property
    def n_units(self) -> int:
        return self.y.size

    @property
    def z(self) -> np.ndarray:
        return self.weights * self.y

    @property
    def total(self) -> float:
        return float(self.y.sum())

    def with_y(self, y, weights=None) -> "Population":
        return Population(y, self.aux, self.weights if weights is None else weights,
                          self.target_pi, list(self.aux_names))


@dataclass
class EstimationReport:
    estimate: float
    exact_variance: float | None = None
    exact_bias: float | None = None
    plugin_variance_ht: float | None = None
    plugin_variance_syg: float | None = None

    @property
    def exact_mse(self):
        if self.exact_variance is None or self.exact_bias is None:
            return None
        return self.exact_variance + self.exact_bias ** 2


def _indices(sample):
    idx = getattr(sample, "indices", sample)
    return np.asarray(list(idx), dtype=int)


def ht_weights(K: Kernel) -> np.ndarray:
    pi = K.diagonal
    if np.any(pi <= 0):
        raise ZeroInclusion(f"unit {int(np.argmin(pi))} has zero inclusion probability")
    return 1.0 / pi


def linear_total(sample, pop: Population, weights=None) -> float:
    w = pop.weights if weights is None else np.asarray(weights, dtype=float)
    idx = _indices(sample)
    return float(np.sum(w[idx] * pop.y[idx]))


def ht_total(sample, pop: Population, K: Kernel) -> float:
    return linear_total(sample, pop, ht_weights(K))


def linear_totals_many(masks: np.ndarray, values) -> np.ndarray:
    """``sum_{k in S} values_k`` for each boolean row of ``masks``."""
    return masks.astype(float) @ np.asarray(values, dtype=float)


def mse_exact(K: Kernel, pop: Population, weights=None) -> tuple[float, float, float]:
    """``(mse, variance, bias)`` of the linear estimator with fixed weights."""
    w = pop.weights if weights is None else np.asarray(weights, dtype=float)
    z = w * pop.y
    ip = inclusion_probs(K)
    if is_projection(K):
        # z^T Delta z = ||(I - K) diag(z) K||_F^2 for projections; exactly zero
        # when diag(z) commutes with K instead of a cancelling sum
        a = K.entries
        r = z[:, None] * a
        r = r - a @ r
        var = float(np.sum(np.abs(r) ** 2))
    else:
        var = float(z @ ip.delta @ z)
    bias = float(np.sum((w * ip.first_order - 1.0) * pop.y))
    return var + bias ** 2, var, bias


def variance_geometric(K: Kernel, z) -> float:
    """``<<I - K, K>>`` for ``Z = diag(z)``, with complex square roots of ``z``.

    Independent route to ``z^T Delta z``:
    ``<A, B> = tr(conj(A)^T B)`` applied to ``conj(R)^T (I-K) R`` and
    ``R K conj(R)^T`` where ``R = diag(sqrt(z))``.
    """
    r = np.sqrt(np.asarray(z, dtype=complex))
    a = K.entries
    lhs = r.conj()[:, None] * (np.eye(a.shape[0]) - a) * r[None, :]
    rhs = r[:, None] * a * r.conj()[None, :]
    return float(np.sum(lhs.conj() * rhs).real)


def _check_pairs(idx, second):
    sub = second[np.ix_(idx, idx)]
    bad = np.argwhere(sub <= JOINT_TOL)
    if bad.size:
        k, l = idx[bad[0, 0]], idx[bad[0, 1]]
        raise ZeroJointInclusion(f"joint inclusion probability of units ({k}, {l}) is zero", pair=(int(k), int(l)))
    return sub


def var_estimate_ht(sample, pop: Population, K: Kernel, weights=None) -> float:
    """Horvitz-Thompson estimator of the variance from one realised sample."""
    w = pop.weights if weights is None else np.asarray(weights, dtype=float)
    idx = _indices(sample)
    ip = inclusion_probs(K)
    sub = _check_pairs(idx, ip.second_order)
    z = (w * pop.y)[idx]
    return float(z @ (ip.delta[np.ix_(idx, idx)] / sub) @ z)


def var_estimate_syg(sample, pop: Population, K: Kernel, weights=None) -> float:
    """Sen-Yates-Grundy variance estimator; fixed-size (projection) kernels only.

    ``(1/2) sum_{k,l in S} (z_k - z_l)^2 (pi_k pi_l - pi_kl) / pi_kl``.
    """
    if not is_projection(K):
        raise NotFixedSize("Sen-Yates-Grundy estimator needs a fixed-size design")
    w = pop.weights if weights is None else np.asarray(weights, dtype=float)
    idx = _indices(sample)
    ip = inclusion_probs(K)
    sub = _check_pairs(idx, ip.second_order)
    z = (w * pop.y)[idx]
    diff2 = (z[:, None] - z[None, :]) ** 2
    return float(-0.5 * np.sum(diff2 * ip.delta[np.ix_(idx, idx)] / sub))


def estimate(sample, pop: Population, K: Kernel, weights=None) -> EstimationReport:
    """Point estimate with exact moments and whichever plug-in variances apply."""
    w = ht_weights(K) if weights is None else np.asarray(weights, dtype=float)
    _, var, bias = mse_exact(K, pop, w)
    rep = EstimationReport(linear_total(sample, pop, w), var, bias)
    try:
        rep.plugin_variance_ht = var_estimate_ht(sample, pop, K, w)
    except ZeroJointInclusion:
        pass
    if is_projection(K):
        try:
            rep.plugin_variance_syg = var_estimate_syg(sample, pop, K, w)
        except ZeroJointInclusion:
            pass
    return rep


def level_sets(values, rtol: float = 1e-9) -> list[list[int]]:
    """Group indices whose values agree to ``rtol`` (relative to the largest |value|)."""
    v = np.asarray(values, dtype=float)
    scale = max(float(np.max(np.abs(v))), 1e-300)
    order = np.argsort(v, kind="stable")
    groups, cur = [], [int(order[0])]
    for a, b in zip(order[:-1], order[1:]):
        if v[b] - v[a] <= rtol * scale:
            cur.append(int(b))
        else:
            groups.append(sorted(cur))
            cur = [int(b)]
    groups.append(sorted(cur))
    return sorted(groups, key=lambda g: g[0])


@dataclass
class PerfectEstimationReport:
    is_perfect: bool
    strata: list
    is_projection: bool
    commutes: bool
    stratified_fixed_size: bool
    reasons: list = field(default_factory=list)


def perfect_estimation_check(K: Kernel, pop: Population, tol: float = 1e-9) -> PerfectEstimationReport:
    """Check whether the HT estimator of ``t_y`` has zero MSE under ``DSD(K)``.

    Three equivalent conditions are checked separately: ``K`` is a projection;
    ``K`` commutes with ``diag(y / pi)``; the design is stratified along the
    level sets of ``y / pi`` with a fixed size in each stratum.
    """
    w = ht_weights(K)
    z = w * pop.y
    reasons = []
    proj = is_projection(K, tol)
    if not proj:
        reasons.append("kernel is not a projection")
    a = K.entries
    comm = float(np.max(np.abs(z[:, None] * a - a * z[None, :])))
    commutes = comm <= tol * max(1.0, float(np.max(np.abs(z))))
    if not commutes:
        reasons.append(f"kernel does not commute with diag(y/pi) (max {comm:.3e})")
    strata = level_sets(z)
    label = np.empty(K.n_units, dtype=int)
    for j, g in enumerate(strata):
        label[g] = j
    off = np.abs(a)[label[:, None] != label[None, :]]
    strat_ok = off.size == 0 or float(off.max()) <= tol
    if not strat_ok:
        reasons.append("kernel couples units from different level sets of y/pi")
    for g in strata:
        sub = restrict(K, g)
        tr = float(np.trace(sub.entries).real)
        if abs(tr - round(tr)) > tol or not is_projection(sub, tol):
            strat_ok = False
            reasons.append(f"stratum starting at unit {g[0]} is not of fixed size")
            break
    perfect = proj and commutes and strat_ok
    return PerfectEstimationReport(perfect, strata if perfect else [], proj, commutes, strat_ok, reasons)


def concentration_bound(K: Kernel, pop: Population, weights=None, a: float = 1.0) -> tuple[float, float]:
    """Tail bounds for ``t_hat - E t_hat``: ``(one_sided, two_sided)``.

    General kernels: ``3 exp(-a^2 / (16 (aC + 2 mu C^2)))`` and
    ``5 exp(-a^2 / (256 (aC + 2 mu C^2)))``.  Projections of rank ``n`` get
    ``exp(-a^2/(8 n C^2))`` and twice that.  ``C = max |w_k y_k|``,
    ``mu = tr(K)``.
    """
    if a <= 0:
        raise OutOfRange("deviation a must be positive")
    w = pop.weights if weights is None else np.asarray(weights, dtype=float)
    C = float(np.max(np.abs(w * pop.y)))
    mu = float(K.diagonal.sum())
    if C == 0:
        return 0.0, 0.0
    if is_projection(K):
        n = round(mu)
        e = math.exp(-a * a / (8 * n * C * C))
        return e, 2 * e
    denom = a * C + 2 * mu * C * C
    return 3 * math.exp(-a * a / (16 * denom)), 5 * math.exp(-a * a / (256 * denom))
