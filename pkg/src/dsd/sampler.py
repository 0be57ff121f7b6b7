"""Exact sampling from determinantal designs and a brute-force distribution oracle.

The projection sampler draws units one at a time: with orthonormal vectors
``e_1..e_j`` already built from the previously drawn rows of ``V``, unit ``k``
is drawn with probability proportional to ``|v_k|^2 - sum_j |<e_j, v_k>|^2``,
then the drawn row is Gram-Schmidt orthogonalised against the ``e_j`` and
appended.  General kernels first select eigenvectors with independent
Bernoulli(lambda_i) coins.

Draws are vectorised: many samples sharing the same projection are advanced
in lock-step, one unit per step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NegativeProbability, NotProjection, NumericalBreakdown, TooLarge
from .kernel import Kernel, is_projection

BREAKDOWN_TOL = 1e-12
DRIFT_TOL = 1e-9


def make_rng(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_seed(base_seed: int, j: int) -> int:
    """Deterministic 64-bit seed for replicate ``j`` of a run seeded with ``base_seed``."""
    ss = np.random.SeedSequence([int(base_seed), int(j)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Sample:
    indices: tuple
    seed: int | None
    kernel_id: str

    def __len__(self):
        return len(self.indices)

    def __contains__(self, k):
        return k in self.indices

    def as_mask(self, N: int) -> np.ndarray:
        m = np.zeros(N, dtype=bool)
        m[list(self.indices)] = True
        return m


def _projection_basis(K: Kernel, tol: float = 1e-9) -> np.ndarray:
    lam = K.eigenvalues
    sel = lam > 0.5
    if np.any(np.abs(lam - np.round(lam)) > tol):
        raise NotProjection("kernel is not a projection (eigenvalues not in {0, 1})")
    return K.eigenvectors[:, sel]


def _draw_rows(cum, u):
    # first index whose cumulative mass reaches u, per row
    idx = (cum < u[:, None]).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


def _run_projection(V, m, rng):
    """Run the sequential projection sampler ``m`` times on basis ``V`` (N x n).

    Returns an int array (m, n) of drawn units in draw order.
    """
    N, n = V.shape
    out = np.empty((m, n), dtype=np.int64)
    if n == 0 or m == 0:
        return out
    resid = np.broadcast_to(np.sum(np.abs(V) ** 2, axis=1), (m, N)).copy()
    E = np.zeros((m, n, n), dtype=V.dtype)  # E[:, j, :] is e_{j+1}
    rows = np.arange(m)
    for step in range(n):
        i = n - step  # mass remaining = i
        np.maximum(resid, 0.0, out=resid)
        tot = resid.sum(axis=1)
        if np.any(np.abs(tot - i) > DRIFT_TOL * max(1, n)):
            raise NumericalBreakdown(f"step probabilities sum to {tot.min()}..{tot.max()}, expected {i}")
        cum = np.cumsum(resid, axis=1)
        u = rng.random(m) * tot
        k = _draw_rows(cum, u)
        out[:, step] = k
        v = V[k]  # (m, n)
        if step:
            coef = np.einsum("mjd,md->mj", E[:, :step].conj(), v)
            w = v - np.einsum("mj,mjd->md", coef, E[:, :step])
        else:
            w = v
        norm = np.linalg.norm(w, axis=1)
        if np.any(norm < BREAKDOWN_TOL):
            raise NumericalBreakdown("Gram-Schmidt vector vanished")
        e = w / norm[:, None]
        E[:, step] = e
        proj = np.abs(np.einsum("kd,md->mk", V, e.conj())) ** 2
        resid -= proj
        resid[rows, k] = 0.0
    return out


def _projection_masks(V, m, rng):
    N = V.shape[0]
    try:
        drawn = _run_projection(V, m, rng)
    except NumericalBreakdown:
        q, _ = np.linalg.qr(V)
        drawn = _run_projection(q, m, rng)
    masks = np.zeros((m, N), dtype=bool)
    if drawn.size:
        masks[np.arange(m)[:, None], drawn] = True
    return masks


def _run_masked(vec, sel, rng):
    """Projection sampler for draws with different eigenvector selections.

    ``sel`` is a boolean (m, N) selection per draw; each draw works with the
    masked basis ``vec * sel[i]`` so that all draws advance together.
    """
    m, N = sel.shape
    masks = np.zeros((m, N), dtype=bool)
    ranks = sel.sum(axis=1)
    steps = int(ranks.max()) if m else 0
    if steps == 0:
        return masks
    w2 = np.abs(vec) ** 2
    resid = sel.astype(float) @ w2.T  # (m, N)
    Ec = np.zeros((m, steps, N), dtype=vec.dtype)  # conjugated orthonormal vectors
    rows = np.arange(m)
    for step in range(steps):
        act = ranks > step
        np.maximum(resid, 0.0, out=resid)
        tot = resid.sum(axis=1)
        left = ranks - step
        if np.any(np.abs(tot[act] - left[act]) > DRIFT_TOL * max(1, steps)):
            raise NumericalBreakdown("step probabilities drifted from the remaining rank")
        u = rng.random(m) * tot
        k = _draw_rows(np.cumsum(resid, axis=1), u)
        v = vec[k] * sel  # masked rows, (m, N)
        if step:
            past = Ec[:, :step]
            coef = past @ v[:, :, None]  # (m, step, 1)
            v = v - (coef.conj().transpose(0, 2, 1) @ past)[:, 0].conj()
        norm = np.linalg.norm(v, axis=1)
        if np.any(norm[act] < BREAKDOWN_TOL):
            raise NumericalBreakdown("Gram-Schmidt vector vanished")
        ec = np.where(act[:, None], v.conj() / np.where(norm > 0, norm, 1.0)[:, None], 0.0)
        Ec[:, step] = ec
        resid -= np.abs(ec @ vec.T) ** 2
        resid[rows[act], k[act]] = 0.0
        resid[~act] = 0.0
        masks[rows[act], k[act]] = True
    return masks


GROUP_LIMIT = 32
MASKED_CHUNK = 2048


def sample_projection_many(K: Kernel, draws: int, seed=None) -> np.ndarray:
    """``draws`` samples from a projection kernel as a boolean (draws, N) array."""
    if not is_projection(K):
        raise NotProjection("sample_projection requires a projection kernel")
    V = _projection_basis(K)
    return _projection_masks(V, int(draws), make_rng(seed))


def sample_general_many(K: Kernel, draws: int, seed=None) -> np.ndarray:
    """``draws`` samples from any kernel as a boolean (draws, N) array.

    Each draw keeps eigenvector ``i`` with probability ``lambda_i``; draws
    sharing the same selection are sampled together, or all draws at once on
    masked bases when the selections are too varied.
    """
    rng = make_rng(seed)
    draws = int(draws)
    N = K.n_units
    lam = K.eigenvalues
    vec = K.eigenvectors
    coins = rng.random((draws, N)) < lam[None, :]
    masks = np.zeros((draws, N), dtype=bool)
    if draws == 0:
        return masks
    # group identical selections; iterate in a fixed order for reproducibility
    keys, inverse = np.unique(coins, axis=0, return_inverse=True)
    if keys.shape[0] > GROUP_LIMIT:
        # too many distinct selections: advance all draws together on masked bases
        for start in range(0, draws, MASKED_CHUNK):
            masks[start:start + MASKED_CHUNK] = _run_masked(vec, coins[start:start + MASKED_CHUNK], rng)
        return masks
    inverse = np.asarray(inverse).reshape(-1)
    for g in range(keys.shape[0]):
        sel = keys[g]
        members = np.flatnonzero(inverse == g)
        if not sel.any():
            continue
        masks[members] = _projection_masks(vec[:, sel], members.size, rng)
    return masks


def _to_sample(mask, seed, K):
    return Sample(tuple(int(i) for i in np.flatnonzero(mask)), seed, K.kernel_id)


def sample_projection(K: Kernel, seed=None) -> Sample:
    """One draw from a projection kernel; always has ``rank(K)`` units."""
    s = seed if isinstance(seed, (int, np.integer)) else None
    return _to_sample(sample_projection_many(K, 1, seed)[0], s, K)


def sample_general(K: Kernel, seed=None) -> Sample:
    """One draw from ``DSD(K)`` for any contracting kernel."""
    s = seed if isinstance(seed, (int, np.integer)) else None
    return _to_sample(sample_general_many(K, 1, seed)[0], s, K)


MAX_EXACT_N = 20


class SubsetDistribution:
    """Law of the random sample, stored as probabilities indexed by bitmask.

    Bit ``k`` of the mask is set when unit ``k`` is in the subset.
    """

    def __init__(self, N, probs):
        self.N = N
        self.probs = probs

    def prob(self, subset) -> float:
        mask = 0
        for k in subset:
            mask |= 1 << int(k)
        return float(self.probs[mask])

    def subsets(self):
        """Subsets in increasing cardinality, lexicographic within a cardinality."""
        for size in range(self.N + 1):
            yield from itertools.combinations(range(self.N), size)

    def items(self):
        for s in self.subsets():
            yield s, self.prob(s)

    def membership(self) -> np.ndarray:
        """Boolean (2^N, N) table: row ``mask`` marks the units of that subset."""
        masks = np.arange(1 << self.N)
        return ((masks[:, None] >> np.arange(self.N)[None, :]) & 1).astype(bool)

    def expectation(self, values) -> float:
        """``E f(S)`` for ``values`` indexed by bitmask."""
        return float(np.dot(self.probs, values))

    def size_pmf(self) -> np.ndarray:
        sizes = self.membership().sum(axis=1)
        return np.bincount(sizes, weights=self.probs, minlength=self.N + 1)

    def __len__(self):
        return self.probs.size


def principal_minors(K: Kernel, chunk: int = 65536) -> np.ndarray:
    """``det(K[s, s])`` for every subset ``s``, indexed by bitmask (empty -> 1)."""
    N = K.n_units
    a = K.entries
    out = np.empty(1 << N)
    out[0] = 1.0
    masks = np.arange(1, 1 << N)
    bits = (masks[:, None] >> np.arange(N)[None, :]) & 1
    sizes = bits.sum(axis=1)
    for size in range(1, N + 1):
        sel = masks[sizes == size]
        idx_all = np.nonzero(bits[sizes == size])[1].reshape(-1, size)
        for start in range(0, sel.size, chunk):
            idx = idx_all[start:start + chunk]
            sub = a[idx[:, :, None], idx[:, None, :]]
            out[sel[start:start + chunk]] = np.linalg.det(sub).real
    return out


def exact_distribution(K: Kernel) -> SubsetDistribution:
    """Exact ``pr(S = s)`` for all subsets by Moebius inversion of the minors.

    ``pr(S = s) = sum_{s' >= s} (-1)^{|s'|-|s|} det(K[s', s'])``.
    """
    N = K.n_units
    if N > MAX_EXACT_N:
        raise TooLarge(f"exact distribution limited to N <= {MAX_EXACT_N}, got {N}")
    f = principal_minors(K)
    for i in range(N):
        v = f.reshape(-1, 2, 1 << i)
        v[:, 0, :] -= v[:, 1, :]
    if f.min() < -1e-10:
        raise NegativeProbability(f"probability {f.min()!r} is negative")
    f = np.clip(f, 0.0, None)
    total = f.sum()
    if abs(total - 1.0) > 1e-9:
        raise NegativeProbability(f"probabilities sum to {total!r}")
    return SubsetDistribution(N, f)


def size_law(K: Kernel) -> np.ndarray:
    """Poisson-binomial pmf of the sample size over ``0..N``."""
    lam = K.eigenvalues
    pmf = np.zeros(lam.size + 1)
    pmf[0] = 1.0
    for i, p in enumerate(lam, start=1):
        pmf[1:i + 1] = pmf[1:i + 1] * (1 - p) + pmf[:i] * p
        pmf[0] *= 1 - p
    return pmf


def masks_to_codes(masks: np.ndarray) -> np.ndarray:
    """Bitmask integer for each row of a boolean (draws, N) array."""
    weights = 1 << np.arange(masks.shape[1], dtype=np.int64)
    return masks.astype(np.int64) @ weights


def empirical_tv(masks: np.ndarray, dist: SubsetDistribution) -> float:
    """Total variation distance between sampled masks and an exact law."""
    counts = np.bincount(masks_to_codes(masks), minlength=len(dist))
    return 0.5 * float(np.abs(counts / masks.shape[0] - dist.probs).sum())
