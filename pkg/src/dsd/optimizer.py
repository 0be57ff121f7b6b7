"""Balanced designs: minimise the summed variance of auxiliary totals over
kernels with a fixed diagonal.

Only constructive heuristics are provided: the rank-one optimum for average
size at most one, ordering followed by the Schur-Horn projection, and a greedy
sweep of diagonal-preserving plane rotations.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constructions import schur_horn_projection
from .errors import NoRealRoot, OutOfRange, SumExceedsOne
from .estimation import Population
from .kernel import Kernel

log = logging.getLogger(__name__)

ACCEPT_TOL = 1e-14
EQUAL_DIAG_TOL = 1e-12


def _z_matrix(pop: Population, weights=None) -> np.ndarray:
    if pop.aux.shape[0] == 0:
        raise OutOfRange("population has no auxiliary variables")
    w = pop.weights if weights is None else np.asarray(weights, dtype=float)
    return pop.aux * w[None, :]


def balanced_objective(K: Kernel, pop: Population, weights=None) -> float:
    """``sum_q (z^q)^T ((I - K) * conj(K)) z^q`` with ``z^q = w * x^q``."""
    Z = _z_matrix(pop, weights)
    a = K.entries
    delta = ((np.eye(a.shape[0]) - a) * a.conj()).real
    return float(np.einsum("qk,kl,ql->", Z, delta, Z))


def rank1_optimal(pi, pop: Population | None = None) -> Kernel:
    """Rank-one kernel ``b b^T`` with ``b_k = sqrt(pi_k)``.

    Samples nothing with probability ``1 - sum(pi)`` and exactly unit ``k``
    with probability ``pi_k``.  It minimises the objective when the auxiliary
    variables are nonnegative.
    """
    p = np.asarray(pi, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise OutOfRange("inclusion probabilities must lie in [0, 1]")
    if p.sum() > 1 + 1e-12:
        raise SumExceedsOne(f"probabilities sum to {p.sum()!r} > 1")
    if pop is not None and pop.aux.size and np.any(pop.aux < 0):
        warnings.warn("rank-one design is optimal only for nonnegative auxiliary variables", stacklevel=2)
    b = np.sqrt(p)
    return Kernel(np.outer(b, b).astype(complex))


def ordered_projection(pi, pop: Population, q: int = 0, weights=None) -> tuple[Kernel, np.ndarray]:
    """Schur-Horn projection on units sorted by ``z = w * x^q``.

    Returns the kernel in sorted order and ``sigma`` such that position ``j``
    holds unit ``sigma[j]``; its diagonal is ``pi[sigma]``.
    """
    p = np.asarray(pi, dtype=float)
    z = _z_matrix(pop, weights)[q]
    sigma = np.argsort(z, kind="stable")
    K, _ = schur_horn_projection(p[sigma])
    return K, sigma


def unpermute(K: Kernel, sigma) -> Kernel:
    """Relabel a kernel built on sorted positions back to original units."""
    inv = np.argsort(sigma)
    return Kernel(K.entries[np.ix_(inv, inv)])


@dataclass(frozen=True)
class RotationParams:
    k: int
    l: int
    t: float
    sin_theta: float
    cos_theta: float

    def matrix(self) -> np.ndarray:
        s, c = self.sin_theta, self.cos_theta
        return np.array([[s, c], [-c, s]])


def rotation_solve(a1: float, a2: float, a21, pi1: float, k: int = 0, l: int = 1) -> RotationParams:
    """Plane rotation ``Q = [[s, c], [-c, s]]`` moving diagonal ``(a1, a2)`` to ``(pi1, a1+a2-pi1)``.

    Applied as ``Q^T A Q``.  ``t = c/s`` solves
    ``(a2 - pi1) t^2 - 2 Re(a21) t + (a1 - pi1) = 0``; the root of smaller
    modulus is returned.
    """
    b = float(np.real(a21))
    lead = a2 - pi1
    if lead == 0:
        raise NoRealRoot("a2 == pi1: rotation equation degenerates")
    disc = b * b - (a1 - pi1) * (a2 - pi1)
    if disc < -1e-12:
        raise NoRealRoot(f"negative discriminant {disc!r}")
    root = math.sqrt(max(disc, 0.0))
    big = b + math.copysign(root, b) if b != 0 else root
    if big == 0:
        t = 0.0
    else:
        t = (a1 - pi1) / big  # product of roots / larger root
    s = 1.0 / math.sqrt(1.0 + t * t)
    return RotationParams(k, l, t, s, t * s)


def rotation_for_pair(K: np.ndarray, k: int, l: int) -> RotationParams:
    """Non-trivial rotation in the (k, l) plane keeping the whole diagonal fixed."""
    pk, pl = K[k, k].real, K[l, l].real
    t = 2.0 * float(np.real(K[l, k])) / (pl - pk)
    s = 1.0 / math.sqrt(1.0 + t * t)
    return RotationParams(k, l, t, s, t * s)


def apply_rotation(K: np.ndarray, rot: RotationParams) -> np.ndarray:
    """``W^T K W`` where ``W`` embeds ``rot.matrix()`` in rows/columns (k, l)."""
    out = np.array(K, copy=True)
    k, l, s, c = rot.k, rot.l, rot.sin_theta, rot.cos_theta
    rk, rl = out[k].copy(), out[l].copy()
    out[k], out[l] = s * rk - c * rl, c * rk + s * rl
    ck, cl = out[:, k].copy(), out[:, l].copy()
    out[:, k], out[:, l] = s * ck - c * cl, c * ck + s * cl
    return out


def greedy_rotations(K: Kernel, pop: Population, weights=None, max_sweeps: int = 10) -> Kernel:
    """Sweep pairs (k < l) with distinct diagonal entries; keep a rotation iff it
    lowers the objective by more than ``1e-14``.
    """
    if not K.is_real():
        raise OutOfRange("greedy rotations need a real symmetric kernel")
    Z = _z_matrix(pop, weights)
    G = Z.T @ Z  # sum_q z^q (z^q)^T
    A = K.entries.real.copy()
    N = A.shape[0]
    d = np.diag(A).copy()
    pairs = [(k, l) for k in range(N) for l in range(k + 1, N) if abs(d[k] - d[l]) > EQUAL_DIAG_TOL]
    # objective = sum_k G_kk A_kk (1 - A_kk) - sum_{k != l} G_kl A_kl^2 ; only the
    # second sum changes, through rows/columns k and l
    accepted = 0
    for sweep in range(max_sweeps):
        improved = False
        for k, l in pairs:
            rot = rotation_for_pair(A, k, l)
            s, c = rot.sin_theta, rot.cos_theta
            rk, rl = A[k], A[l]
            nk, nl = s * rk - c * rl, c * rk + s * rl
            mask = np.ones(N, dtype=bool)
            mask[[k, l]] = False
            old = 2 * (G[k, mask] @ rk[mask] ** 2 + G[l, mask] @ rl[mask] ** 2) + 2 * G[k, l] * A[k, l] ** 2
            new_kl = c * s * (A[k, k] - A[l, l]) + (s * s - c * c) * A[k, l]
            new = 2 * (G[k, mask] @ nk[mask] ** 2 + G[l, mask] @ nl[mask] ** 2) + 2 * G[k, l] * new_kl ** 2
            # objective decreases when the coupling term grows
            if new - old > ACCEPT_TOL:
                A = apply_rotation(A, rot)
                A[k, k], A[l, l] = d[k], d[l]
                improved = True
                accepted += 1
        log.debug("sweep %d: %d rotations accepted so far", sweep, accepted)
        if not improved:
            break
    return Kernel(0.5 * (A + A.T))
