"""Kernels of determinantal sampling designs and their inclusion probabilities.

A kernel is a Hermitian contracting matrix ``K`` (eigenvalues in ``[0, 1]``).
The design ``DSD(K)`` draws a random subset ``S`` of ``{0, ..., N-1}`` with
``pr(s <= S) = det(K[s, s])``.  Indices are 0-based throughout the Python API.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDomain, NotContracting, NotHermitian

HERMITIAN_TOL = 1e-10
EIGEN_TOL = 1e-9
DIAG_TOL = 1e-10
REAL_TOL = 1e-12


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class Kernel:
    """Validated kernel with a cached eigendecomposition.

    Construct through :func:`validate` (or ``Kernel(entries)``, which calls it).
    Instances are immutable: ``entries``, ``eigenvalues`` and ``eigenvectors``
    are read-only arrays.
    """

    __slots__ = ("_entries", "_eigenvalues", "_eigenvectors", "_id")

    def __init__(self, entries, *, _eig=None):
        a = np.asarray(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise NotHermitian(f"kernel must be a non-empty square matrix, got shape {a.shape}")
        asym = np.max(np.abs(a - a.conj().T))
        if asym > HERMITIAN_TOL:
            raise NotHermitian(f"kernel is not Hermitian (max asymmetry {asym:.3e})")
        d = np.diag(a)
        if np.max(np.abs(d.imag)) > DIAG_TOL:
            raise NotHermitian("kernel diagonal is not real")
        # symmetrize so eigh sees exactly the matrix we store
        a = 0.5 * (a + a.conj().T)
        if _eig is None:
            # real symmetric input keeps real eigenvectors (cheaper sampling)
            lam, vec = np.linalg.eigh(a.real) if not np.any(a.imag) else np.linalg.eigh(a)
        else:
            lam, vec = _eig
        lo, hi = lam[0], lam[-1]
        if lo < -EIGEN_TOL:
            raise NotContracting(f"kernel has eigenvalue {lo!r} < 0", eigenvalue=float(lo))
        if hi > 1 + EIGEN_TOL:
            raise NotContracting(f"kernel has eigenvalue {hi!r} > 1", eigenvalue=float(hi))
        dr = d.real
        if dr.min() < -DIAG_TOL or dr.max() > 1 + DIAG_TOL:
            raise NotContracting("kernel diagonal outside [0, 1]")
        self._entries = _readonly(a)
        self._eigenvalues = _readonly(np.clip(lam, 0.0, 1.0))
        self._eigenvectors = _readonly(vec)
        self._id = None

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def n_units(self) -> int:
        return self._entries.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in ascending order, clamped to ``[0, 1]``."""
        return self._eigenvalues

    @property
    def eigenvectors(self) -> np.ndarray:
        """Unitary matrix whose columns match :attr:`eigenvalues`."""
        return self._eigenvectors

    @property
    def diagonal(self) -> np.ndarray:
        return np.clip(np.diag(self._entries).real, 0.0, 1.0)

    @property
    def kernel_id(self) -> str:
        if self._id is None:
            h = hashlib.sha256(np.ascontiguousarray(self._entries).tobytes())
            self._id = h.hexdigest()[:16]
        return self._id

    def is_real(self, tol: float = REAL_TOL) -> bool:
        return bool(np.max(np.abs(self._entries.imag)) <= tol)

    def __len__(self):
        return self.n_units

    def __repr__(self):
        return f"Kernel(N={self.n_units}, trace={self.diagonal.sum():.6g}, id={self.kernel_id})"


def validate(entries) -> Kernel:
    """Check that ``entries`` is a Hermitian contracting matrix and wrap it."""
    if isinstance(entries, Kernel):
        return entries
    return Kernel(entries)


@dataclass(frozen=True)
class InclusionProbs:
    first_order: np.ndarray
    second_order: np.ndarray
    delta: np.ndarray


def inclusion_probs(K: Kernel) -> InclusionProbs:
    """First and second order inclusion probabilities and the Delta matrix.

    ``pi_k = K_kk``, ``pi_kl = K_kk K_ll - |K_kl|^2`` and
    ``Delta = (I - K) * conj(K)`` (entrywise product).
    """
    a = K.entries
    pi = K.diagonal
    mod2 = np.abs(a) ** 2
    second = np.outer(pi, pi) - mod2
    np.fill_diagonal(second, pi)
    delta = -mod2
    np.fill_diagonal(delta, pi * (1.0 - pi))
    return InclusionProbs(_readonly(pi), _readonly(second), _readonly(delta))


def delta_matrix(K: Kernel) -> np.ndarray:
    """``(I - K) * conj(K)`` computed literally, as a complex matrix."""
    a = K.entries
    return (np.eye(K.n_units) - a) * a.conj()


def is_projection(K: Kernel, tol: float = 1e-9) -> bool:
    a = K.entries
    return bool(np.max(np.abs(a @ a - a)) <= tol)


def size_moments(K: Kernel) -> tuple[float, float]:
    """Mean and variance of the sample size, ``tr(K)`` and ``tr(K - K^2)``."""
    a = K.entries
    mean = float(np.trace(a).real)
    var = float(np.trace(a - a @ a).real)
    return mean, var


def complement(K: Kernel) -> Kernel:
    """Kernel ``I - K`` of the complementary sample."""
    n = K.n_units
    lam = 1.0 - K.eigenvalues[::-1]
    vec = K.eigenvectors[:, ::-1]
    return Kernel(np.eye(n) - K.entries, _eig=(lam, vec))


def restrict(K: Kernel, A) -> Kernel:
    """Kernel of the design restricted to the domain ``A`` (0-based indices)."""
    idx = np.unique(np.asarray(list(A), dtype=int))
    if idx.size == 0:
        raise EmptyDomain("domain must be non-empty")
    if idx[0] < 0 or idx[-1] >= K.n_units:
        raise EmptyDomain(f"domain indices out of range 0..{K.n_units - 1}")
    return Kernel(K.entries[np.ix_(idx, idx)])


def stratification(K: Kernel, tol: float = 1e-9) -> list[list[int]]:
    """Connected components of the graph with an edge wherever ``|K_kl| > tol``.

    Strata are returned sorted by their smallest unit.
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    adj = np.abs(K.entries) > tol
    _, labels = connected_components(csr_matrix(adj), directed=False)
    strata = {}
    for k, lab in enumerate(labels):
        strata.setdefault(lab, []).append(k)
    return sorted(strata.values(), key=lambda s: s[0])
