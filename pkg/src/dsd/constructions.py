"""Kernel families: Poisson, roots of unity, averaged, Laplacian, Toeplitz,
the real (6, 3) equiangular frame, and the Schur-Horn projection ``P^Pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstructionFailed,
    NotContracting,
    NotCoprime,
    OutOfRange,
    SumNotInteger,
)
from .kernel import Kernel, is_projection


def _as_probs(pi, *, open_interval=False):
    p = np.asarray(pi, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise OutOfRange("inclusion probabilities must be a non-empty vector")
    if not np.all(np.isfinite(p)):
        raise OutOfRange("inclusion probabilities must be finite")
    if open_interval:
        if np.any(p <= 0) or np.any(p >= 1):
            raise OutOfRange("inclusion probabilities must lie in (0, 1)")
    elif np.any(p < 0) or np.any(p > 1):
        raise OutOfRange("inclusion probabilities must lie in [0, 1]")
    return p


def poisson_kernel(pi) -> Kernel:
    """Diagonal kernel: independent Bernoulli(pi_k) inclusions."""
    p = _as_probs(pi)
    return Kernel(np.diag(p).astype(complex))


@dataclass(frozen=True)
class ToeplitzRootSpec:
    N: int
    n: int
    r: int = 1

    def __post_init__(self):
        if not (1 <= self.n <= self.N):
            raise OutOfRange(f"need 1 <= n <= N, got n={self.n}, N={self.N}")
        if self.N > 1 and not (1 <= self.r < self.N):
            raise OutOfRange(f"need 1 <= r < N, got r={self.r}")
        if math.gcd(self.r, self.N) != 1:
            raise NotCoprime(f"r={self.r} and N={self.N} are not coprime")


def toeplitz_root_entries(N: int, n: int, r: int) -> np.ndarray:
    """Entries of the fixed-size kernel built on the primitive root exp(2i pi r/N).

    Closed form ``(1/N) sin(n r m pi/N)/sin(r m pi/N) exp(i r (n-1) m pi/N)``
    with ``m = k - l``; the diagonal is ``n/N``.
    """
    k = np.arange(N)
    m = (k[:, None] - k[None, :]).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.sin(n * r * m * np.pi / N) / np.sin(r * m * np.pi / N)
    out = ratio * np.exp(1j * r * (n - 1) * m * np.pi / N) / N
    np.fill_diagonal(out, n / N)
    return out


def toeplitz_root_kernel(spec: ToeplitzRootSpec) -> Kernel:
    return Kernel(toeplitz_root_entries(spec.N, spec.n, spec.r))


def dirichlet_square_sum(N: int, n: int, r: int) -> float:
    """``sum_{k=1}^{N-1} sin^2(n r k pi/N) / sin^2(r k pi/N)``; equals ``n(N-n)``."""
    k = np.arange(1, N)
    return float(np.sum(np.sin(n * r * k * np.pi / N) ** 2 / np.sin(r * k * np.pi / N) ** 2))


def averaged_kernel(N: int, n: int) -> Kernel:
    """Equal-probability kernel ``K^{N,n}``: diagonal n/N, off-diagonal (N-n)/(N(N-1)).

    Spectrum is ``{1, (n-1)/(N-1) x (N-1)}`` so the sample is never empty.
    """
    if not (0 < n < N):
        raise OutOfRange(f"need 0 < n < N, got n={n}, N={N}")
    a = np.full((N, N), (N - n) / (N * (N - 1)))
    np.fill_diagonal(a, n / N)
    lam = np.full(N, (n - 1) / (N - 1))
    lam[-1] = 1.0
    # eigenbasis: constant vector for 1, orthonormal complement for the rest
    q, _ = np.linalg.qr(np.column_stack([np.ones(N), np.eye(N)[:, : N - 1]]))
    vec = np.column_stack([q[:, 1:], q[:, :1]]).astype(complex)
    return Kernel(a.astype(complex), _eig=(lam, vec))


def laplacian_entries(x, alpha: float, beta: float) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    dist = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=-1)
    return alpha * np.exp(-beta * dist)


def laplacian_kernel(x, alpha: float, beta: float) -> Kernel:
    """``L_kl = alpha exp(-beta |x_k - x_l|_1)``; raises NotContracting if beta is too small."""
    if not (0 < alpha < 1):
        raise OutOfRange(f"alpha must lie in (0, 1), got {alpha}")
    if beta <= 0:
        raise OutOfRange(f"beta must be positive, got {beta}")
    return Kernel(laplacian_entries(x, alpha, beta).astype(complex))


def min_beta(x, alpha: float, tol: float = 1e-6, max_iter: int = 60) -> float:
    """Smallest beta (within ``tol``) for which the Laplacian kernel is contracting.

    Doubling until the largest eigenvalue drops to 1, then bisection.
    """
    if not (0 < alpha < 1):
        raise OutOfRange(f"alpha must lie in (0, 1), got {alpha}")

    def lam_max(b):
        return np.linalg.eigvalsh(laplacian_entries(x, alpha, b))[-1]

    hi = 1.0
    for _ in range(max_iter):
        if lam_max(hi) <= 1.0:
            break
        hi *= 2.0
    else:
        raise NotContracting("no contracting beta found (duplicated points with alpha too large?)")
    lo = 0.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if lam_max(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def toeplitz_symbol_kernel(f, N: int, quad_points: int = 1024) -> Kernel:
    """Toeplitz kernel with entries ``(1/2pi) int_0^{2pi} f(t) exp(-i(k-l)t) dt``.

    The integral uses the periodic trapezoidal rule on ``quad_points`` nodes,
    evaluated by FFT.  With at least ``N`` nodes the discrete matrix is
    ``sum_j (f_j/M) u_j u_j^*`` over an orthonormal-up-to-scale frame, hence
    contracting whenever ``0 <= f <= 1``.
    """
    if quad_points < 256:
        raise OutOfRange("quad_points must be at least 256")
    M = max(int(quad_points), 2 * N)
    t = 2 * np.pi * np.arange(M) / M
    vals = np.asarray(np.broadcast_to(f(t), t.shape), dtype=float)
    if np.any(vals < -1e-12) or np.any(vals > 1 + 1e-12):
        raise OutOfRange("symbol must take values in [0, 1]")
    coef = np.fft.fft(vals) / M  # coef[m] = (1/M) sum_j f_j exp(-i m t_j)
    k = np.arange(N)
    m = (k[:, None] - k[None, :]) % M
    return Kernel(coef[m])


_S5 = 1 / math.sqrt(5)
_ETF63_SIGNS = np.array(
    [
        [0, 1, 1, 1, 1, 1],
        [1, 0, -1, -1, 1, 1],
        [1, -1, 0, 1, -1, 1],
        [1, -1, 1, 0, 1, -1],
        [1, 1, -1, 1, 0, -1],
        [1, 1, 1, -1, -1, 0],
    ]
)


def etf63_kernel() -> Kernel:
    """The real rank-3 projection on 6 units whose design is (6, 3)-simple."""
    a = 0.5 * (np.eye(6) + _S5 * _ETF63_SIGNS)
    return Kernel(a.astype(complex))


# Existence table for (N, n)-simple designs with n < 9: "R" real kernel exists,
# "C" only a complex one.
SIMPLE_TABLE = {
    (6, 3): "R", (7, 3): "C", (7, 4): "C", (13, 4): "C", (10, 5): "R",
    (11, 5): "C", (11, 6): "C", (16, 6): "R", (31, 6): "C", (14, 7): "R",
    (15, 7): "C", (28, 7): "R", (15, 8): "C", (29, 8): "C", (57, 8): "C",
}


def _is_odd_square_root(v: float) -> bool:
    s = round(math.sqrt(v))
    return s * s == round(v) and abs(v - round(v)) < 1e-9 and s % 2 == 1


def _sum_of_two_squares(m: int) -> bool:
    a = 0
    while a * a <= m:
        b = math.isqrt(m - a * a)
        if b * b == m - a * a:
            return True
        a += 1
    return False


@dataclass
class FeasibilityReport:
    N: int
    n: int
    complex_possible: str
    real_possible: str
    reasons: list = field(default_factory=list)


def simple_feasibility(N: int, n: int) -> FeasibilityReport:
    """Necessary conditions for an (N, n)-simple determinantal design.

    Each field is one of ``"ruled_out"``, ``"possible"`` (listed in the known
    existence table, directly or via the complement n -> N - n) or ``"unknown"``.
    """
    if not (1 < n < N - 1):
        raise OutOfRange(f"need 1 < n < N - 1, got n={n}, N={N}")
    reasons = []
    cplx_ok = N <= min(n * n, (N - n) ** 2)
    if not cplx_ok:
        reasons.append(f"N={N} > min(n^2, (N-n)^2) = {min(n * n, (N - n) ** 2)}")
    real_ok = cplx_ok
    bound = min(n * (n + 1) // 2, (N - n) * (N - n + 1) // 2)
    if N > bound:
        real_ok = False
        reasons.append(f"real: N={N} > min(n(n+1)/2, (N-n)(N-n+1)/2) = {bound}")
    if N != 2 * n:
        a2 = n * (N - 1) / (N - n)
        b2 = (N - n) * (N - 1) / n
        if not (_is_odd_square_root(a2) and _is_odd_square_root(b2)):
            real_ok = False
            reasons.append(
                f"real: sqrt(n(N-1)/(N-n))={math.sqrt(a2):.4g} and "
                f"sqrt((N-n)(N-1)/n)={math.sqrt(b2):.4g} are not both odd integers"
            )
    else:
        if n % 2 == 0:
            real_ok = False
            reasons.append(f"real: N = 2n requires n odd, got n={n}")
        if not _sum_of_two_squares(N - 1):
            real_ok = False
            reasons.append(f"real: N = 2n requires N-1={N - 1} to be a sum of two squares")
    entry = SIMPLE_TABLE.get((N, n)) or SIMPLE_TABLE.get((N, N - n))
    if entry == "C" and real_ok:
        real_ok = False
        reasons.append("real: excluded by the existence table")

    def status(ok, listed):
        if not ok:
            return "ruled_out"
        return "possible" if listed else "unknown"

    return FeasibilityReport(
        N=N,
        n=n,
        complex_possible=status(cplx_ok, entry is not None),
        real_possible=status(real_ok, entry == "R"),
        reasons=reasons,
    )


@dataclass(frozen=True)
class SchurHornState:
    """Bookkeeping of the closed-form construction, on the stripped population.

    ``pivots`` holds ``k_0 = 0 < k_1 < ... < k_n`` as 1-based positions; ``alphas``
    and ``tails`` are indexed by 0-based unit; ``gammas[r, r']`` is the damping
    product between pivot intervals ``r <= r'`` (zero below the diagonal).
    ``units`` maps positions of the stripped problem back to the input units.
    """

    pivots: np.ndarray
    alphas: np.ndarray
    tails: np.ndarray
    gammas: np.ndarray
    units: np.ndarray
    forced_in: np.ndarray


SUM_TOL = 1e-9
_PIVOT_TOL = 1e-12


def _pivot_data(p):
    N = p.size
    n = int(round(p.sum()))
    cum = np.cumsum(p)
    pivots = [0]
    for r in range(1, n + 1):
        k = int(np.argmax(cum >= r - _PIVOT_TOL)) + 1
        pivots.append(k)
    pivots[-1] = N
    alphas = p.copy()
    for r in range(1, n + 1):
        k = pivots[r]
        prev = cum[k - 2] if k >= 2 else 0.0
        alphas[k - 1] = min(max(r - prev, 0.0), p[k - 1])
    # excess of the pivot over what closes interval r
    excess = np.clip(p - alphas, 0.0, None)
    return n, np.array(pivots), alphas, excess


def schur_horn_projection(pi) -> tuple[Kernel, SchurHornState]:
    """Real projection ``P^Pi`` with prescribed diagonal ``pi`` (closed form).

    ``pi`` must sum to an integer. Entries equal to 0 or 1 are handled outside
    the construction (never / always sampled).  For ``k > l`` the entry is
    ``row_factor[k] * col_factor[l] * gamma[col_interval(l), row_interval(k)]``
    where an interior unit contributes ``sqrt(pi)`` on either side, a pivot
    row contributes ``sqrt((1-pi) alpha/(1-alpha))`` and a pivot column
    ``-sqrt((1-pi)(pi-alpha)/(1-(pi-alpha)))``.
    """
    p = _as_probs(pi)
    total = p.sum()
    n_total = round(total)
    if abs(total - n_total) > SUM_TOL or n_total < 1:
        raise SumNotInteger(f"probabilities sum to {total!r}, not a positive integer")
    N = p.size
    forced_in = np.flatnonzero(p >= 1.0)
    units = np.flatnonzero((p > 0.0) & (p < 1.0))
    q = p[units]
    if units.size:
        target = n_total - forced_in.size
        adj = (target - q.sum()) / units.size
        if abs(adj) > SUM_TOL:
            raise SumNotInteger("sum adjustment exceeds tolerance")
        q = q + adj
        if np.any(q <= 0) or np.any(q >= 1):
            raise OutOfRange("probabilities left (0, 1) after exact-sum adjustment")

    out = np.zeros((N, N))
    out[forced_in, forced_in] = 1.0
    if units.size == 0:
        state = SchurHornState(np.array([0]), np.array([]), np.array([]), np.ones((1, 1)), units, forced_in)
        return Kernel(out.astype(complex)), state

    block, state_core = _schur_horn_core(q)
    out[np.ix_(units, units)] = block
    state = SchurHornState(
        state_core["pivots"], state_core["alphas"], state_core["tails"],
        state_core["gammas"], units, forced_in,
    )
    K = Kernel(out.astype(complex))
    if not is_projection(K, 1e-9):
        raise ConstructionFailed("Schur-Horn construction did not produce a projection")
    if np.max(np.abs(np.diag(out) - p)) > 1e-12 + abs(adj):
        raise ConstructionFailed("Schur-Horn construction lost the prescribed diagonal")
    return K, state


def _schur_horn_core(q):
    N = q.size
    n, pivots, alphas, excess = _pivot_data(q)
    is_pivot = np.zeros(N, dtype=bool)
    is_pivot[pivots[1:] - 1] = True
    pos = np.arange(1, N + 1)
    # interval of a row = #pivots strictly before it, of a column = #pivots up to it
    row_iv = np.searchsorted(pivots[1:], pos, side="left")
    col_iv = np.searchsorted(pivots[1:], pos, side="right")

    one_minus_a = 1.0 - alphas
    one_minus_e = 1.0 - excess
    assert np.all(one_minus_a > 0) and np.all(one_minus_e > 0)
    row_f = np.where(is_pivot, np.sqrt((1 - q) * alphas / one_minus_a), np.sqrt(q))
    col_f = np.where(is_pivot, -np.sqrt((1 - q) * excess / one_minus_e), np.sqrt(q))

    # g[j] for pivot j = 1..n; gamma[r, r'] = prod_{j=r+1}^{r'} g[j]
    g = np.ones(n + 1)
    for j in range(1, n + 1):
        k = pivots[j] - 1
        g[j] = math.sqrt(excess[k] * alphas[k] / (one_minus_a[k] * one_minus_e[k]))
    gammas = np.zeros((n + 1, n + 1))
    for r in range(n + 1):
        gammas[r, r] = 1.0
        for rp in range(r + 1, n + 1):
            gammas[r, rp] = gammas[r, rp - 1] * g[rp]

    lower = row_f[:, None] * col_f[None, :] * gammas[col_iv[None, :], row_iv[:, None]]
    P = np.tril(lower, -1)
    P = P + P.T
    np.fill_diagonal(P, q)

    tails = np.zeros(N)
    for r in range(n):
        lo, hi = pivots[r], pivots[r + 1]  # units lo+1..hi (1-based)
        seg = alphas[lo:hi]
        tails[lo:hi] = np.cumsum(seg[::-1])[::-1]
    return P, {"pivots": pivots, "alphas": alphas, "tails": tails, "gammas": gammas}
