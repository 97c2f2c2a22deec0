"""Linear (Gaussian) case: drift/noise assembly, convergence rates, optimal ratios.

For ``V(x) = x^T K x / 2`` and the minimum-dissipation control, the phase
space process ``Z = (X, Y)`` is an Ornstein-Uhlenbeck process with drift
``A = [[0, I], [-K, -alpha gamma]]`` where ``alpha = beta / beta_bar``. Its
law converges to ``N(0, diag(K^-1, I)/beta)`` exponentially, at a rate set by
the spectral abscissa of ``A``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import CommutationError, DefinitenessError, DomainError, StabilityError


def _spd(a, name):
    a = linalg.as_square(a, name)
    if not linalg.is_symmetric(a):
        raise DefinitenessError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(a)[0] <= 0.0:
        raise DefinitenessError(f"{name} must be positive definite")
    return a


@dataclass(frozen=True, eq=False)
class LinearModel:
    k_mat: np.ndarray
    gamma: np.ndarray
    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        k = _spd(self.k_mat, "K")
        g = _spd(self.gamma, "gamma")
        if k.shape != g.shape:
            raise DomainError("K and gamma must have equal shapes")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "k_mat", k)
        object.__setattr__(self, "gamma", g)

    @property
    def n(self):
        return self.k_mat.shape[0]

    @property
    def beta_bar(self):
        return self.beta / self.alpha


@dataclass(frozen=True, eq=False)
class DriftNoisePair:
    """``dZ = a Z dt + c dW``."""

    a: np.ndarray
    c: np.ndarray

    @property
    def dim(self):
        return self.a.shape[0]


def drift_matrix(k_mat, friction):
    """``[[0, I], [-K, -friction]]``."""
    n = k_mat.shape[0]
    a = np.zeros((2 * n, 2 * n))
    a[:n, n:] = np.eye(n)
    a[n:, :n] = -k_mat
    a[n:, n:] = -friction
    return a


def assemble(model):
    n = model.n
    a = drift_matrix(model.k_mat, model.alpha * model.gamma)
    c = np.zeros((2 * n, n))
    c[n:, :] = math.sqrt(2.0 / model.beta_bar) * linalg.sqrtm_spd(model.gamma)
    abscissa = linalg.spectral_abscissa(a)
    if abscissa >= 0.0:
        raise StabilityError(f"assembled drift is not Hurwitz (abscissa {abscissa:.3g})")
    return DriftNoisePair(a=a, c=c)


def decay_rate(pair):
    """Exponent ``2r`` of the bound ``KL(eta_t | rho_inf) <= C exp(-2 r t)``."""
    a = pair.a if isinstance(pair, DriftNoisePair) else linalg.as_square(pair)
    abscissa = linalg.spectral_abscissa(a)
    if abscissa >= 0.0:
        raise StabilityError(f"drift is not Hurwitz (abscissa {abscissa:.3g})")
    return -2.0 * abscissa


def trace_rate_bound(pair):
    """Upper bound ``-tr(A)/n`` on ``2r``; reached only if all real parts coincide."""
    a = pair.a if isinstance(pair, DriftNoisePair) else linalg.as_square(pair)
    n = a.shape[0] // 2
    return float(-np.trace(a) / n)


def optimal_ratio_1d(k, g):
    """Critical damping ratio ``beta/beta_bar = 2 sqrt(k) / g`` for n = 1."""
    if not (k > 0 and g > 0):
        raise DomainError(f"k and g must be positive, got k={k}, g={g}")
    return 2.0 * math.sqrt(k) / g


def optimal_ratio_commuting(k_diag, g_diag):
    """Optimal ratio when K and gamma commute, from their joint eigenvalues.

    ``g_diag`` must be sorted ascending and ``k_diag`` paired with it. The
    optimum is the first value of alpha at which some mode's (real) leading
    eigenvalue climbs above the slowest mode's ``-alpha g_1 / 2``.
    """
    k = np.asarray(k_diag, dtype=float).ravel()
    g = np.asarray(g_diag, dtype=float).ravel()
    if k.size == 0 or k.size != g.size:
        raise DomainError("k_diag and g_diag must be non-empty and of equal length")
    if np.any(k <= 0) or np.any(g <= 0):
        raise DomainError("eigenvalues must be positive")
    if np.any(np.diff(g) < 0):
        raise DomainError("g_diag must be sorted ascending")
    denom = g * g - (g - g[0]) ** 2
    assert np.all(denom > 0)
    cand = np.sqrt(4.0 * k / denom)
    return float(cand[int(np.argmin(cand))])


def diagonalize_commuting(k_mat, gamma):
    """Orthogonal ``S`` with ``S K S^-1`` and ``S gamma S^-1`` both diagonal.

    Returns ``(k_diag, g_diag, S)`` with ``g_diag`` ascending.
    """
    k = _spd(k_mat, "K")
    g = _spd(gamma, "gamma")
    comm = np.linalg.norm(k @ g - g @ k)
    if comm > 1e-10 * np.linalg.norm(k) * np.linalg.norm(g):
        raise CommutationError(f"K and gamma do not commute (||K gamma - gamma K|| = {comm:.3g})")
    gw, gv = np.linalg.eigh(g)
    # split gamma's eigenspaces, then diagonalise K inside each one
    tol = 1e-8 * max(1.0, abs(gw[-1]))
    blocks = np.split(np.arange(len(gw)), np.nonzero(np.diff(gw) > tol)[0] + 1)
    cols = []
    for idx in blocks:
        basis = gv[:, idx]
        _, kv = np.linalg.eigh(basis.T @ k @ basis)
        cols.append(basis @ kv)
    v = np.hstack(cols)
    s = v.T
    k_diag = np.einsum("ij,jk,ik->i", s, k, s)
    g_diag = np.einsum("ij,jk,ik->i", s, g, s)
    order = np.argsort(g_diag, kind="stable")
    return k_diag[order], g_diag[order], s[order]


def abscissa_at(k_mat, gamma, alpha):
    return linalg.spectral_abscissa(drift_matrix(k_mat, alpha * gamma))


def _golden_section(f, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimal_ratio_search(k_mat, gamma, alpha_range=(0.05, 10.0), tol=1e-8, n_grid=400):
    """Minimise the spectral abscissa of ``A(alpha)`` numerically.

    A uniform grid locates the basin, golden-section search refines it. The
    objective is continuous but has kinks where eigenvalue branches collide,
    which rules out derivative-based refinement.

    Returns ``(alpha_star, 2r)`` with ``2r = -2 * abscissa(alpha_star)``.
    """
    lo, hi = map(float, alpha_range)
    if not (0.0 < lo < hi) or not tol > 0:
        raise DomainError(f"need 0 < lo < hi and tol > 0, got range {alpha_range}, tol {tol}")
    k = _spd(k_mat, "K")
    g = _spd(gamma, "gamma")
    n_grid = max(int(n_grid), 400)
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([abscissa_at(k, g, a) for a in grid])
    i = int(np.argmin(vals))
    left = grid[max(i - 1, 0)]
    right = grid[min(i + 1, n_grid - 1)]
    alpha_star = _golden_section(lambda a: abscissa_at(k, g, a), left, right, tol)
    best = abscissa_at(k, g, alpha_star)
    if vals[i] < best:
        alpha_star, best = float(grid[i]), float(vals[i])
    return float(alpha_star), -2.0 * best
