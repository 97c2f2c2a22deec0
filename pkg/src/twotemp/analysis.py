"""Diagnostics: Gaussian relative entropy, covariance propagation, rate fits,
autocorrelation, histograms, entropy-production checks and the generator.
"""

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg
from .errors import DataError, DegenerateError, DimensionError, ScopeError, ValidationError
from .model import Quadratic, TwoTemperatureSystem, aep_rate
from .spectral import DriftNoisePair, drift_matrix

KL_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = linalg.as_square(self.cov, "cov")
        mean = np.asarray(self.mean, dtype=float).ravel()
        if mean.shape != (cov.shape[0],):
            raise DimensionError(f"mean has length {mean.size}, cov is {cov.shape}")
        if not linalg.is_symmetric(cov, 1e-10):
            raise ValidationError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov)[0] <= 0.0:
            raise ValidationError("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def centered(cls, cov):
        cov = np.asarray(cov, dtype=float)
        return cls(np.zeros(cov.shape[0]), cov)

    @property
    def dim(self):
        return self.mean.size


@dataclass(frozen=True, eq=False)
class ScalarSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if t.shape != v.shape:
            raise DimensionError("times and values must have equal lengths")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValidationError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size


# --------------------------------------------------------------------------
# Gaussian relative entropy and covariance dynamics


def gaussian_kl(eta, rho):
    """``KL(eta | rho)`` for two Gaussian laws.

    ``(tr(S_eta S_rho^-1) - log det(S_eta S_rho^-1) - d + dm^T S_rho^-1 dm) / 2``.
    """
    if eta.dim != rho.dim:
        raise DimensionError(f"dimension mismatch: {eta.dim} vs {rho.dim}")
    chol = np.linalg.cholesky(rho.cov)
    inv_l = np.linalg.solve(chol, np.eye(rho.dim))
    # whitened covariance L^-1 S_eta L^-T has the eigenvalues of S_eta S_rho^-1
    w = inv_l @ eta.cov @ inv_l.T
    dm = inv_l @ (rho.mean - eta.mean)
    sign, logdet = np.linalg.slogdet(0.5 * (w + w.T))
    if sign <= 0:
        raise ValidationError("covariance is not positive definite")
    val = 0.5 * (np.trace(w) - logdet - rho.dim + dm @ dm)
    return float(max(val, 0.0))


def stationary_covariance(pair):
    return linalg.solve_lyapunov(pair.a, pair.c @ pair.c.T)


def propagate_covariance(pair, sigma0, t, sigma_inf=None):
    """Law at time ``t`` of ``dZ = A Z dt + C dW`` started from ``N(0, sigma0)``."""
    if t < 0:
        raise ValidationError("t must be non-negative")
    s0 = linalg.as_square(sigma0, "sigma0")
    if s0.shape != pair.a.shape:
        raise DimensionError(f"sigma0 has shape {s0.shape}, drift {pair.a.shape}")
    s_inf = stationary_covariance(pair) if sigma_inf is None else sigma_inf
    e = linalg.expm(pair.a * t)
    st = s_inf + e @ (s0 - s_inf) @ e.T
    return GaussianState.centered(0.5 * (st + st.T))


def kl_decay_curve(pair, sigma0, times):
    """``KL(N(0, S_t) | N(0, S_inf))`` on a time grid."""
    times = np.asarray(times, dtype=float)
    s_inf = stationary_covariance(pair)
    target = GaussianState.centered(s_inf)
    vals = [gaussian_kl(propagate_covariance(pair, sigma0, t, s_inf), target) for t in times]
    return ScalarSeries(times, np.array(vals))


def fit_exponential_rate(series, window=None):
    """Least-squares fit of ``log value = intercept - rate * t``.

    Only points inside ``window`` with value above ``KL_FLOOR`` are used.
    Returns ``(rate, intercept, r_squared)``.
    """
    t, v = series.times, series.values
    mask = v > KL_FLOOR
    if window is not None:
        lo, hi = window
        mask &= (t >= lo) & (t <= hi)
    if mask.sum() < 5:
        raise DataError(f"need at least 5 valid points in the fit window, found {int(mask.sum())}")
    tt, lv = t[mask], np.log(v[mask])
    slope, intercept = np.polyfit(tt, lv, 1)
    resid = lv - (slope * tt + intercept)
    ss_tot = np.sum((lv - lv.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - np.sum(resid**2) / ss_tot
    return float(-slope), float(intercept), float(r2)


def kl_window(series, lo=1e-10, hi=1e-2):
    """Time window over which the series lies in ``[lo, hi]`` (first to last hit)."""
    inside = (series.values >= lo) & (series.values <= hi)
    if not inside.any():
        raise DataError(f"series never enters [{lo:g}, {hi:g}]")
    t = series.times[inside]
    return float(t[0]), float(t[-1])


def eps_scaling_slope(eps, errors):
    """Slope of ``log(error)`` against ``log(eps)``."""
    eps = np.asarray(eps, dtype=float).ravel()
    errors = np.asarray(errors, dtype=float).ravel()
    if eps.size != errors.size or eps.size < 4:
        raise DataError("need at least 4 (eps, error) pairs")
    if np.any(eps <= 0) or np.any(errors <= 0):
        raise DataError("eps and errors must be positive")
    if eps.max() / eps.min() < 10.0:
        warnings.warn(f"eps values span only a factor {eps.max() / eps.min():.3g} (< one decade)", stacklevel=2)
    slope, _ = np.polyfit(np.log(eps), np.log(errors), 1)
    return float(slope)


# --------------------------------------------------------------------------
# time-series statistics


def autocorrelation(series, max_lag):
    """Normalised autocorrelation ``sum_t u_t u_{t+s} / sum_t u_t^2`` of the centred series."""
    u = np.asarray(series, dtype=float).ravel()
    max_lag = int(max_lag)
    if max_lag < 0 or u.size <= max_lag:
        raise DataError(f"series of length {u.size} too short for max_lag={max_lag}")
    u = u - u.mean()
    denom = u @ u
    if denom <= 1e-300 * max(1, u.size):
        raise DegenerateError("series has zero variance")
    n = u.size
    return np.array([u[: n - s] @ u[s:] for s in range(max_lag + 1)]) / denom


def histogram_marginal(traj, index, bins=50, range=None):
    """Density-normalised histogram of one coordinate.

    ``traj`` is a Trajectory (all recorded positions, all replicas) or an
    array of samples. Returns ``(edges, density)``.
    """
    x = getattr(traj, "x", traj)
    x = np.asarray(x, dtype=float)
    samples = x[..., index].ravel() if x.ndim > 1 else x.ravel()
    if samples.size == 0:
        raise DataError("no samples")
    if range is None:
        lo, hi = samples.min(), samples.max()
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        range = (lo, hi)
    inside = np.mean((samples >= range[0]) & (samples <= range[1]))
    if inside < 0.99:
        warnings.warn(f"histogram range covers only {100 * inside:.1f}% of the samples", stacklevel=2)
    density, edges = np.histogram(samples, bins=bins, range=range, density=True)
    return edges, density


def mean_se(values, axis=0):
    """Sample mean and its standard error for independent samples."""
    v = np.asarray(values, dtype=float)
    n = v.shape[axis]
    return v.mean(axis=axis), v.std(axis=axis, ddof=1) / np.sqrt(n)


def batch_mean_se(series, n_batches=20):
    """Mean and standard error of a correlated series via non-overlapping batch means."""
    v = np.asarray(series, dtype=float)
    m = v.shape[0] // n_batches
    if m < 1:
        raise DataError("series too short for batching")
    means = v[: m * n_batches].reshape((n_batches, m) + v.shape[1:]).mean(axis=1)
    return mean_se(means)


def count_transitions(q, band=0.5):
    """Well-to-well transitions of a bistable coordinate with a hysteresis band.

    A transition is recorded when ``q`` enters ``|q| > band`` on the side
    opposite to the last visited well.
    """
    q = np.asarray(q, dtype=float).ravel()
    side = np.where(q > band, 1, np.where(q < -band, -1, 0))
    visited = side[side != 0]
    if visited.size == 0:
        return 0
    return int(np.count_nonzero(visited[1:] != visited[:-1]))


# --------------------------------------------------------------------------
# entropy production


def aep_monte_carlo(system, n_samples, rng, chunk=200_000):
    """Monte-Carlo estimate of the entropy production rate and its standard error.

    Averages ``|sigma B^T y - (beta_bar - beta)/2 sigma sigma^T y|^2 / 2`` in the
    ``(sigma sigma^T)^{-1}`` metric over ``y ~ N(0, I/beta)``.
    """
    n = system.n
    ss = system.noise_cov
    c = 0.5 * (system.beta_bar - system.beta)
    total, total2, done = 0.0, 0.0, 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        y = rng.standard_normal((m, n)) / np.sqrt(system.beta)
        z = (y @ system.b) @ system.sigma.T - c * (y @ ss.T)
        vals = 0.5 * np.einsum("ij,ij->i", z, np.linalg.solve(ss, z.T).T)
        total += vals.sum()
        total2 += (vals**2).sum()
        done += m
    mean = total / n_samples
    var = (total2 - n_samples * mean**2) / (n_samples - 1)
    return float(mean), float(np.sqrt(max(var, 0.0) / n_samples))


@dataclass(frozen=True, eq=False)
class FirReport:
    times: np.ndarray
    kl: np.ndarray
    bound: np.ndarray
    rate: float
    monotone: bool
    max_increase: float
    min_slack: float
    passed: bool

    @property
    def slack(self):
        return self.bound - (self.kl - self.kl[0])


def controlled_linear_pair(system, k_mat):
    """Drift and noise of the controlled dynamics for ``V = x^T K x / 2``."""
    n = system.n
    a = drift_matrix(np.asarray(k_mat, dtype=float), system.effective_friction)
    c = np.zeros((2 * n, n))
    c[n:] = system.sigma
    return DriftNoisePair(a=a, c=c)


def fir_check(system, potential, sigma0, times, tol=1e-9):
    """Check ``KL(rho_inf | rho_T) - KL(rho_inf | rho_0) <= T R(B)`` along the Gaussian flow.

    For the minimum-dissipation control (``R = 0``) the relative entropy must
    also be non-increasing on the grid.
    """
    if not isinstance(potential, Quadratic):
        raise ScopeError("fir_check needs a quadratic potential (Gaussian laws)")
    if not isinstance(system, TwoTemperatureSystem):
        raise ValidationError("system must be a TwoTemperatureSystem")
    times = np.asarray(times, dtype=float)
    if times.size < 2 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValidationError("times must be a non-negative increasing grid with at least 2 points")
    rate = aep_rate(system)
    pair = controlled_linear_pair(system, potential.k)
    s_inf = stationary_covariance(pair)
    rho_inf = GaussianState.centered(s_inf)
    kl0 = gaussian_kl(rho_inf, GaussianState.centered(sigma0))
    kl = np.array([gaussian_kl(rho_inf, propagate_covariance(pair, sigma0, t, s_inf)) for t in times])
    # integrand is constant in time, so the trapezoidal rule is exact
    bound = rate * times
    increase = np.diff(np.concatenate([[kl0], kl])) if times[0] > 0 else np.diff(kl)
    max_inc = float(increase.max()) if increase.size else 0.0
    monotone = max_inc <= tol
    slack = bound - (kl - kl0)
    min_slack = float(slack.min())
    passed = min_slack >= -tol and (monotone or rate > 1e-12)
    return FirReport(times, kl, bound, rate, monotone, max_inc, min_slack, passed)


# --------------------------------------------------------------------------
# generator


@dataclass(frozen=True)
class Observable:
    """Test function with derivatives; all callables take batched ``(x, y)``.

    ``value -> (...)``, ``grad_x, grad_y -> (..., n)``, ``hess_y -> (..., n, n)``.
    """

    name: str
    value: Callable
    grad_x: Callable
    grad_y: Callable
    hess_y: Callable


def _zeros_like_grad(x, y):
    return np.zeros_like(y)


def _zero_hess(x, y):
    return np.zeros(y.shape + (y.shape[-1],))


def constant(c=1.0):
    return Observable("const", lambda x, y: np.full(x.shape[:-1], float(c)), _zeros_like_grad, _zeros_like_grad, _zero_hess)


def pair_product(i, j):
    """``f = x_i y_j``."""

    def gx(x, y):
        g = np.zeros_like(x)
        g[..., i] = y[..., j]
        return g

    def gy(x, y):
        g = np.zeros_like(y)
        g[..., j] = x[..., i]
        return g

    return Observable(f"x{i}*y{j}", lambda x, y: x[..., i] * y[..., j], gx, gy, _zero_hess)


def sine(i):
    """``f = sin(x_i)``."""

    def gx(x, y):
        g = np.zeros_like(x)
        g[..., i] = np.cos(x[..., i])
        return g

    return Observable(f"sin(x{i})", lambda x, y: np.sin(x[..., i]), gx, _zeros_like_grad, _zero_hess)


def velocity_square(i):
    """``f = y_i^2``."""

    def gy(x, y):
        g = np.zeros_like(y)
        g[..., i] = 2.0 * y[..., i]
        return g

    def hy(x, y):
        h = _zero_hess(x, y)
        h[..., i, i] = 2.0
        return h

    return Observable(f"y{i}^2", lambda x, y: y[..., i] ** 2, _zeros_like_grad, gy, hy)


def velocity(i):
    """``f = y_i``."""

    def gy(x, y):
        g = np.zeros_like(y)
        g[..., i] = 1.0
        return g

    return Observable(f"y{i}", lambda x, y: y[..., i], _zeros_like_grad, gy, _zero_hess)


def hamiltonian(potential):
    """``f = |y|^2/2 + V(x)``."""

    def hy(x, y):
        n = y.shape[-1]
        return np.broadcast_to(np.eye(n), y.shape + (n,)).copy()

    return Observable(
        "H",
        lambda x, y: 0.5 * np.sum(y * y, axis=-1) + potential.energy(x),
        lambda x, y: potential.gradient(x),
        lambda x, y: y.copy(),
        hy,
    )


def generator_apply(system, potential, f, x, y):
    """``(L f)(x, y)`` for the controlled dynamics.

    ``L = y . grad_x - grad V . grad_y + (sigma sigma^T : hess_y) / 2
    + (sigma B^T y - gamma y) . grad_y``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.shape[-1] != system.n:
        raise DimensionError(f"x, y must have shape (..., {system.n})")
    drift_y = y @ (system.sigma @ system.b.T - system.gamma).T - potential.gradient(x)
    gx = f.grad_x(x, y)
    gy = f.grad_y(x, y)
    hy = f.hess_y(x, y)
    diffusion = 0.5 * np.einsum("ij,...ij->...", system.noise_cov, hy)
    return np.sum(y * gx, axis=-1) + np.sum(drift_y * gy, axis=-1) + diffusion


def sample_gibbs_quadratic(potential, beta, n_samples, rng):
    """Exact samples of ``exp(-beta H)`` for a quadratic potential."""
    if not isinstance(potential, Quadratic):
        raise ScopeError("exact Gibbs sampling implemented for quadratic potentials only")
    n = potential.n
    lx = np.linalg.cholesky(np.linalg.inv(potential.k) / beta)
    x = rng.standard_normal((n_samples, n)) @ lx.T
    y = rng.standard_normal((n_samples, n)) / np.sqrt(beta)
    return x, y
