"""Potentials and the two-temperature controlled Langevin system.

The dynamics is

    dX = Y dt
    dY = (sigma B^T Y - grad V(X) - gamma Y) dt + sigma dW

with ``2 gamma = beta_bar sigma sigma^T`` (noise injected at the simulation
temperature ``1/beta_bar``) and a feedback matrix ``B`` chosen such that
``exp(-beta H)`` stays invariant (target temperature ``1/beta``). The
admissible ``B`` solve ``B sigma^T + sigma B^T = (beta_bar - beta) sigma sigma^T``.
"""

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import linalg
from .errors import DimensionError, DomainError, SingularityError, ValidationError


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# potentials


@dataclass(frozen=True, eq=False)
class Quadratic:
    """V(x) = x^T K x / 2."""

    k: np.ndarray

    def __post_init__(self):
        k = linalg.as_square(self.k, "K")
        if not linalg.is_symmetric(k):
            raise ValidationError("K must be symmetric")
        if np.linalg.eigvalsh(k)[0] <= 0.0:
            raise ValidationError("K must be positive definite")
        object.__setattr__(self, "k", _frozen(k))

    name = "quadratic"

    @property
    def n(self):
        return self.k.shape[0]

    def energy(self, x):
        x = _check_dim(x, self.n)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.k, x)

    def gradient(self, x):
        x = _check_dim(x, self.n)
        return x @ self.k.T


@dataclass(frozen=True, eq=False)
class DoubleWell:
    """Bistable coordinate q coupled harmonically to d auxiliary coordinates.

    V(q, xi) = (q^2 - 1)^2 / 2 + k/2 * sum_i (xi_i - q)^2, with x = (q, xi).
    """

    d: int
    k: float = 1.0

    name = "double_well"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 0:
            raise ValidationError(f"d must be a non-negative integer, got {self.d}")
        if not self.k > 0:
            raise ValidationError(f"coupling k must be positive, got {self.k}")

    @property
    def n(self):
        return self.d + 1

    def energy(self, x):
        x = _check_dim(x, self.n)
        q = x[..., 0]
        xi = x[..., 1:]
        return 0.5 * (q * q - 1.0) ** 2 + 0.5 * self.k * np.sum((xi - q[..., None]) ** 2, axis=-1)

    def gradient(self, x):
        x = _check_dim(x, self.n)
        q = x[..., 0]
        dev = self.k * (x[..., 1:] - q[..., None])
        g = np.empty_like(x)
        g[..., 0] = 2.0 * q * (q * q - 1.0) - np.sum(dev, axis=-1)
        g[..., 1:] = dev
        return g


@dataclass(frozen=True, eq=False)
class LennardJones:
    """Pairwise Lennard-Jones cluster, no cutoff, open boundaries.

    Coordinates are flattened particle-major: x = (x^(1), ..., x^(N)).
    """

    n_particles: int
    dim: int = 2
    eps: float = 1.0
    sig: float = 1.0

    name = "lennard_jones"

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 2:
            raise ValidationError(f"need at least 2 particles, got {self.n_particles}")
        if self.dim not in (1, 2, 3):
            raise ValidationError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not (self.eps > 0 and self.sig > 0):
            raise ValidationError("eps and sig must be positive")

    @property
    def n(self):
        return self.n_particles * self.dim

    def _pairs(self, x):
        x = _check_dim(x, self.n)
        pos = x.reshape(x.shape[:-1] + (self.n_particles, self.dim))
        diff = pos[..., :, None, :] - pos[..., None, :, :]
        r2 = np.einsum("...k,...k->...", diff, diff)
        iu = np.triu_indices(self.n_particles, 1)
        rmin2 = np.min(r2[..., iu[0], iu[1]])
        if rmin2 < (1e-12 * self.sig) ** 2:
            raise SingularityError(f"coincident particles (min pair distance {np.sqrt(rmin2):.3g})")
        return diff, r2, iu

    def energy(self, x):
        _, r2, iu = self._pairs(x)
        s6 = (self.sig * self.sig / r2[..., iu[0], iu[1]]) ** 3
        return 4.0 * self.eps * np.sum(s6 * s6 - s6, axis=-1)

    def gradient(self, x):
        diff, r2, _ = self._pairs(x)
        eye = np.eye(self.n_particles, dtype=bool)
        r2 = np.where(eye, np.inf, r2)
        s6 = (self.sig * self.sig / r2) ** 3
        # (1/r) dv/dr, so that grad_i = sum_j coef_ij (x_i - x_j)
        coef = 24.0 * self.eps * (s6 - 2.0 * s6 * s6) / r2
        g = np.einsum("...ij,...ijk->...ik", coef, diff)
        return g.reshape(g.shape[:-2] + (self.n,))

    def pair_distances(self, x):
        _, r2, iu = self._pairs(x)
        return np.sqrt(r2[..., iu[0], iu[1]])


PotentialModel = Union[Quadratic, DoubleWell, LennardJones]


def _check_dim(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (n,):
        raise DimensionError(f"expected last axis of length {n}, got shape {x.shape}")
    return x


def energy(p, x):
    return p.energy(x)


def gradient(p, x):
    return p.gradient(x)


def make_potential(name, **params):
    """Build a potential from its config name ("quadratic", "double_well", "lennard_jones")."""
    kinds = {"quadratic": Quadratic, "double_well": DoubleWell, "lennard_jones": LennardJones}
    if name not in kinds:
        raise ValidationError(f"unknown potential {name!r}; expected one of {sorted(kinds)}")
    return kinds[name](**params)


# --------------------------------------------------------------------------
# controls


def build_control(sigma, beta_bar, beta, m):
    """Admissible feedback matrix ``B = (beta_bar - beta)/2 sigma + sigma M``, M skew."""
    sigma = linalg.check_invertible(sigma, "sigma")
    m = linalg.as_square(m, "M")
    if m.shape != sigma.shape:
        raise DimensionError(f"M has shape {m.shape}, expected {sigma.shape}")
    if np.linalg.norm(m + m.T) > 1e-12 * max(1.0, np.linalg.norm(m)):
        raise ValidationError("M must be skew-symmetric")
    _check_temps(beta_bar, beta)
    return 0.5 * (beta_bar - beta) * sigma + sigma @ m


def optimal_control(sigma, beta_bar, beta):
    """Minimum-dissipation control ``B* = (beta_bar - beta)/2 sigma``."""
    sigma = linalg.check_invertible(sigma, "sigma")
    _check_temps(beta_bar, beta)
    return 0.5 * (beta_bar - beta) * sigma


def _check_temps(beta_bar, beta):
    if not (beta_bar > 0 and beta > 0):
        raise DomainError(f"inverse temperatures must be positive, got beta_bar={beta_bar}, beta={beta}")


def fdr2_residual(b, sigma, beta_bar, beta):
    """Frobenius norm of ``B sigma^T + sigma B^T - (beta_bar - beta) sigma sigma^T``."""
    b = np.asarray(b, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return float(np.linalg.norm(b @ sigma.T + sigma @ b.T - (beta_bar - beta) * sigma @ sigma.T))


@dataclass(frozen=True, eq=False)
class TwoTemperatureSystem:
    """Friction, noise, both temperatures and the feedback matrix.

    The fluctuation-dissipation relation and the admissibility condition on
    ``b`` are checked here once. ``strict=False`` skips the admissibility
    check; it exists only to study deliberately broken controls.
    """

    gamma: np.ndarray
    sigma: np.ndarray
    beta_bar: float
    beta: float
    b: np.ndarray
    strict: bool = field(default=True, repr=False)

    def __post_init__(self):
        gamma = linalg.as_square(self.gamma, "gamma")
        sigma = linalg.as_square(self.sigma, "sigma")
        b = linalg.as_square(self.b, "b")
        if not (gamma.shape == sigma.shape == b.shape):
            raise DimensionError("gamma, sigma and b must have equal shapes")
        _check_temps(self.beta_bar, self.beta)
        if not linalg.is_symmetric(gamma) or np.linalg.eigvalsh(gamma)[0] <= 0:
            raise ValidationError("gamma must be symmetric positive definite")
        linalg.check_invertible(sigma, "sigma")
        ss = sigma @ sigma.T
        scale = max(1.0, np.linalg.norm(2.0 * gamma))
        fdr = np.linalg.norm(2.0 * gamma - self.beta_bar * ss)
        if fdr > 1e-10 * scale:
            raise ValidationError(f"fluctuation-dissipation relation 2 gamma = beta_bar sigma sigma^T violated (residual {fdr:.3g})")
        if self.strict:
            res = fdr2_residual(b, sigma, self.beta_bar, self.beta)
            if res > 1e-10 * max(1.0, abs(self.beta_bar - self.beta)) * max(1.0, np.linalg.norm(ss)):
                raise ValidationError(f"control b is not admissible: B sigma^T + sigma B^T != (beta_bar - beta) sigma sigma^T (residual {res:.3g})")
        object.__setattr__(self, "gamma", _frozen(gamma))
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "beta_bar", float(self.beta_bar))
        object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def from_friction(cls, gamma, beta_bar, beta, m=None, b=None):
        """Derive ``sigma = sqrt(2 gamma / beta_bar)`` and use ``B*`` (or ``B* + sigma M``).

        An explicit ``b`` overrides ``m`` and is validated as is.
        """
        gamma = linalg.as_square(gamma, "gamma")
        _check_temps(beta_bar, beta)
        sigma = linalg.sqrtm_spd(2.0 * gamma / beta_bar)
        if b is None:
            m = np.zeros_like(gamma) if m is None else m
            b = build_control(sigma, beta_bar, beta, m)
        return cls(gamma=gamma, sigma=sigma, beta_bar=beta_bar, beta=beta, b=b)

    @property
    def n(self):
        return self.gamma.shape[0]

    @property
    def alpha(self):
        """Temperature ratio beta / beta_bar."""
        return self.beta / self.beta_bar

    @property
    def noise_cov(self):
        return self.sigma @ self.sigma.T

    @property
    def effective_friction(self):
        """``gamma - sigma B^T``; equals ``(beta/beta_bar) gamma`` for ``B*``."""
        return self.gamma - self.sigma @ self.b.T


def aep_rate(system):
    """Asymptotic entropy production rate of the feedback ``u = B^T y``.

    Closed form of ``E|sigma B^T y - (beta_bar - beta)/2 sigma sigma^T y|^2`` in
    the ``(sigma sigma^T)^{-1}`` metric, halved, with ``y ~ N(0, I/beta)``.
    """
    if not isinstance(system, TwoTemperatureSystem) or not system.strict:
        raise ValidationError("aep_rate needs an admissible TwoTemperatureSystem")
    ss = system.noise_cov
    q = system.sigma @ system.b.T - 0.5 * (system.beta_bar - system.beta) * ss
    val = np.trace(q.T @ np.linalg.solve(ss, q)) / (2.0 * system.beta)
    return float(max(val, 0.0))
