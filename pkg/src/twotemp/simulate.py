"""Integrators for the controlled Langevin equation and its two limits.

All stochastic integrators draw their randomness from a :class:`NoiseStream`,
which represents one Brownian path. Two consumers built from the same seed
see the same path, also when they step with different (commensurate) step
sizes; this is what the common-noise comparisons with the limit equations rely
on.

Arrays follow the convention ``x.shape == (..., n)``; a leading replica axis
is integrated in lock-step, each replica driven by its own stream.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .errors import DimensionError, DomainError, NumericalError, SingularityError, StabilityError
from .model import TwoTemperatureSystem

SCHEMES = ("baoab_controlled", "euler_maruyama_overdamped", "rk4_gradient_flow", "scaled_underdamped")
REGIMES = ("fixed_sim_temp", "fixed_target_temp")

# steps per noise block; only affects memory, never the numbers produced
BLOCK = 2048


@dataclass(frozen=True, eq=False)
class PhaseState:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.shape != y.shape or x.ndim == 0:
            raise DimensionError(f"x and y must have equal shapes, got {x.shape} and {y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise NumericalError("phase state has non-finite components")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


# --------------------------------------------------------------------------
# noise


class NoiseStream:
    """One Brownian path in R^dim, from a counter-based (Philox) generator.

    The path is generated on a grid of spacing ``base_dt``; a consumer stepping
    with ``dt = m * base_dt`` receives sums of ``m`` consecutive base
    increments. A second, independent channel of standard normals serves the
    within-step parts of exact Ornstein-Uhlenbeck updates; it never touches
    the Brownian channel, so consumers that do not need it stay coupled.

    Streams for different replicas derive from ``(seed, index)``.
    """

    def __init__(self, seed, dim, index=0, base_dt=None):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.index = int(index)
        self.dim = int(dim)
        self.base_dt = None if base_dt is None else float(base_dt)
        bm_seq, aux_seq = np.random.SeedSequence(entropy=seed, spawn_key=(self.index,)).spawn(2)
        self._bm = np.random.Generator(np.random.Philox(bm_seq))
        self._aux = np.random.Generator(np.random.Philox(aux_seq))

    batch_shape = ()

    def refinement(self, dt):
        """Number of base increments per step of size ``dt``."""
        if self.base_dt is None:
            return 1
        m = dt / self.base_dt
        mi = int(round(m))
        if mi < 1 or abs(m - mi) > 1e-9 * m:
            raise DomainError(f"dt={dt} is not a multiple of the stream's base_dt={self.base_dt}")
        return mi

    def brownian(self, dt, n_steps):
        """Increments ``W(t_{k+1}) - W(t_k)``, shape ``(n_steps, dim)``."""
        m = self.refinement(dt)
        h = dt / m
        z = self._bm.standard_normal((n_steps * m, self.dim))
        if m > 1:
            z = z.reshape(n_steps, m, self.dim).sum(axis=1)
        return math.sqrt(h) * z

    def auxiliary(self, n_steps):
        return self._aux.standard_normal((n_steps, self.dim))


class EnsembleNoise:
    """Independent :class:`NoiseStream` objects for replicas ``first .. first+count-1``."""

    def __init__(self, seed, dim, count, base_dt=None, first=0):
        if count < 1:
            raise DomainError("ensemble needs at least one replica")
        self.streams = [NoiseStream(seed, dim, first + i, base_dt) for i in range(count)]
        self.seed = int(seed)
        self.dim = int(dim)

    @property
    def batch_shape(self):
        return (len(self.streams),)

    def brownian(self, dt, n_steps):
        return np.stack([s.brownian(dt, n_steps) for s in self.streams], axis=1)

    def auxiliary(self, n_steps):
        return np.stack([s.auxiliary(n_steps) for s in self.streams], axis=1)


def _stream_ids(noise):
    if noise is None:
        return None
    if isinstance(noise, EnsembleNoise):
        return tuple((s.seed, s.index) for s in noise.streams)
    return ((noise.seed, noise.index),)


# --------------------------------------------------------------------------
# integrator bookkeeping


@dataclass(frozen=True)
class IntegratorSpec:
    scheme: str
    dt: float
    n_steps: int
    thin: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise DomainError(f"n_steps must be a non-negative integer, got {self.n_steps}")
        if int(self.thin) != self.thin or self.thin < 1:
            raise DomainError(f"thin must be a positive integer, got {self.thin}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "thin", int(self.thin))

    @property
    def horizon(self):
        return self.dt * self.n_steps

    @property
    def n_records(self):
        return self.n_steps // self.thin + 1


@dataclass(eq=False)
class Trajectory:
    """Thinned samples ``(t, x[, y])``; step ``k`` recorded iff ``k % thin == 0``.

    ``x`` has shape ``(n_records, n)`` or ``(n_records, replicas, n)``.
    ``y`` is ``None`` for first-order schemes.
    """

    times: np.ndarray
    x: np.ndarray
    y: Optional[np.ndarray]
    spec: IntegratorSpec
    seed: Optional[tuple] = None

    def __len__(self):
        return len(self.times)

    @property
    def is_ensemble(self):
        return self.x.ndim == 3

    def replica(self, i):
        if not self.is_ensemble:
            raise DimensionError("not an ensemble trajectory")
        seed = None if self.seed is None else (self.seed[i],)
        y = None if self.y is None else self.y[:, i]
        return Trajectory(self.times, self.x[:, i], y, self.spec, seed)

    def rows(self):
        """Header and row matrix for CSV export."""
        if self.is_ensemble:
            raise DimensionError("export one replica at a time")
        n = self.x.shape[-1]
        header = ["t"] + [f"x{i}" for i in range(n)]
        cols = [self.times[:, None], self.x]
        if self.y is not None:
            header += [f"y{i}" for i in range(n)]
            cols.append(self.y)
        return header, np.hstack(cols)

    def to_csv(self, path, comment=None):
        from .io import write_csv

        header, data = self.rows()
        write_csv(path, header, data, comment=comment)


class _Recorder:
    def __init__(self, spec, x0, y0):
        self.spec = spec
        shape = (spec.n_records,) + x0.shape
        self.x = np.empty(shape)
        self.y = None if y0 is None else np.empty(shape)
        self.i = 0
        self.put(x0, y0)

    def put(self, x, y):
        self.x[self.i] = x
        if self.y is not None:
            self.y[self.i] = y
        self.i += 1

    def trajectory(self, noise):
        times = self.spec.dt * self.spec.thin * np.arange(self.spec.n_records)
        return Trajectory(times, self.x, self.y, self.spec, _stream_ids(noise))


def _check_state(x, n, batch_shape, what="state"):
    x = np.asarray(x, dtype=float)
    if x.shape != tuple(batch_shape) + (n,):
        raise DimensionError(f"{what} has shape {x.shape}, expected {tuple(batch_shape) + (n,)}")
    return x


def _finite_or_raise(step, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalError(f"non-finite state at step {step}")


def _grad_at(potential, x, step):
    try:
        return potential.gradient(x)
    except SingularityError as exc:
        raise SingularityError(f"step {step}: {exc}") from exc


# --------------------------------------------------------------------------
# exact Ornstein-Uhlenbeck substep


@dataclass(frozen=True, eq=False)
class OUCoefficients:
    """Exact update ``y <- E y + P dW + R zeta`` of ``dy = -F y dt + L dW`` over ``dt``.

    ``dW`` is the Brownian increment over the step and ``zeta`` an independent
    standard normal; ``P dW + R zeta`` has the exact covariance
    ``int_0^dt exp(-F s) L L^T exp(-F^T s) ds`` and the exact correlation with
    ``dW``.
    """

    decay: np.ndarray
    drive: np.ndarray
    resid: np.ndarray
    cov: np.ndarray


def ou_coefficients(friction, noise, dt):
    f = linalg.as_square(friction, "friction")
    lam = np.asarray(noise, dtype=float)
    n = f.shape[0]
    q = lam @ lam.T
    if linalg.is_symmetric(f, 1e-13):
        w, u = np.linalg.eigh(0.5 * (f + f.T))
        if w[0] <= 0.0:
            raise StabilityError(f"friction is not positive definite (min eigenvalue {w[0]:.3g})")
        decay = (u * np.exp(-w * dt)) @ u.T
        phi = (u * (-np.expm1(-w * dt) / w)) @ u.T
        s = w[:, None] + w[None, :]
        cov = u @ ((u.T @ q @ u) * (-np.expm1(-s * dt) / s)) @ u.T
    else:
        re = linalg.eigenvalues(f).real
        if re.min() <= 0.0:
            raise StabilityError(f"friction is not positive-stable (min real eigenvalue part {re.min():.3g})")
        decay = linalg.expm(-f * dt)
        phi = np.linalg.solve(f, np.eye(n) - decay)
        # F S + S F^T = Q - E Q E^T
        cov = linalg.solve_lyapunov(-f, q - decay @ q @ decay.T)
    cov = 0.5 * (cov + cov.T)
    drive = phi @ lam / dt
    resid_cov = cov - dt * drive @ drive.T
    resid = linalg.psd_factor(resid_cov)
    return OUCoefficients(decay=decay, drive=drive, resid=resid, cov=cov)


def _o_noise(ou, noise, dt, n_steps):
    """Premixed O-step noise ``P dW + R zeta`` for a block of steps."""
    dw = noise.brownian(dt, n_steps)
    zeta = noise.auxiliary(n_steps)
    return dw @ ou.drive.T + zeta @ ou.resid.T


def _baoab_run(x, y, potential, ou, dt, c_force, c_vel, spec, noise):
    """Shared BAOAB loop; force ``-c_force grad V``, position velocity ``c_vel y``."""
    hf = 0.5 * dt * c_force
    hv = 0.5 * dt * c_vel
    decay_t = ou.decay.T
    rec = _Recorder(spec, x, y)
    g = _grad_at(potential, x, 0)
    step = 0
    while step < spec.n_steps:
        nb = min(BLOCK, spec.n_steps - step)
        xi = _o_noise(ou, noise, dt, nb)
        for k in range(nb):
            y = y - hf * g
            x = x + hv * y
            y = y @ decay_t + xi[k]
            x = x + hv * y
            step += 1
            g = _grad_at(potential, x, step)
            y = y - hf * g
            if step % spec.thin == 0:
                rec.put(x, y)
        _finite_or_raise(step, x, y)
    return rec.trajectory(noise)


# --------------------------------------------------------------------------
# public integrators


def baoab_step(state, system, potential, dt, noise):
    """One B-A-O-A-B step of the controlled dynamics.

    The O part is the exact OU flow of ``dy = -(gamma - sigma B^T) y dt + sigma dW``.
    """
    spec = IntegratorSpec("baoab_controlled", dt, 1)
    traj = simulate_controlled(state, system, potential, spec, noise)
    return PhaseState(traj.x[-1], traj.y[-1])


def simulate_controlled(init, system, potential, spec, noise):
    """Iterate BAOAB for the controlled Langevin equation."""
    if spec.scheme != "baoab_controlled":
        raise DomainError(f"simulate_controlled needs scheme 'baoab_controlled', got {spec.scheme!r}")
    if not isinstance(system, TwoTemperatureSystem):
        raise DomainError("system must be a TwoTemperatureSystem")
    n = system.n
    if potential.n != n:
        raise DimensionError(f"potential has dimension {potential.n}, system {n}")
    x = _check_state(init.x, n, noise.batch_shape, "x")
    y = _check_state(init.y, n, noise.batch_shape, "y")
    ou = ou_coefficients(system.effective_friction, system.sigma, spec.dt)
    return _baoab_run(x, y, potential, ou, spec.dt, 1.0, 1.0, spec, noise)


def max_scaled_dt(gamma, eps):
    """Largest admissible step for the eps-scaled dynamics."""
    return eps * eps / (10.0 * np.linalg.norm(np.atleast_2d(gamma), 2))


def simulate_scaled(init, potential, gamma, noise_matrix, eps, regime, spec, noise):
    """BAOAB for the time-rescaled dynamics with temperature ratio ``1/eps``.

    ``fixed_sim_temp``: friction ``gamma/eps^2``, noise ``sigma/sqrt(eps)``
    (``noise_matrix`` is sigma with ``beta_bar sigma sigma^T = 2 gamma``).
    ``fixed_target_temp``: same friction, noise ``varsigma/eps``
    (``noise_matrix`` is varsigma with ``beta varsigma varsigma^T = 2 gamma``).
    In both cases positions move with ``y/eps`` and the force is ``-grad V/eps``.
    """
    if spec.scheme != "scaled_underdamped":
        raise DomainError(f"simulate_scaled needs scheme 'scaled_underdamped', got {spec.scheme!r}")
    if regime not in REGIMES:
        raise DomainError(f"regime must be one of {REGIMES}, got {regime!r}")
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    gamma = linalg.as_square(gamma, "gamma")
    n = gamma.shape[0]
    dt_max = max_scaled_dt(gamma, eps)
    if spec.dt > dt_max * (1.0 + 1e-9):
        raise StabilityError(
            f"dt={spec.dt:.6g} does not resolve the fast scale at eps={eps}; "
            f"use dt <= eps^2/(10 ||gamma||) = {dt_max:.6g}"
        )
    if potential.n != n:
        raise DimensionError(f"potential has dimension {potential.n}, gamma {n}")
    lam = linalg.as_square(noise_matrix, "noise_matrix")
    lam = lam / math.sqrt(eps) if regime == "fixed_sim_temp" else lam / eps
    x = _check_state(init.x, n, noise.batch_shape, "x")
    y = _check_state(init.y, n, noise.batch_shape, "y")
    ou = ou_coefficients(gamma / eps**2, lam, spec.dt)
    return _baoab_run(x, y, potential, ou, spec.dt, 1.0 / eps, 1.0 / eps, spec, noise)


def euler_maruyama_overdamped(init, potential, gamma, varsigma, spec, noise):
    """Euler-Maruyama for ``gamma dX = -grad V(X) dt + varsigma dW``."""
    if spec.scheme != "euler_maruyama_overdamped":
        raise DomainError(f"needs scheme 'euler_maruyama_overdamped', got {spec.scheme!r}")
    gamma = linalg.as_square(gamma, "gamma")
    n = gamma.shape[0]
    if potential.n != n:
        raise DimensionError(f"potential has dimension {potential.n}, gamma {n}")
    ginv = np.linalg.inv(gamma)
    drift_t = ginv.T
    diff_t = (ginv @ linalg.as_square(varsigma, "varsigma")).T
    x = _check_state(init, n, noise.batch_shape, "x")
    dt = spec.dt
    rec = _Recorder(spec, x, None)
    step = 0
    while step < spec.n_steps:
        nb = min(BLOCK, spec.n_steps - step)
        kick = noise.brownian(dt, nb) @ diff_t
        for k in range(nb):
            x = x - dt * (_grad_at(potential, x, step) @ drift_t) + kick[k]
            step += 1
            if step % spec.thin == 0:
                rec.put(x, None)
        _finite_or_raise(step, x)
    return rec.trajectory(noise)


def rk4_gradient_flow(init, potential, gamma, spec):
    """Classical RK4 for ``dx/dt = -gamma^{-1} grad V(x)``."""
    if spec.scheme != "rk4_gradient_flow":
        raise DomainError(f"needs scheme 'rk4_gradient_flow', got {spec.scheme!r}")
    gamma = linalg.as_square(gamma, "gamma")
    n = gamma.shape[0]
    if potential.n != n:
        raise DimensionError(f"potential has dimension {potential.n}, gamma {n}")
    ginv_t = np.linalg.inv(gamma).T
    x = np.asarray(init, dtype=float)
    if x.shape[-1:] != (n,):
        raise DimensionError(f"init has shape {x.shape}, expected (..., {n})")
    dt = spec.dt
    rec = _Recorder(spec, x, None)

    def rhs(z, step):
        return -(_grad_at(potential, z, step) @ ginv_t)

    for step in range(1, spec.n_steps + 1):
        k1 = rhs(x, step - 1)
        k2 = rhs(x + 0.5 * dt * k1, step - 1)
        k3 = rhs(x + 0.5 * dt * k2, step - 1)
        k4 = rhs(x + dt * k3, step - 1)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % spec.thin == 0:
            rec.put(x, None)
            _finite_or_raise(step, x)
    return rec.trajectory(None)
