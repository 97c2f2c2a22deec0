"""Small dense linear algebra: spectra, matrix functions, Lyapunov solves.

Everything here operates on real ``float64`` arrays of modest size (phase
space dimension up to ~100). Robustness is preferred over speed.
"""

import numpy as np
import scipy.linalg

from .errors import (
    DefinitenessError,
    DimensionError,
    NumericalError,
    SingularityError,
    StabilityError,
    ValidationError,
)

# Kronecker-vectorised Lyapunov solves are used up to this dimension; above it
# the n^2 x n^2 system gets too large and Bartels-Stewart takes over.
KRONECKER_MAX_DIM = 30


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-d float array (scalars become 1x1)."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-d, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def as_square(a, name="matrix"):
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DimensionError(f"{name} must be square and non-empty, got shape {m.shape}")
    return m


def is_symmetric(a, tol=1e-12):
    a = np.asarray(a, dtype=float)
    scale = max(1.0, np.linalg.norm(a))
    return np.linalg.norm(a - a.T) <= tol * scale


def eigenvalues(a):
    """All eigenvalues of a real square matrix, with multiplicity.

    LAPACK ``geev`` (Hessenberg reduction + shifted QR) underneath. Values are
    ordered by decreasing real part, conjugate pairs adjacent.
    """
    m = as_square(a)
    try:
        lam = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:  # geev reports non-convergence this way
        raise NumericalError(f"eigenvalue iteration did not converge: {exc}") from exc
    lam = lam.astype(complex)
    order = np.lexsort((-lam.imag, -lam.real))
    return lam[order]


def spectral_abscissa(a):
    """Largest real part over the spectrum of ``a``."""
    return float(np.max(eigenvalues(a).real))


def expm(a):
    """Matrix exponential (scaling-and-squaring Pade)."""
    m = as_square(a)
    with np.errstate(over="raise", invalid="raise"):
        try:
            e = scipy.linalg.expm(m)
        except FloatingPointError as exc:
            raise NumericalError(f"matrix exponential overflowed (norm {np.linalg.norm(m):.3g})") from exc
    if not np.all(np.isfinite(e)):
        raise NumericalError(f"matrix exponential overflowed (norm {np.linalg.norm(m):.3g})")
    return e


def solve_lyapunov(a, q):
    """Solve ``a X + X a^T + q = 0`` for symmetric ``X``.

    ``a`` must be Hurwitz so the solution is unique. Small problems are solved
    directly through the Kronecker form ``(I kron a + a kron I) vec X = -vec q``.
    """
    a = as_square(a, "a")
    q = as_square(q, "q")
    n = a.shape[0]
    if q.shape != a.shape:
        raise DimensionError(f"q has shape {q.shape}, expected {a.shape}")
    if not is_symmetric(q, 1e-10):
        raise ValidationError("q must be symmetric")
    q = 0.5 * (q + q.T)
    abscissa = spectral_abscissa(a)
    if abscissa >= 0.0:
        raise StabilityError(f"a is not Hurwitz (spectral abscissa {abscissa:.6g})")

    if n <= KRONECKER_MAX_DIM:
        eye = np.eye(n)
        op = np.kron(eye, a) + np.kron(a, eye)
        try:
            # column-major vec to match the kron ordering above
            vec = np.linalg.solve(op, -q.reshape(-1, order="F"))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular Kronecker system: {exc}") from exc
        x = vec.reshape(n, n, order="F")
    else:
        x = scipy.linalg.solve_continuous_lyapunov(a, -q)
    x = 0.5 * (x + x.T)

    resid = np.linalg.norm(a @ x + x @ a.T + q)
    if not np.isfinite(resid) or resid > 1e-8 * (np.linalg.norm(q) + 1.0) * max(1.0, np.linalg.norm(x)):
        raise NumericalError(f"Lyapunov solve inaccurate (residual {resid:.3g})")
    return x


def sqrtm_spd(s):
    """Symmetric square root of a symmetric positive-definite matrix."""
    s = as_square(s)
    if not is_symmetric(s, 1e-10):
        raise DefinitenessError("matrix is not symmetric")
    w, v = np.linalg.eigh(0.5 * (s + s.T))
    if w[-1] <= 0.0 or w[0] <= 1e-12 * w[-1]:
        raise DefinitenessError(f"matrix is not positive definite (eigenvalues in [{w[0]:.3g}, {w[-1]:.3g}])")
    r = (v * np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)


def psd_factor(s):
    """A matrix ``L`` with ``L L^T = s`` for symmetric positive semi-definite ``s``.

    Small negative eigenvalues from roundoff are clipped to zero.
    """
    s = as_square(s)
    w, v = np.linalg.eigh(0.5 * (s + s.T))
    floor = -1e-10 * max(1.0, abs(w[-1]))
    if w[0] < floor:
        raise DefinitenessError(f"matrix is not positive semi-definite (min eigenvalue {w[0]:.3g})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def check_invertible(a, name="matrix", cond_max=1e12):
    a = as_square(a, name)
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > cond_max:
        raise SingularityError(f"{name} is singular or ill-conditioned (cond {cond:.3g})")
    return a
