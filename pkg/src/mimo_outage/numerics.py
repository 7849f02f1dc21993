"""Special functions and small Hermitian linear algebra.

The regularized incomplete gamma functions follow the usual split: a power
series for ``x < a + 1`` and a Lentz continued fraction otherwise. Each
branch yields one of ``P`` or ``Q`` directly, and the complement is formed
by subtraction only when it is the larger of the two, so both tails keep
full relative accuracy.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DomainError",
    "SingularMatrixError",
    "regularized_lower_gamma",
    "regularized_upper_gamma",
    "inverse_regularized_upper_gamma",
    "hermitian_solve",
    "psd_factor",
    "sample_correlated_complex_gaussian",
    "complex_normal",
]

_EPS = np.finfo(float).eps
_TINY = 1e-300
_MAX_ITER = 10_000


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class SingularMatrixError(np.linalg.LinAlgError):
    """Matrix is not numerically positive definite."""


def _check_gamma_args(a, x):
    if not (math.isfinite(a) and math.isfinite(x)):
        raise DomainError(f"non-finite argument: a={a!r}, x={x!r}")
    if a <= 0:
        raise DomainError(f"shape must be positive, got a={a!r}")
    if x < 0:
        raise DomainError(f"x must be nonnegative, got x={x!r}")


def _log_prefactor(a, x):
    # log(x^a e^-x / Gamma(a))
    return a * math.log(x) - x - math.lgamma(a)


def _series_p(a, x):
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(_log_prefactor(a, x))
    raise ArithmeticError(f"gamma series did not converge for a={a}, x={x}")


def _continued_fraction_q(a, x):
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(_log_prefactor(a, x)) * h
    raise ArithmeticError(f"gamma continued fraction did not converge for a={a}, x={x}")


def _gamma_pq(a, x):
    """Return ``(P(a, x), Q(a, x))`` with the smaller one computed directly."""
    a = float(a)
    x = float(x)
    _check_gamma_args(a, x)
    if x == 0.0:
        return 0.0, 1.0
    if x < a + 1.0:
        p = _series_p(a, x)
        return p, 1.0 - p
    q = _continued_fraction_q(a, x)
    return 1.0 - q, q


def _gamma_pq_array(a, x):
    """Vectorized ``(P, Q)`` for scalar ``a`` and an array of ``x``."""
    a = float(a)
    x = np.asarray(x, dtype=float)
    if not (math.isfinite(a) and a > 0):
        raise DomainError(f"shape must be positive, got a={a!r}")
    if not np.all(np.isfinite(x)):
        raise DomainError("x must be finite")
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    P = np.zeros(x.shape)
    Q = np.ones(x.shape)
    lgam = math.lgamma(a)

    ser = (x > 0) & (x < a + 1.0)
    if ser.any():
        xs = x[ser]
        ap = a
        term = np.full(xs.shape, 1.0 / a)
        total = term.copy()
        live = np.arange(xs.size)
        for _ in range(_MAX_ITER):
            ap += 1.0
            term[live] *= xs[live] / ap
            total[live] += term[live]
            live = live[np.abs(term[live]) >= np.abs(total[live]) * _EPS]
            if live.size == 0:
                break
        else:
            raise ArithmeticError("gamma series did not converge")
        p = total * np.exp(a * np.log(xs) - xs - lgam)
        P[ser], Q[ser] = p, 1.0 - p

    cf = x >= a + 1.0
    if cf.any():
        xc = x[cf]
        b = xc + 1.0 - a
        c = np.full(xc.shape, 1.0 / _TINY)
        d = 1.0 / b
        h = d.copy()
        live = np.arange(xc.size)
        for i in range(1, _MAX_ITER):
            an = -i * (i - a)
            b[live] += 2.0
            dl = an * d[live] + b[live]
            dl = np.where(np.abs(dl) < _TINY, _TINY, dl)
            cl = b[live] + an / c[live]
            cl = np.where(np.abs(cl) < _TINY, _TINY, cl)
            dl = 1.0 / dl
            delta = dl * cl
            d[live], c[live] = dl, cl
            h[live] *= delta
            live = live[np.abs(delta - 1.0) >= _EPS]
            if live.size == 0:
                break
        else:
            raise ArithmeticError("gamma continued fraction did not converge")
        q = np.exp(a * np.log(xc) - xc - lgam) * h
        P[cf], Q[cf] = 1.0 - q, q
    return P, Q


def regularized_upper_gamma(a, x):
    """Regularized upper incomplete gamma ``Q(a, x) = Gamma(a, x) / Gamma(a)``.

    ``x`` may be an array, in which case the evaluation is vectorized.

    Raises
    ------
    DomainError
        If ``a <= 0``, ``x < 0`` or either argument is not finite.
    """
    if np.ndim(x):
        return _gamma_pq_array(a, x)[1]
    return _gamma_pq(a, x)[1]


def regularized_lower_gamma(a, x):
    """Regularized lower incomplete gamma ``P(a, x) = 1 - Q(a, x)``."""
    if np.ndim(x):
        return _gamma_pq_array(a, x)[0]
    return _gamma_pq(a, x)[0]


def _gamma_density(a, x):
    # d/dx P(a, x)
    if x <= 0.0:
        return 0.0
    return math.exp((a - 1.0) * math.log(x) - x - math.lgamma(a))


def inverse_regularized_upper_gamma(a, q):
    """Solve ``Q(a, x) = q`` for ``x > 0``.

    Safeguarded Newton iteration in ``log x`` inside a bisection bracket.
    For ``q > 1/2`` the equivalent ``P(a, x) = 1 - q`` is solved instead so
    that small lower-tail probabilities keep their relative precision.
    """
    a = float(a)
    q = float(q)
    if not (math.isfinite(a) and a > 0):
        raise DomainError(f"shape must be positive, got a={a!r}")
    if not (0.0 < q < 1.0):
        raise DomainError(f"q must lie in the open interval (0, 1), got {q!r}")

    use_lower = q > 0.5
    target = 1.0 - q if use_lower else q

    def resid(t):
        p, qq = _gamma_pq(a, math.exp(t))
        return (p if use_lower else qq) - target

    # resid is increasing in t for P, decreasing for Q; orient it increasing.
    sign = 1.0 if use_lower else -1.0

    t = math.log(max(a, 1e-3))
    lo = hi = t
    f_lo = f_hi = sign * resid(t)
    step = 1.0
    while f_lo > 0:
        hi, f_hi = lo, f_lo
        lo -= step
        step *= 2.0
        if lo < -745.0:
            raise ArithmeticError(f"cannot bracket Q^-1({a}, {q})")
        f_lo = sign * resid(lo)
    step = 1.0
    while f_hi < 0:
        lo, f_lo = hi, f_hi
        hi += step
        step *= 2.0
        if hi > 709.0:
            raise ArithmeticError(f"cannot bracket Q^-1({a}, {q})")
        f_hi = sign * resid(hi)

    t = 0.5 * (lo + hi)
    for _ in range(200):
        f = sign * resid(t)
        if f == 0.0:
            return math.exp(t)
        if f < 0:
            lo = t
        else:
            hi = t
        x = math.exp(t)
        slope = x * _gamma_density(a, x)
        t_new = t - f / slope if slope > 0 else 0.5 * (lo + hi)
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 4 * _EPS * max(1.0, abs(t)):
            return math.exp(t_new)
        t = t_new
        if hi - lo <= 4 * _EPS * max(1.0, abs(lo), abs(hi)):
            return math.exp(0.5 * (lo + hi))
    return math.exp(t)


def hermitian_solve(A, b):
    """Solve ``A x = b`` for Hermitian positive definite ``A``.

    ``A`` may carry leading batch dimensions ``(..., N, N)``; ``b`` is either
    ``(..., N)`` or ``(..., N, K)`` for several right-hand sides. The system is
    solved through a Cholesky factor, never an explicit inverse.

    Raises
    ------
    SingularMatrixError
        If ``A`` is not numerically positive definite.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    vector_rhs = b.ndim == A.ndim - 1
    rhs = b[..., None] if vector_rhs else b
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("matrix is not numerically positive definite") from exc
    diag = np.abs(np.diagonal(L, axis1=-2, axis2=-1))
    if not np.all(diag > 0) or np.any(diag.min(axis=-1) <= np.sqrt(_EPS) * diag.max(axis=-1)):
        raise SingularMatrixError("matrix is numerically singular")
    z = np.linalg.solve(L, rhs)
    x = np.linalg.solve(np.conj(np.swapaxes(L, -1, -2)), z)
    return x[..., 0] if vector_rhs else x


def psd_factor(R, tol=1e-10):
    """Return ``L`` with ``L @ L^H == R`` for Hermitian positive semidefinite ``R``.

    Uses an eigendecomposition and clamps small negative eigenvalues to zero,
    which tolerates rank-deficient correlation matrices. Eigenvalues below
    ``-tol * trace`` are treated as a genuine violation. Batched over leading
    dimensions.
    """
    R = np.asarray(R)
    R = 0.5 * (R + np.conj(np.swapaxes(R, -1, -2)))
    w, U = np.linalg.eigh(R)
    trace = np.real(np.trace(R, axis1=-2, axis2=-1))
    floor = -tol * np.maximum(trace, 0.0)
    if np.any(w < floor[..., None] - _TINY):
        raise DomainError("matrix is not positive semidefinite")
    w = np.clip(w, 0.0, None)
    return U * np.sqrt(w)[..., None, :]


def complex_normal(rng, shape):
    """i.i.d. circularly-symmetric complex Gaussians with unit variance."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    z = rng.standard_normal(shape + (2,))
    z *= math.sqrt(0.5)
    return z.view(np.complex128)[..., 0]


def sample_correlated_complex_gaussian(R, rng, size=None):
    """Draw from ``CN(0, R)``.

    Parameters
    ----------
    R : array_like, shape (N, N)
        Hermitian PSD covariance.
    rng : numpy.random.Generator
        Random stream; consumed, never stored.
    size : int, optional
        Number of independent draws. ``None`` returns a single vector of
        shape ``(N,)``; otherwise the result has shape ``(size, N)``.
    """
    L = psd_factor(R)
    n = L.shape[-1]
    if size is None:
        return L @ complex_normal(rng, n)
    return complex_normal(rng, (size, n)) @ L.T
