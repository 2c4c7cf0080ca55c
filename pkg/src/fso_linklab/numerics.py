"""Numerical kernels: Gauss-Hermite rules, Q-functions, symmetric matrix roots.

The Gauss-Hermite machinery here is deliberately small. Nodes come from the
Golub-Welsch eigenproblem, are polished with Newton steps on the orthonormal
Hermite recurrence, and the weights use the Christoffel form so that tail
weights keep full *relative* precision (the adaptive rule in
:func:`shifted_hermite_expectation` multiplies them by ``exp(t**2)``).
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, linalg, special

from .errors import IntegrationError, InvalidMatrixError

SQRT_PI = math.sqrt(math.pi)
MAX_ORDER = 128


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QuadratureRule:
    """Physicists' Gauss-Hermite rule for the weight ``exp(-x**2)``."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def log_weights(self):
        return np.log(self.weights)


def _orthonormal_hermite(n, x):
    """Return (q_n(x), q_{n-1}(x)) for Hermite polynomials orthonormal under exp(-x^2)."""
    q_prev = np.zeros_like(x)
    q = np.full_like(x, math.pi ** -0.25)
    for k in range(n):
        q_next = (x * q - math.sqrt(k / 2.0) * q_prev) / math.sqrt((k + 1) / 2.0)
        q_prev, q = q, q_next
    return q, q_prev


@lru_cache(maxsize=None)
def gauss_hermite(order: int) -> QuadratureRule:
    """Gauss-Hermite nodes and weights of the given order (1 <= order <= 128)."""
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise ValueError(f"quadrature order must be an integer, got {order!r}")
    order = int(order)
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"quadrature order must be in [1, {MAX_ORDER}], got {order}")
    if order == 1:
        return QuadratureRule(1, _frozen([0.0]), _frozen([SQRT_PI]))

    off = np.sqrt(np.arange(1, order) / 2.0)
    x = linalg.eigh_tridiagonal(np.zeros(order), off, eigvals_only=True)
    for _ in range(3):
        qn, qn1 = _orthonormal_hermite(order, x)
        x = x - qn / (math.sqrt(2.0 * order) * qn1)

    # Christoffel weights: 1 / sum_k q_k(x)^2
    acc = np.zeros_like(x)
    q_prev = np.zeros_like(x)
    q = np.full_like(x, math.pi ** -0.25)
    for k in range(order):
        acc += q * q
        q_next = (x * q - math.sqrt(k / 2.0) * q_prev) / math.sqrt((k + 1) / 2.0)
        q_prev, q = q, q_next
    w = 1.0 / acc

    x = np.sort(x)
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if order % 2:
        x[order // 2] = 0.0
    return QuadratureRule(order, _frozen(x), _frozen(w))


@lru_cache(maxsize=32)
def tensor_grid(order: int, dim: int):
    """All ``order**dim`` node tuples of the tensor rule and their summed log-weights."""
    rule = gauss_hermite(order)
    idx = np.array(list(itertools.product(range(order), repeat=dim)), dtype=np.intp)
    nodes = _frozen(rule.nodes[idx])
    logw = _frozen(rule.log_weights[idx].sum(axis=1))
    return nodes, logw


def shifted_hermite_expectation(log_g, order, dim, center=None, scale=None):
    """E[g(t)] under the density ``exp(-|t|^2) / pi^(dim/2)`` by a tensor Gauss-Hermite rule.

    ``log_g`` maps an ``(n, dim)`` array of points to ``log g``. With ``center``
    and ``scale`` (a lower-triangular factor) the nodes are placed at
    ``t = center + scale @ u``; the defaults give the plain rule.
    """
    u, logw = tensor_grid(order, dim)
    if center is None and scale is None:
        return float(np.exp(special.logsumexp(logw + log_g(u)) - 0.5 * dim * math.log(math.pi)))
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    scale = np.eye(dim) if scale is None else np.asarray(scale, dtype=float)
    t = u @ scale.T + center
    logdet = float(np.sum(np.log(np.abs(np.diag(scale)))))
    terms = logw + np.sum(u * u, axis=1) - np.sum(t * t, axis=1) + log_g(t)
    return float(np.exp(special.logsumexp(terms) + logdet - 0.5 * dim * math.log(math.pi)))


def _check_nan(x):
    if np.any(np.isnan(x)):
        raise ValueError("Q-function argument is NaN")


def q_exact(x):
    """Gaussian tail probability Q(x) = erfc(x / sqrt 2) / 2."""
    x = np.asarray(x, dtype=float)
    _check_nan(x)
    out = 0.5 * special.erfc(x / math.sqrt(2.0))
    return out if out.ndim else float(out)


def q_approx(x):
    """Two-exponential Q approximation (1/12) e^{-x^2/2} + (1/4) e^{-2x^2/3}, for x >= 0."""
    x = np.asarray(x, dtype=float)
    _check_nan(x)
    if np.any(x < 0):
        raise ValueError("q_approx is only defined for nonnegative arguments")
    x2 = x * x
    out = np.exp(-x2 / 2.0) / 12.0 + np.exp(-2.0 * x2 / 3.0) / 4.0
    return out if out.ndim else float(out)


def q_approx_sq(x2):
    """:func:`q_approx` evaluated from the squared argument."""
    x2 = np.asarray(x2, dtype=float)
    out = np.exp(-x2 / 2.0) / 12.0 + np.exp(-2.0 * x2 / 3.0) / 4.0
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CovarianceFactor:
    """Symmetric square root of a correlation matrix."""

    dimension: int
    matrix: np.ndarray


def sym_matrix_sqrt(gamma, sym_tol=1e-10, psd_tol=1e-10) -> CovarianceFactor:
    """Symmetric PSD square root via eigendecomposition; tiny negative eigenvalues clamp to 0."""
    g = np.atleast_2d(np.asarray(gamma, dtype=float))
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise InvalidMatrixError(f"expected a square matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InvalidMatrixError("matrix has non-finite entries")
    if np.max(np.abs(g - g.T), initial=0.0) > sym_tol:
        raise InvalidMatrixError("matrix is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (g + g.T))
    if evals.min(initial=0.0) < -psd_tol:
        raise InvalidMatrixError(f"matrix is indefinite (min eigenvalue {evals.min():.3e})")
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
    root = 0.5 * (root + root.T)
    return CovarianceFactor(g.shape[0], _frozen(root))


def lognormal_expectation_oracle(integrand, sigma_sq, epsabs=1e-12, epsrel=1e-10):
    """E[f(I)] for I = exp(2X), X ~ Normal(-sigma_sq, sigma_sq), by adaptive quadrature.

    Test oracle only; independent of the Gauss-Hermite path.
    """
    if sigma_sq < 0:
        raise ValueError("sigma_sq must be nonnegative")
    if sigma_sq == 0:
        return float(integrand(1.0))
    s = math.sqrt(sigma_sq)

    def density_term(z):
        return float(integrand(math.exp(2.0 * (-sigma_sq + s * z)))) * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    # locate the bulk of the integrand so quad does not miss a narrow peak
    zs = np.linspace(-38.0, 38.0, 7601)
    vals = np.array([density_term(z) for z in zs])
    if not np.any(vals > 0):
        return 0.0
    peak = float(zs[np.argmax(vals)])
    above = zs[vals > vals.max() * 1e-30]
    lo, hi = float(above.min()) - 1.0, float(above.max()) + 1.0
    pts = sorted({min(max(peak, lo + 1e-6), hi - 1e-6)})
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(density_term, lo, hi, points=pts,
                                    epsabs=epsabs, epsrel=epsrel, limit=1000)
        except integrate.IntegrationWarning as exc:
            raise IntegrationError(str(exc)) from exc
    return float(val)
