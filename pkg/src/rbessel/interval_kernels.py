r"""Diagonal heat kernels of the unit interval.

.. math::
    p^N(t, x, x) = 1 + \sum_{n\ge1} 2 e^{-n^2\pi^2 t}\cos^2(n\pi x), \qquad
    p^D(t, x, x) = \sum_{n\ge1} 2 e^{-n^2\pi^2 t}\sin^2(n\pi x).

Their sum is the constant :math:`C_t = 1 + \sum_{n\ge1} 2e^{-n^2\pi^2 t}`.
Series are truncated at ``K`` terms with ``K`` chosen from the bound
``2 sum_{n>K} e^{-n^2 pi^2 t} <= 2 e^{-K^2 pi^2 t} / (1 - e^{-pi^2 t})``.
"""

import math
from dataclasses import dataclass

import numpy as np

from rbessel.errors import DomainError

MIN_T = 0.01
TAIL_TOL = 1e-14


def tail_bound(t, K):
    q = math.pi**2 * t
    return 2.0 * math.exp(-K * K * q) / -math.expm1(-q)


def truncation(t, tol=TAIL_TOL):
    """Smallest ``K`` whose tail bound is below ``tol``."""
    _check_t(t)
    K = 1
    while tail_bound(t, K) >= tol:
        K += 1
    return K


def _check_t(t):
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if t < MIN_T:
        raise DomainError(f"t={t} is below {MIN_T}; the series converges too slowly there")


@dataclass(frozen=True)
class SeriesKernel:
    t: float
    K: int
    boundary: str = "neumann"

    def __post_init__(self):
        _check_t(self.t)
        if self.boundary not in ("neumann", "dirichlet"):
            raise DomainError(f"boundary must be 'neumann' or 'dirichlet', got {self.boundary!r}")
        if self.K < 1 or tail_bound(self.t, self.K) >= TAIL_TOL:
            raise DomainError(f"K={self.K} leaves a tail above {TAIL_TOL:g} at t={self.t}")

    @classmethod
    def auto(cls, t, boundary="neumann"):
        return cls(t, truncation(t), boundary)

    def _weights(self):
        n = np.arange(1, self.K + 1)
        return n, 2.0 * np.exp(-(n**2) * math.pi**2 * self.t)

    def diag(self, x):
        x = np.asarray(x, dtype=float)
        n, w = self._weights()
        angle = np.multiply.outer(x, n) * math.pi
        if self.boundary == "neumann":
            return 1.0 + (w * np.cos(angle) ** 2).sum(axis=-1)
        return (w * np.sin(angle) ** 2).sum(axis=-1)

    def diag_derivative(self, x):
        """Term-wise x-derivative of :meth:`diag`."""
        x = np.asarray(x, dtype=float)
        n, w = self._weights()
        angle = np.multiply.outer(x, n) * math.pi
        cs = 2.0 * n * math.pi * np.cos(angle) * np.sin(angle)
        sign = -1.0 if self.boundary == "neumann" else 1.0
        return sign * (w * cs).sum(axis=-1)


def _kernel(t, K, boundary):
    return SeriesKernel(t, truncation(t) if K is None else K, boundary)


def _check_x(x):
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise DomainError("x must lie in [0, 1]")
    return arr


def neumann_diag(t, x, K=None):
    out = _kernel(t, K, "neumann").diag(_check_x(x))
    return float(out) if out.ndim == 0 else out


def dirichlet_diag(t, x, K=None):
    out = _kernel(t, K, "dirichlet").diag(_check_x(x))
    return float(out) if out.ndim == 0 else out


def c_t(t, K=None):
    _, w = _kernel(t, K, "neumann")._weights()
    return 1.0 + float(w.sum())


@dataclass
class DerivativeReport:
    t: float
    K: int
    x: np.ndarray
    d_neumann: np.ndarray
    d_dirichlet: np.ndarray
    fd_neumann: np.ndarray
    fd_dirichlet: np.ndarray
    identity_tol: float
    fd_tol: float

    @property
    def identity_error(self):
        return float(np.max(np.abs(self.d_neumann + self.d_dirichlet), initial=0.0))

    @property
    def fd_error(self):
        return float(max(np.max(np.abs(self.d_neumann - self.fd_neumann), initial=0.0),
                         np.max(np.abs(self.d_dirichlet - self.fd_dirichlet), initial=0.0)))

    @property
    def passed(self):
        return self.identity_error <= self.identity_tol and self.fd_error <= self.fd_tol


def derivative_relation_check(t, x, K=None, h=1e-5, identity_tol=1e-12, fd_tol=1e-6):
    """Compare the analytic x-derivatives of both diagonals with each other
    (they must cancel) and with central differences of step ``h``."""
    x = _check_x(np.atleast_1d(x))
    if np.any((x - h <= 0) | (x + h >= 1)):
        raise DomainError("grid must be interior to (0, 1)")
    neu, dir_ = _kernel(t, K, "neumann"), _kernel(t, K, "dirichlet")
    fd = lambda k: (k.diag(x + h) - k.diag(x - h)) / (2 * h)
    return DerivativeReport(
        t, neu.K, x,
        neu.diag_derivative(x), dir_.diag_derivative(x),
        fd(neu), fd(dir_),
        identity_tol, fd_tol,
    )


@dataclass
class IdentityReport:
    t: float
    x: np.ndarray
    neumann: np.ndarray
    dirichlet: np.ndarray
    constant: float
    tol: float

    @property
    def max_error(self):
        return float(np.max(np.abs(self.neumann + self.dirichlet - self.constant)))

    @property
    def passed(self):
        return self.max_error < self.tol


def sum_identity_check(t, x, K=None, tol=1e-12):
    """``p^N + p^D`` against ``C_t`` on a grid."""
    x = _check_x(np.atleast_1d(x))
    return IdentityReport(t, x, np.atleast_1d(neumann_diag(t, x, K)),
                          np.atleast_1d(dirichlet_diag(t, x, K)), c_t(t, K), tol)
