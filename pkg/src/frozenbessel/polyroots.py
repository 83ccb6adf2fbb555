"""Zeros of Hermite and Laguerre polynomials and the special starting vectors.

Zeros come from the eigenvalues of the symmetric tridiagonal Jacobi matrix of
the three-term recurrence (Golub-Welsch), followed by one Newton step that
evaluates the orthonormal recurrence, which cannot overflow for moderate n.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import UsageError
from .model import Kind, RootSystem


@dataclass(frozen=True)
class SpecialStart:
    """Start vector ``v`` for which the frozen flow is ``sqrt(a t + c^2) v`` from ``c v``."""

    rs: RootSystem
    nu: float | None
    vector: np.ndarray


def _check_order(n):
    if int(n) != n or n < 1:
        raise UsageError(f"polynomial degree must be a positive integer, got {n!r}")
    return int(n)


def _hermite_ratio(n, x):
    # orthonormal recurrence for weight exp(-x^2): sqrt(j+1)/sqrt2 p_{j+1} = x p_j - sqrt(j)/sqrt2 p_{j-1}
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    for j in range(n):
        p_next = (x * p - np.sqrt(j / 2.0) * p_prev) / np.sqrt((j + 1) / 2.0)
        p_prev, p = p, p_next
    # H_n' = 2n H_{n-1}; in orthonormal scaling p_n' = sqrt(2n) p_{n-1}
    return p / (np.sqrt(2.0 * n) * p_prev)


def _laguerre_ratio(n, alpha, x):
    # monic-free form of L_{j+1} = ((2j+1+a-x) L_j - (j+a) L_{j-1})/(j+1), rescaled each step
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    for j in range(n):
        p_next = ((2 * j + 1 + alpha - x) * p - (j + alpha) * p_prev) / (j + 1)
        scale = np.maximum(np.abs(p_next), 1.0)
        p_prev, p = p / scale, p_next / scale
    # x L_n' = n L_n - (n+a) L_{n-1}
    deriv = (n * p - (n + alpha) * p_prev) / x
    return p / deriv


def hermite_zeros(n) -> np.ndarray:
    """Zeros of the physicists' Hermite polynomial ``H_n``, descending."""
    n = _check_order(n)
    if n == 1:
        return np.zeros(1)
    off = np.sqrt(np.arange(1, n) / 2.0)
    z = eigh_tridiagonal(np.zeros(n), off, eigvals_only=True)
    z = z - _hermite_ratio(n, z)
    z = np.sort(z)[::-1]
    # the zero set is symmetric; enforce it exactly
    z = 0.5 * (z - z[::-1])
    return z


def laguerre_zeros(n, alpha) -> np.ndarray:
    """Zeros of the generalized Laguerre polynomial ``L_n^(alpha)``, descending."""
    n = _check_order(n)
    if not alpha > -1:
        raise UsageError(f"Laguerre parameter must exceed -1, got {alpha!r}")
    diag = 2.0 * np.arange(n) + alpha + 1.0
    k = np.arange(1, n)
    off = np.sqrt(k * (k + alpha))
    z = eigh_tridiagonal(diag, off, eigvals_only=True)
    z = z - _laguerre_ratio(n, alpha, z)
    return np.sort(z)[::-1]


def special_start(rs: RootSystem, nu=None) -> SpecialStart:
    """Hermite (A), Laguerre (B) or shifted Laguerre (D) start vector.

    ``A``: zeros of ``H_N``.
    ``B``: ``v_i^2 = 2 z_i`` with ``z`` the zeros of ``L_N^(nu-1)``.
    ``D``: ``v_i^2 = 2 z_i`` from the zeros of ``L_{N-1}^(1)``, then ``v_N = 0``
    (``L_N^(-1)(x) = -(x/N) L_{N-1}^(1)(x)``).
    """
    n = rs.n
    if rs.kind is Kind.A:
        v = hermite_zeros(n)
    elif rs.kind is Kind.B:
        if nu is None or not nu > 0:
            raise UsageError(
                "type-B special start needs nu > 0; for k1 = 0 use the type-D start "
                "with vanishing last coordinate and fold it"
            )
        v = np.sqrt(2.0 * laguerre_zeros(n, nu - 1.0))
    else:
        v = np.append(np.sqrt(2.0 * laguerre_zeros(n - 1, 1.0)), 0.0)
    v.setflags(write=False)
    return SpecialStart(rs, nu if rs.kind is Kind.B else None, v)
