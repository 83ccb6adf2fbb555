"""Shared numerical kernels: symmetric spectral calculus, an adaptive
Dormand-Prince integrator, and counter-based random streams."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IntegrationError, UsageError

SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class SymEig:
    eigenvalues: np.ndarray  # ascending
    basis: np.ndarray  # columns are eigenvectors

    def apply(self, f) -> np.ndarray:
        """Functional calculus ``U f(D) U^T``."""
        vals = f(self.eigenvalues)
        out = (self.basis * vals) @ self.basis.T
        return 0.5 * (out + out.T)


def _check_symmetric(m):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise UsageError(f"expected a square matrix, got shape {m.shape}")
    scale = max(np.abs(m).max(), 1e-300) if m.size else 1.0
    if m.size and np.abs(m - m.T).max() > SYMMETRY_RTOL * scale:
        raise UsageError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def sym_eig(m) -> SymEig:
    m = _check_symmetric(m)
    w, v = np.linalg.eigh(m)
    return SymEig(w, v)


def expm_sym(m) -> np.ndarray:
    return sym_eig(m).apply(np.exp)


# -- Dormand-Prince 5(4) -------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dp_step(f, t, y, h, k1):
    k = [k1]
    for s in range(1, 7):
        ys = y + h * sum(a * kk for a, kk in zip(_A[s], k))
        k.append(np.asarray(f(t + _C[s] * h, ys), dtype=float))
    y_new = y + h * sum(b * kk for b, kk in zip(_B5, k) if b)
    err = h * sum(e * kk for e, kk in zip(_E, k))
    return y_new, err, k[6]


def integrate_ode(
    f: Callable[[float, np.ndarray], np.ndarray],
    x0,
    t_grid,
    tol: float = 1e-9,
    domain: Callable[[np.ndarray], bool] | None = None,
    h_init: float | None = None,
    max_steps: int = 1_000_000,
) -> np.ndarray:
    """Integrate ``dx/dt = f(t, x)`` and return the states at ``t_grid``.

    Steps are clipped so that every grid time is hit exactly. The error test is
    ``|err_i| <= tol * (1 + max(|y_i|, |y_new_i|))``. A step whose result fails
    ``domain`` is rejected and retried with half the step size.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] != 0.0:
        raise UsageError("t_grid must be a nonempty vector starting at 0")
    if np.any(np.diff(t_grid) <= 0):
        raise UsageError("t_grid must be strictly increasing")
    if not tol > 0:
        raise UsageError("tol must be positive")
    y = np.array(x0, dtype=float)
    out = np.empty((t_grid.size,) + y.shape)
    out[0] = y
    if t_grid.size == 1:
        return out

    t = 0.0
    k1 = np.asarray(f(t, y), dtype=float)
    if h_init is None:
        scale = tol * (1.0 + np.abs(y))
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2))
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h = min(h, t_grid[-1])
    else:
        h = h_init
    steps = 0
    for idx in range(1, t_grid.size):
        t_end = t_grid[idx]
        while t < t_end:
            h_min = 1e-14 * max(1.0, abs(t))
            if h < h_min:
                raise IntegrationError(f"step size underflow at t={t!r}", last_time=t)
            steps += 1
            if steps > max_steps:
                raise IntegrationError(f"too many steps (>{max_steps})", last_time=t)
            last = t + h >= t_end * (1 - 1e-15)
            h_eff = t_end - t if last else h
            y_new, err, k7 = _dp_step(f, t, y, h_eff, k1)
            if not np.all(np.isfinite(y_new)) or (domain is not None and not domain(y_new)):
                h = 0.5 * h_eff
                continue
            sc = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
            en = np.sqrt(np.mean((err / sc) ** 2))
            if en <= 1.0:
                t = t_end if last else t + h_eff
                y, k1 = y_new, k7
            factor = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            if en > 1.0:
                factor = min(factor, 1.0)
            h = h_eff * factor if (en > 1.0 or not last) else max(h, h_eff * factor)
        out[idx] = y
    return out


# -- randomness -------------------------------------------------------------------


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of a reproducible Gaussian stream.

    ``generator(*tags)`` returns a fresh Philox generator keyed by
    ``(seed, stream_id, *tags)``; equal descriptors always produce equal draws.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < 2**64:
                raise UsageError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    def generator(self, *tags: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),) + tuple(int(t) for t in tags))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def gaussian_increments(r: RngStream, count: int, dt: float) -> np.ndarray:
    """``count`` i.i.d. N(0, dt) draws from stream ``r``."""
    if count < 0:
        raise UsageError("count must be nonnegative")
    if not dt > 0:
        raise UsageError("dt must be positive")
    return r.generator().standard_normal(count) * np.sqrt(dt)


def bridge_split(db: np.ndarray, m: int, h: float, gen: np.random.Generator) -> np.ndarray:
    """Split a Brownian increment ``db`` over time ``h`` into ``m`` conditional pieces.

    Returns shape ``(m,) + db.shape``; the pieces sum to ``db`` exactly up to rounding.
    """
    if m == 1:
        return db[None].copy()
    xi = gen.standard_normal((m,) + np.shape(db)) * np.sqrt(h / m)
    return xi - xi.mean(axis=0) + db / m
