"""Deterministic frozen flow ``phi(t, x)`` and its Ornstein-Uhlenbeck transform."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import ChamberError, UsageError
from .model import Kind, RootSystem, _frozen_args, chamber_contains, frozen_field
from .numerics import integrate_ode
from .polyroots import special_start

OU_LAMBDA_EPS = 1e-12


def norm_growth_rate(rs: RootSystem, nu=None) -> float:
    """``d/dt |phi(t, x)|^2``, which is constant along every orbit."""
    n = rs.n
    if rs.kind is Kind.A:
        return n * (n - 1.0)
    if rs.kind is Kind.B:
        return 2.0 * n * (n + nu - 1.0)
    return 2.0 * n * (n - 1.0)


@dataclass(frozen=True)
class FlowSolution:
    rs: RootSystem
    nu: float | None
    x0: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    _spline: CubicHermiteSpline = field(repr=False, compare=False)

    def __call__(self, t):
        """Cubic Hermite interpolation between stored states."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.t_grid[0]) or np.any(t_arr > self.t_grid[-1]):
            raise UsageError(f"t outside the solved range [0, {self.t_grid[-1]}]")
        return self._spline(t_arr)

    def to_csv(self, path) -> None:
        write_series_csv(path, self.t_grid, self.values, prefix="phi")


def write_series_csv(path, t, values, prefix):
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["t"] + [f"{prefix}_{i + 1}" for i in range(values.shape[1])])
        for ti, row in zip(t, values):
            w.writerow([f"{ti:.17g}"] + [f"{v:.17g}" for v in row])


def _check_start(rs, nu, x0):
    x0 = _frozen_args(rs, nu, x0)
    if not chamber_contains(rs, x0, strict=True):
        raise ChamberError(f"flow start {x0} is on the boundary of the {rs.kind.value}-chamber")
    return x0


def evolve_phi(rs: RootSystem, nu, x0, t_grid, tol: float = 1e-10) -> FlowSolution:
    """Integrate ``dx/dt = H(x)`` from an interior start.

    The type-D face ``x_N = 0`` is interior to the D-chamber and allowed.
    """
    x0 = _check_start(rs, nu, x0)
    t_grid = np.asarray(t_grid, dtype=float)
    kind = rs.kind

    def rhs(_t, x):
        return frozen_field(kind, x, nu)

    def interior(x):
        return chamber_contains(rs, x, strict=True)

    values = integrate_ode(rhs, x0, t_grid, tol=tol, domain=interior)
    derivs = frozen_field(kind, values, nu)
    if t_grid.size > 1:
        spline = CubicHermiteSpline(t_grid, values, derivs, axis=0)
    else:
        spline = lambda t: np.broadcast_to(values[0], np.shape(t) + values[0].shape)  # noqa: E731
    for a in (x0, t_grid, values, derivs):
        a.setflags(write=False)
    return FlowSolution(rs, nu, x0, t_grid, values, derivs, spline)


def _growth_factor(rs):
    return 2.0 if rs.kind is Kind.A else 1.0


def phi_special(rs: RootSystem, nu, c: float, t):
    """Closed form at the special start ``c v``: ``sqrt(2t + c^2) v`` (A) or ``sqrt(t + c^2) v`` (B, D).

    ``t`` may be a scalar or an array; the result has shape ``t.shape + (N,)``.
    """
    if not c > 0:
        raise UsageError("c must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise UsageError("t must be nonnegative")
    v = special_start(rs, nu).vector
    return np.sqrt(_growth_factor(rs) * t + c * c)[..., None] * v


def ou_clock(lam: float, t):
    """``(exp(2 lam t) - 1) / (2 lam)``, the plain-flow time reached by the OU flow at ``t``."""
    t = np.asarray(t, dtype=float)
    if abs(lam) < OU_LAMBDA_EPS:
        return t + lam * t * t
    return np.expm1(2.0 * lam * t) / (2.0 * lam)


def ou_inner_time(lam: float, t):
    """``(1 - exp(-2 lam t)) / (2 lam)`` with the small-``lam`` Taylor fallback."""
    t = np.asarray(t, dtype=float)
    if abs(lam) < OU_LAMBDA_EPS:
        return t - lam * t * t
    return -np.expm1(-2.0 * lam * t) / (2.0 * lam)


def phi_ou(rs: RootSystem, nu, lam: float, x0, t, tol: float = 1e-10):
    """Solution of ``dx/dt = H(x) - lam x`` from ``x0``.

    Evaluates ``phi(inner(t), e^{-lam t} x0)``; since ``H`` is homogeneous of
    degree -1 this equals ``e^{-lam t} phi(clock(t), x0)``, so one plain flow
    from ``x0`` serves every requested time.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise UsageError("t must be nonnegative")
    flat = np.atleast_1d(t).ravel()
    clock = np.atleast_1d(ou_clock(lam, flat))
    grid = np.unique(np.concatenate([[0.0], clock]))
    sol = evolve_phi(rs, nu, x0, grid, tol=tol)
    pos = np.searchsorted(grid, clock)
    vals = sol.values[pos] * np.exp(-lam * flat)[:, None]
    return vals.reshape(t.shape + (rs.n,))


def phi_ou_special(rs: RootSystem, nu, lam: float, c: float, t):
    """Closed-form OU flow from the special start ``c v``."""
    t = np.asarray(t, dtype=float)
    return np.exp(-lam * t)[..., None] * phi_special(rs, nu, c, ou_clock(lam, t))
