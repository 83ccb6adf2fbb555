"""Fluctuation matrices, the Gaussian limit process ``W`` and its covariance.

``W`` solves ``dW = G(t) dB + M(t) W dt`` with ``W_0 = 0``, where ``M`` is the
Jacobian of the frozen drift along the flow and ``G`` is the identity except
for the power variant.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import UsageError
from .flow import FlowSolution, ou_clock, phi_ou_special, phi_special
from .model import Kind, RootSystem, _frozen_args
from .numerics import RngStream, integrate_ode, sym_eig
from .polyroots import special_start

SUBSTEP_BOUND = 0.1
ZERO_COORD_TOL = 1e-14


def fluct_matrix(rs: RootSystem, nu, phi_t) -> np.ndarray:
    """Linearization matrix of the frozen drift at the flow value ``phi_t``."""
    phi = _frozen_args(rs, nu, phi_t)
    n = rs.n
    mirrored = rs.kind is not Kind.A
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            minus = 1.0 / (phi[i] - phi[j]) ** 2
            plus = 1.0 / (phi[i] + phi[j]) ** 2 if mirrored else 0.0
            out[i, j] = minus - plus
            out[i, i] -= minus + plus
        if rs.kind is Kind.B and nu:
            out[i, i] -= nu / phi[i] ** 2
    return out


def fluct_matrix_power(p: int, phi_t):
    """Drift and diffusion for the limit of ``sqrt(k)((X/sqrt k)^p - phi^p)`` (type A).

    With ``V = diag(p phi^{p-1}) W`` one gets ``dV = G dB + M V dt`` where
    ``G = diag(p phi^{p-1})`` and::

        M_ij = phi_i^{p-1} / (phi_j^{p-1} (phi_i - phi_j)^2)            (i != j)
        M_ii = sum_{j != i} ((p-2) phi_i - (p-1) phi_j) / (phi_i (phi_i - phi_j)^2)

    For ``p >= 2`` a coordinate with ``phi_i = 0`` has ``V_i = 0``; its row and
    column are set to zero, which leaves the process unchanged.
    """
    if int(p) != p or p < 1:
        raise UsageError(f"power must be a positive integer, got {p!r}")
    p = int(p)
    phi = np.asarray(phi_t, dtype=float)
    rs = RootSystem(Kind.A, phi.shape[-1])
    plain = fluct_matrix(rs, None, phi)
    diffusion = np.diag(p * phi ** (p - 1))
    if p == 1:
        return plain, diffusion
    n = rs.n
    zero = np.abs(phi) < ZERO_COORD_TOL * (1.0 + np.abs(phi).max())
    drift = np.zeros((n, n))
    for i in range(n):
        if zero[i]:
            continue
        for j in range(n):
            if j == i:
                continue
            d2 = (phi[i] - phi[j]) ** 2
            drift[i, i] += ((p - 2) * phi[i] - (p - 1) * phi[j]) / (phi[i] * d2)
            if not zero[j]:
                drift[i, j] = phi[i] ** (p - 1) / (phi[j] ** (p - 1) * d2)
    return drift, diffusion


def fluct_matrix_ou(lam: float, x, t, tol: float = 1e-10) -> np.ndarray:
    """Type-A matrix along the OU flow, minus ``lam`` on the diagonal."""
    from .flow import phi_ou

    x = np.asarray(x, dtype=float)
    rs = RootSystem(Kind.A, x.size)
    phi = phi_ou(rs, None, lam, x, t, tol=tol)
    return fluct_matrix(rs, None, phi) - lam * np.eye(rs.n)


def special_matrix(rs: RootSystem, nu=None) -> np.ndarray:
    """The fixed matrix at the special start (Hermite for A, Laguerre for B and D)."""
    v = special_start(rs, nu).vector
    return fluct_matrix(rs, nu if rs.kind is Kind.B else None, v)


def spectral_matrix(rs: RootSystem, nu=None) -> np.ndarray:
    """``E - A`` for type A and ``E - 2A`` for types B and D."""
    a = special_matrix(rs, nu)
    factor = 1.0 if rs.kind is Kind.A else 2.0
    return np.eye(rs.n) - factor * a


# -- model -------------------------------------------------------------------


@dataclass(frozen=True)
class FluctuationModel:
    """Time-dependent linear SDE coefficients along a fixed flow.

    ``phi_at`` maps time to the flow value (closed form or interpolated);
    ``variant`` is ``"plain"``, ``"power"`` (with ``p``) or ``"ou"`` (with ``lam``).
    """

    rs: RootSystem
    nu: float | None
    phi_at: Callable[[float], np.ndarray] = field(repr=False)
    variant: str = "plain"
    p: int = 1
    lam: float = 0.0

    def __post_init__(self):
        if self.variant not in ("plain", "power", "ou"):
            raise UsageError(f"unknown variant {self.variant!r}")
        if self.variant != "plain" and self.rs.kind is not Kind.A:
            raise UsageError(f"the {self.variant} variant is defined for type A only")

    @classmethod
    def from_flow(cls, flow: FlowSolution, variant="plain", p=1):
        return cls(flow.rs, flow.nu, flow, variant=variant, p=p)

    @classmethod
    def special(cls, rs: RootSystem, nu, c: float, variant="plain", p=1, lam=0.0):
        """Model along the closed-form flow from the special start ``c v``."""
        nu = nu if rs.kind is Kind.B else None
        if variant == "ou":
            return cls(rs, nu, lambda t: phi_ou_special(rs, nu, lam, c, t), variant="ou", lam=lam)
        return cls(rs, nu, lambda t: phi_special(rs, nu, c, t), variant=variant, p=p)

    @classmethod
    def ou(cls, lam: float, x0, t_max: float, n_grid: int = 2001, tol: float = 1e-11):
        """Type-A OU model from a general interior start, interpolating one plain flow."""
        from .flow import evolve_phi

        x0 = np.asarray(x0, dtype=float)
        rs = RootSystem(Kind.A, x0.size)
        clock_max = float(ou_clock(lam, t_max))
        flow = evolve_phi(rs, None, x0, np.linspace(0.0, clock_max, n_grid), tol=tol)

        def phi_at(t):
            return np.exp(-lam * t) * flow(ou_clock(lam, t))

        return cls(rs, None, phi_at, variant="ou", lam=lam)

    def matrix_at(self, t) -> np.ndarray:
        phi = np.asarray(self.phi_at(t), dtype=float)
        if self.variant == "power":
            return fluct_matrix_power(self.p, phi)[0]
        m = fluct_matrix(self.rs, self.nu, phi)
        if self.variant == "ou":
            m = m - self.lam * np.eye(self.rs.n)
        return m

    def diffusion_at(self, t) -> np.ndarray:
        if self.variant == "power":
            phi = np.asarray(self.phi_at(t), dtype=float)
            return np.diag(self.p * phi ** (self.p - 1))
        return np.eye(self.rs.n)


# -- simulation of W ---------------------------------------------------------


def _substeps(fm: FluctuationModel, t0: float, t1: float):
    """Deterministic sub-step lengths with ``|M(t)|_inf * h <= SUBSTEP_BOUND``."""
    steps = []
    t = t0
    while t < t1 - 1e-15 * max(1.0, t1):
        norm = np.abs(fm.matrix_at(t)).sum(axis=1).max()
        h = t1 - t if norm == 0 else min(t1 - t, SUBSTEP_BOUND / norm)
        # avoid a sliver at the end of the interval
        if t1 - t - h < 1e-3 * h:
            h = t1 - t
        steps.append(h)
        t = t1 if h == t1 - t else t + h
    return steps


def simulate_W(fm: FluctuationModel, t_grid, rng: RngStream, increments=None) -> np.ndarray:
    """Euler-Maruyama path of ``W`` sampled on ``t_grid``.

    ``increments`` (shape ``(len(t_grid)-1, N)``, or with a leading path axis)
    are the Brownian increments over the grid intervals; when absent they are
    drawn from ``rng``. Sub-steps refine the given increments by Brownian
    bridge sampling from ``rng``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise UsageError("t_grid must be increasing and start at 0")
    n = fm.rs.n
    dts = np.diff(t_grid)
    gen = rng.generator()
    if increments is None:
        increments = gen.standard_normal((dts.size, n)) * np.sqrt(dts)[:, None]
    increments = np.asarray(increments, dtype=float)
    batched = increments.ndim == 3
    if increments.shape[-2:] != (dts.size, n):
        raise UsageError(f"increments must have trailing shape {(dts.size, n)}, got {increments.shape}")
    lead = increments.shape[:-2]
    bridge = rng.generator(1)
    w = np.zeros(lead + (n,))
    out = np.zeros(lead + (t_grid.size, n))
    for i, (t0, t1) in enumerate(zip(t_grid[:-1], t_grid[1:])):
        db_rem = increments[..., i, :]
        tau = t1 - t0
        t = t0
        for h in _substeps(fm, t0, t1):
            if h >= tau * (1 - 1e-12):
                db = db_rem
            else:
                xi = bridge.standard_normal(db_rem.shape)
                db = db_rem * (h / tau) + np.sqrt(h * (tau - h) / tau) * xi
            m = fm.matrix_at(t)
            g = fm.diffusion_at(t)
            w = w + h * (w @ m.T) + db @ g.T
            db_rem = db_rem - db
            tau -= h
            t += h
        out[..., i + 1, :] = w
    return out if batched else out.reshape(t_grid.size, n)


# -- covariance ---------------------------------------------------------------


def eigenvalue_a(k: int, t, c):
    """``((2t + c^2)^k - c^{2k}) / (2k (2t + c^2)^{k-1})``."""
    s = 2.0 * t + c * c
    return (s**k - c ** (2 * k)) / (2.0 * k * s ** (k - 1))


def eigenvalue_b(k: int, t, c):
    """``((t + c^2)^{2k} - c^{4k}) / (2k (t + c^2)^{2k-1})``."""
    s = t + c * c
    return (s ** (2 * k) - c ** (4 * k)) / (2.0 * k * s ** (2 * k - 1))


def _decay_weight(mu, q):
    """``(1 - q^mu) / mu`` with the ``mu -> 0`` limit ``-log q``."""
    mu = np.asarray(mu, dtype=float)
    log_q = np.log(q)
    small = np.abs(mu * log_q) < 1e-8
    safe = np.where(small, 1.0, mu)
    return np.where(small, -log_q * (1.0 + 0.5 * mu * log_q), -np.expm1(mu * log_q) / safe)


@dataclass(frozen=True)
class ClosedFormCovariance:
    rs: RootSystem
    nu: float | None
    c: float
    lam: float | None
    t: float
    sigma: np.ndarray
    eigenvalues: np.ndarray  # ascending

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "root_system": str(self.rs),
                "nu": self.nu,
                "c": self.c,
                "lambda": self.lam,
                "t": self.t,
                "sigma": [[float(v) for v in row] for row in self.sigma],
                "eigenvalues": [float(v) for v in self.eigenvalues],
            },
            indent=2,
        )

    def to_csv(self, path) -> None:
        write_matrix_csv(path, self.sigma)


def write_matrix_csv(path, m):
    m = np.asarray(m)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow([f"col_{j + 1}" for j in range(m.shape[1])])
        for row in m:
            w.writerow([f"{v:.17g}" for v in row])


def covariance_closed_form(rs: RootSystem, nu, c: float, t: float, lam: float | None = None) -> ClosedFormCovariance:
    """Covariance of ``W_t`` at the special start ``c v`` via spectral calculus.

    A: ``(t + c^2/2) f(E - A)`` with ``q = c^2 / (2t + c^2)``.
    B, D: ``(t + c^2) f(E - 2A)`` with ``q = c^2 / (t + c^2)``.
    OU (type A, rate ``lam``): prefactor ``(1 + e^{-2 lam t}(lam c^2 - 1)) / (2 lam)``
    and ``q = lam c^2 / (e^{2 lam t} - 1 + lam c^2)``.
    In every case ``f(mu) = (1 - q^mu) / mu``.
    """
    if not c > 0:
        raise UsageError("c must be positive")
    if not t >= 0:
        raise UsageError("t must be nonnegative")
    nu = nu if rs.kind is Kind.B else None
    eig = sym_eig(spectral_matrix(rs, nu))
    c2 = c * c
    if lam is not None and rs.kind is not Kind.A:
        raise UsageError("the OU covariance is defined for type A only")
    if lam is not None and abs(lam) >= 1e-12:
        # prefactor = (1 - e^{-2 lam t}) / (2 lam) + (c^2 / 2) e^{-2 lam t}
        pref = -np.expm1(-2.0 * lam * t) / (2.0 * lam) + 0.5 * c2 * np.exp(-2.0 * lam * t)
        q = c2 / (np.expm1(2.0 * lam * t) / lam + c2)
    elif rs.kind is Kind.A:
        pref = t + 0.5 * c2
        q = c2 / (2.0 * t + c2)
    else:
        pref = t + c2
        q = c2 / (t + c2)
    if t == 0:
        sigma = np.zeros((rs.n, rs.n))
    else:
        sigma = pref * eig.apply(lambda mu: _decay_weight(mu, q))
    vals = np.linalg.eigvalsh(sigma)
    return ClosedFormCovariance(rs, nu, float(c), lam, float(t), sigma, vals)


def covariance_numeric(fm: FluctuationModel, t, tol: float = 1e-11):
    """Covariance from the Lyapunov ODE ``S' = M S + S M^T + G G^T``, ``S(0) = 0``.

    ``t`` may be a scalar or an increasing array of times.
    """
    n = fm.rs.n
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0) or np.any(np.diff(t_arr) <= 0):
        raise UsageError("t must be nonnegative and increasing")
    grid = t_arr if t_arr[0] == 0 else np.concatenate([[0.0], t_arr])

    def rhs(s, y):
        sig = y.reshape(n, n)
        m = fm.matrix_at(s)
        g = fm.diffusion_at(s)
        d = m @ sig
        return (d + d.T + g @ g.T).ravel()

    ys = integrate_ode(rhs, np.zeros(n * n), grid, tol=tol).reshape(-1, n, n)
    ys = 0.5 * (ys + np.swapaxes(ys, -1, -2))
    if t_arr[0] != 0:
        ys = ys[1:]
    return ys[0] if np.ndim(t) == 0 else ys
